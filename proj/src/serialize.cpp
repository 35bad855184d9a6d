#include "loopnorm/serialize.hpp"

#include <algorithm>

namespace loopnorm {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw FormatError(where + ": " + msg, 0);
}

const Json& field(const Json& j, std::string_view key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) fail(where, "missing field '" + std::string(key) + "'");
  return *it;
}

std::int64_t as_int(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  return j.get<std::int64_t>();
}

std::string as_string(const Json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

const Json& as_array(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array");
  return j;
}

Json bound_to_json(const Loop& l) {
  if (l.simple_upper()) return to_json(l.upper[0].expr);
  Json terms = Json::array();
  for (const auto& t : l.upper) {
    Json e = to_json(t.expr);
    e["div"] = t.divisor;
    terms.push_back(std::move(e));
  }
  return Json{{"min", std::move(terms)}};
}

BoundTerm bound_term_from_json(const Json& j, const std::string& where) {
  expect_fields(j, {"terms", "const", "div"}, where);
  BoundTerm t;
  Json plain = j;
  plain.erase("div");
  t.expr = affine_from_json(plain, where);
  if (j.contains("div")) {
    t.divisor = as_int(j["div"], where + ".div");
    if (t.divisor < 1) fail(where + ".div", "divisor must be >= 1");
  }
  return t;
}

std::vector<BoundTerm> upper_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  if (!j.contains("min")) return {bound_term_from_json(j, where)};
  expect_fields(j, {"min"}, where);
  std::vector<BoundTerm> out;
  const Json& arr = as_array(j["min"], where + ".min");
  for (std::size_t k = 0; k < arr.size(); ++k)
    out.push_back(bound_term_from_json(arr[k], where + ".min[" + std::to_string(k) + "]"));
  if (out.empty()) fail(where, "empty min bound");
  return out;
}

Access access_from_json(const Json& j, const std::string& where, AccessKind default_kind) {
  expect_fields(j, {"array", "index", "kind"}, where);
  Access a;
  a.array = as_string(field(j, "array", where), where + ".array");
  const Json& idx = as_array(field(j, "index", where), where + ".index");
  for (std::size_t k = 0; k < idx.size(); ++k)
    a.indices.push_back(affine_from_json(idx[k], where + ".index[" + std::to_string(k) + "]"));
  a.kind = default_kind;
  if (j.contains("kind")) {
    std::string kind = as_string(j["kind"], where + ".kind");
    if (kind == "read") a.kind = AccessKind::Read;
    else if (kind == "write") a.kind = AccessKind::Write;
    else fail(where + ".kind", "unknown access kind '" + kind + "'");
  }
  return a;
}

Expr::Op op_from_symbol(const std::string& s, const std::string& where) {
  using Op = Expr::Op;
  static const std::pair<const char*, Op> table[] = {
      {"+", Op::Add}, {"-", Op::Sub}, {"*", Op::Mul}, {"/", Op::Div},
      {"min", Op::Min}, {"max", Op::Max}, {"neg", Op::Neg}};
  for (const auto& [sym, op] : table)
    if (s == sym) return op;
  fail(where, "unknown operator '" + s + "'");
}

Expr expr_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an expression object");
  if (j.contains("int")) {
    expect_fields(j, {"int"}, where);
    return Expr::integer(as_int(j["int"], where + ".int"));
  }
  if (j.contains("float")) {
    expect_fields(j, {"float"}, where);
    if (!j["float"].is_number()) fail(where + ".float", "expected a number");
    return Expr::floating(j["float"].get<double>());
  }
  if (j.contains("read")) {
    expect_fields(j, {"read"}, where);
    std::int64_t r = as_int(j["read"], where + ".read");
    if (r < 0) fail(where + ".read", "negative read position");
    return Expr::read_of(static_cast<std::size_t>(r));
  }
  if (j.contains("index")) {
    expect_fields(j, {"index"}, where);
    return Expr::index_of(affine_from_json(j["index"], where + ".index"));
  }
  expect_fields(j, {"op", "args"}, where);
  Expr e;
  e.op = op_from_symbol(as_string(field(j, "op", where), where + ".op"), where + ".op");
  const Json& args = as_array(field(j, "args", where), where + ".args");
  for (std::size_t k = 0; k < args.size(); ++k)
    e.args.push_back(expr_from_json(args[k], where + ".args[" + std::to_string(k) + "]"));
  return e;
}

}  // namespace

void expect_fields(const Json& j, std::initializer_list<std::string_view> allowed,
                   const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      fail(where, "unknown field '" + key + "'");
  }
}

Json to_json(const AffineExpr& e) {
  Json terms = Json::object();
  for (const auto& [name, c] : e.terms()) terms[name] = c;
  return Json{{"terms", std::move(terms)}, {"const", e.constant()}};
}

Json to_json(const Access& a) {
  Json idx = Json::array();
  for (const auto& ix : a.indices) idx.push_back(to_json(ix));
  return Json{{"array", a.array}, {"index", std::move(idx)}};
}

Json to_json(const Expr& e) {
  switch (e.op) {
    case Expr::Op::Int: return Json{{"int", e.int_value}};
    case Expr::Op::Float: return Json{{"float", e.float_value}};
    case Expr::Op::Read: return Json{{"read", e.read}};
    case Expr::Op::Index: return Json{{"index", to_json(e.index)}};
    default: break;
  }
  Json args = Json::array();
  for (const auto& a : e.args) args.push_back(to_json(a));
  return Json{{"op", op_symbol(e.op)}, {"args", std::move(args)}};
}

Json to_json(const Body& body) {
  Json out = Json::array();
  for (const auto& n : body) {
    if (n.is_computation()) {
      const auto& c = n.computation();
      Json write = to_json(c.write);
      Json reads = Json::array();
      for (const auto& r : c.reads) {
        Json rj = to_json(r);
        if (r.kind == AccessKind::Write) rj["kind"] = "write";
        reads.push_back(std::move(rj));
      }
      if (c.write.kind == AccessKind::Read) write["kind"] = "read";
      out.push_back(Json{{"comp", Json{{"id", c.id}, {"write", std::move(write)},
                                       {"reads", std::move(reads)}, {"expr", to_json(c.expr)}}}});
    } else if (n.is_call()) {
      const auto& c = n.call();
      out.push_back(Json{{"call", Json{{"idiom", c.idiom}, {"args", c.args},
                                       {"reference", to_json(c.reference)}}}});
    } else {
      const auto& l = n.loop();
      Json lj{{"iter", l.iter}, {"lo", to_json(l.lower)}, {"hi", bound_to_json(l)},
              {"body", to_json(l.body)}};
      if (l.parallel) lj["parallel"] = true;
      if (l.vectorize) lj["vectorize"] = true;
      out.push_back(Json{{"loop", std::move(lj)}});
    }
  }
  return out;
}

Json to_json(const Program& p) {
  Json params = Json::array();
  for (const auto& prm : p.params) {
    Json pj{{"name", prm.name}};
    if (prm.default_value) pj["default"] = *prm.default_value;
    params.push_back(std::move(pj));
  }
  Json arrays = Json::array();
  for (const auto& a : p.arrays) {
    Json dims = Json::array();
    for (const auto& d : a.dims) {
      if (d.is_symbolic()) dims.push_back(d.param);
      else dims.push_back(d.size);
    }
    arrays.push_back(Json{{"name", a.name}, {"dims", std::move(dims)},
                          {"kind", a.kind == ElementKind::Int ? "int" : "float"}});
  }
  return Json{{"version", kFormatVersion}, {"parameters", std::move(params)},
              {"arrays", std::move(arrays)}, {"body", to_json(p.body)}};
}

std::string serialize(const Program& p) { return to_json(p).dump(2) + "\n"; }

AffineExpr affine_from_json(const Json& j, const std::string& where) {
  expect_fields(j, {"terms", "const"}, where);
  AffineExpr e;
  if (j.contains("terms")) {
    const Json& terms = j["terms"];
    if (!terms.is_object()) fail(where + ".terms", "expected an object");
    for (const auto& [name, c] : terms.items()) e.add_term(name, as_int(c, where + ".terms." + name));
  }
  if (j.contains("const")) e.set_constant(as_int(j["const"], where + ".const"));
  return e;
}

Body body_from_json(const Json& j, const std::string& where) {
  const Json& arr = as_array(j, where);
  Body body;
  for (std::size_t k = 0; k < arr.size(); ++k) {
    std::string w = where + "[" + std::to_string(k) + "]";
    const Json& n = arr[k];
    if (!n.is_object() || n.size() != 1) fail(w, "expected exactly one of 'loop', 'comp', 'call'");
    if (n.contains("loop")) {
      const Json& lj = n["loop"];
      w += ".loop";
      expect_fields(lj, {"iter", "lo", "hi", "body", "step", "parallel", "vectorize"}, w);
      Loop l;
      l.iter = as_string(field(lj, "iter", w), w + ".iter");
      l.lower = affine_from_json(field(lj, "lo", w), w + ".lo");
      l.upper = upper_from_json(field(lj, "hi", w), w + ".hi");
      if (lj.contains("step") && as_int(lj["step"], w + ".step") != 1)
        fail(w + ".step", "only unit steps are supported");
      if (lj.contains("parallel")) l.parallel = lj["parallel"].get<bool>();
      if (lj.contains("vectorize")) l.vectorize = lj["vectorize"].get<bool>();
      l.body = body_from_json(field(lj, "body", w), w + ".body");
      body.emplace_back(std::move(l));
    } else if (n.contains("comp")) {
      const Json& cj = n["comp"];
      w += ".comp";
      expect_fields(cj, {"id", "write", "reads", "expr"}, w);
      Computation c;
      c.id = as_string(field(cj, "id", w), w + ".id");
      c.write = access_from_json(field(cj, "write", w), w + ".write", AccessKind::Write);
      const Json& reads = as_array(field(cj, "reads", w), w + ".reads");
      for (std::size_t r = 0; r < reads.size(); ++r)
        c.reads.push_back(access_from_json(reads[r], w + ".reads[" + std::to_string(r) + "]", AccessKind::Read));
      c.expr = expr_from_json(field(cj, "expr", w), w + ".expr");
      body.emplace_back(std::move(c));
    } else if (n.contains("call")) {
      const Json& cj = n["call"];
      w += ".call";
      expect_fields(cj, {"idiom", "args", "reference"}, w);
      Call c;
      c.idiom = as_string(field(cj, "idiom", w), w + ".idiom");
      for (const auto& a : as_array(field(cj, "args", w), w + ".args")) c.args.push_back(as_string(a, w + ".args"));
      c.reference = body_from_json(field(cj, "reference", w), w + ".reference");
      body.emplace_back(std::move(c));
    } else {
      fail(w, "unknown field '" + n.begin().key() + "'");
    }
  }
  return body;
}

Program program_from_json(const Json& j) {
  expect_fields(j, {"version", "parameters", "arrays", "body"}, "$");
  std::int64_t version = as_int(field(j, "version", "$"), "$.version");
  if (version != kFormatVersion) fail("$.version", "unsupported version " + std::to_string(version));
  Program p;
  const Json& params = as_array(field(j, "parameters", "$"), "$.parameters");
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::string w = "$.parameters[" + std::to_string(k) + "]";
    expect_fields(params[k], {"name", "default"}, w);
    Parameter prm;
    prm.name = as_string(field(params[k], "name", w), w + ".name");
    if (params[k].contains("default")) prm.default_value = as_int(params[k]["default"], w + ".default");
    p.params.push_back(std::move(prm));
  }
  const Json& arrays = as_array(field(j, "arrays", "$"), "$.arrays");
  for (std::size_t k = 0; k < arrays.size(); ++k) {
    std::string w = "$.arrays[" + std::to_string(k) + "]";
    expect_fields(arrays[k], {"name", "dims", "kind"}, w);
    ArrayDecl a;
    a.name = as_string(field(arrays[k], "name", w), w + ".name");
    for (const auto& d : as_array(field(arrays[k], "dims", w), w + ".dims")) {
      if (d.is_string()) a.dims.push_back(Extent::symbolic(d.get<std::string>()));
      else a.dims.push_back(Extent::concrete(as_int(d, w + ".dims")));
    }
    if (arrays[k].contains("kind")) {
      std::string kind = as_string(arrays[k]["kind"], w + ".kind");
      if (kind == "int") a.kind = ElementKind::Int;
      else if (kind == "float") a.kind = ElementKind::Float;
      else fail(w + ".kind", "unknown element kind '" + kind + "'");
    }
    p.arrays.push_back(std::move(a));
  }
  p.body = body_from_json(field(j, "body", "$"), "$.body");
  return p;
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    // the library counts bytes from 1; report a 0-based offset inside the text
    throw FormatError(e.what(), std::min<std::size_t>(e.byte ? e.byte - 1 : 0, text.size()));
  }
}

Program deserialize(std::string_view text) {
  Json j = parse_json(text);
  try {
    return program_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(e.what(), 0);
  }
}

}  // namespace loopnorm

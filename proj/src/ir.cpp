#include "loopnorm/ir.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <utility>

namespace loopnorm {

std::string SourceSpan::to_string() const {
  std::ostringstream os;
  if (!file.empty()) os << file << ":";
  os << start_line << ":" << start_col;
  if (end_line != start_line || end_col != start_col) os << "-" << end_line << ":" << end_col;
  return os.str();
}

ParseError::ParseError(const std::string& message, SourceSpan span)
    : Error(span.to_string() + ": " + message), message_(message), span_(std::move(span)) {}

FormatError::FormatError(const std::string& message, std::size_t offset)
    : Error("byte " + std::to_string(offset) + ": " + message), offset_(offset) {}

Expr Expr::integer(std::int64_t v) {
  Expr e;
  e.op = Op::Int;
  e.int_value = v;
  return e;
}

Expr Expr::floating(double v) {
  Expr e;
  e.op = Op::Float;
  e.float_value = v;
  return e;
}

Expr Expr::read_of(std::size_t position) {
  Expr e;
  e.op = Op::Read;
  e.read = position;
  return e;
}

Expr Expr::index_of(AffineExpr a) {
  Expr e;
  e.op = Op::Index;
  e.index = std::move(a);
  return e;
}

Expr Expr::unary(Op op, Expr a) {
  Expr e;
  e.op = op;
  e.args.push_back(std::move(a));
  return e;
}

Expr Expr::binary(Op op, Expr a, Expr b) {
  Expr e;
  e.op = op;
  e.args.push_back(std::move(a));
  e.args.push_back(std::move(b));
  return e;
}

const char* op_symbol(Expr::Op op) {
  switch (op) {
    case Expr::Op::Add: return "+";
    case Expr::Op::Sub: return "-";
    case Expr::Op::Mul: return "*";
    case Expr::Op::Div: return "/";
    case Expr::Op::Min: return "min";
    case Expr::Op::Max: return "max";
    case Expr::Op::Neg: return "neg";
    case Expr::Op::Int: return "int";
    case Expr::Op::Float: return "float";
    case Expr::Op::Read: return "read";
    case Expr::Op::Index: return "index";
  }
  return "?";
}

Loop Loop::make(std::string iter, AffineExpr lower, AffineExpr upper, std::vector<Node> body) {
  Loop l;
  l.iter = std::move(iter);
  l.lower = std::move(lower);
  l.upper.push_back(BoundTerm{std::move(upper), 1});
  l.body = std::move(body);
  return l;
}

bool Loop::bounds_mention(std::string_view name) const {
  if (lower.mentions(name)) return true;
  return std::any_of(upper.begin(), upper.end(),
                     [&](const BoundTerm& t) { return t.expr.mentions(name); });
}

bool Loop::operator==(const Loop& o) const {
  return iter == o.iter && lower == o.lower && upper == o.upper && body == o.body &&
         parallel == o.parallel && vectorize == o.vectorize;
}

bool Call::operator==(const Call& o) const {
  return idiom == o.idiom && args == o.args && reference == o.reference;
}

const ArrayDecl* Program::find_array(std::string_view name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

const Parameter* Program::find_param(std::string_view name) const {
  for (const auto& p : params)
    if (p.name == name) return &p;
  return nullptr;
}

std::map<std::string, std::int64_t, std::less<>> Program::default_bindings() const {
  std::map<std::string, std::int64_t, std::less<>> out;
  for (const auto& p : params)
    if (p.default_value) out[p.name] = *p.default_value;
  return out;
}

const Node& node_at(const Body& body, std::span<const std::size_t> path) {
  if (path.empty()) throw Error("node_at: empty path");
  const Body* cur = &body;
  const Node* node = nullptr;
  for (std::size_t k = 0; k < path.size(); ++k) {
    if (path[k] >= cur->size()) throw Error("node_at: path index out of range");
    node = &(*cur)[path[k]];
    if (k + 1 < path.size()) {
      if (!node->is_loop()) throw Error("node_at: path descends through a non-loop");
      cur = &node->loop().body;
    }
  }
  return *node;
}

Node& node_at(Body& body, std::span<const std::size_t> path) {
  return const_cast<Node&>(node_at(static_cast<const Body&>(body), path));
}

namespace {

void walk_computations(const Body& body, std::vector<const Loop*>& stack,
                       const std::function<void(const Computation&, std::span<const Loop* const>)>& f) {
  for (const auto& n : body) {
    if (n.is_computation()) {
      f(n.computation(), stack);
    } else if (n.is_loop()) {
      stack.push_back(&n.loop());
      walk_computations(n.loop().body, stack, f);
      stack.pop_back();
    } else {
      walk_computations(n.call().reference, stack, f);
    }
  }
}

void walk_loops(const Body& body, NodePath& path,
                const std::function<void(const Loop&, const NodePath&)>& f) {
  for (std::size_t k = 0; k < body.size(); ++k) {
    if (!body[k].is_loop()) continue;
    path.push_back(k);
    f(body[k].loop(), path);
    walk_loops(body[k].loop().body, path, f);
    path.pop_back();
  }
}

}  // namespace

void for_each_computation(
    const Body& body,
    const std::function<void(const Computation&, std::span<const Loop* const>)>& f) {
  std::vector<const Loop*> stack;
  walk_computations(body, stack, f);
}

void for_each_loop(const Body& body,
                   const std::function<void(const Loop&, const NodePath&)>& f) {
  NodePath path;
  walk_loops(body, path, f);
}

std::size_t count_computations(const Body& body) {
  std::size_t n = 0;
  for_each_computation(body, [&](const Computation&, auto) { ++n; });
  return n;
}

// ---------------------------------------------------------------------------
// validate

namespace {

class Validator {
 public:
  explicit Validator(const Program& p) : program_(p) {}

  std::vector<Diagnostic> run() {
    check_names();
    check_arrays();
    std::vector<std::string> scope;
    check_body(program_.body, "body", scope);
    return std::move(diags_);
  }

 private:
  void report(const std::string& path, const std::string& msg) { diags_.push_back({path, msg}); }

  bool is_param(std::string_view n) const { return program_.find_param(n) != nullptr; }

  void check_names() {
    std::set<std::string, std::less<>> seen;
    for (const auto& p : program_.params) {
      if (p.name.empty()) report("params", "empty parameter name");
      if (!seen.insert(p.name).second) report("params/" + p.name, "duplicate name '" + p.name + "'");
    }
    for (const auto& a : program_.arrays) {
      if (a.name.empty()) report("arrays", "empty array name");
      if (!seen.insert(a.name).second) report("arrays/" + a.name, "duplicate name '" + a.name + "'");
    }
  }

  void check_arrays() {
    for (const auto& a : program_.arrays) {
      std::string path = "arrays/" + a.name;
      if (a.dims.empty()) report(path, "array has no dimensions");
      for (const auto& d : a.dims) {
        if (d.is_symbolic()) {
          if (!is_param(d.param)) report(path, "extent references undeclared parameter '" + d.param + "'");
        } else if (d.size < 1) {
          report(path, "extent must be >= 1");
        }
      }
    }
  }

  void check_affine(const AffineExpr& e, const std::string& path, const std::vector<std::string>& scope,
                    const char* what) {
    for (const auto& [name, c] : e.terms()) {
      bool bound = std::find(scope.begin(), scope.end(), name) != scope.end() || is_param(name);
      if (!bound) report(path, std::string(what) + " references unbound variable '" + name + "'");
    }
  }

  void check_access(const Access& acc, const std::string& path, const std::vector<std::string>& scope) {
    const ArrayDecl* decl = program_.find_array(acc.array);
    if (!decl) {
      report(path, "access to undeclared array '" + acc.array + "'");
    } else if (decl->rank() != acc.indices.size()) {
      report(path, "rank mismatch: '" + acc.array + "' has rank " + std::to_string(decl->rank()) +
                       " but is indexed with " + std::to_string(acc.indices.size()) + " subscripts");
    }
    for (const auto& ix : acc.indices) check_affine(ix, path, scope, "index");
  }

  void check_expr(const Expr& e, const Computation& c, const std::string& path,
                  const std::vector<std::string>& scope) {
    using Op = Expr::Op;
    std::size_t want = 0;
    switch (e.op) {
      case Op::Int:
      case Op::Float:
        break;
      case Op::Read:
        if (e.read >= c.reads.size()) report(path, "expression leaf refers to undeclared read");
        break;
      case Op::Index:
        check_affine(e.index, path, scope, "index value");
        break;
      case Op::Neg:
        want = 1;
        break;
      default:
        want = 2;
        break;
    }
    if (e.is_leaf() ? !e.args.empty() : e.args.size() != want)
      report(path, std::string("operator '") + op_symbol(e.op) + "' has wrong arity");
    for (const auto& a : e.args) check_expr(a, c, path, scope);
  }

  void check_computation(const Computation& c, const std::string& path,
                         const std::vector<std::string>& scope) {
    if (c.id.empty()) report(path, "computation without id");
    if (!ids_.insert(c.id).second) report(path, "duplicate computation id '" + c.id + "'");
    if (c.write.kind != AccessKind::Write) report(path, "write access is not marked as a write");
    check_access(c.write, path, scope);
    for (const auto& r : c.reads) {
      if (r.kind == AccessKind::Write) report(path, "multiple writes");
      check_access(r, path, scope);
    }
    check_expr(c.expr, c, path, scope);
    std::vector<std::size_t> order;
    collect_reads(c.expr, order);
    bool in_order = order.size() == c.reads.size();
    for (std::size_t k = 0; in_order && k < order.size(); ++k) in_order = order[k] == k;
    if (!in_order) report(path, "reads must each be used once, in expression order");
  }

  static void collect_reads(const Expr& e, std::vector<std::size_t>& out) {
    if (e.op == Expr::Op::Read) out.push_back(e.read);
    for (const auto& a : e.args) collect_reads(a, out);
  }

  void check_body(const Body& body, const std::string& prefix, std::vector<std::string>& scope) {
    for (std::size_t k = 0; k < body.size(); ++k) {
      std::string path = prefix + "[" + std::to_string(k) + "]";
      const Node& n = body[k];
      if (n.is_computation()) {
        check_computation(n.computation(), path + "/comp " + n.computation().id, scope);
      } else if (n.is_call()) {
        const Call& call = n.call();
        for (const auto& a : call.args)
          if (!program_.find_array(a)) report(path, "call argument '" + a + "' is not a declared array");
        check_body(call.reference, path + "/call " + call.idiom, scope);
      } else {
        const Loop& l = n.loop();
        std::string lpath = path + "/loop " + l.iter;
        if (l.iter.empty()) report(lpath, "loop without iterator");
        if (std::find(scope.begin(), scope.end(), l.iter) != scope.end())
          report(lpath, "iterator '" + l.iter + "' shadows an enclosing iterator");
        if (is_param(l.iter) || program_.find_array(l.iter))
          report(lpath, "iterator '" + l.iter + "' collides with a parameter or array name");
        check_affine(l.lower, lpath, scope, "lower bound");
        if (l.upper.empty()) report(lpath, "loop without upper bound");
        for (const auto& t : l.upper) {
          check_affine(t.expr, lpath, scope, "upper bound");
          if (t.divisor < 1) report(lpath, "bound divisor must be >= 1");
        }
        scope.push_back(l.iter);
        check_body(l.body, lpath + "/body", scope);
        scope.pop_back();
      }
    }
  }

  const Program& program_;
  std::vector<Diagnostic> diags_;
  std::set<std::string, std::less<>> ids_;
};

}  // namespace

std::vector<Diagnostic> validate(const Program& program) { return Validator(program).run(); }

void require_valid(const Program& program) {
  auto diags = validate(program);
  if (diags.empty()) return;
  std::string msg = "invalid program:";
  for (std::size_t k = 0; k < diags.size() && k < 5; ++k)
    msg += "\n  " + diags[k].path + ": " + diags[k].message;
  throw InvalidProgram(msg);
}

// ---------------------------------------------------------------------------

std::vector<std::string> iterators_in_order(const Loop& nest) {
  std::vector<std::string> out{nest.iter};
  for_each_loop(nest.body, [&](const Loop& l, const NodePath&) { out.push_back(l.iter); });
  return out;
}

namespace {

using NameMap = std::map<std::string, std::string, std::less<>>;

class AlphaMatcher {
 public:
  AlphaMatcher(const Program& a, const Program& b) : a_(a), b_(b) {}

  bool run() {
    if (a_.params != b_.params) return false;
    if (a_.arrays.size() != b_.arrays.size()) return false;
    if (!bodies(a_.body, b_.body)) return false;
    // Unused arrays pair up positionally.
    std::vector<const ArrayDecl*> free_a, free_b;
    for (const auto& x : a_.arrays)
      if (!fwd_.contains(x.name)) free_a.push_back(&x);
    for (const auto& y : b_.arrays)
      if (!bwd_.contains(y.name)) free_b.push_back(&y);
    if (free_a.size() != free_b.size()) return false;
    for (std::size_t k = 0; k < free_a.size(); ++k)
      if (!array_pair(free_a[k]->name, free_b[k]->name)) return false;
    for (const auto& x : a_.arrays) {
      const ArrayDecl* y = b_.find_array(fwd_.at(x.name));
      if (!y || y->dims != x.dims || y->kind != x.kind) return false;
    }
    return true;
  }

 private:
  bool array_pair(const std::string& x, const std::string& y) {
    auto f = fwd_.find(x);
    auto g = bwd_.find(y);
    if (f == fwd_.end() && g == bwd_.end()) {
      fwd_[x] = y;
      bwd_[y] = x;
      return true;
    }
    return f != fwd_.end() && g != bwd_.end() && f->second == y && g->second == x;
  }

  // Innermost binding for `name` on side `side` (0 = a, 1 = b).
  const std::string* bound(const std::string& name, int side) const {
    for (auto it = scope_.rbegin(); it != scope_.rend(); ++it) {
      const auto& [x, y] = *it;
      if ((side == 0 ? x : y) == name) return side == 0 ? &y : &x;
    }
    return nullptr;
  }

  bool affine(const AffineExpr& x, const AffineExpr& y) const {
    if (x.constant() != y.constant() || x.terms().size() != y.terms().size()) return false;
    for (const auto& [name, c] : x.terms()) {
      const std::string* other = bound(name, 0);
      std::string mapped = other ? *other : name;
      if (!other && bound(name, 1)) return false;
      if (y.coeff(mapped) != c) return false;
      const std::string* back = bound(mapped, 1);
      if (other ? (!back || *back != name) : back != nullptr) return false;
    }
    return true;
  }

  bool access(const Access& x, const Access& y) {
    if (x.kind != y.kind || x.indices.size() != y.indices.size()) return false;
    if (!array_pair(x.array, y.array)) return false;
    for (std::size_t k = 0; k < x.indices.size(); ++k)
      if (!affine(x.indices[k], y.indices[k])) return false;
    return true;
  }

  bool expr(const Expr& x, const Expr& y) const {
    if (x.op != y.op || x.args.size() != y.args.size()) return false;
    switch (x.op) {
      case Expr::Op::Int: if (x.int_value != y.int_value) return false; break;
      case Expr::Op::Float: if (x.float_value != y.float_value) return false; break;
      case Expr::Op::Read: if (x.read != y.read) return false; break;
      case Expr::Op::Index: if (!affine(x.index, y.index)) return false; break;
      default: break;
    }
    for (std::size_t k = 0; k < x.args.size(); ++k)
      if (!expr(x.args[k], y.args[k])) return false;
    return true;
  }

  bool bodies(const Body& x, const Body& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t k = 0; k < x.size(); ++k)
      if (!node(x[k], y[k])) return false;
    return true;
  }

  bool node(const Node& x, const Node& y) {
    if (x.value.index() != y.value.index()) return false;
    if (x.is_computation()) {
      const auto& c = x.computation();
      const auto& d = y.computation();
      if (c.reads.size() != d.reads.size()) return false;
      if (!access(c.write, d.write)) return false;
      for (std::size_t k = 0; k < c.reads.size(); ++k)
        if (!access(c.reads[k], d.reads[k])) return false;
      return expr(c.expr, d.expr);
    }
    if (x.is_call()) {
      const auto& c = x.call();
      const auto& d = y.call();
      if (c.idiom != d.idiom || c.args.size() != d.args.size()) return false;
      for (std::size_t k = 0; k < c.args.size(); ++k)
        if (!array_pair(c.args[k], d.args[k])) return false;
      return bodies(c.reference, d.reference);
    }
    const auto& l = x.loop();
    const auto& m = y.loop();
    if (l.parallel != m.parallel || l.vectorize != m.vectorize) return false;
    if (!affine(l.lower, m.lower) || l.upper.size() != m.upper.size()) return false;
    for (std::size_t k = 0; k < l.upper.size(); ++k)
      if (l.upper[k].divisor != m.upper[k].divisor || !affine(l.upper[k].expr, m.upper[k].expr))
        return false;
    scope_.emplace_back(l.iter, m.iter);
    bool ok = bodies(l.body, m.body);
    scope_.pop_back();
    return ok;
  }

  const Program& a_;
  const Program& b_;
  NameMap fwd_, bwd_;
  std::vector<std::pair<std::string, std::string>> scope_;
};

void rename_access(Access& a, const NameMap& iters, const NameMap& arrays) {
  if (auto it = arrays.find(a.array); it != arrays.end()) a.array = it->second;
  for (auto& ix : a.indices) ix = ix.renamed(iters);
}

void rename_expr(Expr& e, const NameMap& iters) {
  if (e.op == Expr::Op::Index) e.index = e.index.renamed(iters);
  for (auto& a : e.args) rename_expr(a, iters);
}

}  // namespace

bool structurally_equal(const Program& a, const Program& b, bool rename) {
  if (!rename) return a == b;
  return AlphaMatcher(a, b).run();
}

void rename_in_body(Body& body, const NameMap& iterators, const NameMap& arrays) {
  for (auto& n : body) {
    if (n.is_computation()) {
      auto& c = n.computation();
      rename_access(c.write, iterators, arrays);
      for (auto& r : c.reads) rename_access(r, iterators, arrays);
      rename_expr(c.expr, iterators);
    } else if (n.is_call()) {
      auto& c = n.call();
      for (auto& a : c.args)
        if (auto it = arrays.find(a); it != arrays.end()) a = it->second;
      rename_in_body(c.reference, iterators, arrays);
    } else {
      auto& l = n.loop();
      if (auto it = iterators.find(l.iter); it != iterators.end()) l.iter = it->second;
      l.lower = l.lower.renamed(iterators);
      for (auto& t : l.upper) t.expr = t.expr.renamed(iterators);
      rename_in_body(l.body, iterators, arrays);
    }
  }
}

std::vector<std::string> all_names(const Program& program) {
  std::vector<std::string> out;
  for (const auto& p : program.params) out.push_back(p.name);
  for (const auto& a : program.arrays) out.push_back(a.name);
  for_each_loop(program.body, [&](const Loop& l, const NodePath&) { out.push_back(l.iter); });
  return out;
}

std::string fresh_name(const std::string& stem, std::vector<std::string>& taken) {
  auto used = [&](const std::string& n) { return std::find(taken.begin(), taken.end(), n) != taken.end(); };
  std::string name = stem;
  for (int k = 1; used(name); ++k) name = stem + "_" + std::to_string(k);
  taken.push_back(name);
  return name;
}

}  // namespace loopnorm

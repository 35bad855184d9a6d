#include "loopnorm/canonical.hpp"

#include <algorithm>

#include "loopnorm/frontend.hpp"
#include "loopnorm/hash.hpp"

namespace loopnorm {

const char* to_string(KeyMode m) { return m == KeyMode::Exact ? "exact" : "shape-insensitive"; }

KeyMode key_mode_from_string(std::string_view s) {
  if (s == "exact") return KeyMode::Exact;
  if (s == "shape-insensitive") return KeyMode::ShapeInsensitive;
  throw Error("unknown key mode '" + std::string(s) + "'");
}

namespace {

using NameMap = std::map<std::string, std::string, std::less<>>;

class Canonicalizer {
 public:
  Canonicalizer(const Program& p, KeyMode mode) : program_(p), mode_(mode) {}

  CanonicalForm run(const Body& body, bool whole_program) {
    Body renamed = body;
    NameMap scope;
    rename_body(renamed, scope);
    if (whole_program) {
      for (const auto& a : program_.arrays) use_array(a.name);
      for (const auto& p : program_.params) use_param(p.name);
    }

    CanonicalForm out;
    std::string text;
    for (const auto& name : param_order_) {
      const Parameter* p = program_.find_param(name);
      text += "param " + params_.at(name);
      if (mode_ == KeyMode::Exact && p->default_value) text += " = " + std::to_string(*p->default_value);
      text += ";\n";
    }
    for (const auto& name : array_order_) {
      const ArrayDecl* a = program_.find_array(name);
      std::string decl = arrays_.at(name) + "[";
      for (std::size_t k = 0; k < a->dims.size(); ++k) {
        if (k) decl += ", ";
        const Extent& e = a->dims[k];
        if (mode_ == KeyMode::ShapeInsensitive) decl += "_";
        else decl += e.is_symbolic() ? params_.at(e.param) : std::to_string(e.size);
      }
      decl += "]";
      out.shape.push_back(decl);
      text += "array " + decl + (a->kind == ElementKind::Int ? " : int" : "") + ";\n";
    }
    Program shell;
    shell.body = std::move(renamed);
    text += "\n" + pretty_print(shell);
    out.text = std::move(text);
    out.fingerprint = fnv1a64(out.text);
    out.arrays = arrays_;
    out.params = params_;
    return out;
  }

 private:
  void use_array(const std::string& name) {
    if (arrays_.contains(name)) return;
    arrays_[name] = "A" + std::to_string(array_order_.size());
    array_order_.push_back(name);
    for (const auto& d : program_.find_array(name)->dims)
      if (d.is_symbolic()) use_param(d.param);
  }

  void use_param(const std::string& name) {
    if (params_.contains(name)) return;
    params_[name] = "P" + std::to_string(param_order_.size());
    param_order_.push_back(name);
  }

  AffineExpr affine(const AffineExpr& e, const NameMap& scope) {
    AffineExpr out(e.constant());
    for (const auto& [name, c] : e.terms()) {
      if (auto it = scope.find(name); it != scope.end()) {
        out.add_term(it->second, c);
      } else {
        use_param(name);
        out.add_term(params_.at(name), c);
      }
    }
    return out;
  }

  void access(Access& a, const NameMap& scope) {
    for (auto& ix : a.indices) ix = affine(ix, scope);
    use_array(a.array);
    a.array = arrays_.at(a.array);
  }

  void expr(Expr& e, const NameMap& scope) {
    if (e.op == Expr::Op::Index) e.index = affine(e.index, scope);
    for (auto& a : e.args) expr(a, scope);
  }

  void rename_body(Body& body, NameMap& scope) {
    for (auto& n : body) {
      if (n.is_computation()) {
        Computation& c = n.computation();
        c.id = "S" + std::to_string(comps_++);
        access(c.write, scope);
        for (auto& r : c.reads) access(r, scope);
        expr(c.expr, scope);
      } else if (n.is_call()) {
        Call& c = n.call();
        for (auto& a : c.args) {
          use_array(a);
          a = arrays_.at(a);
        }
        rename_body(c.reference, scope);
      } else {
        Loop& l = n.loop();
        l.lower = affine(l.lower, scope);
        for (auto& t : l.upper) t.expr = affine(t.expr, scope);
        l.span.reset();
        std::string fresh = "L" + std::to_string(loops_++);
        NameMap inner = scope;
        inner[l.iter] = fresh;
        l.iter = fresh;
        rename_body(l.body, inner);
      }
    }
  }

  const Program& program_;
  KeyMode mode_;
  NameMap arrays_, params_;
  std::vector<std::string> array_order_, param_order_;
  std::size_t loops_ = 0;
  std::size_t comps_ = 0;
};

}  // namespace

CanonicalForm canonicalize(const Program& context, const Node& nest, KeyMode mode) {
  Body b;
  b.push_back(nest);
  return Canonicalizer(context, mode).run(b, false);
}

CanonicalForm canonicalize_program(const Program& program, KeyMode mode) {
  return Canonicalizer(program, mode).run(program.body, true);
}

std::uint64_t match_key(const Program& context, const Node& nest, KeyMode mode) {
  return canonicalize(context, nest, mode).fingerprint;
}

}  // namespace loopnorm

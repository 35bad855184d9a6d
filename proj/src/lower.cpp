#include "loopnorm/lower.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "loopnorm/hash.hpp"

namespace loopnorm {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::size_t ExecutionPlan::array_index(std::string_view name) const {
  for (std::size_t k = 0; k < arrays.size(); ++k)
    if (arrays[k].name == name) return k;
  throw InterpError("unknown array '" + std::string(name) + "'");
}

Bindings resolve_bindings(const Program& program, const Bindings& overrides) {
  Bindings out;
  for (const auto& p : program.params) {
    auto it = overrides.find(p.name);
    if (it != overrides.end()) out[p.name] = it->second;
    else if (p.default_value) out[p.name] = *p.default_value;
    else throw InterpError("parameter '" + p.name + "' is unbound");
  }
  return out;
}

namespace {

class Lowerer {
 public:
  Lowerer(const Program& p, const Bindings& overrides) {
    plan_.bindings = resolve_bindings(p, overrides);
    for (const auto& a : p.arrays) {
      PlanArray pa;
      pa.name = a.name;
      pa.kind = a.kind;
      for (const auto& d : a.dims) {
        std::int64_t e = d.is_symbolic() ? plan_.bindings.at(d.param) : d.size;
        if (e < 1) throw InterpError("array '" + a.name + "' has extent " + std::to_string(e) + " after binding");
        pa.extents.push_back(e);
        pa.size *= e;
      }
      plan_.arrays.push_back(std::move(pa));
    }
  }

  ExecutionPlan run(const Body& body) {
    std::vector<std::string> scope;
    lower_body(body, scope, plan_.roots);
    return std::move(plan_);
  }

 private:
  LinearForm form(const AffineExpr& e, const std::vector<std::string>& scope) const {
    LinearForm f;
    f.coeffs.assign(scope.size(), 0);
    f.constant = e.constant();
    for (const auto& [name, c] : e.terms()) {
      auto it = std::find(scope.begin(), scope.end(), name);
      if (it != scope.end()) {
        f.coeffs[static_cast<std::size_t>(it - scope.begin())] += c;
        continue;
      }
      auto b = plan_.bindings.find(name);
      if (b == plan_.bindings.end()) throw InterpError("unbound variable '" + name + "'");
      f.constant += c * b->second;
    }
    return f;
  }

  PlanAccess access(const Access& a, const std::vector<std::string>& scope) const {
    PlanAccess pa;
    pa.array = plan_.array_index(a.array);
    const PlanArray& arr = plan_.arrays[pa.array];
    pa.address.coeffs.assign(scope.size(), 0);
    std::int64_t stride = 1;
    for (std::size_t d = a.indices.size(); d-- > 0;) {
      LinearForm f = form(a.indices[d], scope);
      for (std::size_t k = 0; k < scope.size(); ++k) pa.address.coeffs[k] += f.coeffs[k] * stride;
      pa.address.constant += f.constant * stride;
      stride *= arr.extents[d];
    }
    for (const auto& ix : a.indices) pa.indices.push_back(form(ix, scope));
    return pa;
  }

  PlanExpr expr(const Expr& e, const std::vector<std::string>& scope) const {
    PlanExpr pe;
    pe.op = e.op;
    pe.int_value = e.int_value;
    pe.float_value = e.float_value;
    pe.read = e.read;
    if (e.op == Expr::Op::Index) pe.index = form(e.index, scope);
    for (const auto& a : e.args) pe.args.push_back(expr(a, scope));
    return pe;
  }

  void lower_body(const Body& body, std::vector<std::string>& scope, std::vector<PlanNode>& out) {
    auto& ids = loop_stack_;
    for (const auto& n : body) {
      if (n.is_call()) {
        lower_body(n.call().reference, scope, out);
      } else if (n.is_computation()) {
        const Computation& c = n.computation();
        PlanComp pc;
        pc.id = c.id;
        pc.iters = scope;
        pc.loop_ids = ids;
        pc.write = access(c.write, scope);
        for (const auto& r : c.reads) pc.reads.push_back(access(r, scope));
        pc.expr = expr(c.expr, scope);
        PlanNode node;
        node.comp = plan_.comps.size();
        plan_.comps.push_back(std::move(pc));
        out.push_back(std::move(node));
      } else {
        const Loop& l = n.loop();
        PlanNode node;
        node.is_loop = true;
        node.slot = scope.size();
        node.loop_id = next_loop_++;
        node.lower = form(l.lower, scope);
        for (const auto& t : l.upper) node.upper.emplace_back(form(t.expr, scope), t.divisor);
        scope.push_back(l.iter);
        ids.push_back(node.loop_id);
        plan_.max_depth = std::max(plan_.max_depth, scope.size());
        lower_body(l.body, scope, node.body);
        scope.pop_back();
        ids.pop_back();
        out.push_back(std::move(node));
      }
    }
  }

  ExecutionPlan plan_;
  std::vector<std::size_t> loop_stack_;
  std::size_t next_loop_ = 0;
};

class Walker {
 public:
  Walker(const ExecutionPlan& plan, const InstanceVisitor* visit, std::uint64_t cap)
      : plan_(plan), visit_(visit), cap_(cap), iters_(plan.max_depth, 0) {}

  std::uint64_t run() {
    walk(plan_.roots);
    return count_;
  }

  bool stopped() const { return stopped_; }

 private:
  void walk(const std::vector<PlanNode>& body) {
    for (const auto& n : body) {
      if (stopped_) return;
      if (!n.is_loop) {
        if (++count_ > cap_) {
          if (!visit_) {
            stopped_ = true;
            return;
          }
          throw IterationCapExceeded("iteration cap of " + std::to_string(cap_) + " computation instances exceeded");
        }
        if (visit_) (*visit_)(n.comp, std::span<const std::int64_t>(iters_.data(), plan_.comps[n.comp].iters.size()));
        continue;
      }
      std::span<const std::int64_t> outer(iters_.data(), n.slot);
      std::int64_t lo = n.lower.eval(outer);
      std::int64_t hi = upper_value(n, outer);
      for (std::int64_t v = lo; v < hi && !stopped_; ++v) {
        iters_[n.slot] = v;
        walk(n.body);
      }
    }
  }

  const ExecutionPlan& plan_;
  const InstanceVisitor* visit_;
  std::uint64_t cap_;
  std::vector<std::int64_t> iters_;
  std::uint64_t count_ = 0;
  bool stopped_ = false;
};

}  // namespace

std::int64_t upper_value(const PlanNode& loop, std::span<const std::int64_t> iters) {
  std::int64_t hi = std::numeric_limits<std::int64_t>::max();
  for (const auto& [f, d] : loop.upper) hi = std::min(hi, ceil_div(f.eval(iters), d));
  return hi;
}

ExecutionPlan lower(const Program& program, const Bindings& overrides) {
  return lower(program, program.body, overrides);
}

ExecutionPlan lower(const Program& program, const Body& body, const Bindings& overrides) {
  return Lowerer(program, overrides).run(body);
}

std::uint64_t enumerate(const ExecutionPlan& plan, const InstanceVisitor& visit, std::uint64_t cap) {
  return Walker(plan, &visit, cap).run();
}

std::uint64_t count_instances(const ExecutionPlan& plan, std::uint64_t cap) {
  Walker w(plan, nullptr, cap);
  return w.run();
}

std::uint64_t iteration_cap_from_env(std::uint64_t fallback) {
  const char* v = std::getenv("LOOPNORM_ITER_CAP");
  if (!v || !*v) return fallback;
  char* end = nullptr;
  unsigned long long n = std::strtoull(v, &end, 10);
  if (*end != '\0' || n == 0) return fallback;
  return n;
}

}  // namespace loopnorm

#include "loopnorm/interp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "loopnorm/hash.hpp"
#include "loopnorm/lower.hpp"

namespace loopnorm {

namespace {

std::uint64_t init_bits(std::uint64_t seed, std::string_view array, std::uint64_t flat) {
  std::uint64_t state = seed ^ fnv1a64(array);
  return splitmix64_mix(state + (flat + 1) * 0x9e3779b97f4a7c15ULL);
}

std::string iteration_text(const PlanComp& c, std::span<const std::int64_t> iters) {
  std::string s = "(";
  for (std::size_t k = 0; k < c.iters.size(); ++k) {
    if (k) s += ", ";
    s += c.iters[k] + "=" + std::to_string(iters[k]);
  }
  return s + ")";
}

class Machine {
 public:
  Machine(const ExecutionPlan& plan, const ExecutionConfig& cfg) : plan_(plan), cfg_(cfg) {
    for (const auto& a : plan.arrays) {
      auto alias = cfg.init_alias.find(a.name);
      std::string_view src = alias == cfg.init_alias.end() ? std::string_view(a.name) : alias->second;
      auto n = static_cast<std::size_t>(a.size);
      if (cfg.mode == Mode::Integer) {
        std::vector<std::int64_t> v(n);
        for (std::size_t k = 0; k < n; ++k) v[k] = initial_int(cfg.seed, src, k);
        ints_.push_back(std::move(v));
      } else {
        std::vector<double> v(n);
        for (std::size_t k = 0; k < n; ++k) v[k] = initial_float(cfg.seed, src, k);
        floats_.push_back(std::move(v));
      }
    }
  }

  void step(std::size_t ci, std::span<const std::int64_t> iters) {
    const PlanComp& c = plan_.comps[ci];
    comp_ = &c;
    iters_ = iters;
    std::size_t dst = offset(c.write);
    if (cfg_.mode == Mode::Integer) {
      ints_[c.write.array][dst] = static_cast<std::int64_t>(eval_int(c.expr));
    } else {
      floats_[c.write.array][dst] = eval_float(c.expr);
    }
  }

  Memory result() && {
    Memory m;
    for (std::size_t k = 0; k < plan_.arrays.size(); ++k) {
      Buffer b;
      if (cfg_.mode == Mode::Integer) b.ints = std::move(ints_[k]);
      else b.floats = std::move(floats_[k]);
      m.emplace(plan_.arrays[k].name, std::move(b));
    }
    return m;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw InterpError(what + " in " + comp_->id + " at " + iteration_text(*comp_, iters_));
  }

  std::size_t offset(const PlanAccess& a) const {
    const PlanArray& arr = plan_.arrays[a.array];
    std::int64_t flat = 0;
    for (std::size_t d = 0; d < a.indices.size(); ++d) {
      std::int64_t v = a.indices[d].eval(iters_);
      if (v < 0 || v >= arr.extents[d]) {
        std::ostringstream os;
        os << "out-of-bounds access " << arr.name << "[";
        for (std::size_t k = 0; k < a.indices.size(); ++k) os << (k ? ", " : "") << a.indices[k].eval(iters_);
        os << "] (dimension " << d << " has extent " << arr.extents[d] << ")";
        fail(os.str());
      }
      flat = flat * arr.extents[d] + v;
    }
    return static_cast<std::size_t>(flat);
  }

  std::uint64_t eval_int(const PlanExpr& e) const {
    using Op = Expr::Op;
    switch (e.op) {
      case Op::Int: return static_cast<std::uint64_t>(e.int_value);
      case Op::Float: fail("float literal in integer mode");
      case Op::Read: {
        const PlanAccess& a = comp_->reads[e.read];
        return static_cast<std::uint64_t>(ints_[a.array][offset(a)]);
      }
      case Op::Index: return static_cast<std::uint64_t>(e.index.eval(iters_));
      case Op::Neg: return 0 - eval_int(e.args[0]);
      case Op::Div: fail("division in integer mode");
      default: break;
    }
    std::uint64_t a = eval_int(e.args[0]);
    std::uint64_t b = eval_int(e.args[1]);
    switch (e.op) {
      case Op::Add: return a + b;
      case Op::Sub: return a - b;
      case Op::Mul: return a * b;
      case Op::Min: return static_cast<std::int64_t>(a) < static_cast<std::int64_t>(b) ? a : b;
      case Op::Max: return static_cast<std::int64_t>(a) > static_cast<std::int64_t>(b) ? a : b;
      default: fail("unsupported operator");
    }
  }

  double eval_float(const PlanExpr& e) const {
    using Op = Expr::Op;
    switch (e.op) {
      case Op::Int: return static_cast<double>(e.int_value);
      case Op::Float: return e.float_value;
      case Op::Read: {
        const PlanAccess& a = comp_->reads[e.read];
        return floats_[a.array][offset(a)];
      }
      case Op::Index: return static_cast<double>(e.index.eval(iters_));
      case Op::Neg: return -eval_float(e.args[0]);
      default: break;
    }
    double a = eval_float(e.args[0]);
    double b = eval_float(e.args[1]);
    switch (e.op) {
      case Op::Add: return a + b;
      case Op::Sub: return a - b;
      case Op::Mul: return a * b;
      case Op::Div: return a / b;
      case Op::Min: return std::min(a, b);
      case Op::Max: return std::max(a, b);
      default: fail("unsupported operator");
    }
  }

  const ExecutionPlan& plan_;
  const ExecutionConfig& cfg_;
  std::vector<std::vector<std::int64_t>> ints_;
  std::vector<std::vector<double>> floats_;
  const PlanComp* comp_ = nullptr;
  std::span<const std::int64_t> iters_;
};

}  // namespace

std::int64_t initial_int(std::uint64_t seed, std::string_view array, std::uint64_t flat) {
  return static_cast<std::int64_t>(init_bits(seed, array, flat) >> 54) - 512;
}

double initial_float(std::uint64_t seed, std::string_view array, std::uint64_t flat) {
  return static_cast<double>(init_bits(seed, array, flat) >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

Memory run(const Program& program, const ExecutionConfig& config) {
  ExecutionPlan plan = lower(program, config.bindings);
  Machine m(plan, config);
  enumerate(plan, [&](std::size_t c, std::span<const std::int64_t> it) { m.step(c, it); }, config.iteration_cap);
  return std::move(m).result();
}

Verdict compare(const Memory& a, const Memory& b, Mode mode,
                const std::map<std::string, std::string, std::less<>>& array_map) {
  Verdict v;
  auto mismatch = [&](std::string array, std::size_t index, std::string detail) {
    v.equivalent = false;
    v.array = std::move(array);
    v.index = index;
    v.detail = std::move(detail);
    return v;
  };
  if (a.size() != b.size()) return mismatch("", 0, "different number of arrays");
  for (const auto& [bname, bbuf] : b) {
    auto m = array_map.find(bname);
    const std::string& aname = m == array_map.end() ? bname : m->second;
    auto it = a.find(aname);
    if (it == a.end()) return mismatch(bname, 0, "array '" + bname + "' has no counterpart");
    const Buffer& abuf = it->second;
    if (abuf.size() != bbuf.size()) return mismatch(aname, 0, "buffer sizes differ");
    for (std::size_t k = 0; k < abuf.size(); ++k) {
      if (mode == Mode::Integer) {
        if (abuf.ints[k] != bbuf.ints[k])
          return mismatch(aname, k, aname + "[" + std::to_string(k) + "]: " + std::to_string(abuf.ints[k]) +
                                        " vs " + std::to_string(bbuf.ints[k]));
      } else {
        double x = abuf.floats[k], y = bbuf.floats[k];
        double scale = std::max(std::fabs(x), std::fabs(y));
        bool same = x == y || (std::isnan(x) && std::isnan(y)) || std::fabs(x - y) <= 1e-10 * scale;
        if (!same) {
          std::ostringstream os;
          os.precision(17);
          os << aname << "[" << k << "]: " << x << " vs " << y;
          return mismatch(aname, k, os.str());
        }
      }
    }
  }
  return v;
}

Verdict equivalent(const Program& p1, const Program& p2, const std::vector<ExecutionConfig>& configs,
                   const std::map<std::string, std::string, std::less<>>& array_map) {
  for (const auto& cfg : configs) {
    Memory m1 = run(p1, cfg);
    ExecutionConfig cfg2 = cfg;
    for (const auto& [mine, theirs] : array_map) {
      auto alias = cfg.init_alias.find(theirs);
      cfg2.init_alias[mine] = alias == cfg.init_alias.end() ? theirs : alias->second;
    }
    Memory m2 = run(p2, cfg2);
    Verdict v = compare(m1, m2, cfg.mode, array_map);
    if (!v) {
      v.detail += " (seed " + std::to_string(cfg.seed) + ")";
      return v;
    }
  }
  return Verdict{};
}

std::uint64_t digest(const Memory& memory) {
  std::uint64_t h = kFnvOffset;
  for (const auto& [name, buf] : memory) {
    h = fnv1a64(name, h);
    auto mix = [&](std::uint64_t bits) {
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xff;
        h *= kFnvPrime;
      }
    };
    for (auto v : buf.ints) mix(static_cast<std::uint64_t>(v));
    for (double d : buf.floats) {
      std::uint64_t bits;
      std::memcpy(&bits, &d, sizeof bits);
      mix(bits);
    }
  }
  return h;
}

}  // namespace loopnorm

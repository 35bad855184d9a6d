#pragma once

// Concrete execution plan: a program with parameters bound, iterators mapped
// to depth slots and every affine form flattened to a coefficient vector.
// The interpreter, the brute-force dependence oracle and the stride metric all
// walk the same plan so they agree on iteration order by construction.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "loopnorm/ir.hpp"

namespace loopnorm {

struct LinearForm {
  std::vector<std::int64_t> coeffs;  // indexed by slot (loop depth)
  std::int64_t constant = 0;

  std::int64_t eval(std::span<const std::int64_t> iters) const {
    std::int64_t v = constant;
    for (std::size_t k = 0; k < coeffs.size(); ++k) v += coeffs[k] * iters[k];
    return v;
  }
};

struct PlanArray {
  std::string name;
  std::vector<std::int64_t> extents;
  std::int64_t size = 1;
  ElementKind kind = ElementKind::Float;
};

struct PlanAccess {
  std::size_t array = 0;
  std::vector<LinearForm> indices;
  LinearForm address;  // row-major flat offset, unchecked
};

struct PlanExpr {
  Expr::Op op = Expr::Op::Int;
  std::int64_t int_value = 0;
  double float_value = 0.0;
  std::size_t read = 0;
  LinearForm index;
  std::vector<PlanExpr> args;
};

struct PlanComp {
  std::string id;
  std::vector<std::string> iters;       // enclosing iterators, outermost first
  std::vector<std::size_t> loop_ids;    // preorder ids of the enclosing loops
  PlanAccess write;
  std::vector<PlanAccess> reads;
  PlanExpr expr;
};

struct PlanNode {
  bool is_loop = false;
  std::size_t slot = 0;
  std::size_t loop_id = 0;
  LinearForm lower;
  std::vector<std::pair<LinearForm, std::int64_t>> upper;  // min over ceildiv(form, divisor)
  std::vector<PlanNode> body;
  std::size_t comp = 0;  // index into ExecutionPlan::comps when !is_loop
};

struct ExecutionPlan {
  std::vector<PlanArray> arrays;
  std::vector<PlanComp> comps;  // preorder
  std::vector<PlanNode> roots;
  std::size_t max_depth = 0;
  Bindings bindings;  // effective values, defaults merged with overrides

  std::size_t array_index(std::string_view name) const;
};

/// Parameter values from defaults overridden by `overrides`; throws
/// InterpError when a parameter stays unbound.
Bindings resolve_bindings(const Program& program, const Bindings& overrides);

/// Lowers `body` (by default the program body) under concrete bindings.
/// Throws InterpError for unbound parameters or extents below 1.
ExecutionPlan lower(const Program& program, const Bindings& overrides);
ExecutionPlan lower(const Program& program, const Body& body, const Bindings& overrides);

using InstanceVisitor = std::function<void(std::size_t comp, std::span<const std::int64_t> iters)>;

/// Visits every computation instance in execution order. Throws
/// IterationCapExceeded once more than `cap` instances would run. Returns the
/// number of instances visited.
std::uint64_t enumerate(const ExecutionPlan& plan, const InstanceVisitor& visit, std::uint64_t cap);

/// Instance count without visiting; stops early and returns cap + 1 when the
/// count exceeds `cap`.
std::uint64_t count_instances(const ExecutionPlan& plan, std::uint64_t cap);

/// Upper bound value of a lowered loop at the given outer iterator values.
std::int64_t upper_value(const PlanNode& loop, std::span<const std::int64_t> iters);

/// Iteration cap from the LOOPNORM_ITER_CAP environment variable, or `fallback`.
std::uint64_t iteration_cap_from_env(std::uint64_t fallback);

}  // namespace loopnorm

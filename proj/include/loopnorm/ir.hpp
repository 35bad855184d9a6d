#pragma once

// Loop-nest intermediate representation: a tree of loops and computations
// with affine array accesses.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "loopnorm/affine.hpp"
#include "loopnorm/error.hpp"

namespace loopnorm {

enum class ElementKind { Int, Float };

/// One array extent: a concrete size or the name of a parameter.
struct Extent {
  std::int64_t size = 0;
  std::string param;

  static Extent concrete(std::int64_t n) { return Extent{n, {}}; }
  static Extent symbolic(std::string p) { return Extent{0, std::move(p)}; }
  bool is_symbolic() const { return !param.empty(); }
  std::string to_string() const { return is_symbolic() ? param : std::to_string(size); }

  bool operator==(const Extent&) const = default;
};

/// Row-major array declaration.
struct ArrayDecl {
  std::string name;
  std::vector<Extent> dims;
  ElementKind kind = ElementKind::Float;

  std::size_t rank() const { return dims.size(); }
  bool operator==(const ArrayDecl&) const = default;
};

enum class AccessKind { Read, Write };

struct Access {
  std::string array;
  std::vector<AffineExpr> indices;
  AccessKind kind = AccessKind::Read;

  bool operator==(const Access&) const = default;
};

/// Arithmetic expression tree of a computation. Leaves are literals, reads
/// (by position in Computation::reads) or index values (affine expressions of
/// iterators and parameters).
struct Expr {
  enum class Op { Int, Float, Read, Index, Add, Sub, Mul, Div, Min, Max, Neg };

  Op op = Op::Int;
  std::int64_t int_value = 0;
  double float_value = 0.0;
  std::size_t read = 0;
  AffineExpr index;
  std::vector<Expr> args;

  static Expr integer(std::int64_t v);
  static Expr floating(double v);
  static Expr read_of(std::size_t position);
  static Expr index_of(AffineExpr e);
  static Expr unary(Op op, Expr a);
  static Expr binary(Op op, Expr a, Expr b);

  bool is_leaf() const { return op == Op::Int || op == Op::Float || op == Op::Read || op == Op::Index; }
  bool operator==(const Expr&) const = default;
};

const char* op_symbol(Expr::Op op);

/// A unit of work with exactly one write.
struct Computation {
  std::string id;
  Access write;
  std::vector<Access> reads;
  Expr expr;
  std::optional<SourceSpan> span;

  bool operator==(const Computation& o) const {
    return id == o.id && write == o.write && reads == o.reads && expr == o.expr;
  }
};

/// ceildiv(expr, divisor). Upper bounds are the minimum over their terms.
struct BoundTerm {
  AffineExpr expr;
  std::int64_t divisor = 1;

  bool operator==(const BoundTerm&) const = default;
};

struct Node;

/// Counted loop `for iter in lower .. min(upper...)` with step +1 and an
/// exclusive upper bound.
struct Loop {
  std::string iter;
  AffineExpr lower;
  std::vector<BoundTerm> upper;
  std::vector<Node> body;
  bool parallel = false;
  bool vectorize = false;
  std::optional<SourceSpan> span;

  /// Single-term upper bound helper.
  static Loop make(std::string iter, AffineExpr lower, AffineExpr upper, std::vector<Node> body = {});

  /// True when the upper bound is one undivided affine term.
  bool simple_upper() const { return upper.size() == 1 && upper[0].divisor == 1; }
  bool bounds_mention(std::string_view name) const;

  bool operator==(const Loop& o) const;
};

/// Opaque library-call node produced by idiom replacement. `reference` keeps
/// the replaced loop nest so the interpreter can execute it.
struct Call {
  std::string idiom;
  std::vector<std::string> args;
  std::vector<Node> reference;

  bool operator==(const Call& o) const;
};

struct Node {
  std::variant<Loop, Computation, Call> value;

  Node(Loop l) : value(std::move(l)) {}         // NOLINT
  Node(Computation c) : value(std::move(c)) {}  // NOLINT
  Node(Call c) : value(std::move(c)) {}         // NOLINT

  bool is_loop() const { return std::holds_alternative<Loop>(value); }
  bool is_computation() const { return std::holds_alternative<Computation>(value); }
  bool is_call() const { return std::holds_alternative<Call>(value); }
  Loop& loop() { return std::get<Loop>(value); }
  const Loop& loop() const { return std::get<Loop>(value); }
  Computation& computation() { return std::get<Computation>(value); }
  const Computation& computation() const { return std::get<Computation>(value); }
  Call& call() { return std::get<Call>(value); }
  const Call& call() const { return std::get<Call>(value); }

  bool operator==(const Node& o) const { return value == o.value; }
};

using Body = std::vector<Node>;

struct Parameter {
  std::string name;
  std::optional<std::int64_t> default_value;

  bool operator==(const Parameter&) const = default;
};

struct Program {
  std::vector<Parameter> params;
  std::vector<ArrayDecl> arrays;
  Body body;

  const ArrayDecl* find_array(std::string_view name) const;
  const Parameter* find_param(std::string_view name) const;
  /// Parameter defaults as a binding map (unbound parameters omitted).
  std::map<std::string, std::int64_t, std::less<>> default_bindings() const;

  bool operator==(const Program&) const = default;
};

using Bindings = std::map<std::string, std::int64_t, std::less<>>;

/// Child indices from the top-level body down to a node.
using NodePath = std::vector<std::size_t>;

const Node& node_at(const Body& body, std::span<const std::size_t> path);
Node& node_at(Body& body, std::span<const std::size_t> path);

/// Calls `f(comp, enclosing_loops)` for every computation in preorder.
/// Call nodes are descended into (their reference body).
void for_each_computation(
    const Body& body,
    const std::function<void(const Computation&, std::span<const Loop* const>)>& f);

/// Every loop in preorder together with its path.
void for_each_loop(const Body& body,
                   const std::function<void(const Loop&, const NodePath&)>& f);

std::size_t count_computations(const Body& body);

// ---------------------------------------------------------------------------
// Operations

struct Diagnostic {
  std::string path;
  std::string message;
};

/// Checks every IR invariant; returns one diagnostic per violation.
std::vector<Diagnostic> validate(const Program& program);

/// Throws InvalidProgram carrying the first diagnostics when invalid.
void require_valid(const Program& program);

/// Depth-first, left-to-right listing of loop iterators under `nest`.
std::vector<std::string> iterators_in_order(const Loop& nest);

/// Tree identity; with `rename` true, identity up to a consistent bijective
/// renaming of iterators and arrays.
bool structurally_equal(const Program& a, const Program& b, bool rename);

/// Applies iterator and array renamings throughout a body.
void rename_in_body(Body& body, const std::map<std::string, std::string, std::less<>>& iterators,
                    const std::map<std::string, std::string, std::less<>>& arrays);

/// All names in use (parameters, arrays, iterators anywhere).
std::vector<std::string> all_names(const Program& program);

/// A name starting with `stem` not present in `taken`; `taken` is updated.
std::string fresh_name(const std::string& stem, std::vector<std::string>& taken);

}  // namespace loopnorm

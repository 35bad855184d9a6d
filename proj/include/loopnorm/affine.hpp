#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>

namespace loopnorm {

/// Integer-linear expression over named variables (loop iterators and
/// symbolic parameters) plus a constant. Zero coefficients are never stored,
/// so defaulted equality is semantic equality.
class AffineExpr {
 public:
  using Terms = std::map<std::string, std::int64_t, std::less<>>;

  AffineExpr() = default;
  AffineExpr(std::int64_t constant) : constant_(constant) {}  // NOLINT

  static AffineExpr variable(std::string name, std::int64_t coeff = 1);

  std::int64_t constant() const { return constant_; }
  const Terms& terms() const { return terms_; }
  std::int64_t coeff(std::string_view name) const;
  bool is_constant() const { return terms_.empty(); }
  bool mentions(std::string_view name) const { return terms_.contains(name); }

  void set_constant(std::int64_t c) { constant_ = c; }
  void add_term(std::string_view name, std::int64_t coeff);

  AffineExpr& operator+=(const AffineExpr& other);
  AffineExpr& operator-=(const AffineExpr& other);
  AffineExpr& operator*=(std::int64_t factor);

  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
  friend AffineExpr operator*(AffineExpr a, std::int64_t k) { return a *= k; }
  friend AffineExpr operator*(std::int64_t k, AffineExpr a) { return a *= k; }
  AffineExpr operator-() const { return *this * -1; }

  /// Replaces `name` by `value` everywhere.
  AffineExpr substitute(std::string_view name, const AffineExpr& value) const;

  /// Applies a variable renaming; names not in `mapping` are kept.
  AffineExpr renamed(const std::map<std::string, std::string, std::less<>>& mapping) const;

  /// Evaluates with `lookup` supplying every variable's value.
  std::int64_t evaluate(const std::function<std::int64_t(std::string_view)>& lookup) const;

  /// Renders as DSL text, e.g. "2*i + N - 1". Terms in name order.
  std::string to_string() const;

  bool operator==(const AffineExpr&) const = default;

 private:
  Terms terms_;
  std::int64_t constant_ = 0;
};

/// Floor/ceil division with a positive divisor, correct for negative
/// numerators.
std::int64_t floor_div(std::int64_t a, std::int64_t b);
std::int64_t ceil_div(std::int64_t a, std::int64_t b);

}  // namespace loopnorm

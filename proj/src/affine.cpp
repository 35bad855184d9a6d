#include "loopnorm/affine.hpp"

#include <sstream>

#include "loopnorm/error.hpp"

namespace loopnorm {

AffineExpr AffineExpr::variable(std::string name, std::int64_t coeff) {
  AffineExpr e;
  e.add_term(name, coeff);
  return e;
}

std::int64_t AffineExpr::coeff(std::string_view name) const {
  auto it = terms_.find(name);
  return it == terms_.end() ? 0 : it->second;
}

void AffineExpr::add_term(std::string_view name, std::int64_t coeff) {
  if (coeff == 0) return;
  auto it = terms_.find(name);
  if (it == terms_.end()) {
    terms_.emplace(std::string(name), coeff);
    return;
  }
  it->second += coeff;
  if (it->second == 0) terms_.erase(it);
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& other) {
  for (const auto& [name, c] : other.terms_) add_term(name, c);
  constant_ += other.constant_;
  return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& other) {
  for (const auto& [name, c] : other.terms_) add_term(name, -c);
  constant_ -= other.constant_;
  return *this;
}

AffineExpr& AffineExpr::operator*=(std::int64_t factor) {
  if (factor == 0) {
    terms_.clear();
    constant_ = 0;
    return *this;
  }
  for (auto& [name, c] : terms_) c *= factor;
  constant_ *= factor;
  return *this;
}

AffineExpr AffineExpr::substitute(std::string_view name, const AffineExpr& value) const {
  std::int64_t c = coeff(name);
  if (c == 0) return *this;
  AffineExpr out = *this;
  out.terms_.erase(out.terms_.find(name));
  out += value * c;
  return out;
}

AffineExpr AffineExpr::renamed(
    const std::map<std::string, std::string, std::less<>>& mapping) const {
  AffineExpr out(constant_);
  for (const auto& [name, c] : terms_) {
    auto it = mapping.find(name);
    out.add_term(it == mapping.end() ? name : it->second, c);
  }
  return out;
}

std::int64_t AffineExpr::evaluate(
    const std::function<std::int64_t(std::string_view)>& lookup) const {
  std::int64_t v = constant_;
  for (const auto& [name, c] : terms_) v += c * lookup(name);
  return v;
}

std::string AffineExpr::to_string() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [name, c] : terms_) {
    std::int64_t mag = c < 0 ? -c : c;
    if (first) {
      if (c < 0) os << "-";
    } else {
      os << (c < 0 ? " - " : " + ");
    }
    if (mag != 1) os << mag << "*";
    os << name;
    first = false;
  }
  if (first) {
    os << constant_;
  } else if (constant_ != 0) {
    os << (constant_ < 0 ? " - " : " + ") << (constant_ < 0 ? -constant_ : constant_);
  }
  return os.str();
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  if (b <= 0) throw Error("floor_div: divisor must be positive");
  std::int64_t q = a / b;
  if ((a % b != 0) && (a < 0)) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  if (b <= 0) throw Error("ceil_div: divisor must be positive");
  std::int64_t q = a / b;
  if ((a % b != 0) && (a > 0)) ++q;
  return q;
}

}  // namespace loopnorm

#pragma once

#include <cmath>
#include <compare>
#include <stdexcept>
#include <string>

namespace levelset {

/// A real number or +infinity, with infinity carried as an explicit flag.
///
/// Spectral moments either exist or diverge; a divergent moment is never
/// represented by a large or overflowed double. Constructing from a
/// non-finite double throws. Arithmetic is total on the nonnegative half-line
/// and monotone: inf + x = inf, inf * 0 = 0, inf * c = inf for c > 0.
class ExtReal {
public:
  constexpr ExtReal() = default;

  // NOLINTNEXTLINE(google-explicit-constructor)
  ExtReal(double v) : value_(v) {
    if (!std::isfinite(v)) {
      throw std::domain_error("ExtReal: non-finite double; use ExtReal::infinity()");
    }
  }

  static ExtReal infinity() {
    ExtReal e;
    e.infinite_ = true;
    return e;
  }

  bool is_finite() const { return !infinite_; }
  bool is_infinite() const { return infinite_; }

  /// Finite value; throws std::domain_error when infinite.
  double value() const {
    if (infinite_) throw std::domain_error("ExtReal: value() of +inf");
    return value_;
  }

  double value_or(double fallback) const { return infinite_ ? fallback : value_; }

  /// IEEE view, for printing and plotting only.
  double to_double() const { return infinite_ ? HUGE_VAL : value_; }

  std::string to_string() const;

  friend ExtReal operator+(const ExtReal& a, const ExtReal& b) {
    if (a.infinite_ || b.infinite_) return infinity();
    return ExtReal(a.value_ + b.value_);
  }

  friend ExtReal operator*(const ExtReal& a, const ExtReal& b) {
    if (!a.infinite_ && !b.infinite_) return ExtReal(a.value_ * b.value_);
    const ExtReal& other = a.infinite_ ? b : a;
    if (other.infinite_) return infinity();
    if (other.value_ == 0.0) return ExtReal(0.0);
    if (other.value_ < 0.0) throw std::domain_error("ExtReal: negative * inf is undefined here");
    return infinity();
  }

  ExtReal& operator+=(const ExtReal& o) { return *this = *this + o; }
  ExtReal& operator*=(const ExtReal& o) { return *this = *this * o; }

  friend bool operator==(const ExtReal& a, const ExtReal& b) {
    if (a.infinite_ || b.infinite_) return a.infinite_ == b.infinite_;
    return a.value_ == b.value_;
  }

  friend std::partial_ordering operator<=>(const ExtReal& a, const ExtReal& b) {
    if (a.infinite_ && b.infinite_) return std::partial_ordering::equivalent;
    if (a.infinite_) return std::partial_ordering::greater;
    if (b.infinite_) return std::partial_ordering::less;
    return a.value_ <=> b.value_;
  }

private:
  double value_ = 0.0;
  bool infinite_ = false;
};

/// sqrt(inf) = inf; negative finite arguments throw.
inline ExtReal sqrt(const ExtReal& x) {
  if (x.is_infinite()) return x;
  if (x.value() < 0.0) throw std::domain_error("ExtReal: sqrt of negative");
  return ExtReal(std::sqrt(x.value()));
}

inline std::string ExtReal::to_string() const {
  if (infinite_) return "inf";
  return std::to_string(value_);
}

}  // namespace levelset

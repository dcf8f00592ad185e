#pragma once

/// @file dual.hpp
/// Forward-mode dual numbers with a fixed derivative capacity and a runtime
/// count of active directions. Values with zero active directions act as
/// constants.

#include <algorithm>
#include <array>
#include <cmath>

namespace pnpf {

class Dual {
 public:
  static constexpr int capacity = 48;

  Dual() = default;
  Dual(double v) : v_(v) {}  // NOLINT(google-explicit-constructor): constants mix freely

  /// Independent variable number `k` out of `n` active directions.
  static Dual variable(double v, int k, int n) {
    Dual x(v);
    x.n_ = n;
    x.d_.fill(0.0);
    x.d_[static_cast<std::size_t>(k)] = 1.0;
    return x;
  }

  double value() const noexcept { return v_; }
  int active() const noexcept { return n_; }
  double derivative(int k) const noexcept { return k < n_ ? d_[static_cast<std::size_t>(k)] : 0.0; }

  Dual& operator+=(const Dual& b) { return *this = *this + b; }
  Dual& operator-=(const Dual& b) { return *this = *this - b; }
  Dual& operator*=(const Dual& b) { return *this = *this * b; }
  Dual& operator/=(const Dual& b) { return *this = *this / b; }

  friend Dual operator-(const Dual& a) { return a.scaled(-a.v_, -1.0); }

  friend Dual operator+(const Dual& a, const Dual& b) { return combine(a.v_ + b.v_, a, 1.0, b, 1.0); }
  friend Dual operator-(const Dual& a, const Dual& b) { return combine(a.v_ - b.v_, a, 1.0, b, -1.0); }
  friend Dual operator*(const Dual& a, const Dual& b) { return combine(a.v_ * b.v_, a, b.v_, b, a.v_); }
  friend Dual operator/(const Dual& a, const Dual& b) {
    const double q = a.v_ / b.v_;
    return combine(q, a, 1.0 / b.v_, b, -q / b.v_);
  }

  friend Dual exp(const Dual& a) {
    const double e = std::exp(a.v_);
    return a.scaled(e, e);
  }
  friend Dual log(const Dual& a) { return a.scaled(std::log(a.v_), 1.0 / a.v_); }

 private:
  /// Value v with derivative s * d(this).
  Dual scaled(double v, double s) const {
    Dual r(v);
    r.n_ = n_;
    for (int k = 0; k < n_; ++k) r.d_[static_cast<std::size_t>(k)] = s * d_[static_cast<std::size_t>(k)];
    return r;
  }

  /// Value v with derivative sa * d(a) + sb * d(b).
  static Dual combine(double v, const Dual& a, double sa, const Dual& b, double sb) {
    if (b.n_ == 0) return a.scaled(v, sa);
    if (a.n_ == 0) return b.scaled(v, sb);
    Dual r(v);
    r.n_ = std::max(a.n_, b.n_);
    for (int k = 0; k < r.n_; ++k) {
      const auto u = static_cast<std::size_t>(k);
      r.d_[u] = (k < a.n_ ? sa * a.d_[u] : 0.0) + (k < b.n_ ? sb * b.d_[u] : 0.0);
    }
    return r;
  }

  double v_ = 0.0;
  int n_ = 0;
  std::array<double, capacity> d_;
};

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.value(); }

}  // namespace pnpf

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace basic {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLogTwoPi = 1.8378770664093454836;

// log(exp(a) + exp(b)) without overflow; -inf is the additive identity.
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> values) {
  double top = kNegInf;
  for (double v : values) top = std::max(top, v);
  if (top == kNegInf) return kNegInf;
  if (std::isinf(top)) return top;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

// log of q^a (1-q)^b with the convention 0^0 = 1.
inline double log_point_moment(double q, double a, double b) {
  double out = 0.0;
  if (a > 0) out += (q <= 0.0) ? kNegInf : a * std::log(q);
  if (b > 0) out += (q >= 1.0) ? kNegInf : b * std::log1p(-q);
  return out;
}

inline double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

}  // namespace basic

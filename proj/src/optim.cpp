#include "basic/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "basic/errors.hpp"

namespace basic {

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Minimizes g.d + 0.5 sum h_i d_i^2 subject to |d| <= radius.
std::vector<double> diagonal_trust_step(const std::vector<double>& g, const std::vector<double>& h, double radius) {
  const std::size_t n = g.size();
  auto step = [&](double mu) {
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
      double denom = h[i] + mu;
      d[i] = denom > 0 ? -g[i] / denom : 0.0;
    }
    return d;
  };
  double min_h = *std::min_element(h.begin(), h.end());
  if (min_h > 0) {
    auto d = step(0.0);
    if (norm(d) <= radius) return d;
  }
  double lo = std::max(0.0, -min_h) + 1e-12 * (1.0 + std::abs(min_h));
  double hi = lo + 1.0;
  while (norm(step(hi)) > radius && hi < 1e300) hi *= 2.0;
  if (norm(step(lo)) <= radius) {
    // Degenerate curvature: fall back to a steepest-descent step of full length.
    double gn = norm(g);
    std::vector<double> d(n, 0.0);
    if (gn > 0)
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i] / gn * radius;
    return d;
  }
  for (int it = 0; it < 100; ++it) {
    double mid = 0.5 * (lo + hi);
    if (norm(step(mid)) > radius)
      lo = mid;
    else
      hi = mid;
  }
  return step(hi);
}

}  // namespace

TrustRegionResult minimize_trust_region(const std::function<double(std::span<const double>)>& objective,
                                        std::vector<double> x0, std::span<const double> lower,
                                        std::span<const double> upper, const TrustRegionOptions& options) {
  const std::size_t n = x0.size();
  if (lower.size() != n || upper.size() != n) throw ValidationError("bounds must match the parameter count");
  auto clip = [&](std::vector<double>& x) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
  };
  TrustRegionResult res;
  clip(x0);
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    double v = objective(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  std::vector<double> x = x0;
  double fx = eval(x);
  res.initial_value = fx;
  double radius = options.initial_radius;
  int quiet_iterations = 0;

  while (evals + static_cast<int>(2 * n + 1) <= options.max_evaluations) {
    const double step = std::max(0.5 * radius, 1e-7);
    std::vector<double> g(n, 0.0), h(n, 0.0);
    std::vector<double> best_x = x;
    double best_f = fx;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> xp = x, xm = x;
      xp[i] = std::min(x[i] + step, upper[i]);
      xm[i] = std::max(x[i] - step, lower[i]);
      double hp = xp[i] - x[i], hm = x[i] - xm[i];
      double fp = hp > 0 ? eval(xp) : fx;
      double fm = hm > 0 ? eval(xm) : fx;
      if (fp < best_f) best_f = fp, best_x = xp;
      if (fm < best_f) best_f = fm, best_x = xm;
      if (hp > 0 && hm > 0) {
        g[i] = (fp - fm) / (hp + hm);
        h[i] = 2.0 * (fp * hm + fm * hp - fx * (hp + hm)) / (hp * hm * (hp + hm));
      } else if (hp > 0) {
        g[i] = (fp - fx) / hp;
      } else if (hm > 0) {
        g[i] = (fx - fm) / hm;
      }
      if (!std::isfinite(g[i])) g[i] = 0.0;
      if (!std::isfinite(h[i])) h[i] = 0.0;
    }
    std::vector<double> d = diagonal_trust_step(g, h, radius);
    std::vector<double> trial = x;
    for (std::size_t i = 0; i < n; ++i) trial[i] += d[i];
    clip(trial);
    double pred = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double di = trial[i] - x[i];
      pred -= g[i] * di + 0.5 * h[i] * di * di;
    }
    double f_trial = std::numeric_limits<double>::infinity();
    if (pred > 0 && evals < options.max_evaluations) f_trial = eval(trial);
    double rho = pred > 0 ? (fx - f_trial) / pred : -1.0;
    if (f_trial < best_f) best_f = f_trial, best_x = trial;

    double improvement = fx - best_f;
    if (improvement > 0) {
      x = best_x;
      fx = best_f;
    }
    if (rho > 0.75 && norm(d) > 0.9 * radius)
      radius *= 2.0;
    else if (rho < 0.25)
      radius *= 0.25;

    if (improvement <= options.rel_tolerance * std::max(1.0, std::abs(fx)))
      ++quiet_iterations;
    else
      quiet_iterations = 0;
    if (radius < options.min_radius || (quiet_iterations >= 2 && radius < 1e-3)) {
      res.converged = true;
      break;
    }
  }
  res.x = x;
  res.value = fx;
  res.evaluations = evals;
  return res;
}

}  // namespace basic

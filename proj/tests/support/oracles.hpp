#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the library's likelihood or prior algebra.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "basic/likelihood.hpp"
#include "basic/matrix.hpp"
#include "basic/prior.hpp"
#include "basic/rng.hpp"

namespace oracle {

using basic::ChangeMatrix;
using basic::ChangepointPrior;
using basic::DataMatrix;
using basic::Family;
using basic::LikelihoodSpec;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double lse(const std::vector<double>& v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Textbook predictive densities of a whole segment, written in the
// "integrate the parameter out" form rather than from sufficient statistics.
inline double textbook_log_marginal(const LikelihoodSpec& spec, const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  if (xs.empty()) return 0.0;
  auto eta = spec.eta();
  const double log2pi = std::log(2.0 * M_PI);
  switch (spec.family()) {
    case Family::NormalMean: {
      // x ~ N(mu0 1, s0 (I + 11'/lambda)); Sherman-Morrison for the inverse.
      double mu0 = eta[0], lam = eta[1], s0 = eta[2];
      double sd = 0.0, sd2 = 0.0;
      for (double x : xs) {
        sd += x - mu0;
        sd2 += (x - mu0) * (x - mu0);
      }
      double quad = (sd2 - sd * sd / (lam + n)) / s0;
      double logdet = n * std::log(s0) + std::log1p(n / lam);
      return -0.5 * (n * log2pi + logdet + quad);
    }
    case Family::NormalVar: {
      double mu0 = eta[0], a = eta[1], b = eta[2];
      double q = 0.0;
      for (double x : xs) q += (x - mu0) * (x - mu0);
      return -0.5 * n * log2pi + a * std::log(b) - std::lgamma(a) + std::lgamma(a + n / 2) -
             (a + n / 2) * std::log(b + q / 2);
    }
    case Family::NormalMeanVar: {
      double mu0 = eta[0], lam = eta[1], a = eta[2], b = eta[3];
      double sd = 0.0, sd2 = 0.0;
      for (double x : xs) {
        sd += x - mu0;
        sd2 += (x - mu0) * (x - mu0);
      }
      double q = sd2 - sd * sd / (lam + n);
      return -0.5 * n * log2pi + 0.5 * std::log(lam / (lam + n)) + a * std::log(b) - std::lgamma(a) +
             std::lgamma(a + n / 2) - (a + n / 2) * std::log(b + q / 2);
    }
    case Family::Poisson: {
      double a = eta[0], b = eta[1], s = 0.0, lf = 0.0;
      for (double x : xs) {
        s += x;
        lf += std::lgamma(x + 1);
      }
      return a * std::log(b) - std::lgamma(a) + std::lgamma(a + s) - (a + s) * std::log(b + n) - lf;
    }
    case Family::Bernoulli: {
      double a = eta[0], b = eta[1], s = 0.0;
      for (double x : xs) s += x;
      auto lbeta = [](double p, double q) { return std::lgamma(p) + std::lgamma(q) - std::lgamma(p + q); };
      return lbeta(a + s, b + n - s) - lbeta(a, b);
    }
    case Family::LaplaceScale: {
      double a = eta[0], b = eta[1], s = 0.0;
      for (double x : xs) s += std::abs(x);
      return -n * std::log(2.0) + a * std::log(b) - std::lgamma(a) + std::lgamma(a + n) - (a + n) * std::log(b + s);
    }
  }
  return 0.0;
}

// log of the trapezoid rule for exp(f) over [lo, hi] with n intervals.
inline double log_trapezoid(const std::function<double(double)>& f, double lo, double hi, int n) {
  std::vector<double> v(n + 1);
  const double h = (hi - lo) / n;
  for (int i = 0; i <= n; ++i) v[i] = f(lo + i * h) + ((i == 0 || i == n) ? std::log(0.5) : 0.0);
  return lse(v) + std::log(h);
}

inline double normal_logpdf(double x, double m, double var) {
  return -0.5 * (std::log(2.0 * M_PI * var) + (x - m) * (x - m) / var);
}

inline double inv_gamma_logpdf(double v, double a, double b) {
  return a * std::log(b) - std::lgamma(a) - (a + 1) * std::log(v) - b / v;
}

// Numerical integration of the likelihood against the conjugate prior.
inline double quadrature_log_marginal(const LikelihoodSpec& spec, const std::vector<double>& xs) {
  auto eta = spec.eta();
  switch (spec.family()) {
    case Family::NormalMean: {
      double mu0 = eta[0], lam = eta[1], s0 = eta[2];
      double n = xs.size(), sum = 0.0;
      for (double x : xs) sum += x;
      double centre = (lam * mu0 + sum) / (lam + n), sd = std::sqrt(s0 / (lam + n));
      auto f = [&](double mu) {
        double v = normal_logpdf(mu, mu0, s0 / lam);
        for (double x : xs) v += normal_logpdf(x, mu, s0);
        return v;
      };
      return log_trapezoid(f, centre - 60 * sd, centre + 60 * sd, 20000);
    }
    case Family::NormalVar: {
      double mu0 = eta[0], a = eta[1], b = eta[2];
      auto f = [&](double u) {
        double v = std::exp(u), r = inv_gamma_logpdf(v, a, b) + u;
        for (double x : xs) r += normal_logpdf(x, mu0, v);
        return r;
      };
      return log_trapezoid(f, -60, 60, 120000);
    }
    case Family::NormalMeanVar: {
      double mu0 = eta[0], lam = eta[1], a = eta[2], b = eta[3];
      double n = xs.size(), sum = 0.0;
      for (double x : xs) sum += x;
      double centre = (lam * mu0 + sum) / (lam + n);
      auto outer = [&](double u) {
        double v = std::exp(u), sd = std::sqrt(v / (lam + n));
        auto inner = [&](double mu) {
          double r = normal_logpdf(mu, mu0, v / lam);
          for (double x : xs) r += normal_logpdf(x, mu, v);
          return r;
        };
        return inv_gamma_logpdf(v, a, b) + u + log_trapezoid(inner, centre - 40 * sd, centre + 40 * sd, 1600);
      };
      return log_trapezoid(outer, -40, 40, 3200);
    }
    case Family::Poisson: {
      double a = eta[0], b = eta[1];
      auto f = [&](double u) {
        double rate = std::exp(u);
        double r = a * std::log(b) - std::lgamma(a) + a * u - b * rate;  // Gamma density times the Jacobian
        for (double x : xs) r += x * u - rate - std::lgamma(x + 1);
        return r;
      };
      return log_trapezoid(f, -80, 30, 110000);
    }
    case Family::Bernoulli: {
      double a = eta[0], b = eta[1];
      auto f = [&](double u) {
        double lp = -std::log1p(std::exp(-u)), lq = -std::log1p(std::exp(u));
        double r = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * lp + b * lq;
        for (double x : xs) r += x > 0.5 ? lp : lq;
        return r;
      };
      return log_trapezoid(f, -80, 80, 160000);
    }
    case Family::LaplaceScale: {
      double a = eta[0], b = eta[1];
      auto f = [&](double u) {
        double s = std::exp(u), r = inv_gamma_logpdf(s, a, b) + u;
        for (double x : xs) r += -std::log(2 * s) - std::abs(x) / s;
        return r;
      };
      return log_trapezoid(f, -60, 60, 120000);
    }
  }
  return 0.0;
}

// Mixture moment computed directly from the atom definitions.
inline double log_mixture_moment(const ChangepointPrior& prior, int a, int b) {
  std::vector<double> terms;
  for (std::size_t k = 0; k < prior.size(); ++k) {
    const auto& atom = prior.atoms[k];
    double w = prior.weights[k];
    if (w <= 0) continue;
    double m;
    if (atom.kind() == basic::Atom::Kind::PointMass) {
      m = std::pow(atom.location(), a) * std::pow(1.0 - atom.location(), b);
    } else {
      double p = atom.alpha(), q = atom.beta_param();
      m = std::exp(std::lgamma(p + a) + std::lgamma(q + b) - std::lgamma(p + q + a + b) - std::lgamma(p) -
                   std::lgamma(q) + std::lgamma(p + q));
    }
    terms.push_back(std::log(w) + (m > 0 ? std::log(m) : kNegInf));
  }
  return lse(terms);
}

inline int column_sum(const ChangeMatrix& Z, int t) {
  int n = 0;
  for (int j = 0; j < Z.J(); ++j) n += Z(j, t);
  return n;
}

inline double log_prior(const ChangeMatrix& Z, const ChangepointPrior& prior) {
  double total = 0.0;
  for (int t = 1; t < Z.T(); ++t) {
    int N = column_sum(Z, t);
    total += log_mixture_moment(prior, N, Z.J() - N);
  }
  return total;
}

inline double log_likelihood(const DataMatrix& X, const ChangeMatrix& Z, const LikelihoodSpec& spec) {
  double total = 0.0;
  for (int j = 0; j < X.rows(); ++j) {
    std::vector<double> seg{X(j, 0)};
    for (int t = 1; t < X.cols(); ++t) {
      if (Z(j, t)) {
        total += textbook_log_marginal(spec, seg);
        seg.clear();
      }
      seg.push_back(X(j, t));
    }
    total += textbook_log_marginal(spec, seg);
  }
  return total;
}

inline double log_joint(const DataMatrix& X, const ChangeMatrix& Z, const LikelihoodSpec& spec,
                        const ChangepointPrior& prior) {
  double lp = log_prior(Z, prior);
  if (lp == kNegInf) return kNegInf;
  return lp + log_likelihood(X, Z, spec);
}

inline double posterior_mean_q_given_count(const ChangepointPrior& prior, int N, int J) {
  return std::exp(log_mixture_moment(prior, N + 1, J - N) - log_mixture_moment(prior, N, J - N));
}

// Matrix whose free entries are the bits of `code`, row-major over t >= 1.
inline ChangeMatrix decode(std::uint64_t code, int J, int T) {
  ChangeMatrix Z(J, T);
  int bit = 0;
  for (int j = 0; j < J; ++j)
    for (int t = 1; t < T; ++t, ++bit) Z(j, t) = (code >> bit) & 1u;
  return Z;
}

struct Posterior {
  double log_evidence = 0.0;
  DataMatrix marginal;
  std::vector<double> q_mean;
  ChangeMatrix map;
  double map_value = kNegInf;
};

// Two-pass natural-order enumeration of every changepoint matrix.
inline Posterior brute_force_posterior(const DataMatrix& X, const LikelihoodSpec& spec,
                                       const ChangepointPrior& prior) {
  const int J = X.rows(), T = X.cols();
  const int n = J * (T - 1);
  const std::uint64_t total = std::uint64_t{1} << n;
  std::vector<double> lj(total);
  Posterior p;
  for (std::uint64_t c = 0; c < total; ++c) {
    lj[c] = log_joint(X, decode(c, J, T), spec, prior);
    if (lj[c] > p.map_value) {
      p.map_value = lj[c];
      p.map = decode(c, J, T);
    }
  }
  p.log_evidence = lse(lj);
  p.marginal = DataMatrix(J, T, 0.0);
  p.q_mean.assign(T, 0.0);
  for (std::uint64_t c = 0; c < total; ++c) {
    if (lj[c] == kNegInf) continue;
    double w = std::exp(lj[c] - p.log_evidence);
    ChangeMatrix Z = decode(c, J, T);
    for (int j = 0; j < J; ++j)
      for (int t = 1; t < T; ++t) p.marginal(j, t) += w * Z(j, t);
    for (int t = 1; t < T; ++t) p.q_mean[t] += w * posterior_mean_q_given_count(prior, column_sum(Z, t), J);
  }
  return p;
}

// Exhaustive maximizer of log_joint over row j with the other rows fixed.
inline std::pair<ChangeMatrix, double> row_argmax(const DataMatrix& X, ChangeMatrix Z, int j, const LikelihoodSpec& spec,
                                                  const ChangepointPrior& prior) {
  const int T = X.cols();
  ChangeMatrix best = Z;
  double best_v = kNegInf;
  for (std::uint64_t c = 0; c < (std::uint64_t{1} << (T - 1)); ++c) {
    for (int t = 1; t < T; ++t) Z(j, t) = (c >> (t - 1)) & 1u;
    double v = log_joint(X, Z, spec, prior);
    if (v > best_v) best_v = v, best = Z;
  }
  return {best, best_v};
}

// Exhaustive maximizer over column t with the other columns fixed.
inline std::pair<ChangeMatrix, double> column_argmax(const DataMatrix& X, ChangeMatrix Z, int t,
                                                     const LikelihoodSpec& spec, const ChangepointPrior& prior) {
  const int J = X.rows();
  ChangeMatrix best = Z;
  double best_v = kNegInf;
  for (std::uint64_t c = 0; c < (std::uint64_t{1} << J); ++c) {
    for (int j = 0; j < J; ++j) Z(j, t) = (c >> j) & 1u;
    double v = log_joint(X, Z, spec, prior);
    if (v > best_v) best_v = v, best = Z;
  }
  return {best, best_v};
}

// Random test fixtures.
inline ChangepointPrior random_prior(basic::Rng& rng, bool allow_beta = true) {
  int K = 1 + static_cast<int>(rng.below(4));
  std::vector<basic::Atom> atoms;
  std::vector<double> w;
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    if (allow_beta && rng.uniform() < 0.3)
      atoms.push_back(basic::Atom::beta(0.5 + 3 * rng.uniform(), 0.5 + 3 * rng.uniform()));
    else
      atoms.push_back(basic::Atom::point(0.05 + 0.9 * rng.uniform()));
    w.push_back(0.1 + rng.uniform());
    total += w.back();
  }
  for (double& x : w) x /= total;
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < w.size(); ++k) s += w[k];
  w.back() = 1.0 - s;
  return ChangepointPrior(std::move(atoms), std::move(w));
}

inline LikelihoodSpec random_spec(basic::Rng& rng, Family f) {
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  switch (f) {
    case Family::NormalMean: return LikelihoodSpec::normal_mean(u(-1, 1), u(0.2, 3), u(0.3, 2));
    case Family::NormalVar: return LikelihoodSpec::normal_var(u(-1, 1), u(0.6, 4), u(0.3, 3));
    case Family::NormalMeanVar: return LikelihoodSpec::normal_meanvar(u(-1, 1), u(0.2, 3), u(0.6, 4), u(0.3, 3));
    case Family::Poisson: return LikelihoodSpec::poisson(u(0.5, 4), u(0.3, 3));
    case Family::Bernoulli: return LikelihoodSpec::bernoulli(u(0.5, 3), u(0.5, 3));
    case Family::LaplaceScale: return LikelihoodSpec::laplace_scale(u(0.6, 4), u(0.3, 3));
  }
  return LikelihoodSpec::normal_mean(0, 1, 1);
}

inline double random_observation(basic::Rng& rng, Family f) {
  switch (f) {
    case Family::Poisson: return static_cast<double>(rng.below(6));
    case Family::Bernoulli: return static_cast<double>(rng.below(2));
    default: return -2.0 + 4.0 * rng.uniform();
  }
}

inline DataMatrix random_data(basic::Rng& rng, int J, int T, Family f) {
  DataMatrix X(J, T);
  for (double& v : X.values()) v = random_observation(rng, f);
  return X;
}

inline ChangeMatrix random_Z(basic::Rng& rng, int J, int T, double p) {
  ChangeMatrix Z(J, T);
  for (int j = 0; j < J; ++j)
    for (int t = 1; t < T; ++t) Z(j, t) = rng.uniform() < p;
  return Z;
}

inline const std::vector<Family>& all_families() {
  static const std::vector<Family> f{Family::NormalMean, Family::NormalVar,  Family::NormalMeanVar,
                                     Family::Poisson,    Family::Bernoulli, Family::LaplaceScale};
  return f;
}

}  // namespace oracle

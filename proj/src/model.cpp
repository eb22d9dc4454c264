#include "basic/model.hpp"

#include <cmath>
#include <random>

#include "basic/errors.hpp"
#include "basic/numeric.hpp"
#include "basic/rng.hpp"

namespace basic {

std::vector<std::pair<int, int>> row_segments(const ChangeMatrix& Z, int j) {
  std::vector<std::pair<int, int>> out;
  int start = 0;
  for (int t = 1; t < Z.T(); ++t) {
    if (Z(j, t)) {
      out.emplace_back(start, t);
      start = t;
    }
  }
  if (Z.T() > 0) out.emplace_back(start, Z.T());
  return out;
}

double log_likelihood_given_Z(const DataMatrix& X, const ChangeMatrix& Z, const LikelihoodSpec& spec) {
  if (X.rows() != Z.J() || X.cols() != Z.T()) throw ValidationError("data and change matrix shapes differ");
  FamilyKernel kernel(spec);
  double total = 0.0;
  for (int j = 0; j < X.rows(); ++j) {
    for (auto [a, b] : row_segments(Z, j)) {
      SegmentAccumulator acc(spec.family());
      for (int t = a; t < b; ++t) acc.extend_right(X(j, t));
      total += kernel.log_marginal(acc.stats());
    }
  }
  return total;
}

double log_joint(const DataMatrix& X, const ChangeMatrix& Z, const LikelihoodSpec& spec,
                 const PriorMoments& moments) {
  double prior = log_prior_Z(Z, moments);
  if (prior == kNegInf) return kNegInf;
  return log_likelihood_given_Z(X, Z, spec) + prior;
}

namespace {

struct ThetaDraw {
  double reported;  // scalar summarised by posterior_mean_theta
  double mean;
  double var;
};

ThetaDraw draw_theta(const LikelihoodSpec& spec, Rng& rng) {
  auto& eng = rng.engine();
  auto eta = spec.eta();
  auto inv_gamma = [&](double a, double b) { return 1.0 / std::gamma_distribution<double>(a, 1.0 / b)(eng); };
  switch (spec.family()) {
    case Family::NormalMean: {
      double mu = std::normal_distribution<double>(eta[0], std::sqrt(eta[2] / eta[1]))(eng);
      return {mu, mu, eta[2]};
    }
    case Family::NormalVar: {
      double v = inv_gamma(eta[1], eta[2]);
      return {v, eta[0], v};
    }
    case Family::NormalMeanVar: {
      double v = inv_gamma(eta[2], eta[3]);
      double mu = std::normal_distribution<double>(eta[0], std::sqrt(v / eta[1]))(eng);
      return {mu, mu, v};
    }
    case Family::Poisson: {
      double rate = std::gamma_distribution<double>(eta[0], 1.0 / eta[1])(eng);
      return {rate, rate, 0.0};
    }
    case Family::Bernoulli: {
      double x = std::gamma_distribution<double>(eta[0], 1.0)(eng);
      double y = std::gamma_distribution<double>(eta[1], 1.0)(eng);
      double p = x / (x + y);
      return {p, p, 0.0};
    }
    case Family::LaplaceScale: {
      double nu = inv_gamma(eta[0], eta[1]);
      return {nu, 0.0, nu};
    }
  }
  return {0.0, 0.0, 0.0};
}

double draw_observation(const LikelihoodSpec& spec, const ThetaDraw& th, Rng& rng) {
  auto& eng = rng.engine();
  switch (spec.family()) {
    case Family::NormalMean:
    case Family::NormalVar:
    case Family::NormalMeanVar: return std::normal_distribution<double>(th.mean, std::sqrt(th.var))(eng);
    case Family::Poisson: return static_cast<double>(std::poisson_distribution<long>(th.mean)(eng));
    case Family::Bernoulli: return rng.uniform() < th.mean ? 1.0 : 0.0;
    case Family::LaplaceScale: {
      double e = std::exponential_distribution<double>(1.0 / th.var)(eng);
      return rng.uniform() < 0.5 ? -e : e;
    }
  }
  return 0.0;
}

}  // namespace

SyntheticData generate_synthetic(int J, int T, const ChangepointPrior& prior, const LikelihoodSpec& spec,
                                 std::uint64_t seed) {
  if (J < 1 || T < 1) throw ValidationError("synthetic data needs J >= 1 and T >= 1");
  prior.validate();
  Rng root(seed);
  Rng q_rng = root.split("q");
  Rng z_rng = root.split("z");
  Rng theta_rng = root.split("theta");
  Rng x_rng = root.split("x");

  SyntheticData out{DataMatrix(J, T), ChangeMatrix(J, T), std::vector<double>(T, 0.0), DataMatrix(J, T)};
  for (int t = 1; t < T; ++t) out.q[t] = prior.draw_q(q_rng);
  for (int t = 1; t < T; ++t)
    for (int j = 0; j < J; ++j) out.Z(j, t) = z_rng.bernoulli(out.q[t]) ? 1 : 0;

  for (int j = 0; j < J; ++j) {
    ThetaDraw th{};
    for (int t = 0; t < T; ++t) {
      if (t == 0 || out.Z(j, t)) th = draw_theta(spec, theta_rng);
      out.theta(j, t) = th.reported;
      out.X(j, t) = draw_observation(spec, th, x_rng);
    }
  }
  return out;
}

}  // namespace basic

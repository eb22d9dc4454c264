#include "basic/likelihood.hpp"

#include <cmath>
#include <sstream>

#include "basic/errors.hpp"
#include "basic/numeric.hpp"

namespace basic {

namespace {

bool is_normal(Family f) {
  return f == Family::NormalMean || f == Family::NormalVar || f == Family::NormalMeanVar;
}

double log_factorial(double x) { return std::lgamma(x + 1.0); }

}  // namespace

std::string_view family_name(Family family) {
  switch (family) {
    case Family::NormalMean: return "normal-mean";
    case Family::NormalVar: return "normal-var";
    case Family::NormalMeanVar: return "normal-meanvar";
    case Family::Poisson: return "poisson";
    case Family::Bernoulli: return "bernoulli";
    case Family::LaplaceScale: return "laplace-scale";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::NormalMean, Family::NormalVar, Family::NormalMeanVar, Family::Poisson,
                   Family::Bernoulli, Family::LaplaceScale})
    if (family_name(f) == name) return f;
  throw ValidationError("unknown likelihood family '" + std::string(name) + "'");
}

int LikelihoodSpec::eta_size(Family family) {
  switch (family) {
    case Family::NormalMean:
    case Family::NormalVar: return 3;
    case Family::NormalMeanVar: return 4;
    default: return 2;
  }
}

std::vector<std::string> LikelihoodSpec::eta_names(Family family) {
  switch (family) {
    case Family::NormalMean: return {"mu0", "lambda", "sigma0_sq"};
    case Family::NormalVar: return {"mu0", "alpha", "beta"};
    case Family::NormalMeanVar: return {"mu0", "lambda", "alpha", "beta"};
    default: return {"alpha", "beta"};
  }
}

bool LikelihoodSpec::eta_positive(Family family, int index) { return !(is_normal(family) && index == 0); }

LikelihoodSpec::LikelihoodSpec(Family family, std::initializer_list<double> eta) : family_(family) {
  size_ = static_cast<int>(eta.size());
  std::copy(eta.begin(), eta.end(), eta_.begin());
  auto names = eta_names(family);
  for (int i = 0; i < size_; ++i) {
    if (!std::isfinite(eta_[i]))
      throw ValidationError(std::string(family_name(family)) + ": " + names[i] + " must be finite");
    if (eta_positive(family, i) && !(eta_[i] > 0.0))
      throw ValidationError(std::string(family_name(family)) + ": " + names[i] + " must be positive");
  }
}

LikelihoodSpec LikelihoodSpec::normal_mean(double mu0, double lambda, double sigma0_sq) {
  return LikelihoodSpec(Family::NormalMean, {mu0, lambda, sigma0_sq});
}
LikelihoodSpec LikelihoodSpec::normal_var(double mu0, double alpha, double beta) {
  return LikelihoodSpec(Family::NormalVar, {mu0, alpha, beta});
}
LikelihoodSpec LikelihoodSpec::normal_meanvar(double mu0, double lambda, double alpha, double beta) {
  return LikelihoodSpec(Family::NormalMeanVar, {mu0, lambda, alpha, beta});
}
LikelihoodSpec LikelihoodSpec::poisson(double alpha, double beta) { return LikelihoodSpec(Family::Poisson, {alpha, beta}); }
LikelihoodSpec LikelihoodSpec::bernoulli(double alpha, double beta) {
  return LikelihoodSpec(Family::Bernoulli, {alpha, beta});
}
LikelihoodSpec LikelihoodSpec::laplace_scale(double alpha, double beta) {
  return LikelihoodSpec(Family::LaplaceScale, {alpha, beta});
}

LikelihoodSpec LikelihoodSpec::from_eta(Family family, std::span<const double> eta) {
  if (static_cast<int>(eta.size()) != eta_size(family))
    throw ValidationError(std::string(family_name(family)) + " expects " + std::to_string(eta_size(family)) +
                          " hyperparameters");
  switch (family) {
    case Family::NormalMean: return normal_mean(eta[0], eta[1], eta[2]);
    case Family::NormalVar: return normal_var(eta[0], eta[1], eta[2]);
    case Family::NormalMeanVar: return normal_meanvar(eta[0], eta[1], eta[2], eta[3]);
    case Family::Poisson: return poisson(eta[0], eta[1]);
    case Family::Bernoulli: return bernoulli(eta[0], eta[1]);
    case Family::LaplaceScale: return laplace_scale(eta[0], eta[1]);
  }
  throw ValidationError("unknown family");
}

double LikelihoodSpec::mu0() const {
  if (!is_normal(family_)) throw ValidationError("mu0 is defined only for normal families");
  return eta_[0];
}
double LikelihoodSpec::lambda() const {
  if (family_ != Family::NormalMean && family_ != Family::NormalMeanVar)
    throw ValidationError("lambda is not a hyperparameter of " + std::string(family_name(family_)));
  return eta_[1];
}
double LikelihoodSpec::sigma0_sq() const {
  if (family_ != Family::NormalMean) throw ValidationError("sigma0_sq is defined only for normal-mean");
  return eta_[2];
}
double LikelihoodSpec::alpha() const {
  switch (family_) {
    case Family::NormalMean: throw ValidationError("normal-mean has no alpha");
    case Family::NormalVar: return eta_[1];
    case Family::NormalMeanVar: return eta_[2];
    default: return eta_[0];
  }
}
double LikelihoodSpec::beta() const {
  switch (family_) {
    case Family::NormalMean: throw ValidationError("normal-mean has no beta");
    case Family::NormalVar: return eta_[2];
    case Family::NormalMeanVar: return eta_[3];
    default: return eta_[1];
  }
}

void LikelihoodSpec::check_observation(double x) const {
  if (!std::isfinite(x)) throw DataError("observation is not finite");
  if (family_ == Family::Poisson && (x < 0.0 || x != std::floor(x)))
    throw DataError("poisson observations must be nonnegative integers");
  if (family_ == Family::Bernoulli && x != 0.0 && x != 1.0)
    throw DataError("bernoulli observations must be 0 or 1");
}

void LikelihoodSpec::check_data(const DataMatrix& X) const {
  for (int j = 0; j < X.rows(); ++j)
    for (int t = 0; t < X.cols(); ++t) {
      try {
        check_observation(X(j, t));
      } catch (const DataError& e) {
        std::ostringstream os;
        os << "row " << j + 1 << ", column " << t + 1 << ": " << e.what() << " (family "
           << family_name(family_) << ")";
        throw DataError(os.str(), j + 1, t + 1);
      }
    }
}

void SegmentAccumulator::reset() { *this = SegmentAccumulator(family_); }

void SegmentAccumulator::add(double x) {
  if (!std::isfinite(x)) throw DataError("observation is not finite");
  if (family_ == Family::Poisson && (x < 0.0 || x != std::floor(x)))
    throw DataError("poisson observations must be nonnegative integers");
  if (family_ == Family::Bernoulli && x != 0.0 && x != 1.0)
    throw DataError("bernoulli observations must be 0 or 1");
  if (n_ == 0) shift_ = x;
  double d = x - shift_;
  ++n_;
  shifted_sum_ += d;
  shifted_sq_ += d * d;
  sum_abs_ += std::abs(x);
  if (family_ == Family::Poisson) sum_log_fact_ += log_factorial(x);
}

SegmentStats SegmentAccumulator::stats() const {
  SegmentStats s;
  s.n = n_;
  if (n_ == 0) return s;
  double shifted_mean = shifted_sum_ / n_;
  s.mean = shift_ + shifted_mean;
  s.ss = std::max(0.0, shifted_sq_ - shifted_sum_ * shifted_mean);
  s.sum = sum();
  s.sum_abs = sum_abs_;
  s.sum_log_fact = sum_log_fact_;
  return s;
}

FamilyKernel::FamilyKernel(const LikelihoodSpec& spec, int max_length) : spec_(spec) {
  length_terms_.resize(std::max(0, max_length) + 1);
  for (int n = 0; n <= max_length; ++n) length_terms_[n] = length_term(n);
  if (spec.family() == Family::NormalMean || spec.family() == Family::NormalMeanVar) {
    shrink_.resize(std::max(0, max_length) + 1);
    double lam = spec.lambda();
    for (int n = 0; n <= max_length; ++n) shrink_[n] = lam * n / (lam + n);
  }
}

double FamilyKernel::length_term(int n) const {
  auto eta = spec_.eta();
  switch (spec_.family()) {
    case Family::NormalMean: {
      double lam = eta[1], s0 = eta[2];
      return -0.5 * n * (kLogTwoPi + std::log(s0)) + 0.5 * (std::log(lam) - std::log(lam + n));
    }
    case Family::NormalVar: {
      double a = eta[1], b = eta[2];
      return -0.5 * n * kLogTwoPi + a * std::log(b) - std::lgamma(a) + std::lgamma(a + 0.5 * n);
    }
    case Family::NormalMeanVar: {
      double lam = eta[1], a = eta[2], b = eta[3];
      return 0.5 * (std::log(lam) - std::log(lam + n)) + a * std::log(b) - std::lgamma(a) - 0.5 * n * kLogTwoPi +
             std::lgamma(a + 0.5 * n);
    }
    case Family::Poisson: return eta[0] * std::log(eta[1]) - std::lgamma(eta[0]);
    case Family::Bernoulli: {
      double a = eta[0], b = eta[1];
      return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) - std::lgamma(a + b + n);
    }
    case Family::LaplaceScale: {
      double a = eta[0], b = eta[1];
      return -n * std::log(2.0) + a * std::log(b) - std::lgamma(a) + std::lgamma(a + n);
    }
  }
  return 0.0;
}

double FamilyKernel::log_marginal(const SegmentStats& s) const {
  const int n = s.n;
  if (n <= 0) return 0.0;
  const bool tabulated = n < static_cast<int>(length_terms_.size());
  const double len = tabulated ? length_terms_[n] : length_term(n);
  auto eta = spec_.eta();
  switch (spec_.family()) {
    case Family::NormalMean: {
      double mu0 = eta[0], lam = eta[1], s0 = eta[2];
      double shrink = tabulated ? shrink_[n] : lam * n / (lam + n);
      double dm = s.mean - mu0;
      return len - (s.ss + shrink * dm * dm) / (2.0 * s0);
    }
    case Family::NormalVar: {
      double mu0 = eta[0], a = eta[1], b = eta[2];
      double dm = s.mean - mu0;
      return len - (a + 0.5 * n) * std::log(b + 0.5 * (s.ss + n * dm * dm));
    }
    case Family::NormalMeanVar: {
      double mu0 = eta[0], lam = eta[1], a = eta[2], b = eta[3];
      double shrink = tabulated ? shrink_[n] : lam * n / (lam + n);
      double dm = s.mean - mu0;
      return len - (a + 0.5 * n) * std::log(b + 0.5 * (s.ss + shrink * dm * dm));
    }
    case Family::Poisson: {
      double a = eta[0], b = eta[1];
      return len - s.sum_log_fact + std::lgamma(a + s.sum) - (a + s.sum) * std::log(b + n);
    }
    case Family::Bernoulli: {
      double a = eta[0], b = eta[1];
      return len + std::lgamma(a + s.sum) + std::lgamma(b + n - s.sum);
    }
    case Family::LaplaceScale: {
      double a = eta[0], b = eta[1];
      return len - (a + n) * std::log(b + s.sum_abs);
    }
  }
  return 0.0;
}

double segment_log_marginal(const LikelihoodSpec& spec, const SegmentAccumulator& acc) {
  if (acc.n() == 0) return 0.0;
  return FamilyKernel(spec).log_marginal(acc.stats());
}

double posterior_mean_theta(const LikelihoodSpec& spec, const SegmentStats& s) {
  if (s.n < 1) throw ValidationError("posterior mean needs a nonempty segment");
  auto eta = spec.eta();
  const double n = s.n;
  switch (spec.family()) {
    case Family::NormalMean:
    case Family::NormalMeanVar: return (eta[1] * eta[0] + s.sum) / (eta[1] + n);
    case Family::NormalVar: {
      double a = eta[1], b = eta[2], dm = s.mean - eta[0];
      if (!(a + 0.5 * n > 1.0))
        throw ValidationError("normal-var: posterior mean of the variance is undefined (alpha + n/2 <= 1)");
      return (b + 0.5 * (s.ss + n * dm * dm)) / (a + 0.5 * n - 1.0);
    }
    case Family::Poisson: return (eta[0] + s.sum) / (eta[1] + n);
    case Family::Bernoulli: return (eta[0] + s.sum) / (eta[0] + eta[1] + n);
    case Family::LaplaceScale: {
      double a = eta[0], b = eta[1];
      if (!(a + n > 1.0))
        throw ValidationError("laplace-scale: posterior mean of the scale is undefined (alpha + n <= 1)");
      return (b + s.sum_abs) / (a + n - 1.0);
    }
  }
  return 0.0;
}

double posterior_mean_theta(const LikelihoodSpec& spec, const SegmentAccumulator& acc) {
  return posterior_mean_theta(spec, acc.stats());
}

SegmentTable::SegmentTable(const DataMatrix& X, const LikelihoodSpec& spec)
    : J_(X.rows()), T_(X.cols()), kernel_(spec, X.cols()) {
  spec.check_data(X);
  const std::size_t size = static_cast<std::size_t>(J_) * (T_ + 1);
  const Family fam = spec.family();
  ref_.assign(J_, 0.0);
  if (is_normal(fam)) {
    s1_.assign(size, 0.0);
    s2_.assign(size, 0.0);
  } else {
    s1_.assign(size, 0.0);  // raw sums
    if (fam == Family::Poisson) slf_.assign(size, 0.0);
    if (fam == Family::LaplaceScale) sabs_.assign(size, 0.0);
  }
  for (int j = 0; j < J_; ++j) {
    auto row = X.row(j);
    if (is_normal(fam)) {
      double mean = 0.0;
      for (double x : row) mean += x;
      ref_[j] = T_ > 0 ? mean / T_ : 0.0;
    }
    for (int t = 0; t < T_; ++t) {
      double x = row[t];
      double d = x - ref_[j];
      s1_[idx(j, t + 1)] = s1_[idx(j, t)] + d;
      if (!s2_.empty()) s2_[idx(j, t + 1)] = s2_[idx(j, t)] + d * d;
      if (!slf_.empty()) slf_[idx(j, t + 1)] = slf_[idx(j, t)] + log_factorial(x);
      if (!sabs_.empty()) sabs_[idx(j, t + 1)] = sabs_[idx(j, t)] + std::abs(x);
    }
  }
}

SegmentStats SegmentTable::stats(int j, int a, int b) const {
  SegmentStats s;
  s.n = b - a;
  if (s.n <= 0) return s;
  const double c1 = s1_[idx(j, b)] - s1_[idx(j, a)];
  const double mc = c1 / s.n;
  s.mean = ref_[j] + mc;
  s.sum = c1 + s.n * ref_[j];
  if (!s2_.empty()) s.ss = std::max(0.0, (s2_[idx(j, b)] - s2_[idx(j, a)]) - c1 * mc);
  if (!slf_.empty()) s.sum_log_fact = slf_[idx(j, b)] - slf_[idx(j, a)];
  if (!sabs_.empty()) s.sum_abs = sabs_[idx(j, b)] - sabs_[idx(j, a)];
  return s;
}

}  // namespace basic

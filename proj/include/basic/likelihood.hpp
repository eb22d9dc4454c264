#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "basic/matrix.hpp"

namespace basic {

enum class Family { NormalMean, NormalVar, NormalMeanVar, Poisson, Bernoulli, LaplaceScale };

std::string_view family_name(Family family);
Family parse_family(std::string_view name);

// Observation family plus the hyperparameters eta of its conjugate prior.
// Hyperparameter layout per family:
//   normal-mean      (mu0, lambda, sigma0_sq)
//   normal-var       (mu0, alpha, beta)
//   normal-meanvar   (mu0, lambda, alpha, beta)
//   poisson          (alpha, beta)
//   bernoulli        (alpha, beta)
//   laplace-scale    (alpha, beta)
class LikelihoodSpec {
 public:
  static LikelihoodSpec normal_mean(double mu0, double lambda, double sigma0_sq);
  static LikelihoodSpec normal_var(double mu0, double alpha, double beta);
  static LikelihoodSpec normal_meanvar(double mu0, double lambda, double alpha, double beta);
  static LikelihoodSpec poisson(double alpha, double beta);
  static LikelihoodSpec bernoulli(double alpha, double beta);
  static LikelihoodSpec laplace_scale(double alpha, double beta);
  static LikelihoodSpec from_eta(Family family, std::span<const double> eta);

  Family family() const noexcept { return family_; }
  std::span<const double> eta() const noexcept { return {eta_.data(), static_cast<std::size_t>(size_)}; }
  int eta_size() const noexcept { return size_; }
  static int eta_size(Family family);
  static std::vector<std::string> eta_names(Family family);
  // True for hyperparameters that must be strictly positive.
  static bool eta_positive(Family family, int index);

  double mu0() const;
  double lambda() const;
  double sigma0_sq() const;
  double alpha() const;
  double beta() const;

  // Throws DataError if x lies outside the family's support.
  void check_observation(double x) const;
  void check_data(const DataMatrix& X) const;

  bool operator==(const LikelihoodSpec&) const = default;

 private:
  LikelihoodSpec(Family family, std::initializer_list<double> eta);
  Family family_;
  std::array<double, 4> eta_{};
  int size_ = 0;
};

// Family-independent sufficient statistics of one segment.
struct SegmentStats {
  int n = 0;
  double mean = 0.0;      // sample mean
  double ss = 0.0;        // sum of squared deviations from the mean
  double sum = 0.0;       // sum of x
  double sum_abs = 0.0;   // sum of |x|
  double sum_log_fact = 0.0;  // sum of log(x!)
};

// Running segment statistics supporting O(1) growth at either end. Squares
// are accumulated relative to the first observation so that long segments
// with small spread do not lose precision.
class SegmentAccumulator {
 public:
  explicit SegmentAccumulator(Family family) : family_(family) {}

  void extend_right(double x) { add(x); }
  void extend_left(double x) { add(x); }
  void reset();

  int n() const noexcept { return n_; }
  double sum() const noexcept { return shifted_sum_ + n_ * shift_; }
  double sum_sq() const noexcept { return shifted_sq_ + 2.0 * shift_ * shifted_sum_ + n_ * shift_ * shift_; }
  double sum_abs() const noexcept { return sum_abs_; }
  double sum_log_fact() const noexcept { return sum_log_fact_; }
  SegmentStats stats() const;

 private:
  void add(double x);
  Family family_;
  int n_ = 0;
  double shift_ = 0.0;
  double shifted_sum_ = 0.0;
  double shifted_sq_ = 0.0;
  double sum_abs_ = 0.0;
  double sum_log_fact_ = 0.0;
};

// Evaluates log P(segment | eta) from segment statistics. Terms depending
// only on the segment length are tabulated up to `max_length`; longer
// segments are evaluated directly.
class FamilyKernel {
 public:
  explicit FamilyKernel(const LikelihoodSpec& spec, int max_length = 0);
  double log_marginal(const SegmentStats& s) const;
  const LikelihoodSpec& spec() const noexcept { return spec_; }

 private:
  double length_term(int n) const;
  LikelihoodSpec spec_;
  std::vector<double> length_terms_;
  std::vector<double> shrink_;  // lambda n / (lambda + n) for normal families
};

// log P(segment); 0 for an empty segment.
double segment_log_marginal(const LikelihoodSpec& spec, const SegmentAccumulator& acc);

// Conjugate posterior mean of the segment parameter (the mean for
// normal-mean and normal-meanvar, the variance for normal-var, the rate for
// poisson, the success probability for bernoulli, the scale for laplace).
double posterior_mean_theta(const LikelihoodSpec& spec, const SegmentAccumulator& acc);
double posterior_mean_theta(const LikelihoodSpec& spec, const SegmentStats& s);

// Prefix-sum tables giving O(1) log P_j(a, b) for the half-open range
// [a, b) of any row.
class SegmentTable {
 public:
  SegmentTable(const DataMatrix& X, const LikelihoodSpec& spec);

  int J() const noexcept { return J_; }
  int T() const noexcept { return T_; }
  const LikelihoodSpec& spec() const noexcept { return kernel_.spec(); }

  SegmentStats stats(int j, int a, int b) const;
  double log_marginal(int j, int a, int b) const {
    if (b <= a) return 0.0;
    return kernel_.log_marginal(stats(j, a, b));
  }

 private:
  std::size_t idx(int j, int t) const { return static_cast<std::size_t>(j) * (T_ + 1) + t; }
  int J_;
  int T_;
  FamilyKernel kernel_;
  std::vector<double> ref_;  // per-row centering value
  std::vector<double> s1_, s2_, sabs_, slf_;
};

}  // namespace basic

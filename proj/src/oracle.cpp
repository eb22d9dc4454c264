#include "basic/oracle.hpp"

#include <bit>
#include <cmath>
#include <cstdint>

#include "basic/errors.hpp"
#include "basic/model.hpp"
#include "basic/numeric.hpp"

namespace basic {

namespace {

// Tracks log P(X | Z) and log P(Z) under single-entry flips. Columns the
// prior forbids are counted rather than summed so flips stay reversible.
class IncrementalJoint {
 public:
  IncrementalJoint(const SegmentTable& table, const PriorMoments& moments)
      : table_(table), moments_(moments), Z_(table.J(), table.T()), counts_(table.T(), 0) {
    resync();
  }

  const ChangeMatrix& Z() const { return Z_; }
  int count(int t) const { return counts_[t]; }

  double value() const { return forbidden_ > 0 ? kNegInf : loglik_ + prior_; }

  void flip(int j, int t) {
    int prev = 0, next = table_.T();
    for (int u = t - 1; u >= 1; --u)
      if (Z_(j, u)) {
        prev = u;
        break;
      }
    for (int u = t + 1; u < table_.T(); ++u)
      if (Z_(j, u)) {
        next = u;
        break;
      }
    const double merged = table_.log_marginal(j, prev, next);
    const double split = table_.log_marginal(j, prev, t) + table_.log_marginal(j, t, next);
    remove_column(t);
    if (Z_(j, t)) {
      Z_(j, t) = 0;
      --counts_[t];
      loglik_ += merged - split;
    } else {
      Z_(j, t) = 1;
      ++counts_[t];
      loglik_ += split - merged;
    }
    add_column(t);
  }

  // Recomputes both terms from scratch to shed accumulated rounding.
  void resync() {
    loglik_ = 0.0;
    for (int j = 0; j < Z_.J(); ++j)
      for (auto [a, b] : row_segments(Z_, j)) loglik_ += table_.log_marginal(j, a, b);
    prior_ = 0.0;
    forbidden_ = 0;
    for (int t = 1; t < Z_.T(); ++t) {
      counts_[t] = Z_.column_count(t);
      add_column(t);
    }
  }

 private:
  void add_column(int t) {
    double lf = moments_.log_f[counts_[t]];
    if (lf == kNegInf)
      ++forbidden_;
    else
      prior_ += lf;
  }
  void remove_column(int t) {
    double lf = moments_.log_f[counts_[t]];
    if (lf == kNegInf)
      --forbidden_;
    else
      prior_ -= lf;
  }

  const SegmentTable& table_;
  const PriorMoments& moments_;
  ChangeMatrix Z_;
  std::vector<int> counts_;
  double loglik_ = 0.0;
  double prior_ = 0.0;
  int forbidden_ = 0;
};

}  // namespace

EnumerationResult enumerate_posterior(const DataMatrix& X, const PriorMoments& moments, const LikelihoodSpec& spec) {
  const int J = X.rows(), T = X.cols();
  if (J < 1 || T < 1) throw ValidationError("enumeration needs a nonempty data matrix");
  if (moments.J != J) throw ValidationError("moment tables were built for a different J");
  const long long free_sites = static_cast<long long>(J) * (T - 1);
  if (free_sites > kEnumerationCap)
    throw ValidationError("enumeration refused: J(T-1) = " + std::to_string(free_sites) + " exceeds the cap of " +
                          std::to_string(kEnumerationCap));

  SegmentTable table(X, spec);
  IncrementalJoint joint(table, moments);
  const int n = static_cast<int>(free_sites);
  const std::uint64_t total = std::uint64_t{1} << n;

  EnumerationResult res;
  res.marginal = DataMatrix(J, T, 0.0);
  res.q_mean.assign(T, 0.0);
  res.map = joint.Z();
  res.map_log_joint = kNegInf;

  // Running weighted sums relative to the largest log_joint seen so far.
  double top = kNegInf, mass = 0.0;
  auto visit = [&] {
    const double lj = joint.value();
    if (lj > res.map_log_joint) {
      res.map_log_joint = lj;
      res.map = joint.Z();
    }
    if (lj == kNegInf) return;
    if (lj > top) {
      const double r = top == kNegInf ? 0.0 : std::exp(top - lj);
      mass *= r;
      for (double& v : res.marginal.values()) v *= r;
      for (double& v : res.q_mean) v *= r;
      top = lj;
    }
    const double w = std::exp(lj - top);
    mass += w;
    const ChangeMatrix& Z = joint.Z();
    for (int j = 0; j < J; ++j)
      for (int t = 1; t < T; ++t)
        if (Z(j, t)) res.marginal(j, t) += w;
    for (int t = 1; t < T; ++t) res.q_mean[t] += w * moments.posterior_mean_q(joint.count(t));
  };

  visit();
  for (std::uint64_t i = 1; i < total; ++i) {
    const int bit = std::countr_zero(i);
    joint.flip(bit / (T - 1), 1 + bit % (T - 1));
    if ((i & 1023) == 0) joint.resync();
    visit();
  }
  if (mass <= 0.0) throw ValidationError("every changepoint matrix has zero prior probability");
  for (double& v : res.marginal.values()) v /= mass;
  for (double& v : res.q_mean) v /= mass;
  res.log_evidence = top + std::log(mass);
  res.configurations = static_cast<long long>(total);
  return res;
}

}  // namespace basic

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "basic/likelihood.hpp"
#include "basic/matrix.hpp"
#include "basic/optim.hpp"
#include "basic/prior.hpp"

namespace basic {

// Burn-in iteration counts after which an M-step runs (1-based: 5 means
// after the fifth completed iteration).
struct MCEMSchedule {
  std::vector<int> iterations;

  // {5,10,20,30,50} when burn-in is 50, otherwise {10,20,40,60,100}
  // truncated to the burn-in length.
  static MCEMSchedule default_for(int burnin);
  // Throws ValidationError unless strictly increasing within [1, burnin].
  void validate(int burnin) const;
  bool contains(int iteration) const;
};

struct SegmentRecord {
  int row = 0;
  int start = 0;
  int end = 0;
  SegmentStats stats;
  long multiplicity = 0;
};

// Monte Carlo E-step statistics: per-sample column-count histograms and the
// distinct row segments seen across samples, with multiplicities.
class MCEMStatistics {
 public:
  MCEMStatistics(int J, int T);

  void add(const ChangeMatrix& Z, const SegmentTable& table);
  // Concatenates the samples of another collection.
  void merge(const MCEMStatistics& other);
  void clear();

  int J() const noexcept { return J_; }
  int T() const noexcept { return T_; }
  long samples() const noexcept { return static_cast<long>(histograms_.size()); }
  const std::vector<std::vector<long>>& histograms() const noexcept { return histograms_; }
  // Empirical column-count distribution over 0..J.
  std::vector<double> empirical_counts() const;
  // Distinct segments ordered by (row, start, end).
  std::vector<SegmentRecord> segments() const;
  std::size_t distinct_segments() const noexcept { return segments_.size(); }

 private:
  int J_;
  int T_;
  std::vector<std::vector<long>> histograms_;
  std::map<std::uint64_t, SegmentRecord> segments_;
};

MCEMStatistics collect_statistics(std::span<const ChangeMatrix> samples, const SegmentTable& table);

// Column-count distribution implied by a prior:
// mu(l) = C(J, l) * sum_k w_k m_k(l).
std::vector<double> implied_count_distribution(const ChangepointPrior& prior, int J);

// KL(mu_bar || mu_prior) over the counts the dictionary can produce.
double count_divergence(std::span<const double> mu_bar, const ChangepointPrior& prior, int J);

struct WeightUpdate {
  std::vector<double> weights;
  std::vector<double> divergence;  // KL before the first and after every iteration
  int iterations = 0;
  bool converged = false;
  // Counts with positive empirical mass that no atom can produce; they are
  // left out of the fit.
  std::vector<int> unreachable_counts;
};

// Minimizes KL(mu_bar || mu_prior) over the weights of `prior`'s dictionary,
// starting from prior.weights. Each iteration takes the better of a
// multiplicative fixed-point step and a damped Newton step on the simplex,
// so the divergence never increases.
WeightUpdate update_weights(std::span<const double> mu_bar, const ChangepointPrior& prior, int J,
                            int max_iterations = 1000, double tolerance = 1e-8);

// Sum over segment records of multiplicity * log P(segment | eta).
double eta_objective(std::span<const SegmentRecord> segments, const LikelihoodSpec& spec);

struct EtaUpdate {
  LikelihoodSpec spec;
  double objective_before = 0.0;
  double objective_after = 0.0;
  int evaluations = 0;
  bool converged = false;
  std::string warning;  // empty unless the previous eta was kept after a failure
};

// Maximizes eta_objective over the hyperparameters flagged in `free_mask`
// (all when empty), optimizing positive ones on the log scale.
EtaUpdate update_eta(std::span<const SegmentRecord> segments, const LikelihoodSpec& spec,
                     const std::vector<bool>& free_mask = {}, const TrustRegionOptions& options = {});

struct EtaInit {
  LikelihoodSpec spec;
  std::vector<std::string> warnings;
};

// Moment-matching starting point from blocks of 100 positions per row.
EtaInit init_eta(const DataMatrix& X, Family family);

struct MCEMOptions {
  bool fit_weights = true;
  bool fit_eta = true;
  std::vector<bool> eta_mask;  // empty means every hyperparameter is free
  TrustRegionOptions optimizer;
};

struct MCEMUpdate {
  ChangepointPrior prior;
  LikelihoodSpec spec;
  PriorMoments moments;
  double divergence = 0.0;  // KL after the weight update
  int weight_iterations = 0;
  double eta_objective = 0.0;
  std::vector<std::string> warnings;
};

MCEMUpdate mcem_step(const MCEMStatistics& stats, const ChangepointPrior& prior, const LikelihoodSpec& spec,
                     const MCEMOptions& options = {});

}  // namespace basic

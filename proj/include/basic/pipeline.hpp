#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "basic/chain_state.hpp"
#include "basic/likelihood.hpp"
#include "basic/map_estimator.hpp"
#include "basic/matrix.hpp"
#include "basic/mcem.hpp"
#include "basic/prior.hpp"
#include "basic/sampler.hpp"

namespace basic {

enum class SamplerKind { Blocked, Naive };

enum class Phase { BurnIn, Sampling };

struct RunConfig {
  Family family = Family::NormalMean;
  std::optional<std::vector<double>> eta;        // moment-matched from the data when absent
  std::optional<ChangepointPrior> prior;         // default dictionary when absent
  int burnin = 100;
  int samples = 100;
  std::optional<MCEMSchedule> schedule;          // MCEMSchedule::default_for(burnin) when absent
  MCEMOptions mcem;
  SamplerConfig sampler;
  SamplerKind kind = SamplerKind::Blocked;
  int naive_sweeps = 30;                         // naive sweeps counted as one iteration
  std::optional<ChangeMatrix> initial_Z;         // all zero when absent
  std::uint64_t seed = 0;
  int chains = 1;
  bool run_map = true;
  MapConfig map;
  bool keep_samples = false;

  // Throws ValidationError on negative counts or a schedule outside burn-in.
  void validate() const;
};

struct MCEMRecord {
  int iteration = 0;
  std::vector<double> weights;
  std::vector<double> eta;
  double divergence = 0.0;
  double eta_objective = 0.0;
};

struct PosteriorSummary {
  DataMatrix marginal;        // J x T; empty when no sampling iterations ran
  std::vector<double> q_mean; // length T; q_mean[0] = 0
  DataMatrix theta_mean;      // J x T
  std::optional<MapResult> map;
  ChangepointPrior prior;     // priors in force after burn-in
  LikelihoodSpec spec = LikelihoodSpec::normal_mean(0.0, 1.0, 1.0);
  ChangepointPrior initial_prior;
  LikelihoodSpec initial_spec = LikelihoodSpec::normal_mean(0.0, 1.0, 1.0);
  std::vector<MCEMRecord> trajectory;
  std::vector<std::string> warnings;
  long samples_used = 0;
  long swaps_accepted = 0;
  int chains = 1;
  std::vector<ChangeMatrix> samples;       // only with keep_samples
  std::vector<ChangeMatrix> final_states;  // one per chain
};

// Called after every iteration of every chain.
using IterationObserver = std::function<void(Phase, int iteration, int chain, const ChainState&)>;

// Streaming sample averages for the posterior summaries.
class SummaryAccumulator {
 public:
  SummaryAccumulator(const DataMatrix& X, const LikelihoodSpec& spec, const PriorMoments& moments);

  void add(const ChangeMatrix& Z);
  long count() const noexcept { return count_; }
  DataMatrix marginal() const;
  std::vector<double> q_mean() const;
  DataMatrix theta_mean() const;

 private:
  SegmentTable table_;
  PriorMoments moments_;
  long count_ = 0;
  DataMatrix z_sum_;
  std::vector<double> q_sum_;
  DataMatrix theta_sum_;
};

// Sample averages of Z.
DataMatrix marginal_probabilities(std::span<const ChangeMatrix> samples);
// Rao-Blackwellized E[q_t | X]: average over samples of E[q_t | N_t].
std::vector<double> posterior_mean_q(std::span<const ChangeMatrix> samples, const PriorMoments& moments);
// Average over samples of the segment posterior means of theta.
DataMatrix posterior_mean_theta_matrix(std::span<const ChangeMatrix> samples, const DataMatrix& X,
                                       const LikelihoodSpec& spec);

// Zero column 0; 1 wherever the marginal is at least one half.
ChangeMatrix threshold_marginals(const DataMatrix& marginal);

PosteriorSummary run(const DataMatrix& X, const RunConfig& config, const IterationObserver& observer = {});

}  // namespace basic

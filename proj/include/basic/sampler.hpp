#pragma once

#include <span>
#include <utility>
#include <vector>

#include "basic/chain_state.hpp"
#include "basic/likelihood.hpp"
#include "basic/prior.hpp"
#include "basic/rng.hpp"

namespace basic {

struct SamplerConfig {
  int block_size = 50;             // positions per row block; 0 samples whole rows
  long swaps = -1;                 // MH swap proposals per iteration; negative means 10 T
  double prune_tolerance = 1e-12;  // relative tail bound for column sums; 0 disables pruning
  bool debug_checks = false;       // re-derive every index after each sweep

  long swaps_for(int T) const { return swaps < 0 ? 10L * T : swaps; }
};

// Per-position log c_j(t) and log(1 - c_j(t)) for row j given the other rows.
struct RowPriorTerms {
  std::vector<double> log_c;
  std::vector<double> log_one_minus_c;
};
RowPriorTerms row_prior_terms(const ChainState& state, int j, const PriorMoments& moments);

// Row blocks [lo, hi) covering positions 1..T-1.
std::vector<std::pair<int, int>> row_blocks(int T, int block_size);

// Backward pass over one row block [lo, hi) with the row fixed outside it:
// `anchor` is the last changepoint before lo (0 if none) and `stop` the
// first changepoint at or after hi (T if none).
class RowBlockKernel {
 public:
  RowBlockKernel(const SegmentTable& table, int row, int lo, int hi, int anchor, int stop,
                 const RowPriorTerms& prior);

  // log P(data from the anchor up to `stop` | block free, outside fixed).
  double log_normalizer() const noexcept { return log_anchor_; }
  // log P(data [t, stop) | changepoint at t), t in [lo, hi).
  double log_q(int t) const { return log_q_[t - lo_]; }

  // Distribution of the next changepoint after `from` (the anchor or a
  // position in the block). Entry i is position max(from + 1, lo) + i; the
  // final entry is "no further changepoint in the block".
  std::vector<double> next_change_probabilities(int from) const;

  // Draws the changepoints inside [lo, hi), ascending.
  std::vector<int> sample(Rng& rng) const;

 private:
  double step_terms(int from, std::vector<double>& terms) const;

  const SegmentTable& table_;
  const RowPriorTerms& prior_;
  int row_, lo_, hi_, anchor_, stop_;
  std::vector<double> log_q_;
  double log_anchor_ = 0.0;
};

// Exact Gibbs draw of row j (all blocks in turn). block_size 0 uses one
// block spanning the row.
void resample_row_blocked(ChainState& state, int j, const SegmentTable& table, const PriorMoments& moments,
                          int block_size, Rng& rng);
void resample_row(ChainState& state, int j, const SegmentTable& table, const PriorMoments& moments, Rng& rng);

// Lazily evaluated coefficients of prod_{i > j} (rho_i x + 1), held as
// logs, where rho_i = A_t(i) / B_t(i). Row j holds the polynomial over the
// rows after j; the last row is the constant 1.
class ColumnCoefficients {
 public:
  void reset(std::span<const double> log_ratio);
  int degree(int j) const noexcept { return J_ - 1 - j; }
  double log_coeff(int j, int k);
  // Coefficients computed so far for row j.
  std::span<const double> computed(int j) const { return coeffs_[j]; }

 private:
  void ensure(int j, int k);
  double get(int j, int k) const;
  int J_ = 0;
  std::vector<double> log_ratio_;
  std::vector<std::vector<double>> coeffs_;
};

// log sum_k R(j,k) f(N+k+1) and log sum_k R(j,k) f(N+k); their ratio is
// c_t(j) / (1 - c_t(j)). With tolerance > 0 the sums stop once a geometric
// bound on the remaining tail falls below tolerance times the partial sum.
std::pair<double, double> column_log_sums(ColumnCoefficients& coeffs, int j, int preceding,
                                          const PriorMoments& moments, double tolerance);

// log A_t(j) - log B_t(j) for every row.
std::vector<double> column_log_ratios(const ChainState& state, const SegmentTable& table, int t);

void resample_column(ChainState& state, int t, const SegmentTable& table, const PriorMoments& moments,
                     double prune_tolerance, Rng& rng);

// log P(X | Z~) - log P(X | Z) where Z~ swaps adjacent columns t and u.
double swap_log_ratio(const ChainState& state, const SegmentTable& table, int t, int u);
// log of q(Z~ -> Z) / q(Z -> Z~) for the swap proposal.
double swap_log_correction(const ChainState& state, int t, int u);

// B Metropolis-Hastings column swaps; returns the number accepted.
long mh_swap_sweep(ChainState& state, const SegmentTable& table, long proposals, Rng& rng);

// Single-site conditional Pr(Z[j,t] = 1 | X, rest of Z).
double naive_site_probability(const ChainState& state, const SegmentTable& table, const PriorMoments& moments,
                              int j, int t);
void naive_gibbs_site(ChainState& state, int j, int t, const SegmentTable& table, const PriorMoments& moments,
                      Rng& rng);
// One pass over every free site, rows outer and positions ascending.
void naive_gibbs_sweep(ChainState& state, const SegmentTable& table, const PriorMoments& moments, Rng& rng);

struct IterationStats {
  long swaps_accepted = 0;
};

// Row sweep, column sweep, then swap proposals.
IterationStats mcmc_iteration(ChainState& state, const SegmentTable& table, const PriorMoments& moments,
                              const SamplerConfig& config, Rng& rng);

}  // namespace basic

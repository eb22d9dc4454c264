#pragma once

#include <cstdint>
#include <vector>

#include "basic/chain_state.hpp"
#include "basic/likelihood.hpp"
#include "basic/prior.hpp"
#include "basic/sampler.hpp"

namespace basic {

struct MapConfig {
  int block_size = 50;        // 0 maximizes whole rows
  int max_iterations = 100;
  double min_gain = 1e-12;    // a move must beat the incumbent by more than this
};

struct RowBlockArgmax {
  std::vector<int> changes;  // changepoints inside the block, ascending
  double log_score = 0.0;    // conditional log score up to a constant
};

// Exact maximizer over row block [lo, hi) with the row fixed outside it
// (`anchor` = last changepoint before lo or 0, `stop` = first changepoint at
// or after hi or T).
RowBlockArgmax maximize_row_block(const SegmentTable& table, int row, int lo, int hi, int anchor, int stop,
                                  const RowPriorTerms& prior);
// The same conditional score for a given configuration of the block.
double row_block_score(const SegmentTable& table, int row, int lo, int hi, int anchor, int stop,
                       const RowPriorTerms& prior, const std::vector<int>& changes);

// Block-by-block conditional argmax of row j; keeps the incumbent block
// unless the argmax is strictly better. Returns true if the row changed.
bool maximize_row_blocked(ChainState& state, int j, const SegmentTable& table, const PriorMoments& moments,
                          int block_size, double min_gain = 1e-12);
bool maximize_row(ChainState& state, int j, const SegmentTable& table, const PriorMoments& moments,
                  double min_gain = 1e-12);

// Conditional argmax of column t: the k* rows with the largest
// log(A/B), where k* maximizes top-k sum + log f(k) (smallest k on ties).
std::vector<std::uint8_t> column_argmax(const ChainState& state, int t, const SegmentTable& table,
                                        const PriorMoments& moments);
bool maximize_column(ChainState& state, int t, const SegmentTable& table, const PriorMoments& moments,
                     double min_gain = 1e-12);

// Swaps active columns with a neighbour while that strictly raises
// P(X | Z). Returns the number of swaps made.
long swap_hill_climb(ChainState& state, const SegmentTable& table, double min_gain = 1e-12);

struct MapResult {
  ChangeMatrix Z;
  int iterations = 0;
  bool converged = false;  // false when max_iterations was hit
};

// Coordinate ascent over rows, columns and swaps until a full iteration
// leaves Z unchanged.
MapResult map_estimate(ChangeMatrix initial, const SegmentTable& table, const PriorMoments& moments,
                       const MapConfig& config = {});

}  // namespace basic

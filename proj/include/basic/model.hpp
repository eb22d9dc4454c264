#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "basic/likelihood.hpp"
#include "basic/matrix.hpp"
#include "basic/prior.hpp"

namespace basic {

// Half-open segments [a, b) of row j induced by its changepoints.
std::vector<std::pair<int, int>> row_segments(const ChangeMatrix& Z, int j);

// log P(X | Z): sum of segment marginals over all rows, computed directly
// from running accumulators.
double log_likelihood_given_Z(const DataMatrix& X, const ChangeMatrix& Z, const LikelihoodSpec& spec);

// log P(X, Z) = log P(X | Z) + log P(Z). Returns -inf when the prior
// forbids Z.
double log_joint(const DataMatrix& X, const ChangeMatrix& Z, const LikelihoodSpec& spec,
                 const PriorMoments& moments);

struct SyntheticData {
  DataMatrix X;
  ChangeMatrix Z;
  std::vector<double> q;  // q[t] for t >= 1; q[0] is unused and zero
  DataMatrix theta;       // the scalar parameter reported by posterior_mean_theta
};

// Draws from the generative model. Deterministic given the seed.
SyntheticData generate_synthetic(int J, int T, const ChangepointPrior& prior, const LikelihoodSpec& spec,
                                 std::uint64_t seed);

}  // namespace basic

#pragma once

#include <vector>

#include "basic/likelihood.hpp"
#include "basic/matrix.hpp"
#include "basic/prior.hpp"

namespace basic {

inline constexpr int kEnumerationCap = 22;  // maximum J (T - 1)

struct EnumerationResult {
  double log_evidence = 0.0;  // log P(X)
  DataMatrix marginal;        // exact Pr(Z[j,t] = 1 | X)
  ChangeMatrix map;           // first maximizer in enumeration order
  double map_log_joint = 0.0;
  std::vector<double> q_mean;  // exact E[q_t | X]; entry 0 is 0
  long long configurations = 0;
};

// Exhaustive posterior over all 2^(J(T-1)) changepoint matrices, visited
// in Gray-code order with incremental log_joint updates. Throws
// ValidationError when J (T - 1) exceeds kEnumerationCap.
EnumerationResult enumerate_posterior(const DataMatrix& X, const PriorMoments& moments, const LikelihoodSpec& spec);

}  // namespace basic

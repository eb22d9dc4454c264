#include "basic/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "basic/errors.hpp"
#include "basic/numeric.hpp"

namespace basic {

RowPriorTerms row_prior_terms(const ChainState& state, int j, const PriorMoments& moments) {
  if (moments.J != state.J()) throw ValidationError("moment tables were built for a different J");
  const int T = state.T();
  RowPriorTerms out{std::vector<double>(T, kNegInf), std::vector<double>(T, 0.0)};
  for (int t = 1; t < T; ++t) {
    int others = state.column_count(t) - (state.get(j, t) ? 1 : 0);
    out.log_c[t] = moments.log_c(others);
    out.log_one_minus_c[t] = moments.log_one_minus_c(others);
  }
  return out;
}

std::vector<std::pair<int, int>> row_blocks(int T, int block_size) {
  std::vector<std::pair<int, int>> out;
  if (T <= 1) return out;
  if (block_size <= 0) {
    out.emplace_back(1, T);
    return out;
  }
  for (int start = 0; start < T; start += block_size) {
    int lo = std::max(start, 1), hi = std::min(start + block_size, T);
    if (lo < hi) out.emplace_back(lo, hi);
  }
  return out;
}

RowBlockKernel::RowBlockKernel(const SegmentTable& table, int row, int lo, int hi, int anchor, int stop,
                               const RowPriorTerms& prior)
    : table_(table), prior_(prior), row_(row), lo_(lo), hi_(hi), anchor_(anchor), stop_(stop) {
  if (!(1 <= lo && lo < hi && hi <= table.T()) || anchor >= lo || stop < hi)
    throw std::logic_error("inconsistent row block bounds");
  log_q_.assign(hi - lo, kNegInf);
  std::vector<double> terms;
  for (int t = hi - 1; t >= lo; --t) log_q_[t - lo] = step_terms(t, terms);
  log_anchor_ = step_terms(anchor, terms);
}

double RowBlockKernel::step_terms(int from, std::vector<double>& terms) const {
  terms.clear();
  const int first = std::max(from + 1, lo_);
  double gap = 0.0;  // sum of log(1 - c) strictly between `from` and the candidate
  for (int u = first; u < hi_; ++u) {
    double term = gap + prior_.log_c[u];
    if (term != kNegInf) term += table_.log_marginal(row_, from, u) + log_q_[u - lo_];
    terms.push_back(term);
    gap += prior_.log_one_minus_c[u];
  }
  double none = gap;
  if (none != kNegInf) none += table_.log_marginal(row_, from, stop_);
  terms.push_back(none);
  return log_sum_exp(terms);
}

std::vector<double> RowBlockKernel::next_change_probabilities(int from) const {
  std::vector<double> terms;
  double norm = step_terms(from, terms);
  for (double& v : terms) v = (v == kNegInf) ? 0.0 : std::exp(v - norm);
  return terms;
}

std::vector<int> RowBlockKernel::sample(Rng& rng) const {
  std::vector<int> out;
  std::vector<double> terms;
  int from = anchor_;
  while (true) {
    double norm = step_terms(from, terms);
    const int first = std::max(from + 1, lo_);
    double u = rng.uniform();
    double acc = 0.0;
    int choice = -1;
    int last_positive = -1;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      if (terms[i] == kNegInf) continue;
      last_positive = static_cast<int>(i);
      acc += std::exp(terms[i] - norm);
      if (u < acc) {
        choice = static_cast<int>(i);
        break;
      }
    }
    if (choice < 0) choice = last_positive;  // rounding left u above the total
    if (choice < 0 || choice == static_cast<int>(terms.size()) - 1) break;
    from = first + choice;
    out.push_back(from);
  }
  return out;
}

void resample_row_blocked(ChainState& state, int j, const SegmentTable& table, const PriorMoments& moments,
                          int block_size, Rng& rng) {
  const int T = state.T();
  if (T <= 1) return;
  RowPriorTerms prior = row_prior_terms(state, j, moments);
  int anchor = 0;
  for (auto [lo, hi] : row_blocks(T, block_size)) {
    int stop = state.next_change(j, hi - 1);
    RowBlockKernel kernel(table, j, lo, hi, anchor, stop, prior);
    for (int t = lo; t < hi; ++t) state.set(j, t, false);
    auto changes = kernel.sample(rng);
    for (int t : changes) state.set(j, t, true);
    if (!changes.empty()) anchor = changes.back();
  }
}

void resample_row(ChainState& state, int j, const SegmentTable& table, const PriorMoments& moments, Rng& rng) {
  resample_row_blocked(state, j, table, moments, 0, rng);
}

void ColumnCoefficients::reset(std::span<const double> log_ratio) {
  J_ = static_cast<int>(log_ratio.size());
  log_ratio_.assign(log_ratio.begin(), log_ratio.end());
  if (static_cast<int>(coeffs_.size()) < J_) coeffs_.resize(J_);
  for (int j = 0; j < J_; ++j) coeffs_[j].clear();
  if (J_ > 0) coeffs_[J_ - 1].push_back(0.0);
}

double ColumnCoefficients::get(int j, int k) const {
  if (k < 0 || k > degree(j)) return kNegInf;
  return coeffs_[j][k];
}

void ColumnCoefficients::ensure(int j, int k) {
  auto target = [&](int i) { return std::min(k, degree(i)); };
  if (static_cast<int>(coeffs_[j].size()) > target(j)) return;
  // Rows below a satisfied row are satisfied too, since each row is only
  // extended after the row beneath it.
  int i = j;
  while (i < J_ - 1 && static_cast<int>(coeffs_[i].size()) <= target(i)) ++i;
  for (int r = i - 1; r >= j; --r) {
    auto& row = coeffs_[r];
    for (int kk = static_cast<int>(row.size()); kk <= target(r); ++kk)
      row.push_back(log_add_exp(get(r + 1, kk), log_ratio_[r + 1] + get(r + 1, kk - 1)));
  }
}

double ColumnCoefficients::log_coeff(int j, int k) {
  if (k < 0 || k > degree(j)) return kNegInf;
  ensure(j, k);
  return coeffs_[j][k];
}

std::pair<double, double> column_log_sums(ColumnCoefficients& coeffs, int j, int preceding,
                                          const PriorMoments& moments, double tolerance) {
  const int deg = coeffs.degree(j);
  const double log_tol = tolerance > 0.0 ? std::log(tolerance) : 0.0;
  double s1 = kNegInf, s0 = kNegInf;
  for (int k = 0; k <= deg; ++k) {
    double e = coeffs.log_coeff(j, k);
    if (e == kNegInf) break;  // support of the coefficients is contiguous from 0
    s1 = log_add_exp(s1, e + moments.log_f[preceding + k + 1]);
    s0 = log_add_exp(s0, e + moments.log_f[preceding + k]);
    if (tolerance <= 0.0 || k == deg) continue;
    double next = coeffs.log_coeff(j, k + 1);
    if (next == kNegInf) break;
    double log_ratio = next - e;
    if (log_ratio >= 0.0) continue;  // before the mode
    // Log-concavity makes successive ratios non-increasing, so the tail is
    // dominated by a geometric series.
    double log_tail = next - std::log1p(-std::exp(log_ratio));
    double tail1 = log_tail + moments.log_f_suffix_max[preceding + k + 2];
    double tail0 = log_tail + moments.log_f_suffix_max[preceding + k + 1];
    bool small1 = tail1 == kNegInf || tail1 < s1 + log_tol;
    bool small0 = tail0 == kNegInf || tail0 < s0 + log_tol;
    if (small1 && small0) break;
  }
  return {s1, s0};
}

std::vector<double> column_log_ratios(const ChainState& state, const SegmentTable& table, int t) {
  std::vector<double> out(state.J());
  for (int j = 0; j < state.J(); ++j) {
    int r = state.prev_change(j, t), s = state.next_change(j, t);
    out[j] = table.log_marginal(j, r, t) + table.log_marginal(j, t, s) - table.log_marginal(j, r, s);
  }
  return out;
}

namespace {

// Probability of a 1 given log-odds built from possibly infinite parts.
double logistic_from_parts(double log_ratio, double s1, double s0) {
  if (s1 == kNegInf) return 0.0;
  if (s0 == kNegInf) return 1.0;
  double lo = log_ratio + s1 - s0;
  if (std::isnan(lo)) throw std::logic_error("undefined column conditional");
  if (lo >= 0) return 1.0 / (1.0 + std::exp(-lo));
  double e = std::exp(lo);
  return e / (1.0 + e);
}

}  // namespace

void resample_column(ChainState& state, int t, const SegmentTable& table, const PriorMoments& moments,
                     double prune_tolerance, Rng& rng) {
  if (t < 1 || t >= state.T()) throw ValidationError("column index out of range");
  thread_local ColumnCoefficients coeffs;
  auto ratios = column_log_ratios(state, table, t);
  coeffs.reset(ratios);
  int preceding = 0;
  for (int j = 0; j < state.J(); ++j) {
    auto [s1, s0] = column_log_sums(coeffs, j, preceding, moments, prune_tolerance);
    bool z = rng.uniform() < logistic_from_parts(ratios[j], s1, s0);
    state.set(j, t, z);
    preceding += z;
  }
}

double swap_log_ratio(const ChainState& state, const SegmentTable& table, int t, int u) {
  if (std::abs(t - u) != 1) throw ValidationError("swap columns must be adjacent");
  const int lo = std::min(t, u), hi = std::max(t, u);
  double total = 0.0;
  for (int j = 0; j < state.J(); ++j) {
    bool at = state.get(j, t), au = state.get(j, u);
    if (at == au) continue;
    int r = state.prev_change(j, lo), s = state.next_change(j, hi);
    int from = at ? t : u, to = at ? u : t;
    total += table.log_marginal(j, r, to) + table.log_marginal(j, to, s) - table.log_marginal(j, r, from) -
             table.log_marginal(j, from, s);
  }
  return total;
}

namespace {

// Probability that a proposal started at column c moves toward d.
double direction_probability(int c, int d, int T) {
  if (d < 1 || d > T - 1) return 0.0;
  bool can_down = c - 1 >= 1, can_up = c + 1 <= T - 1;
  if (can_down && can_up) return 0.5;
  return 1.0;
}

}  // namespace

double swap_log_correction(const ChainState& state, int t, int u) {
  const int T = state.T();
  bool t_active = state.column_count(t) > 0, u_active = state.column_count(u) > 0;
  double forward = (t_active ? direction_probability(t, u, T) : 0.0) + (u_active ? direction_probability(u, t, T) : 0.0);
  double reverse = (u_active ? direction_probability(t, u, T) : 0.0) + (t_active ? direction_probability(u, t, T) : 0.0);
  return std::log(reverse) - std::log(forward);
}

long mh_swap_sweep(ChainState& state, const SegmentTable& table, long proposals, Rng& rng) {
  const int T = state.T();
  long accepted = 0;
  if (T <= 2) return 0;
  for (long b = 0; b < proposals; ++b) {
    auto active = state.active_columns();
    if (active.empty()) break;
    int t = active[rng.below(active.size())];
    int u;
    if (t == 1)
      u = 2;
    else if (t == T - 1)
      u = T - 2;
    else
      u = rng.uniform() < 0.5 ? t - 1 : t + 1;
    double log_accept = swap_log_ratio(state, table, t, u) + swap_log_correction(state, t, u);
    if (log_accept >= 0.0 || rng.uniform() < std::exp(log_accept)) {
      state.swap_columns(t, u);
      ++accepted;
    }
  }
  return accepted;
}

double naive_site_probability(const ChainState& state, const SegmentTable& table, const PriorMoments& moments,
                              int j, int t) {
  if (t < 1 || t >= state.T()) throw ValidationError("site position out of range");
  int others = state.column_count(t) - (state.get(j, t) ? 1 : 0);
  double f1 = moments.log_f[others + 1], f0 = moments.log_f[others];
  if (f1 == kNegInf && f0 == kNegInf) throw std::logic_error("prior forbids both values of a site");
  int r = state.prev_change(j, t), s = state.next_change(j, t);
  double lr = table.log_marginal(j, r, t) + table.log_marginal(j, t, s) - table.log_marginal(j, r, s);
  return logistic_from_parts(lr, f1, f0);
}

void naive_gibbs_site(ChainState& state, int j, int t, const SegmentTable& table, const PriorMoments& moments,
                      Rng& rng) {
  double p = naive_site_probability(state, table, moments, j, t);
  state.set(j, t, rng.uniform() < p);
}

void naive_gibbs_sweep(ChainState& state, const SegmentTable& table, const PriorMoments& moments, Rng& rng) {
  for (int j = 0; j < state.J(); ++j)
    for (int t = 1; t < state.T(); ++t) naive_gibbs_site(state, j, t, table, moments, rng);
}

IterationStats mcmc_iteration(ChainState& state, const SegmentTable& table, const PriorMoments& moments,
                              const SamplerConfig& config, Rng& rng) {
  IterationStats stats;
  for (int j = 0; j < state.J(); ++j) resample_row_blocked(state, j, table, moments, config.block_size, rng);
  if (config.debug_checks) state.check_consistency();
  for (int t = 1; t < state.T(); ++t) resample_column(state, t, table, moments, config.prune_tolerance, rng);
  if (config.debug_checks) state.check_consistency();
  stats.swaps_accepted = mh_swap_sweep(state, table, config.swaps_for(state.T()), rng);
  if (config.debug_checks) state.check_consistency();
  return stats;
}

}  // namespace basic

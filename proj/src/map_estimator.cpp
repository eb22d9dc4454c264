#include "basic/map_estimator.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "basic/errors.hpp"
#include "basic/numeric.hpp"

namespace basic {

RowBlockArgmax maximize_row_block(const SegmentTable& table, int row, int lo, int hi, int anchor, int stop,
                                  const RowPriorTerms& prior) {
  if (!(1 <= lo && lo < hi && hi <= table.T()) || anchor >= lo || stop < hi)
    throw std::logic_error("inconsistent row block bounds");
  const int L = hi - lo;
  // Slot 0 is the anchor, slot i + 1 is position lo + i.
  std::vector<double> best(L + 1, kNegInf);
  std::vector<int> back(L + 1, -1);
  best[0] = 0.0;
  auto pos = [&](int slot) { return slot == 0 ? anchor : lo + slot - 1; };

  for (int u = lo; u < hi; ++u) {
    const int slot_u = u - lo + 1;
    if (prior.log_c[u] == kNegInf) continue;
    double top = kNegInf;
    int arg = -1;
    double gap = 0.0;
    for (int slot = slot_u - 1; slot >= 0; --slot) {
      int a = pos(slot);
      if (best[slot] != kNegInf && gap != kNegInf) {
        double cand = best[slot] + gap + table.log_marginal(row, a, u);
        if (cand > top) {
          top = cand;
          arg = slot;
        }
      }
      if (slot >= 1) gap += prior.log_one_minus_c[a];
    }
    if (arg >= 0) {
      best[slot_u] = top + prior.log_c[u];
      back[slot_u] = arg;
    }
  }

  double top = kNegInf;
  int last = -1;
  double gap = 0.0;
  for (int slot = L; slot >= 0; --slot) {
    int a = pos(slot);
    if (best[slot] != kNegInf && gap != kNegInf) {
      double cand = best[slot] + gap + table.log_marginal(row, a, stop);
      if (cand > top) {
        top = cand;
        last = slot;
      }
    }
    if (slot >= 1) gap += prior.log_one_minus_c[a];
  }
  RowBlockArgmax out;
  out.log_score = top;
  for (int slot = last; slot > 0; slot = back[slot]) out.changes.push_back(pos(slot));
  std::reverse(out.changes.begin(), out.changes.end());
  return out;
}

double row_block_score(const SegmentTable& table, int row, int lo, int hi, int anchor, int stop,
                       const RowPriorTerms& prior, const std::vector<int>& changes) {
  double score = 0.0;
  std::size_t next = 0;
  int start = anchor;
  for (int t = lo; t < hi; ++t) {
    if (next < changes.size() && changes[next] == t) {
      score += prior.log_c[t] + table.log_marginal(row, start, t);
      start = t;
      ++next;
    } else {
      score += prior.log_one_minus_c[t];
    }
  }
  return score + table.log_marginal(row, start, stop);
}

bool maximize_row_blocked(ChainState& state, int j, const SegmentTable& table, const PriorMoments& moments,
                          int block_size, double min_gain) {
  const int T = state.T();
  if (T <= 1) return false;
  RowPriorTerms prior = row_prior_terms(state, j, moments);
  bool changed = false;
  int anchor = 0;
  for (auto [lo, hi] : row_blocks(T, block_size)) {
    int stop = state.next_change(j, hi - 1);
    std::vector<int> current;
    for (int t : state.row_changes(j))
      if (t >= lo && t < hi) current.push_back(t);
    RowBlockArgmax best = maximize_row_block(table, j, lo, hi, anchor, stop, prior);
    double incumbent = row_block_score(table, j, lo, hi, anchor, stop, prior, current);
    if (best.changes != current && best.log_score > incumbent + min_gain) {
      for (int t : current) state.set(j, t, false);
      for (int t : best.changes) state.set(j, t, true);
      current = best.changes;
      changed = true;
    }
    if (!current.empty()) anchor = current.back();
  }
  return changed;
}

bool maximize_row(ChainState& state, int j, const SegmentTable& table, const PriorMoments& moments,
                  double min_gain) {
  return maximize_row_blocked(state, j, table, moments, 0, min_gain);
}

namespace {

struct ColumnChoice {
  std::vector<std::uint8_t> column;
  double best = kNegInf;
  double incumbent = kNegInf;
};

ColumnChoice choose_column(const ChainState& state, int t, const SegmentTable& table, const PriorMoments& moments) {
  if (t < 1 || t >= state.T()) throw ValidationError("column index out of range");
  const int J = state.J();
  auto ratios = column_log_ratios(state, table, t);
  std::vector<int> order(J);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return ratios[a] > ratios[b]; });
  ColumnChoice out;
  double prefix = 0.0;
  int best_k = 0;
  out.best = moments.log_f[0];
  for (int k = 1; k <= J; ++k) {
    prefix += ratios[order[k - 1]];
    double obj = prefix + moments.log_f[k];
    if (obj > out.best) {
      out.best = obj;
      best_k = k;
    }
  }
  out.column.assign(J, 0);
  for (int k = 0; k < best_k; ++k) out.column[order[k]] = 1;
  double inc = 0.0;
  int n = 0;
  for (int j = 0; j < J; ++j)
    if (state.get(j, t)) {
      inc += ratios[j];
      ++n;
    }
  out.incumbent = moments.log_f[n] == kNegInf ? kNegInf : inc + moments.log_f[n];
  return out;
}

}  // namespace

std::vector<std::uint8_t> column_argmax(const ChainState& state, int t, const SegmentTable& table,
                                        const PriorMoments& moments) {
  return choose_column(state, t, table, moments).column;
}

bool maximize_column(ChainState& state, int t, const SegmentTable& table, const PriorMoments& moments,
                     double min_gain) {
  ColumnChoice choice = choose_column(state, t, table, moments);
  bool same = true;
  for (int j = 0; j < state.J(); ++j) same = same && (choice.column[j] != 0) == state.get(j, t);
  if (same) return false;
  if (!(choice.best > choice.incumbent + min_gain) && choice.incumbent != kNegInf) return false;
  for (int j = 0; j < state.J(); ++j) state.set(j, t, choice.column[j] != 0);
  return true;
}

long swap_hill_climb(ChainState& state, const SegmentTable& table, double min_gain) {
  const int T = state.T();
  long swaps = 0;
  if (T <= 2) return 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int t = 1; t < T; ++t) {
      if (state.column_count(t) == 0) continue;
      double best_gain = min_gain;
      int best_u = -1;
      for (int u : {t - 1, t + 1}) {
        if (u < 1 || u > T - 1) continue;
        double gain = swap_log_ratio(state, table, t, u);
        if (gain > best_gain) {
          best_gain = gain;
          best_u = u;
        }
      }
      if (best_u >= 0) {
        state.swap_columns(t, best_u);
        ++swaps;
        changed = true;
      }
    }
  }
  return swaps;
}

MapResult map_estimate(ChangeMatrix initial, const SegmentTable& table, const PriorMoments& moments,
                       const MapConfig& config) {
  ChainState state(std::move(initial));
  MapResult result;
  for (int it = 1; it <= config.max_iterations; ++it) {
    result.iterations = it;
    bool changed = false;
    for (int j = 0; j < state.J(); ++j)
      changed |= maximize_row_blocked(state, j, table, moments, config.block_size, config.min_gain);
    for (int t = 1; t < state.T(); ++t) changed |= maximize_column(state, t, table, moments, config.min_gain);
    changed |= swap_hill_climb(state, table, config.min_gain) > 0;
    if (!changed) {
      result.converged = true;
      break;
    }
  }
  result.Z = state.Z();
  return result;
}

}  // namespace basic

#include "basic/chain_state.hpp"

#include <algorithm>
#include <stdexcept>

namespace basic {

ChainState::ChainState(ChangeMatrix Z) : Z_(std::move(Z)) {
  Z_.validate();
  counts_.assign(T(), 0);
  rows_.resize(J());
  active_pos_.assign(T(), -1);
  for (int j = 0; j < J(); ++j)
    for (int t = 1; t < T(); ++t)
      if (Z_(j, t)) {
        rows_[j].push_back(t);
        ++counts_[t];
      }
  for (int t = 1; t < T(); ++t)
    if (counts_[t] > 0) activate(t);
}

int ChainState::prev_change(int j, int t) const {
  const auto& r = rows_[j];
  auto it = std::lower_bound(r.begin(), r.end(), t);
  return it == r.begin() ? 0 : *std::prev(it);
}

int ChainState::next_change(int j, int t) const {
  const auto& r = rows_[j];
  auto it = std::upper_bound(r.begin(), r.end(), t);
  return it == r.end() ? T() : *it;
}

void ChainState::activate(int t) {
  active_pos_[t] = static_cast<int>(active_.size());
  active_.push_back(t);
}

void ChainState::deactivate(int t) {
  int pos = active_pos_[t];
  int last = active_.back();
  active_[pos] = last;
  active_pos_[last] = pos;
  active_.pop_back();
  active_pos_[t] = -1;
}

void ChainState::set(int j, int t, bool value) {
  if (get(j, t) == value) return;
  if (t == 0) throw std::logic_error("column 0 cannot hold a changepoint");
  auto& r = rows_[j];
  auto it = std::lower_bound(r.begin(), r.end(), t);
  if (value) {
    r.insert(it, t);
    Z_(j, t) = 1;
    if (counts_[t]++ == 0) activate(t);
  } else {
    r.erase(it);
    Z_(j, t) = 0;
    if (--counts_[t] == 0) deactivate(t);
  }
}

void ChainState::swap_columns(int t, int u) {
  if (t == u) return;
  if (t == 0 || u == 0) throw std::logic_error("column 0 cannot be swapped");
  for (int j = 0; j < J(); ++j) {
    bool a = get(j, t), b = get(j, u);
    if (a == b) continue;
    auto& r = rows_[j];
    int from = a ? t : u;
    int to = a ? u : t;
    if (std::abs(t - u) == 1) {
      // Adjacent: the moved entry keeps its rank in the sorted list.
      *std::lower_bound(r.begin(), r.end(), from) = to;
    } else {
      r.erase(std::lower_bound(r.begin(), r.end(), from));
      r.insert(std::lower_bound(r.begin(), r.end(), to), to);
    }
    Z_(j, t) = b;
    Z_(j, u) = a;
  }
  std::swap(counts_[t], counts_[u]);
  bool at = active_pos_[t] >= 0, au = active_pos_[u] >= 0;
  if (at != au) {
    if (at) {
      deactivate(t);
      activate(u);
    } else {
      deactivate(u);
      activate(t);
    }
  }
}

void ChainState::check_consistency() const {
  ChainState fresh(Z_);
  if (fresh.counts_ != counts_) throw std::logic_error("column counts out of sync");
  if (fresh.rows_ != rows_) throw std::logic_error("row changepoint lists out of sync");
  for (int t = 0; t < T(); ++t) {
    bool on = active_pos_[t] >= 0;
    if (on != (counts_[t] > 0)) throw std::logic_error("active column set out of sync");
    if (on && active_[active_pos_[t]] != t) throw std::logic_error("active column index corrupted");
  }
  if (static_cast<int>(active_.size()) != static_cast<int>(fresh.active_.size()))
    throw std::logic_error("active column set size mismatch");
}

}  // namespace basic

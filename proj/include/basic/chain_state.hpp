#pragma once

#include <span>
#include <vector>

#include "basic/matrix.hpp"

namespace basic {

// A changepoint matrix plus the indexes every move needs: column counts,
// per-row sorted changepoint lists, and the set of columns holding at least
// one changepoint. All mutation goes through set() and swap_columns().
class ChainState {
 public:
  explicit ChainState(ChangeMatrix Z);

  const ChangeMatrix& Z() const noexcept { return Z_; }
  int J() const noexcept { return Z_.J(); }
  int T() const noexcept { return Z_.T(); }

  bool get(int j, int t) const { return Z_(j, t) != 0; }
  int column_count(int t) const { return counts_[t]; }
  std::span<const int> row_changes(int j) const { return rows_[j]; }

  // Last changepoint strictly before t in row j, or 0.
  int prev_change(int j, int t) const;
  // First changepoint strictly after t in row j, or T.
  int next_change(int j, int t) const;

  void set(int j, int t, bool value);
  void swap_columns(int t, int u);

  // Columns with at least one changepoint, in no particular order.
  std::span<const int> active_columns() const { return active_; }

  // Rebuilds every index from Z and throws std::logic_error on mismatch.
  void check_consistency() const;

 private:
  void activate(int t);
  void deactivate(int t);

  ChangeMatrix Z_;
  std::vector<int> counts_;
  std::vector<std::vector<int>> rows_;
  std::vector<int> active_;
  std::vector<int> active_pos_;  // index into active_, or -1
};

}  // namespace basic

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "basic/errors.hpp"

namespace basic {

// Row-major J x T storage. Positions are 0-based throughout the library:
// position 0 is the first observation of every sequence.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{}) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw ValidationError("grid dimensions must be nonnegative");
    data_.assign(static_cast<std::size_t>(rows) * cols, fill);
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }

  T& operator()(int j, int t) { return data_[static_cast<std::size_t>(j) * cols_ + t]; }
  const T& operator()(int j, int t) const { return data_[static_cast<std::size_t>(j) * cols_ + t]; }

  std::span<T> row(int j) { return {data_.data() + static_cast<std::size_t>(j) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const T> row(int j) const {
    return {data_.data() + static_cast<std::size_t>(j) * cols_, static_cast<std::size_t>(cols_)};
  }

  std::span<const T> values() const { return data_; }
  std::span<T> values() { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

// J aligned sequences of T observations each.
using DataMatrix = Grid<double>;

// Changepoint indicators; entry (j, t) = 1 means sequence j starts a new
// segment at position t. Column 0 is always zero.
class ChangeMatrix : public Grid<std::uint8_t> {
 public:
  ChangeMatrix() = default;
  ChangeMatrix(int J, int T) : Grid<std::uint8_t>(J, T, 0) {}

  int J() const noexcept { return rows(); }
  int T() const noexcept { return cols(); }

  int column_count(int t) const {
    int n = 0;
    for (int j = 0; j < rows(); ++j) n += (*this)(j, t);
    return n;
  }

  long total() const {
    long n = 0;
    for (auto v : values()) n += v;
    return n;
  }

  // Throws unless entries are binary and column 0 is zero.
  void validate() const {
    for (int j = 0; j < rows(); ++j) {
      if ((*this)(j, 0) != 0) throw ValidationError("change matrix column 0 must be zero");
      for (int t = 0; t < cols(); ++t)
        if ((*this)(j, t) > 1) throw ValidationError("change matrix entries must be 0 or 1");
    }
  }
};

}  // namespace basic

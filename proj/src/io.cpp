#include "basic/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "basic/errors.hpp"

namespace basic {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string where(long line, long field) {
  return "line " + std::to_string(line) + ", field " + std::to_string(field) + ": ";
}

}  // namespace

Dataset parse_dataset(std::istream& in, const FormatOptions& options) {
  std::vector<std::string> lines;
  std::vector<long> line_numbers;
  std::string line;
  long number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    lines.push_back(line);
    line_numbers.push_back(number);
  }
  if (lines.empty()) throw DataError("input is empty");

  Dataset d;
  d.delimiter = options.delimiter ? *options.delimiter : (lines[0].find('\t') != std::string::npos ? '\t' : ',');
  d.has_header = options.header;
  d.has_ids = options.row_ids;
  const int skip = options.row_ids ? 1 : 0;

  std::size_t first = 0;
  std::size_t width = 0;
  if (options.header) {
    auto fields = split(lines[0], d.delimiter);
    if (fields.size() <= static_cast<std::size_t>(skip))
      throw DataError(where(line_numbers[0], 1) + "header has no position labels", line_numbers[0], 1);
    if (skip) d.corner = std::string(trim(fields[0]));
    for (std::size_t i = skip; i < fields.size(); ++i) d.labels.emplace_back(trim(fields[i]));
    width = fields.size();
    first = 1;
  }
  if (first == lines.size()) throw DataError("input has a header but no data rows");

  std::vector<double> values;
  int rows = 0;
  for (std::size_t li = first; li < lines.size(); ++li) {
    auto fields = split(lines[li], d.delimiter);
    const long ln = line_numbers[li];
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      throw DataError(where(ln, static_cast<long>(fields.size())) + "expected " + std::to_string(width) +
                          " fields, found " + std::to_string(fields.size()),
                      ln, static_cast<long>(fields.size()));
    if (fields.size() <= static_cast<std::size_t>(skip))
      throw DataError(where(ln, 1) + "row has no observations", ln, 1);
    if (skip) d.ids.emplace_back(trim(fields[0]));
    for (std::size_t i = skip; i < fields.size(); ++i) {
      std::string_view cell = trim(fields[i]);
      double v = 0.0;
      const char* begin = cell.data();
      const char* end = cell.data() + cell.size();
      if (!cell.empty() && *begin == '+') ++begin;
      auto [ptr, ec] = std::from_chars(begin, end, v);
      if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
        throw DataError(where(ln, static_cast<long>(i) + 1) + "cannot parse '" + std::string(cell) + "' as a number",
                        ln, static_cast<long>(i) + 1);
      values.push_back(v);
    }
    ++rows;
  }
  const int cols = static_cast<int>(width) - skip;
  d.X = DataMatrix(rows, cols);
  std::copy(values.begin(), values.end(), d.X.values().begin());
  if (!d.has_ids)
    for (int j = 0; j < rows; ++j) d.ids.push_back(std::to_string(j));
  if (!d.has_header)
    for (int t = 0; t < cols; ++t) d.labels.push_back(std::to_string(t));
  return d;
}

Dataset load_dataset(const std::string& path, const FormatOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_dataset(in, options);
}

std::string format_canonical(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

void write_dataset(std::ostream& out, const Dataset& d) {
  const char sep = d.delimiter;
  if (d.has_header) {
    bool first = true;
    if (d.has_ids) {
      out << d.corner;
      first = false;
    }
    for (const auto& l : d.labels) {
      if (!first) out << sep;
      out << l;
      first = false;
    }
    out << '\n';
  }
  for (int j = 0; j < d.X.rows(); ++j) {
    bool first = true;
    if (d.has_ids) {
      out << d.ids[j];
      first = false;
    }
    for (double v : d.X.row(j)) {
      if (!first) out << sep;
      out << format_canonical(v);
      first = false;
    }
    out << '\n';
  }
}

void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_dataset(out, data);
}

Dataset make_dataset(DataMatrix X) {
  Dataset d;
  d.X = std::move(X);
  for (int j = 0; j < d.X.rows(); ++j) d.ids.push_back(std::to_string(j));
  for (int t = 0; t < d.X.cols(); ++t) d.labels.push_back(std::to_string(t));
  return d;
}

double median(std::vector<double> v) {
  if (v.empty()) throw ValidationError("median of an empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + mid);
  return lo + (hi - lo) / 2.0;
}

double mad_sigma(std::span<const double> row, double scale) {
  std::vector<double> v(row.begin(), row.end());
  const double m = median(v);
  for (double& x : v) x = std::abs(x - m);
  return scale * median(std::move(v));
}

int replace_outliers_once(std::span<double> row, const PreprocessOptions& options) {
  const int T = static_cast<int>(row.size());
  if (T == 0) return 0;
  const double sigma = mad_sigma(row, options.mad_scale);
  const double limit = options.threshold * sigma;
  std::vector<double> out(row.begin(), row.end());
  int replaced = 0;
  for (int t = 0; t < T; ++t) {
    const int lo = std::max(0, t - options.half_window);
    const int hi = std::min(T - 1, t + options.half_window);
    if (hi - lo < 3) continue;  // fewer than three other values
    double other_max = -INFINITY, other_min = INFINITY;
    std::vector<double> window;
    for (int u = lo; u <= hi; ++u) {
      window.push_back(row[u]);
      if (u == t) continue;
      other_max = std::max(other_max, row[u]);
      other_min = std::min(other_min, row[u]);
    }
    const double x = row[t];
    if ((x > other_max && x - other_max > limit) || (x < other_min && other_min - x > limit)) {
      out[t] = median(std::move(window));
      ++replaced;
    }
  }
  std::copy(out.begin(), out.end(), row.begin());
  return replaced;
}

DataMatrix preprocess(const DataMatrix& X, const PreprocessOptions& options) {
  DataMatrix out = X;
  if (!options.median_center && !options.replace_outliers) return out;
  for (int j = 0; j < out.rows(); ++j) {
    auto row = out.row(j);
    if (row.empty()) continue;
    std::vector<double> before;
    for (int pass = 0; pass < options.max_passes; ++pass) {
      before.assign(row.begin(), row.end());
      if (options.replace_outliers) replace_outliers_once(row, options);
      if (options.median_center) {
        const double m = median(std::vector<double>(row.begin(), row.end()));
        for (double& x : row) x -= m;
      }
      if (std::equal(row.begin(), row.end(), before.begin())) break;
    }
  }
  return out;
}

}  // namespace basic

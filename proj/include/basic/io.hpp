#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "basic/matrix.hpp"

namespace basic {

struct FormatOptions {
  std::optional<char> delimiter;  // detected from the first line when absent (tab, else comma)
  bool header = false;            // first line holds position labels
  bool row_ids = false;           // first field of each line is a sequence ID
};

struct Dataset {
  DataMatrix X;
  std::vector<std::string> ids;     // one per sequence (generated when absent)
  std::vector<std::string> labels;  // one per position (generated when absent)
  std::string corner;               // header field above the ID column
  bool has_header = false;
  bool has_ids = false;
  char delimiter = ',';
};

// Parse errors are DataErrors naming the 1-based line and field.
Dataset parse_dataset(std::istream& in, const FormatOptions& options = {});
Dataset load_dataset(const std::string& path, const FormatOptions& options = {});

// Canonical form: shortest round-trip decimal for every value, the
// dataset's delimiter, "\n" line endings, header and IDs only if present.
void write_dataset(std::ostream& out, const Dataset& data);
void save_dataset(const std::string& path, const Dataset& data);

// Shortest decimal string that parses back to exactly `x`.
std::string format_canonical(double x);

Dataset make_dataset(DataMatrix X);

struct PreprocessOptions {
  bool median_center = false;
  bool replace_outliers = false;
  int half_window = 3;
  double threshold = 2.0;     // in units of the MAD noise estimate
  double mad_scale = 1.4826;  // MAD to standard deviation under normal noise
  int max_passes = 1000;
};

double median(std::vector<double> values);
// Scaled median absolute deviation of one row.
double mad_sigma(std::span<const double> row, double scale = 1.4826);

// One simultaneous pass of the outlier rule over a row; returns the number
// of replacements.
int replace_outliers_once(std::span<double> row, const PreprocessOptions& options);

// Outlier replacement and median-centering per row, repeated until the
// row no longer changes so that a second application is a no-op.
DataMatrix preprocess(const DataMatrix& X, const PreprocessOptions& options);

}  // namespace basic

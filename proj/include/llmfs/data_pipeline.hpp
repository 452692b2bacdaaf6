#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "llmfs/common.hpp"
#include "llmfs/csv.hpp"

namespace llmfs {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = (*this)(r, c);
    return out;
  }

  bool operator==(const Matrix&) const = default;
};

/// Feature table with per-row class labels.
struct Dataset {
  std::vector<std::string> feature_names;
  Matrix matrix;
  std::vector<std::string> labels;
  std::vector<std::string> class_names;  // sorted distinct labels

  std::size_t rows() const { return matrix.rows; }
  std::size_t cols() const { return matrix.cols; }

  /// Recomputes class_names from labels.
  void refresh_classes() {
    std::set<std::string> distinct(labels.begin(), labels.end());
    class_names.assign(distinct.begin(), distinct.end());
  }

  /// Label of each row as an index into class_names.
  std::vector<int> label_indices() const {
    std::map<std::string, int> lookup;
    for (std::size_t i = 0; i < class_names.size(); ++i) lookup[class_names[i]] = static_cast<int>(i);
    std::vector<int> out;
    out.reserve(labels.size());
    for (const auto& l : labels) {
      const auto it = lookup.find(l);
      if (it == lookup.end()) throw Error("label '" + l + "' not in class list");
      out.push_back(it->second);
    }
    return out;
  }

  std::size_t column_index(const std::string& name) const {
    const auto it = std::find(feature_names.begin(), feature_names.end(), name);
    if (it == feature_names.end()) throw Error("unknown feature '" + name + "'");
    return static_cast<std::size_t>(it - feature_names.begin());
  }

  /// Throws if any Dataset invariant is violated.
  void validate() const {
    if (matrix.rows != labels.size()) throw Error("row count does not match label count");
    if (matrix.cols != feature_names.size()) throw Error("column count does not match feature names");
    if (matrix.data.size() != matrix.rows * matrix.cols) throw Error("matrix storage size mismatch");
    std::unordered_set<std::string> seen;
    for (const auto& n : feature_names) {
      if (!seen.insert(n).second) throw Error("duplicate feature name '" + n + "'");
    }
    for (double v : matrix.data) {
      if (!std::isfinite(v)) throw Error("non-finite value in dataset");
    }
  }

  Dataset select_rows(std::span<const std::size_t> indices) const {
    Dataset out;
    out.feature_names = feature_names;
    out.matrix = Matrix(indices.size(), cols());
    out.labels.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const auto src = matrix.row(indices[i]);
      std::copy(src.begin(), src.end(), out.matrix.row(i).begin());
      out.labels.push_back(labels[indices[i]]);
    }
    out.refresh_classes();
    return out;
  }

  Dataset select_columns(std::span<const std::size_t> indices) const {
    Dataset out;
    out.matrix = Matrix(rows(), indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) {
      out.feature_names.push_back(feature_names.at(indices[j]));
      for (std::size_t r = 0; r < rows(); ++r) out.matrix(r, j) = matrix(r, indices[j]);
    }
    out.labels = labels;
    out.class_names = class_names;
    return out;
  }

  Dataset select_columns(const std::vector<std::string>& names) const {
    std::vector<std::size_t> idx;
    idx.reserve(names.size());
    for (const auto& n : names) idx.push_back(column_index(n));
    return select_columns(std::span<const std::size_t>(idx));
  }
};

// ---------------------------------------------------------------------------
// Loading and writing

enum class NonFinitePolicy { drop_row, error };

struct LoadOptions {
  NonFinitePolicy nonfinite = NonFinitePolicy::drop_row;
};

/// Loads a comma-delimited file with a header row. Non-numeric columns
/// (first data cell does not parse) are dropped with a warning. Lines
/// starting with '#' are ignored.
inline Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                        Warnings* warnings = nullptr, LoadOptions options = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file: " + path.string());

  std::string line;
  if (!csv::next_record_line(in, line)) throw Error(path.string() + ": missing header row");
  auto header = csv::split_record(line);
  for (auto& h : header) h = std::string(trim(h));

  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    throw Error(path.string() + ": label column '" + label_column + "' not found");
  }
  const std::size_t label_idx = static_cast<std::size_t>(label_it - header.begin());

  Dataset d;
  std::vector<std::size_t> numeric_cols;
  std::vector<double> row_values;
  std::size_t line_no = 1;
  std::size_t dropped_rows = 0;
  bool typed = false;

  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = csv::split_record(line);
    if (cells.size() != header.size()) {
      throw Error(path.string() + ": line " + std::to_string(line_no) + " has " +
                  std::to_string(cells.size()) + " fields, expected " + std::to_string(header.size()));
    }
    if (!typed) {
      for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == label_idx) continue;
        if (csv::parse_double(cells[c])) {
          numeric_cols.push_back(c);
        } else {
          warn(warnings, "dropping non-numeric column '" + header[c] + "'");
        }
      }
      for (auto c : numeric_cols) d.feature_names.push_back(header[c]);
      typed = true;
    }
    row_values.clear();
    bool finite = true;
    for (auto c : numeric_cols) {
      const auto v = csv::parse_double(cells[c]);
      const auto cell = trim(cells[c]);
      if (!v && !cell.empty()) {
        throw Error(path.string() + ": unparsable numeric cell at line " + std::to_string(line_no) +
                    ", column '" + header[c] + "': '" + std::string(cell) + "'");
      }
      if (!v || !std::isfinite(*v)) {
        if (options.nonfinite == NonFinitePolicy::error) {
          throw Error(path.string() + ": non-finite or empty cell at line " + std::to_string(line_no) +
                      ", column '" + header[c] + "'");
        }
        finite = false;
        break;
      }
      row_values.push_back(*v);
    }
    if (!finite) {
      ++dropped_rows;
      continue;
    }
    d.matrix.data.insert(d.matrix.data.end(), row_values.begin(), row_values.end());
    d.labels.emplace_back(trim(cells[label_idx]));
  }

  if (d.labels.empty()) throw Error(path.string() + ": no data rows");
  if (dropped_rows > 0) {
    warn(warnings, "dropped " + std::to_string(dropped_rows) + " rows with non-finite or empty cells");
  }
  d.matrix.rows = d.labels.size();
  d.matrix.cols = d.feature_names.size();
  d.refresh_classes();
  d.validate();
  return d;
}

/// Writes features followed by the label column. Doubles are written in
/// shortest round-trip form, so load_csv(write_csv(d)) reproduces d exactly.
inline void write_csv(const Dataset& d, const std::filesystem::path& path, const std::string& label_column,
                      const std::string& comment = {}) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  if (!comment.empty()) out << "# " << comment << '\n';
  for (const auto& n : d.feature_names) out << csv::quote_if_needed(n) << ',';
  out << csv::quote_if_needed(label_column) << '\n';
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.cols(); ++c) out << csv::format_double(d.matrix(r, c)) << ',';
    out << csv::quote_if_needed(d.labels[r]) << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Correlation

struct PearsonResult {
  double r = 0.0;
  bool degenerate = false;  // one input was constant; r is 0 by convention
};

/// Sample Pearson correlation, two-pass.
inline PearsonResult pearson_checked(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("pearson: length mismatch");
  if (x.size() < 2) throw Error("pearson: need at least 2 values");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return {0.0, true};
  const double r = (sxy / (n - 1.0)) / (std::sqrt(sxx / (n - 1.0)) * std::sqrt(syy / (n - 1.0)));
  return {std::clamp(r, -1.0, 1.0), false};
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  return pearson_checked(x, y).r;
}

// ---------------------------------------------------------------------------
// Cleaning and pruning

/// Drops zero-variance columns. Returns the names of dropped columns.
inline std::vector<std::string> drop_constant_columns(Dataset& d, Warnings* warnings = nullptr) {
  std::vector<std::size_t> keep;
  std::vector<std::string> dropped;
  for (std::size_t c = 0; c < d.cols(); ++c) {
    bool constant = true;
    const double first = d.rows() ? d.matrix(0, c) : 0.0;
    for (std::size_t r = 1; r < d.rows() && constant; ++r) constant = d.matrix(r, c) == first;
    if (constant) {
      dropped.push_back(d.feature_names[c]);
      warn(warnings, "dropping constant column '" + d.feature_names[c] + "'");
    } else {
      keep.push_back(c);
    }
  }
  if (!dropped.empty()) d = d.select_columns(std::span<const std::size_t>(keep));
  return dropped;
}

struct CollinearRemoval {
  std::string kept_feature;
  std::string dropped_feature;
  double abs_r = 0.0;
};

struct PruneResult {
  Dataset dataset;
  std::vector<CollinearRemoval> removed;
};

/// Scans columns in order and drops any column whose |r| with an already
/// retained lower-index column exceeds the threshold. The first retained
/// partner over the threshold is recorded.
inline PruneResult prune_collinear(const Dataset& d, double threshold = 0.9) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw Error("prune_collinear: threshold must be in (0, 1]");
  const std::size_t n = d.rows();
  const std::size_t m = d.cols();
  if (n < 2) return {d, {}};

  // Unit-norm centred columns: r(i, j) is then a dot product.
  std::vector<std::vector<double>> unit(m);
  std::vector<bool> constant(m, false);
  for (std::size_t c = 0; c < m; ++c) {
    auto col = d.matrix.column(c);
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (auto& v : col) {
      v -= mean;
      ss += v * v;
    }
    if (ss <= 0.0) {
      constant[c] = true;
    } else {
      const double inv = 1.0 / std::sqrt(ss);
      for (auto& v : col) v *= inv;
    }
    unit[c] = std::move(col);
  }

  std::vector<std::size_t> kept;
  std::vector<CollinearRemoval> removed;
  for (std::size_t j = 0; j < m; ++j) {
    bool drop = false;
    if (!constant[j]) {
      for (auto i : kept) {
        if (constant[i]) continue;
        const double r = std::clamp(std::inner_product(unit[i].begin(), unit[i].end(), unit[j].begin(), 0.0), -1.0, 1.0);
        if (std::abs(r) > threshold) {
          removed.push_back({d.feature_names[i], d.feature_names[j], std::abs(r)});
          drop = true;
          break;
        }
      }
    }
    if (!drop) kept.push_back(j);
  }
  return {d.select_columns(std::span<const std::size_t>(kept)), std::move(removed)};
}

// ---------------------------------------------------------------------------
// Standardization

/// Per-feature affine transform (x - mean) / std, population std.
struct ScalerParams {
  std::vector<std::string> feature_names;
  std::vector<double> mean;
  std::vector<double> std;

  Dataset apply(const Dataset& d) const {
    Dataset out = d.select_columns(feature_names);
    for (std::size_t r = 0; r < out.rows(); ++r) {
      for (std::size_t c = 0; c < out.cols(); ++c) out.matrix(r, c) = (out.matrix(r, c) - mean[c]) / std[c];
    }
    return out;
  }

  Dataset inverse(const Dataset& d) const {
    Dataset out = d.select_columns(feature_names);
    for (std::size_t r = 0; r < out.rows(); ++r) {
      for (std::size_t c = 0; c < out.cols(); ++c) out.matrix(r, c) = out.matrix(r, c) * std[c] + mean[c];
    }
    return out;
  }
};

struct StandardizeResult {
  Dataset dataset;
  ScalerParams params;
};

/// Fits and applies standardization. Constant columns are dropped with a
/// warning first.
inline StandardizeResult standardize(const Dataset& input, Warnings* warnings = nullptr) {
  Dataset d = input;
  drop_constant_columns(d, warnings);
  ScalerParams p;
  p.feature_names = d.feature_names;
  const double n = static_cast<double>(d.rows());
  for (std::size_t c = 0; c < d.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < d.rows(); ++r) mean += d.matrix(r, c);
    mean /= n;
    double ss = 0.0;
    for (std::size_t r = 0; r < d.rows(); ++r) {
      const double dv = d.matrix(r, c) - mean;
      ss += dv * dv;
    }
    p.mean.push_back(mean);
    p.std.push_back(std::sqrt(ss / n));
  }
  Dataset out = p.apply(d);
  return {std::move(out), std::move(p)};
}

// ---------------------------------------------------------------------------
// Class balance and splitting

struct ClassDistribution {
  std::vector<std::string> class_names;
  std::vector<std::size_t> counts;
  std::vector<double> percents;

  std::size_t total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

  std::size_t count(const std::string& name) const {
    for (std::size_t i = 0; i < class_names.size(); ++i) {
      if (class_names[i] == name) return counts[i];
    }
    return 0;
  }
};

inline ClassDistribution class_distribution(const Dataset& d) {
  ClassDistribution dist;
  dist.class_names = d.class_names;
  dist.counts.assign(d.class_names.size(), 0);
  for (int idx : d.label_indices()) ++dist.counts[static_cast<std::size_t>(idx)];
  const double total = static_cast<double>(d.rows());
  for (auto c : dist.counts) dist.percents.push_back(total > 0 ? 100.0 * static_cast<double>(c) / total : 0.0);
  return dist;
}

inline std::vector<std::vector<std::size_t>> rows_by_class(const Dataset& d) {
  std::vector<std::vector<std::size_t>> groups(d.class_names.size());
  const auto idx = d.label_indices();
  for (std::size_t r = 0; r < idx.size(); ++r) groups[static_cast<std::size_t>(idx[r])].push_back(r);
  return groups;
}

/// Reduces only the largest class, without replacement, to the size of the
/// smallest class. Every other class is untouched and row order is kept.
inline Dataset undersample_majority(const Dataset& d, std::uint64_t seed) {
  if (d.class_names.size() < 2) throw Error("undersample_majority: need at least 2 classes");
  auto groups = rows_by_class(d);
  std::size_t largest = 0;
  std::size_t smallest = 0;
  for (std::size_t i = 1; i < groups.size(); ++i) {
    if (groups[i].size() > groups[largest].size()) largest = i;
    if (groups[i].size() < groups[smallest].size()) smallest = i;
  }
  const std::size_t target = groups[smallest].size();
  if (groups[largest].size() <= target) return d;

  Rng rng(seed);
  auto& majority = groups[largest];
  shuffle(std::span<std::size_t>(majority), rng);
  majority.resize(target);

  std::vector<std::size_t> keep;
  for (const auto& g : groups) keep.insert(keep.end(), g.begin(), g.end());
  std::sort(keep.begin(), keep.end());
  return d.select_rows(keep);
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Row partition; both index lists are ascending.
inline SplitIndices split_indices(const Dataset& d, double test_fraction, std::uint64_t seed, bool stratified) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error("split: test_fraction must be in (0, 1)");
  Rng rng(seed);
  SplitIndices out;
  auto take = [&](std::vector<std::size_t> rows) {
    shuffle(std::span<std::size_t>(rows), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
    out.test.insert(out.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.insert(out.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  };
  if (stratified) {
    const auto groups = rows_by_class(d);
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (groups[i].size() < 2) {
        throw Error("split: class '" + d.class_names[i] + "' has fewer than 2 rows for stratification");
      }
    }
    for (const auto& g : groups) take(g);
  } else {
    std::vector<std::size_t> all(d.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    take(std::move(all));
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline std::pair<Dataset, Dataset> split(const Dataset& d, double test_fraction, std::uint64_t seed,
                                         bool stratified = true) {
  const auto idx = split_indices(d, test_fraction, seed, stratified);
  Dataset train = d.select_rows(idx.train);
  Dataset test = d.select_rows(idx.test);
  // Both halves share the full class list so label indices agree.
  train.class_names = d.class_names;
  test.class_names = d.class_names;
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Full preprocessing sequence

struct PreprocessOptions {
  double collinearity_threshold = 0.9;
  bool undersample = true;
  std::uint64_t seed = 42;
};

struct PreprocessReport {
  Dataset dataset;
  std::vector<std::string> constant_dropped;
  std::vector<CollinearRemoval> removed;
  ScalerParams scaler;
  ClassDistribution before;
  ClassDistribution after;
};

/// constant-column drop -> collinearity prune -> standardize -> majority
/// undersampling.
inline PreprocessReport preprocess(const Dataset& raw, const PreprocessOptions& options = {},
                                   Warnings* warnings = nullptr) {
  PreprocessReport rep;
  rep.before = class_distribution(raw);
  Dataset d = raw;
  rep.constant_dropped = drop_constant_columns(d, warnings);
  auto pruned = prune_collinear(d, options.collinearity_threshold);
  rep.removed = std::move(pruned.removed);
  auto scaled = standardize(pruned.dataset, warnings);
  rep.scaler = std::move(scaled.params);
  rep.dataset = options.undersample ? undersample_majority(scaled.dataset, options.seed) : std::move(scaled.dataset);
  rep.dataset.class_names = raw.class_names;
  rep.after = class_distribution(rep.dataset);
  return rep;
}

}  // namespace llmfs

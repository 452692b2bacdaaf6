#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "llmfs/data_pipeline.hpp"

namespace llmfs {

/// What the Refiner sees about one feature.
struct FeatureMetadata {
  std::string name;
  double mean = 0.0;
  double std = 0.0;  // population
  std::map<std::string, double> corr_per_class;
  double corr_mean = 0.0;
  double corr_std = 0.0;  // population, across classes
  bool constant = false;
  /// Free-form redundancy context, e.g. collinear columns removed in favour
  /// of this one. Rendered into the Refiner and Challenger prompts.
  std::vector<std::string> notes;
};

enum class CorrelationTarget {
  one_vs_rest,  // one indicator per class
  binary,       // label != negative_class
};

struct MetadataOptions {
  CorrelationTarget target = CorrelationTarget::one_vs_rest;
  std::string negative_class = "Benign";
};

/// Pearson correlation of the feature column against each class indicator.
/// A constant column yields all zeros; `constant` reports that case.
inline std::map<std::string, double> one_vs_rest_correlations(const Dataset& d, std::size_t feature_index,
                                                               bool* constant = nullptr) {
  if (feature_index >= d.cols()) throw Error("one_vs_rest_correlations: feature index out of range");
  if (d.class_names.size() < 2) throw Error("one_vs_rest_correlations: need at least 2 classes");
  const auto column = d.matrix.column(feature_index);
  const auto idx = d.label_indices();
  std::map<std::string, double> out;
  bool degenerate = false;
  std::vector<double> indicator(idx.size());
  for (std::size_t c = 0; c < d.class_names.size(); ++c) {
    for (std::size_t r = 0; r < idx.size(); ++r) indicator[r] = idx[r] == static_cast<int>(c) ? 1.0 : 0.0;
    const auto res = pearson_checked(column, indicator);
    out[d.class_names[c]] = res.r;
    degenerate = degenerate || res.degenerate;
  }
  if (constant) *constant = degenerate;
  return out;
}

inline std::map<std::string, double> binary_correlation(const Dataset& d, std::size_t feature_index,
                                                        const std::string& negative_class, bool* constant = nullptr) {
  if (feature_index >= d.cols()) throw Error("binary_correlation: feature index out of range");
  const auto column = d.matrix.column(feature_index);
  std::vector<double> indicator(d.rows());
  for (std::size_t r = 0; r < d.rows(); ++r) indicator[r] = d.labels[r] == negative_class ? 0.0 : 1.0;
  const auto res = pearson_checked(column, indicator);
  if (constant) *constant = res.degenerate;
  return {{"not_" + negative_class, res.r}};
}

inline FeatureMetadata feature_metadata(const Dataset& d, std::size_t c, const MetadataOptions& options = {}) {
  FeatureMetadata m;
  m.name = d.feature_names.at(c);
  const double n = static_cast<double>(d.rows());
  for (std::size_t r = 0; r < d.rows(); ++r) m.mean += d.matrix(r, c);
  m.mean /= n;
  double ss = 0.0;
  for (std::size_t r = 0; r < d.rows(); ++r) ss += (d.matrix(r, c) - m.mean) * (d.matrix(r, c) - m.mean);
  m.std = std::sqrt(ss / n);

  m.corr_per_class = options.target == CorrelationTarget::one_vs_rest
                         ? one_vs_rest_correlations(d, c, &m.constant)
                         : binary_correlation(d, c, options.negative_class, &m.constant);
  const double k = static_cast<double>(m.corr_per_class.size());
  for (const auto& [cls, r] : m.corr_per_class) m.corr_mean += r;
  m.corr_mean /= k;
  double cs = 0.0;
  for (const auto& [cls, r] : m.corr_per_class) cs += (r - m.corr_mean) * (r - m.corr_mean);
  m.corr_std = std::sqrt(cs / k);
  return m;
}

/// One entry per feature in column order.
inline std::vector<FeatureMetadata> compute_metadata(const Dataset& d, const MetadataOptions& options = {}) {
  std::vector<FeatureMetadata> out;
  out.reserve(d.cols());
  for (std::size_t c = 0; c < d.cols(); ++c) out.push_back(feature_metadata(d, c, options));
  return out;
}

/// Attaches collinearity-removal context to the retained partner feature.
inline void attach_removal_notes(std::vector<FeatureMetadata>& metadata, const std::vector<CollinearRemoval>& removed) {
  for (auto& m : metadata) {
    for (const auto& r : removed) {
      if (r.kept_feature != m.name) continue;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.4f", r.abs_r);
      m.notes.push_back("near-duplicate column '" + r.dropped_feature + "' (|r| = " + buf +
                        ") was removed in favour of this feature");
    }
  }
}

}  // namespace llmfs

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "llmfs/feature_stats.hpp"
#include "support.hpp"

using namespace llmfs;
using testing_support::make_dataset;

namespace {

double oracle_r(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

Dataset three_class(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const std::vector<std::string> classes{"Benign", "BruteForce", "Mirai"};
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = classes[i % 3];
    rows.push_back({2.0 * (c == "Mirai" ? 1.0 : 0.0) + g(rng), g(rng)});
    labels.push_back(c);
  }
  return make_dataset({"mirai_signal", "noise"}, rows, labels);
}

}  // namespace

TEST(OneVsRest, IndicatorFeatureGivesOne) {
  const auto d = make_dataset({"isA"}, {{1}, {0}, {1}, {0}, {0}}, {"A", "B", "A", "C", "B"});
  const auto c = one_vs_rest_correlations(d, 0);
  EXPECT_NEAR(c.at("A"), 1.0, 1e-12);
}

TEST(OneVsRest, SameConstantEverywhereGivesZeros) {
  const auto d = make_dataset({"k"}, {{4}, {4}, {4}, {4}}, {"A", "B", "A", "B"});
  bool constant = false;
  const auto c = one_vs_rest_correlations(d, 0, &constant);
  EXPECT_TRUE(constant);
  for (const auto& [k, v] : c) EXPECT_EQ(v, 0.0);
}

TEST(OneVsRest, MatchesPerClassPearsonOracle) {
  const auto d = three_class(300, 4);
  const auto c = one_vs_rest_correlations(d, 0);
  const auto col = d.matrix.column(0);
  for (const auto& cls : d.class_names) {
    std::vector<double> ind;
    for (const auto& l : d.labels) ind.push_back(l == cls ? 1.0 : 0.0);
    EXPECT_NEAR(c.at(cls), oracle_r(col, ind), 1e-12) << cls;
  }
  EXPECT_GT(c.at("Mirai"), 0.5);
}

TEST(OneVsRest, BinaryTargetOption) {
  const auto d = three_class(90, 1);
  const auto c = binary_correlation(d, 0, "Benign");
  ASSERT_EQ(c.size(), 1u);
  std::vector<double> ind;
  for (const auto& l : d.labels) ind.push_back(l == "Benign" ? 0.0 : 1.0);
  EXPECT_NEAR(c.at("not_Benign"), oracle_r(d.matrix.column(0), ind), 1e-12);
}

TEST(Metadata, StandardizedDatasetHasUnitMoments) {
  auto d = standardize(testing_support::random_dataset(200, 5, {"A", "B", "C"}, 3)).dataset;
  for (const auto& m : compute_metadata(d)) {
    EXPECT_NEAR(m.mean, 0.0, 1e-12);
    EXPECT_NEAR(m.std, 1.0, 1e-12);
  }
}

TEST(Metadata, SingleFeature) {
  const auto d = testing_support::random_dataset(20, 1, {"A", "B"}, 3);
  EXPECT_EQ(compute_metadata(d).size(), 1u);
}

TEST(Metadata, CorrSummaryMatchesIndependentPass) {
  const auto d = testing_support::random_dataset(120, 10, {"A", "B", "C"}, 6);
  const auto meta = compute_metadata(d);
  ASSERT_EQ(meta.size(), 10u);
  for (std::size_t c = 0; c < 10; ++c) {
    std::vector<double> rs;
    for (const auto& cls : d.class_names) {
      std::vector<double> ind;
      for (const auto& l : d.labels) ind.push_back(l == cls ? 1.0 : 0.0);
      rs.push_back(oracle_r(d.matrix.column(c), ind));
    }
    double mean = 0;
    for (double r : rs) mean += r;
    mean /= static_cast<double>(rs.size());
    double var = 0;
    for (double r : rs) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / static_cast<double>(rs.size()));
    EXPECT_NEAR(meta[c].corr_mean, mean, 1e-12);
    EXPECT_NEAR(meta[c].corr_std, sd, 1e-12);
  }
}

TEST(Metadata, RowPermutationInvariance) {
  const auto d = testing_support::random_dataset(80, 4, {"A", "B", "C"}, 10);
  std::vector<std::size_t> perm(d.rows());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto p = d.select_rows(perm);
  const auto a = compute_metadata(d);
  const auto b = compute_metadata(p);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i].mean, b[i].mean, 1e-12);
    EXPECT_NEAR(a[i].std, b[i].std, 1e-12);
    EXPECT_NEAR(a[i].corr_mean, b[i].corr_mean, 1e-12);
    EXPECT_NEAR(a[i].corr_std, b[i].corr_std, 1e-12);
    for (const auto& [k, v] : a[i].corr_per_class) EXPECT_NEAR(v, b[i].corr_per_class.at(k), 1e-12);
  }
}

TEST(Metadata, PositiveScalingKeepsCorrelations) {
  auto d = testing_support::random_dataset(80, 3, {"A", "B", "C"}, 11);
  const auto before = compute_metadata(d);
  for (std::size_t r = 0; r < d.rows(); ++r) d.matrix(r, 1) *= 37.5;
  const auto after = compute_metadata(d);
  for (const auto& [k, v] : before[1].corr_per_class) EXPECT_NEAR(v, after[1].corr_per_class.at(k), 1e-12);
}

TEST(Metadata, RemovalNotesAttachToKeptFeature) {
  auto meta = compute_metadata(testing_support::random_dataset(30, 2, {"A", "B"}, 2));
  attach_removal_notes(meta, {{"f0", "f0_copy", 0.97}});
  ASSERT_EQ(meta[0].notes.size(), 1u);
  EXPECT_NE(meta[0].notes[0].find("f0_copy"), std::string::npos);
  EXPECT_NE(meta[0].notes[0].find("0.9700"), std::string::npos);
  EXPECT_TRUE(meta[1].notes.empty());
}

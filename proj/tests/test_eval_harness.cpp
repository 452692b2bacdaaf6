#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "llmfs/eval_harness.hpp"
#include "support.hpp"

using namespace llmfs;
using testing_support::make_dataset;

namespace {

/// O(n^2) pairwise AUC per class, ties counting one half, macro-averaged.
double pairwise_auc(const Matrix& p, const std::vector<int>& y) {
  double sum = 0;
  int used = 0;
  for (std::size_t k = 0; k < p.cols; ++k) {
    double wins = 0;
    double pairs = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (static_cast<std::size_t>(y[i]) != k) continue;
      for (std::size_t j = 0; j < y.size(); ++j) {
        if (static_cast<std::size_t>(y[j]) == k) continue;
        pairs += 1;
        if (p(i, k) > p(j, k)) wins += 1;
        if (p(i, k) == p(j, k)) wins += 0.5;
      }
    }
    if (pairs == 0) continue;
    sum += wins / pairs;
    ++used;
  }
  return sum / used;
}

/// Two-class XOR on a grid, leaving a margin around both axes.
Dataset xor_grid(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = coin(rng) ? u(rng) : -u(rng);
    const double y = coin(rng) ? u(rng) : -u(rng);
    rows.push_back({x, y});
    labels.push_back((x > 0) == (y > 0) ? "same" : "diff");
  }
  return make_dataset({"x", "y"}, rows, labels);
}

ClassifierSpec lr(double iterations = 500) {
  return {ClassifierKind::logistic_regression, {{"iterations", iterations}}, 1};
}

ClassifierSpec rf(double trees, std::uint64_t seed = 1) {
  return {ClassifierKind::random_forest, {{"trees", trees}, {"max_depth", 0}}, seed};
}

}  // namespace

// --- logistic regression ---------------------------------------------------

TEST(Logistic, SeparableBlobs) {
  const auto d = testing_support::blobs(100, 2, 2, 6.0, 3);
  const auto m = train_logistic(d, lr());
  const auto p = predict_proba(m, d.matrix);
  EXPECT_GE(accuracy(argmax_rows(p), d.label_indices()), 0.99);
}

TEST(Logistic, ZeroIterationsIsUniform) {
  const auto d = testing_support::blobs(10, 3, 2, 2.0, 3);
  const auto m = train_logistic(d, lr(0));
  const auto p = predict_proba(m, d.matrix);
  for (double v : p.data) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Logistic, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    const auto d = testing_support::random_dataset(30, 4, {"A", "B", "C"}, 10 + static_cast<std::uint64_t>(trial));
    const auto y = d.label_indices();
    LogisticModel m;
    m.n_features = 4;
    m.n_classes = 3;
    m.weights.resize(12);
    m.bias.resize(3);
    for (auto& w : m.weights) w = g(rng);
    for (auto& b : m.bias) b = g(rng);
    const double l2 = 0.01;
    std::vector<double> gw, gb;
    logistic_loss(m, d.matrix, y, l2, &gw, &gb);
    const double h = 1e-6;
    auto check = [&](double& param, double analytic) {
      const double orig = param;
      param = orig + h;
      const double up = logistic_loss(m, d.matrix, y, l2);
      param = orig - h;
      const double down = logistic_loss(m, d.matrix, y, l2);
      param = orig;
      const double numeric = (up - down) / (2 * h);
      EXPECT_LE(std::abs(analytic - numeric), 1e-5 * std::max(1.0, std::abs(numeric)));
    };
    for (std::size_t i = 0; i < m.weights.size(); ++i) check(m.weights[i], gw[i]);
    for (std::size_t k = 0; k < m.bias.size(); ++k) check(m.bias[k], gb[k]);
  }
}

TEST(Logistic, RejectsBadSpecs) {
  const auto d = testing_support::blobs(5, 2, 2, 1.0, 1);
  EXPECT_THROW(train_logistic(d, {ClassifierKind::logistic_regression, {{"learning_rate", 0}}, 1}), Error);
  EXPECT_THROW(train_logistic(d, {ClassifierKind::logistic_regression, {{"depth", 3}}, 1}), Error);
  EXPECT_THROW(train_logistic(d, rf(3)), Error);
}

// --- random forest ---------------------------------------------------------

TEST(Forest, SingleTreeMemorisesXor) {
  const auto d = make_dataset({"x", "y"}, {{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {"a", "b", "b", "a"});
  ClassifierSpec spec{ClassifierKind::random_forest, {{"trees", 1}, {"max_depth", 0}, {"bootstrap", 0}}, 3};
  const auto m = train_random_forest(d, spec);
  EXPECT_EQ(accuracy(argmax_rows(predict_proba(m, d.matrix)), d.label_indices()), 1.0);
}

TEST(Forest, XorWithMarginGeneralises) {
  const auto train = xor_grid(400, 1);
  auto test = xor_grid(200, 2);
  test.class_names = train.class_names;
  const auto m = train_random_forest(train, rf(100));
  EXPECT_GE(accuracy(argmax_rows(predict_proba(m, test.matrix)), test.label_indices()), 0.9);
}

TEST(Forest, SameSeedSamePredictionsAnyThreadCount) {
  const auto train = testing_support::blobs(60, 3, 4, 1.0, 5);
  const auto test = testing_support::blobs(20, 3, 4, 1.0, 6);
  auto spec = rf(25, 9);
  const auto a = predict_proba(train_random_forest(train, spec), test.matrix);
  spec.hyperparams["threads"] = 3;
  const auto b = predict_proba(train_random_forest(train, spec), test.matrix);
  EXPECT_EQ(a, b);
  spec.seed = 10;
  const auto c = predict_proba(train_random_forest(train, spec), test.matrix);
  EXPECT_NE(a, c);
}

TEST(Forest, UnanimousVoteIsCertain) {
  const auto d = make_dataset({"x"}, {{0}, {0.1}, {5}, {5.1}}, {"A", "A", "B", "B"});
  const auto m = train_random_forest(d, {ClassifierKind::random_forest, {{"trees", 7}, {"bootstrap", 0}}, 1});
  const auto p = predict_proba(m, make_dataset({"x"}, {{-1}}, {"A"}).matrix);
  EXPECT_EQ(p(0, 0), 1.0);
  EXPECT_EQ(p(0, 1), 0.0);
}

TEST(Forest, RejectsBadSpecs) {
  const auto d = testing_support::blobs(5, 2, 2, 1.0, 1);
  EXPECT_THROW(train_random_forest(d, rf(0)), Error);
  EXPECT_THROW(train_random_forest(d, {ClassifierKind::random_forest, {{"bootstrap", 2}}, 1}), Error);
}

// --- probabilities ---------------------------------------------------------

TEST(Proba, SoftmaxOfZerosIsUniform) {
  Matrix z(2, 4, 0.0);
  softmax_rows(z);
  for (double v : z.data) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Proba, RowsSumToOne) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    const auto d = testing_support::random_dataset(50, 5, {"A", "B", "C", "D"}, static_cast<std::uint64_t>(trial));
    LogisticModel m;
    m.n_features = 5;
    m.n_classes = 4;
    m.weights.resize(20);
    m.bias.resize(4);
    for (auto& w : m.weights) w = 10 * g(rng);
    for (auto& b : m.bias) b = g(rng);
    const auto forest = train_random_forest(d, rf(13, static_cast<std::uint64_t>(trial)));
    for (const Model& model : {Model(m), Model(forest)}) {
      const auto p = predict_proba(model, d.matrix);
      for (std::size_t r = 0; r < p.rows; ++r) {
        double s = 0;
        for (double v : p.row(r)) s += v;
        EXPECT_NEAR(s, 1.0, 1e-9);
      }
    }
  }
}

TEST(Proba, DimensionMismatchRejected) {
  const auto d = testing_support::blobs(5, 2, 2, 1.0, 1);
  const Model m = train_logistic(d, lr(5));
  EXPECT_THROW(predict_proba(m, Matrix(3, 5)), Error);
}

// --- metrics ---------------------------------------------------------------

TEST(Accuracy, Counting) {
  const std::vector<int> t{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
  EXPECT_EQ(accuracy(t, t), 1.0);
  std::vector<int> wrong(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) wrong[i] = (t[i] + 1) % 3;
  EXPECT_EQ(accuracy(wrong, t), 0.0);
  auto seven = t;
  for (std::size_t i = 0; i < 3; ++i) seven[i] = (seven[i] + 1) % 3;
  EXPECT_DOUBLE_EQ(accuracy(seven, t), 0.7);
  EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), Error);
}

TEST(Auc, PerfectSeparation) {
  Matrix p(6, 3, 0.0);
  const std::vector<int> y{0, 0, 1, 1, 2, 2};
  for (std::size_t r = 0; r < 6; ++r) p(r, static_cast<std::size_t>(y[r])) = 1.0;
  EXPECT_EQ(auc_ovr_macro(p, y), 1.0);
}

TEST(Auc, RandomScoresNearHalf) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  std::uniform_int_distribution<int> cls(0, 2);
  Matrix p(6000, 3);
  std::vector<int> y(6000);
  for (std::size_t r = 0; r < 6000; ++r) {
    for (std::size_t k = 0; k < 3; ++k) p(r, k) = u(rng);
    y[r] = cls(rng);
  }
  EXPECT_NEAR(auc_ovr_macro(p, y), 0.5, 0.02);
}

TEST(Auc, EqualsPairwiseOracleWithTies) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> coarse(0, 4);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix p(20, 3);
    std::vector<int> y(20);
    for (std::size_t r = 0; r < 20; ++r) {
      for (std::size_t k = 0; k < 3; ++k) p(r, k) = coarse(rng) / 4.0;
      y[r] = static_cast<int>(r % 3);
    }
    EXPECT_EQ(auc_ovr_macro(p, y), pairwise_auc(p, y));
  }
}

TEST(Auc, MonotoneTransformInvariant) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 1);
  Matrix p(40, 3), q(40, 3);
  std::vector<int> y(40);
  for (std::size_t r = 0; r < 40; ++r) {
    for (std::size_t k = 0; k < 3; ++k) {
      p(r, k) = u(rng);
      q(r, k) = k == 0 ? std::exp(3 * p(r, k)) : (k == 1 ? std::log(p(r, k)) : p(r, k) * p(r, k) * p(r, k));
    }
    y[r] = static_cast<int>(r % 3);
  }
  EXPECT_EQ(auc_ovr_macro(p, y), auc_ovr_macro(q, y));
}

TEST(Auc, MissingClassSkippedWithWarning) {
  Matrix p(4, 3, 0.3);
  p(0, 0) = 0.9;
  const std::vector<int> y{0, 1, 0, 1};
  Warnings w;
  EXPECT_NO_THROW(auc_ovr_macro(p, y, &w));
  EXPECT_EQ(w.size(), 1u);
}

// --- grid cells ------------------------------------------------------------

TEST(EvaluateCell, SubsetDimensionsAndBookkeeping) {
  const auto tr = testing_support::blobs(40, 3, 8, 1.5, 1);
  const auto te = testing_support::blobs(10, 3, 8, 1.5, 2);
  const CellInput in{{"x0", "x1", "x2", "x3", "x4"}, 0};
  const auto r = evaluate_cell(tr, te, in, lr(50), 1, "debate", 5);
  EXPECT_EQ(r.n, 5u);
  EXPECT_EQ(r.method_id, "debate");
  EXPECT_EQ(r.classifier, "logistic_regression");
  EXPECT_GT(r.accuracy, 0.5);
  EXPECT_GE(r.train_time, 0.0);
  const Model m = train_logistic(tr.select_columns(in.features), lr(50));
  EXPECT_EQ(std::get<LogisticModel>(m).n_features, 5u);
}

TEST(EvaluateCell, MetricsDependOnlyOnColumnsAndSeed) {
  const auto tr = testing_support::blobs(40, 3, 6, 1.0, 3);
  const auto te = testing_support::blobs(15, 3, 6, 1.0, 4);
  const CellInput in{{"x2", "x4", "x5"}, 0};
  for (const auto& spec : {lr(80), rf(15, 4)}) {
    const auto a = evaluate_cell(tr, te, in, spec, 2, "debate", 3);
    const auto b = evaluate_cell(tr, te, in, spec, 3, "llm-select", 3);
    EXPECT_EQ(a.accuracy, b.accuracy);
    EXPECT_EQ(a.auc_macro_ovr, b.auc_macro_ovr);
  }
}

TEST(EvaluateCell, PcaInput) {
  const auto tr = testing_support::blobs(40, 2, 6, 1.0, 3);
  const auto te = testing_support::blobs(15, 2, 6, 1.0, 4);
  const auto r = evaluate_cell(tr, te, CellInput{{}, 3}, lr(50), 1, "pca", 3);
  EXPECT_EQ(r.n, 3u);
  EXPECT_GT(r.auc_macro_ovr, 0.5);
}

TEST(EvaluateCell, GridCardinality) {
  const auto tr = testing_support::blobs(20, 2, 12, 1.0, 3);
  const auto te = testing_support::blobs(8, 2, 12, 1.0, 4);
  std::vector<std::string> order;
  for (int i = 0; i < 12; ++i) order.push_back("x" + std::to_string(i));
  std::vector<EvalResult> rows;
  for (const char* method : {"debate", "llm-select"}) {
    for (std::size_t n : {1, 2, 4, 6, 8, 10}) {
      for (const auto& spec : {lr(10), rf(3)}) {
        const std::vector<std::string> cols(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
        rows.push_back(evaluate_cell(tr, te, {cols, 0}, spec, 1, method, n));
      }
    }
  }
  EXPECT_EQ(rows.size(), 24u);
}

TEST(EvaluateCell, MedianTiming) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
}

TEST(ResultsFile, AppendAndRead) {
  testing_support::TempDir dir;
  std::vector<EvalResult> rows{{"debate", 5, "random_forest", 1, 0.9, 0.95, 0.1, 0.01, "h"},
                               {"pca", 10, "logistic_regression", 2, 0.8, 0.85, 0.2, 0.02, "h"}};
  append_results({rows[0]}, dir / "r.csv");
  append_results({rows[1]}, dir / "r.csv");
  const auto back = read_results(dir / "r.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].method_id, "pca");
  EXPECT_EQ(back[1].accuracy, 0.8);
  EXPECT_EQ(back[0].config_hash, "h");
  const auto text = testing_support::read_text(dir / "r.csv");
  EXPECT_EQ(text.find(kResultsHeader), 0u);
  EXPECT_EQ(text.find(kResultsHeader, 1), std::string::npos);
}

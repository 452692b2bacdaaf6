#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "llmfs/csv.hpp"
#include "llmfs/data_pipeline.hpp"
#include "llmfs/selection.hpp"

namespace llmfs {

enum class ClassifierKind { logistic_regression, random_forest };

inline std::string to_string(ClassifierKind k) {
  return k == ClassifierKind::logistic_regression ? "logistic_regression" : "random_forest";
}

inline ClassifierKind classifier_kind_from_string(std::string_view s) {
  if (s == "logistic_regression" || s == "lr") return ClassifierKind::logistic_regression;
  if (s == "random_forest" || s == "rf") return ClassifierKind::random_forest;
  throw Error("unknown classifier kind '" + std::string(s) + "'");
}

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::logistic_regression;
  std::map<std::string, double> hyperparams;
  std::uint64_t seed = 42;

  double param(const std::string& name, double fallback) const {
    const auto it = hyperparams.find(name);
    return it == hyperparams.end() ? fallback : it->second;
  }

  static const std::map<std::string, double>& defaults(ClassifierKind kind) {
    static const std::map<std::string, double> lr = {
        {"iterations", 500}, {"learning_rate", 0.1}, {"l2", 1e-4}, {"init_scale", 0.0}};
    static const std::map<std::string, double> rf = {
        {"trees", 100}, {"max_depth", 12}, {"max_features", 0}, {"min_samples_split", 2}, {"bootstrap", 1}, {"threads", 0}};
    return kind == ClassifierKind::logistic_regression ? lr : rf;
  }

  void validate() const {
    const auto& known = defaults(kind);
    for (const auto& [name, value] : hyperparams) {
      if (!known.count(name)) throw Error("unknown " + to_string(kind) + " hyperparameter '" + name + "'");
      if (!std::isfinite(value)) throw Error("hyperparameter '" + name + "' must be finite");
    }
    if (kind == ClassifierKind::logistic_regression) {
      if (param("iterations", 500) < 0) throw Error("iterations must be >= 0");
      if (param("learning_rate", 0.1) <= 0) throw Error("learning_rate must be > 0");
      if (param("l2", 1e-4) < 0) throw Error("l2 must be >= 0");
      if (param("init_scale", 0) < 0) throw Error("init_scale must be >= 0");
    } else {
      if (param("trees", 100) < 1) throw Error("trees must be >= 1");
      if (param("max_depth", 12) < 0) throw Error("max_depth must be >= 0 (0 = unlimited)");
      if (param("max_features", 0) < 0) throw Error("max_features must be >= 0 (0 = ceil(sqrt(d)))");
      if (param("min_samples_split", 2) < 2) throw Error("min_samples_split must be >= 2");
      if (param("threads", 0) < 0) throw Error("threads must be >= 0");
      if (param("bootstrap", 1) != 0 && param("bootstrap", 1) != 1) throw Error("bootstrap must be 0 or 1");
    }
  }
};

// ---------------------------------------------------------------------------
// Logistic regression

struct LogisticModel {
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::vector<double> weights;  // n_classes x n_features, row-major
  std::vector<double> bias;     // n_classes
  double final_loss = 0.0;
};

/// Row-wise softmax of an n x C logit matrix, in place.
inline void softmax_rows(Matrix& logits) {
  for (std::size_t r = 0; r < logits.rows; ++r) {
    auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (auto& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (auto& v : row) v /= sum;
  }
}

inline Matrix logistic_logits(const LogisticModel& m, const Matrix& x) {
  Matrix z(x.rows, m.n_classes);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto xr = x.row(r);
    for (std::size_t k = 0; k < m.n_classes; ++k) {
      const double* w = m.weights.data() + k * m.n_features;
      z(r, k) = m.bias[k] + std::inner_product(xr.begin(), xr.end(), w, 0.0);
    }
  }
  return z;
}

/// Mean cross-entropy plus (l2 / 2) * ||W||^2 (bias unpenalised). Fills the
/// gradients when the pointers are non-null.
inline double logistic_loss(const LogisticModel& m, const Matrix& x, std::span<const int> y, double l2,
                            std::vector<double>* grad_w = nullptr, std::vector<double>* grad_b = nullptr) {
  Matrix p = logistic_logits(m, x);
  softmax_rows(p);
  const double n = static_cast<double>(x.rows);
  double loss = 0.0;
  for (std::size_t r = 0; r < x.rows; ++r) loss -= std::log(std::max(p(r, static_cast<std::size_t>(y[r])), 1e-300));
  loss /= n;
  double reg = 0.0;
  for (double w : m.weights) reg += w * w;
  loss += 0.5 * l2 * reg;

  if (grad_w && grad_b) {
    grad_w->assign(m.weights.size(), 0.0);
    grad_b->assign(m.n_classes, 0.0);
    for (std::size_t r = 0; r < x.rows; ++r) {
      const auto xr = x.row(r);
      for (std::size_t k = 0; k < m.n_classes; ++k) {
        const double delta = (p(r, k) - (static_cast<std::size_t>(y[r]) == k ? 1.0 : 0.0)) / n;
        (*grad_b)[k] += delta;
        double* g = grad_w->data() + k * m.n_features;
        for (std::size_t j = 0; j < m.n_features; ++j) g[j] += delta * xr[j];
      }
    }
    for (std::size_t i = 0; i < m.weights.size(); ++i) (*grad_w)[i] += l2 * m.weights[i];
  }
  return loss;
}

/// Multinomial softmax regression fit by full-batch gradient descent.
inline LogisticModel train_logistic(const Dataset& train, const ClassifierSpec& spec) {
  spec.validate();
  if (spec.kind != ClassifierKind::logistic_regression) throw Error("train_logistic: spec is not logistic_regression");
  if (train.rows() == 0) throw Error("train_logistic: empty training set");
  const auto y = train.label_indices();
  std::vector<bool> present(train.class_names.size(), false);
  for (int c : y) present[static_cast<std::size_t>(c)] = true;
  if (std::count(present.begin(), present.end(), true) < 2) throw Error("train_logistic: need at least 2 classes");

  LogisticModel m;
  m.n_features = train.cols();
  m.n_classes = train.class_names.size();
  m.weights.assign(m.n_classes * m.n_features, 0.0);
  m.bias.assign(m.n_classes, 0.0);
  const double init_scale = spec.param("init_scale", 0.0);
  if (init_scale > 0.0) {
    Rng rng(spec.seed);
    for (auto& w : m.weights) w = init_scale * (2.0 * uniform_real(rng) - 1.0);
  }
  const auto iterations = static_cast<std::size_t>(spec.param("iterations", 500));
  const double lr = spec.param("learning_rate", 0.1);
  const double l2 = spec.param("l2", 1e-4);

  std::vector<double> gw, gb;
  for (std::size_t it = 0; it < iterations; ++it) {
    logistic_loss(m, train.matrix, y, l2, &gw, &gb);
    for (std::size_t i = 0; i < m.weights.size(); ++i) m.weights[i] -= lr * gw[i];
    for (std::size_t k = 0; k < m.n_classes; ++k) m.bias[k] -= lr * gb[k];
  }
  m.final_loss = logistic_loss(m, train.matrix, y, l2);
  return m;
}

// ---------------------------------------------------------------------------
// Random forest

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 0;  // majority class at a leaf
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  int predict(std::span<const double> x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].label;
  }
};

struct ForestModel {
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::vector<DecisionTree> trees;
};

namespace detail {

struct TreeBuilder {
  const Matrix& x;
  std::span<const int> y;
  std::size_t n_classes;
  std::size_t max_depth;  // 0 = unlimited
  std::size_t max_features;
  std::size_t min_samples_split;
  Rng rng;
  DecisionTree tree;
  std::vector<std::size_t> feature_pool;
  std::vector<std::pair<double, int>> sorted;

  static double gini(const std::vector<double>& counts, double total) {
    if (total <= 0) return 0.0;
    double s = 0.0;
    for (double c : counts) s += (c / total) * (c / total);
    return 1.0 - s;
  }

  int majority(const std::vector<double>& counts) const {
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }

  int build(std::vector<std::size_t>& rows, std::size_t depth) {
    std::vector<double> counts(n_classes, 0.0);
    for (auto r : rows) counts[static_cast<std::size_t>(y[r])] += 1.0;
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes.back().label = majority(counts);

    const double total = static_cast<double>(rows.size());
    const double parent_gini = gini(counts, total);
    if (parent_gini <= 0.0 || rows.size() < min_samples_split || (max_depth > 0 && depth >= max_depth)) {
      return node_id;
    }

    // Candidate columns come from a lazy Fisher-Yates draw. As in common CART
    // implementations, drawing continues past max_features while every
    // candidate so far was constant on this node.
    double best_score = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<double> left(n_classes), right(n_classes);
    for (std::size_t f = 0; f < feature_pool.size(); ++f) {
      if (f >= max_features && best_feature >= 0) break;
      std::swap(feature_pool[f], feature_pool[f + uniform_index(rng, feature_pool.size() - f)]);
      const auto col = feature_pool[f];
      sorted.clear();
      for (auto r : rows) sorted.emplace_back(x(r, col), y[r]);
      std::sort(sorted.begin(), sorted.end());
      std::fill(left.begin(), left.end(), 0.0);
      right = counts;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        left[static_cast<std::size_t>(sorted[i].second)] += 1.0;
        right[static_cast<std::size_t>(sorted[i].second)] -= 1.0;
        if (sorted[i].first == sorted[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = total - nl;
        const double score = (nl * gini(left, nl) + nr * gini(right, nr)) / total;
        if (score < best_score) {
          best_score = score;
          best_feature = static_cast<int>(col);
          best_threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
        }
      }
    }
    if (best_feature < 0) return node_id;

    std::vector<std::size_t> lrows, rrows;
    for (auto r : rows) {
      (x(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? lrows : rrows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(lrows, depth + 1);
    const int rgt = build(rrows, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = rgt;
    return node_id;
  }
};

}  // namespace detail

/// Bagged CART trees with Gini splits and per-split feature subsampling.
/// Each tree draws from its own seed stream, so the result does not depend
/// on the thread count.
inline ForestModel train_random_forest(const Dataset& train, const ClassifierSpec& spec) {
  spec.validate();
  if (spec.kind != ClassifierKind::random_forest) throw Error("train_random_forest: spec is not random_forest");
  if (train.rows() == 0) throw Error("train_random_forest: empty training set");
  const auto y = train.label_indices();
  ForestModel forest;
  forest.n_features = train.cols();
  forest.n_classes = train.class_names.size();
  if (forest.n_classes < 2) throw Error("train_random_forest: need at least 2 classes");

  const auto n_trees = static_cast<std::size_t>(spec.param("trees", 100));
  const auto max_depth = static_cast<std::size_t>(spec.param("max_depth", 12));
  auto max_features = static_cast<std::size_t>(spec.param("max_features", 0));
  if (max_features == 0) {
    max_features = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(train.cols()))));
  }
  max_features = std::clamp<std::size_t>(max_features, 1, std::max<std::size_t>(train.cols(), 1));
  const auto min_split = static_cast<std::size_t>(spec.param("min_samples_split", 2));
  const bool bootstrap = spec.param("bootstrap", 1) != 0;
  forest.trees.resize(n_trees);

  auto grow = [&](std::size_t t) {
    detail::TreeBuilder b{train.matrix, y, forest.n_classes, max_depth, max_features, min_split,
                          Rng(mix_seed(spec.seed, t)), {}, {}, {}};
    b.feature_pool.resize(train.cols());
    std::iota(b.feature_pool.begin(), b.feature_pool.end(), std::size_t{0});
    std::vector<std::size_t> rows(train.rows());
    if (bootstrap) {
      for (auto& r : rows) r = uniform_index(b.rng, train.rows());
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    b.build(rows, 0);
    forest.trees[t] = std::move(b.tree);
  };

  std::size_t threads = static_cast<std::size_t>(spec.param("threads", 0));
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n_trees);
  if (threads <= 1) {
    for (std::size_t t = 0; t < n_trees; ++t) grow(t);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < n_trees; t += threads) grow(t);
      });
    }
  }
  return forest;
}

// ---------------------------------------------------------------------------
// Prediction

using Model = std::variant<LogisticModel, ForestModel>;

inline Model train(const Dataset& d, const ClassifierSpec& spec) {
  if (spec.kind == ClassifierKind::logistic_regression) return train_logistic(d, spec);
  return train_random_forest(d, spec);
}

/// Per-row class probabilities; rows sum to 1.
inline Matrix predict_proba(const Model& model, const Matrix& x) {
  return std::visit(
      [&](const auto& m) -> Matrix {
        using M = std::decay_t<decltype(m)>;
        if (x.cols != m.n_features) {
          throw Error("predict_proba: expected " + std::to_string(m.n_features) + " columns, got " +
                      std::to_string(x.cols));
        }
        if constexpr (std::is_same_v<M, LogisticModel>) {
          Matrix p = logistic_logits(m, x);
          softmax_rows(p);
          return p;
        } else {
          Matrix p(x.rows, m.n_classes);
          const double share = 1.0 / static_cast<double>(m.trees.size());
          std::vector<std::size_t> votes(m.n_classes);
          for (std::size_t r = 0; r < x.rows; ++r) {
            std::fill(votes.begin(), votes.end(), 0);
            for (const auto& t : m.trees) ++votes[static_cast<std::size_t>(t.predict(x.row(r)))];
            for (std::size_t k = 0; k < m.n_classes; ++k) p(r, k) = static_cast<double>(votes[k]) * share;
          }
          return p;
        }
      },
      model);
}

inline std::vector<int> argmax_rows(const Matrix& p) {
  std::vector<int> out(p.rows);
  for (std::size_t r = 0; r < p.rows; ++r) {
    const auto row = p.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

template <typename T>
double accuracy(std::span<const T> predicted, std::span<const T> truth) {
  if (predicted.size() != truth.size()) throw Error("accuracy: length mismatch");
  if (predicted.empty()) throw Error("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

template <typename T>
double accuracy(const std::vector<T>& predicted, const std::vector<T>& truth) {
  return accuracy(std::span<const T>(predicted), std::span<const T>(truth));
}

/// Mann-Whitney AUC of one score column against a binary indicator, with
/// tied scores counting one half. Returns nullopt without both classes.
inline std::optional<double> binary_auc(std::span<const double> scores, const std::vector<bool>& positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;  // sum of midranks of positives, times two to stay integral
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double twice_midrank = static_cast<double>(i + 1 + j);  // 2 * (i+1 + j) / 2
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) rank_sum += twice_midrank;
    }
    i = j;
  }
  for (bool p : positive) n_pos += p ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos);
  // U counted in half-units so every intermediate value is an exact integer.
  const double twice_u = rank_sum - np * (np + 1.0);
  return (twice_u / 2.0) / (np * static_cast<double>(n_neg));
}

/// Macro-averaged one-vs-rest AUC. Classes without positives or negatives
/// are skipped with a warning.
inline double auc_ovr_macro(const Matrix& probs, std::span<const int> truth, Warnings* warnings = nullptr) {
  if (probs.rows != truth.size()) throw Error("auc_ovr_macro: length mismatch");
  if (probs.cols < 2) throw Error("auc_ovr_macro: need at least 2 classes");
  double sum = 0.0;
  std::size_t used = 0;
  std::vector<bool> positive(truth.size());
  for (std::size_t k = 0; k < probs.cols; ++k) {
    for (std::size_t r = 0; r < truth.size(); ++r) positive[r] = static_cast<std::size_t>(truth[r]) == k;
    const auto col = probs.column(k);
    const auto auc = binary_auc(col, positive);
    if (!auc) {
      warn(warnings, "auc: class " + std::to_string(k) + " has no positive or no negative rows; skipped");
      continue;
    }
    sum += *auc;
    ++used;
  }
  if (used == 0) throw Error("auc_ovr_macro: no class has both positives and negatives");
  return sum / static_cast<double>(used);
}

// ---------------------------------------------------------------------------
// Grid cells

struct EvalResult {
  std::string method_id;
  std::size_t n = 0;
  std::string classifier;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double auc_macro_ovr = 0.0;
  double train_time = 0.0;  // seconds, median over repetitions
  double infer_time = 0.0;
  std::string config_hash;
};

/// Columns used by one cell: a feature subset or k principal components.
struct CellInput {
  std::vector<std::string> features;  // used when pca_k == 0
  std::size_t pca_k = 0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

/// Trains on `train` restricted to the cell's columns and scores on `test`.
/// Timings are the median of `repetitions` runs; with more than one
/// repetition an extra warm-up run is discarded.
inline EvalResult evaluate_cell(const Dataset& train, const Dataset& test, const CellInput& input,
                                const ClassifierSpec& spec, std::size_t repetitions = 5, std::string method_id = {},
                                std::size_t n = 0) {
  if (repetitions == 0) throw Error("evaluate_cell: repetitions must be >= 1");
  Dataset tr, te;
  if (input.pca_k > 0) {
    const std::size_t k = std::min(input.pca_k, train.cols());
    const auto model = fit_pca(train, k);
    tr = model.transform(train);
    te = model.transform(test);
  } else {
    if (input.features.empty()) throw Error("evaluate_cell: empty feature subset");
    tr = train.select_columns(input.features);
    te = test.select_columns(input.features);
  }
  tr.class_names = train.class_names;
  te.class_names = train.class_names;

  using clock = std::chrono::steady_clock;
  std::vector<double> fit_times, infer_times;
  Model model;
  Matrix probs;
  const std::size_t runs = repetitions > 1 ? repetitions + 1 : 1;
  for (std::size_t i = 0; i < runs; ++i) {
    const auto t0 = clock::now();
    model = llmfs::train(tr, spec);
    const auto t1 = clock::now();
    probs = predict_proba(model, te.matrix);
    const auto t2 = clock::now();
    if (runs > 1 && i == 0) continue;
    fit_times.push_back(std::chrono::duration<double>(t1 - t0).count());
    infer_times.push_back(std::chrono::duration<double>(t2 - t1).count());
  }

  const auto truth = te.label_indices();
  EvalResult res;
  res.method_id = std::move(method_id);
  res.n = n ? n : (input.pca_k ? input.pca_k : input.features.size());
  res.classifier = to_string(spec.kind);
  res.seed = spec.seed;
  res.accuracy = accuracy(argmax_rows(probs), truth);
  res.auc_macro_ovr = auc_ovr_macro(probs, truth);
  res.train_time = median(fit_times);
  res.infer_time = median(infer_times);
  return res;
}

// ---------------------------------------------------------------------------
// Results table

inline constexpr const char* kResultsHeader =
    "method,n,classifier,seed,accuracy,auc,train_time,infer_time,config_hash";

inline void append_results(const std::vector<EvalResult>& rows, const std::filesystem::path& path) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot write results file " + path.string());
  if (fresh) out << kResultsHeader << '\n';
  for (const auto& r : rows) {
    out << csv::quote_if_needed(r.method_id) << ',' << r.n << ',' << r.classifier << ',' << r.seed << ','
        << csv::format_double(r.accuracy) << ',' << csv::format_double(r.auc_macro_ovr) << ','
        << csv::format_double(r.train_time) << ',' << csv::format_double(r.infer_time) << ',' << r.config_hash
        << '\n';
  }
}

inline std::vector<EvalResult> read_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open results file " + path.string());
  std::string line;
  if (!csv::next_record_line(in, line)) return {};
  const auto header = csv::split_record(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[std::string(trim(header[i]))] = i;
  for (const char* need : {"method", "n", "classifier", "seed", "accuracy", "auc", "train_time", "infer_time"}) {
    if (!col.count(need)) throw Error(path.string() + ": results header lacks column '" + need + "'");
  }
  std::vector<EvalResult> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = csv::split_record(line);
    if (cells.size() != header.size()) throw Error(path.string() + ": malformed line " + std::to_string(line_no));
    auto num = [&](const char* name) {
      const auto v = csv::parse_double(cells[col[name]]);
      if (!v) throw Error(path.string() + ": bad '" + name + "' at line " + std::to_string(line_no));
      return *v;
    };
    EvalResult r;
    r.method_id = cells[col["method"]];
    r.n = static_cast<std::size_t>(num("n"));
    r.classifier = cells[col["classifier"]];
    r.seed = static_cast<std::uint64_t>(num("seed"));
    r.accuracy = num("accuracy");
    r.auc_macro_ovr = num("auc");
    r.train_time = num("train_time");
    r.infer_time = num("infer_time");
    if (col.count("config_hash")) r.config_hash = cells[col["config_hash"]];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace llmfs

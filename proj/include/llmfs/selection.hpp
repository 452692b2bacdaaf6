#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "llmfs/csv.hpp"
#include "llmfs/data_pipeline.hpp"
#include "llmfs/deliberation.hpp"

namespace llmfs {

struct RankedFeature {
  std::string name;
  double score = 0.0;
  std::size_t column_index = 0;  // position in the input feature order

  bool operator==(const RankedFeature&) const = default;
};

/// Features by descending score; ties keep ascending column order.
struct Ranking {
  std::vector<RankedFeature> entries;
  std::string method_id;
  std::string provenance;

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& e : entries) out.push_back(e.name);
    return out;
  }

  bool operator==(const Ranking&) const = default;
};

struct SubsetSpec {
  std::size_t n = 0;  // requested size
  std::vector<std::string> feature_names;
};

inline Ranking rank_scores(const std::vector<std::string>& names, const std::vector<double>& scores,
                           std::string method_id, std::string provenance = {}) {
  if (names.empty()) throw Error("rank: empty input");
  if (names.size() != scores.size()) throw Error("rank: names/scores length mismatch");
  Ranking r;
  r.method_id = std::move(method_id);
  r.provenance = std::move(provenance);
  for (std::size_t i = 0; i < names.size(); ++i) r.entries.push_back({names[i], scores[i], i});
  std::stable_sort(r.entries.begin(), r.entries.end(),
                   [](const RankedFeature& a, const RankedFeature& b) { return a.score > b.score; });
  return r;
}

inline Ranking rank(const std::vector<FeatureVerdict>& verdicts, std::string method_id = "debate",
                    std::string provenance = {}) {
  std::vector<std::string> names;
  std::vector<double> scores;
  for (const auto& v : verdicts) {
    names.push_back(v.feature_name);
    scores.push_back(v.s_final);
  }
  return rank_scores(names, scores, std::move(method_id), std::move(provenance));
}

/// Nested ranking prefixes. Sizes above the feature count are clamped.
inline std::vector<SubsetSpec> top_n_subsets(const Ranking& r, const std::vector<std::size_t>& ns = {5, 10, 20, 30, 40, 50},
                                             Warnings* warnings = nullptr) {
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (ns[i] == 0) throw Error("top_n_subsets: sizes must be positive");
    if (i > 0 && ns[i] <= ns[i - 1]) throw Error("top_n_subsets: sizes must be strictly ascending");
  }
  std::vector<SubsetSpec> out;
  for (auto n : ns) {
    const std::size_t take = std::min(n, r.entries.size());
    if (take < n) {
      warn(warnings, "subset size " + std::to_string(n) + " exceeds feature count " +
                         std::to_string(r.entries.size()) + "; clamped");
    }
    SubsetSpec s;
    s.n = n;
    for (std::size_t i = 0; i < take; ++i) s.feature_names.push_back(r.entries[i].name);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ranking files

/// CSV with a "# method=... provenance=..." comment line, then
/// rank,feature,score,column_index.
inline void write_ranking(const Ranking& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write ranking file " + path.string());
  out << "# method=" << r.method_id << " provenance=" << r.provenance << '\n';
  out << "rank,feature,score,column_index\n";
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    const auto& e = r.entries[i];
    out << (i + 1) << ',' << csv::quote_if_needed(e.name) << ',' << csv::format_double(e.score) << ','
        << e.column_index << '\n';
  }
}

inline Ranking read_ranking(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing ranking file " + path.string());
  Ranking r;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      std::string_view rest = t.substr(1);
      const auto m = rest.find("method=");
      const auto p = rest.find(" provenance=");
      if (m != std::string_view::npos && p != std::string_view::npos) {
        r.method_id = std::string(rest.substr(m + 7, p - (m + 7)));
        r.provenance = std::string(trim(rest.substr(p + 12)));
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto cells = csv::split_record(line);
    if (cells.size() != 4) throw Error(path.string() + ": malformed ranking row '" + line + "'");
    const auto score = csv::parse_double(cells[2]);
    const auto col = csv::parse_double(cells[3]);
    if (!score || !col) throw Error(path.string() + ": malformed ranking row '" + line + "'");
    r.entries.push_back({cells[1], *score, static_cast<std::size_t>(*col)});
  }
  if (r.entries.empty()) throw Error(path.string() + ": ranking file has no entries");
  return r;
}

// ---------------------------------------------------------------------------
// Single-prompt baseline

inline constexpr const char* kSelectorRole = "Selector";

inline std::string single_prompt_system() {
  return "You are a feature-selection assistant. Rate how important a single feature is for a prediction task.";
}

inline std::string render_single_prompt(const std::string& feature_name, const std::string& task_description) {
  return "Task description: " + task_description + "\nFeature: \"" + feature_name +
         "\"\n\nRate the importance of this feature for the task.\n\n" + kOutputContract;
}

struct SingleScore {
  std::string feature_name;
  std::string raw_response;
  ParsedOutput parsed;
};

/// One completion per feature using only the feature name and the task
/// description; ranked exactly like the debate output.
inline Ranking llm_select_score(const std::vector<FeatureMetadata>& features, const std::string& task_description,
                                ChatBackend& backend, const DeliberationConfig& config, std::string provenance = {},
                                std::vector<SingleScore>* transcript = nullptr) {
  if (features.empty()) throw Error("llm_select_score: empty feature list");
  std::vector<std::string> names;
  std::vector<double> scores;
  for (const auto& f : features) {
    ChatRequest req;
    req.model = config.model;
    req.system_prompt = single_prompt_system();
    req.user_prompt = render_single_prompt(f.name, task_description);
    req.temperature = config.temperature;
    req.max_tokens = config.max_tokens;
    req.request_seed = config.request_seed;
    req.role_tag = kSelectorRole;
    req.subject_tag = f.name;
    SingleScore rec{f.name, {}, {}};
    try {
      rec.raw_response = backend.complete(req).text;
      rec.parsed = parse_agent_output(rec.raw_response);
    } catch (const BackendError&) {
      if (config.failure_policy == FailurePolicy::fast) throw;
      rec.parsed = {kNeutralScore, "backend failure", ParseStatus::failed};
    }
    if (rec.parsed.status == ParseStatus::failed && config.failure_policy == FailurePolicy::fast) {
      throw Error("unparsable single-prompt output for feature '" + f.name + "'");
    }
    names.push_back(f.name);
    scores.push_back(rec.parsed.status == ParseStatus::failed ? kNeutralScore : rec.parsed.score);
    if (transcript) transcript->push_back(std::move(rec));
  }
  return rank_scores(names, scores, "llm-select", std::move(provenance));
}

// ---------------------------------------------------------------------------
// PCA

struct PcaOptions {
  std::size_t max_iterations = 100000;
  double tolerance = 1e-10;  // residual ||Cv - lambda v|| relative to trace
  std::uint64_t seed = 7;
};

/// Eigenpairs of a symmetric matrix, descending.
struct EigenPairs {
  std::vector<double> values;
  Matrix vectors;  // one eigenvector per row
};

/// Power iteration with Hotelling deflation. Each vector is orthogonalised
/// against the earlier ones once converged; doing so inside the loop would
/// pin it to their rounding error. When a component is slow to converge the
/// iterated matrix is squared (normalised by its trace), which raises the
/// ratio between neighbouring eigenvalues to a power of two; convergence is
/// always judged on the unsquared residual.
inline EigenPairs symmetric_eigen_power(const Matrix& a, std::size_t count, const PcaOptions& options = {}) {
  const std::size_t d = a.rows;
  if (a.cols != d) throw Error("symmetric_eigen_power: matrix must be square");
  if (count > d) throw Error("symmetric_eigen_power: too many eigenpairs requested");
  Matrix work = a;
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += std::abs(a(i, i));
  const double scale = std::max(trace, 1e-300);

  EigenPairs out;
  out.vectors = Matrix(count, d);
  Rng rng(options.seed);
  std::vector<double> v(d), w(d);

  auto orthogonalise = [&](std::vector<double>& x, std::size_t upto) {
    for (std::size_t k = 0; k < upto; ++k) {
      const auto prev = out.vectors.row(k);
      const double dot = std::inner_product(x.begin(), x.end(), prev.begin(), 0.0);
      for (std::size_t i = 0; i < d; ++i) x[i] -= dot * prev[i];
    }
  };
  auto normalise = [](std::vector<double>& x) {
    const double n = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
    if (n > 0.0) {
      for (auto& e : x) e /= n;
    }
    return n;
  };
  auto multiply = [&](const Matrix& m, const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += m(i, j) * x[j];
      y[i] = s;
    }
  };
  auto square = [&](const Matrix& m) {
    Matrix sq(d, d);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < d; ++l) s += m(i, l) * m(l, j);
        sq(i, j) = s;
      }
    }
    double t = 0.0;
    for (std::size_t i = 0; i < d; ++i) t += std::abs(sq(i, i));
    if (t > 0.0) {
      for (auto& e : sq.data) e /= t;
    }
    return sq;
  };

  constexpr std::size_t kSweep = 500;
  constexpr int kMaxSquarings = 30;
  for (std::size_t k = 0; k < count; ++k) {
    for (auto& e : v) e = uniform_real(rng) - 0.5;
    orthogonalise(v, k);
    normalise(v);
    Matrix iterated = work;
    int squarings = 0;
    double lambda = 0.0;
    double residual = 0.0;
    bool converged = false;
    for (std::size_t it = 0; it < options.max_iterations && !converged; ++it) {
      multiply(work, v, w);
      lambda = std::inner_product(v.begin(), v.end(), w.begin(), 0.0);
      residual = 0.0;
      for (std::size_t i = 0; i < d; ++i) residual += (w[i] - lambda * v[i]) * (w[i] - lambda * v[i]);
      residual = std::sqrt(residual);
      if (residual <= options.tolerance * scale) {
        converged = true;
        break;
      }
      if (it > 0 && it % kSweep == 0 && squarings < kMaxSquarings) {
        iterated = square(iterated);
        ++squarings;
      }
      if (squarings > 0) multiply(iterated, v, w);
      if (normalise(w) <= options.tolerance * scale * (squarings > 0 ? 1e-300 : 1.0)) {
        // Remaining spectrum is numerically zero.
        lambda = 0.0;
        converged = true;
        break;
      }
      v.swap(w);
    }
    if (!converged) {
      throw Error("power iteration did not converge for component " + std::to_string(k + 1) + " (residual " +
                  csv::format_double(residual) + ", tolerance " + csv::format_double(options.tolerance * scale) + ")");
    }
    orthogonalise(v, k);
    normalise(v);
    std::copy(v.begin(), v.end(), out.vectors.row(k).begin());
    out.values.push_back(lambda);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) work(i, j) -= lambda * v[i] * v[j];
    }
  }
  return out;
}

/// Sample (N - 1) covariance of the columns.
inline Matrix covariance(const Matrix& x, std::vector<double>* means = nullptr) {
  if (x.rows < 2) throw Error("covariance: need at least 2 rows");
  std::vector<double> mu(x.cols, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) mu[c] += x(r, c);
  }
  for (auto& m : mu) m /= static_cast<double>(x.rows);
  Matrix cov(x.cols, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t i = 0; i < x.cols; ++i) {
      const double di = x(r, i) - mu[i];
      for (std::size_t j = i; j < x.cols; ++j) cov(i, j) += di * (x(r, j) - mu[j]);
    }
  }
  for (std::size_t i = 0; i < x.cols; ++i) {
    for (std::size_t j = i; j < x.cols; ++j) {
      cov(i, j) /= static_cast<double>(x.rows - 1);
      cov(j, i) = cov(i, j);
    }
  }
  if (means) *means = std::move(mu);
  return cov;
}

struct PcaModel {
  std::vector<double> means;
  Matrix components;                       // k x d, orthonormal rows
  std::vector<double> eigenvalues;         // all d, descending
  std::vector<double> explained_variance;  // share of total variance, all d
  double total_variance = 0.0;             // trace of the covariance

  std::size_t k() const { return components.rows; }

  Dataset transform(const Dataset& d) const {
    if (d.cols() != means.size()) throw Error("pca: column count does not match the fitted model");
    Dataset out;
    for (std::size_t j = 0; j < k(); ++j) out.feature_names.push_back("PC" + std::to_string(j + 1));
    out.matrix = Matrix(d.rows(), k());
    for (std::size_t r = 0; r < d.rows(); ++r) {
      for (std::size_t j = 0; j < k(); ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d.cols(); ++c) s += (d.matrix(r, c) - means[c]) * components(j, c);
        out.matrix(r, j) = s;
      }
    }
    out.labels = d.labels;
    out.class_names = d.class_names;
    return out;
  }
};

inline PcaModel fit_pca(const Dataset& d, std::size_t k, const PcaOptions& options = {}) {
  if (k == 0 || k > d.cols()) {
    throw Error("pca: k must be in [1, " + std::to_string(d.cols()) + "], got " + std::to_string(k));
  }
  PcaModel model;
  const Matrix cov = covariance(d.matrix, &model.means);
  for (std::size_t i = 0; i < cov.rows; ++i) model.total_variance += cov(i, i);
  auto eig = symmetric_eigen_power(cov, d.cols(), options);
  model.eigenvalues = eig.values;
  for (double ev : eig.values) {
    model.explained_variance.push_back(model.total_variance > 0.0 ? std::max(ev, 0.0) / model.total_variance : 0.0);
  }
  model.components = Matrix(k, d.cols());
  std::copy(eig.vectors.data.begin(), eig.vectors.data.begin() + static_cast<std::ptrdiff_t>(k * d.cols()),
            model.components.data.begin());
  return model;
}

/// Projects `d` onto its own top-k principal components.
inline Dataset pca_transform(const Dataset& d, std::size_t k, PcaModel* fitted = nullptr,
                             const PcaOptions& options = {}) {
  auto model = fit_pca(d, k, options);
  auto out = model.transform(d);
  if (fitted) *fitted = std::move(model);
  return out;
}

}  // namespace llmfs

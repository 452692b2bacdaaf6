#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "llmfs/deliberation.hpp"
#include "llmfs/eval_harness.hpp"

namespace llmfs {

/// Config error carrying the JSON pointer of the offending field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& where, const std::string& what) : Error(where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

enum class BackendKind { scripted, ollama };

struct BackendConfig {
  BackendKind kind = BackendKind::scripted;
  std::filesystem::path script;
  HttpBackendOptions http;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::optional<std::int64_t> request_seed;
};

struct RunConfig {
  std::filesystem::path dataset_path;
  std::string label_column = "Label";
  NonFinitePolicy nonfinite = NonFinitePolicy::drop_row;
  std::filesystem::path output_dir = "llmfs_out";
  std::string task_description;

  BackendConfig backend;

  JudgeWeights weights;
  AggregationMode aggregation = AggregationMode::formula;
  FailurePolicy failure_policy = FailurePolicy::soft;
  int parallelism = 4;

  double collinearity_threshold = 0.9;
  bool undersample = true;
  std::uint64_t preprocess_seed = 42;

  CorrelationTarget correlation_target = CorrelationTarget::one_vs_rest;
  std::string benign_class = "Benign";

  double test_fraction = 0.2;
  std::uint64_t split_seed = 42;
  bool stratified = true;

  std::vector<std::size_t> subset_sizes = {5, 10, 20, 30, 40, 50};
  std::vector<ClassifierSpec> classifiers;  // seed field ignored; seeds below
  std::vector<std::uint64_t> seeds = {42};
  std::size_t timing_repetitions = 5;
  std::vector<std::string> methods = {"debate", "llm-select", "pca"};

  std::string report_candidate = "debate";
  std::vector<std::string> report_baselines = {"llm-select", "pca"};

  DeliberationConfig deliberation() const {
    DeliberationConfig c;
    c.weights = weights;
    c.aggregation = aggregation;
    c.failure_policy = failure_policy;
    c.model = backend.http.model;
    c.temperature = backend.temperature;
    c.max_tokens = backend.max_tokens;
    c.request_seed = backend.request_seed;
    c.parallelism = parallelism;
    return c;
  }

  std::filesystem::path preprocessed_csv() const { return output_dir / "preprocessed.csv"; }
  std::filesystem::path preprocess_sidecar() const { return output_dir / "preprocess_meta.json"; }
  std::filesystem::path metadata_file() const { return output_dir / "feature_metadata.json"; }
  std::filesystem::path ranking_file(const std::string& method) const { return output_dir / ("ranking_" + method + ".csv"); }
  std::filesystem::path audit_file(const std::string& method) const { return output_dir / ("audit_" + method + ".jsonl"); }
  std::filesystem::path results_file() const { return output_dir / "results.csv"; }
  std::filesystem::path report_dir() const { return output_dir / "report"; }
};

// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
T field(const nlohmann::json& obj, const std::string& ptr, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(ptr + "/" + key, std::string("wrong type: ") + e.what());
  }
}

inline const nlohmann::json& section(const nlohmann::json& root, const char* key) {
  static const nlohmann::json empty = nlohmann::json::object();
  if (!root.contains(key)) return empty;
  if (!root.at(key).is_object()) throw ConfigError(std::string("/") + key, "must be an object");
  return root.at(key);
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace detail

/// Checks cross-field invariants; throws ConfigError with the field pointer.
inline void validate(const RunConfig& c) {
  try {
    c.weights.validate();
  } catch (const Error& e) {
    throw ConfigError("/deliberation/weights", e.what());
  }
  if (c.parallelism < 1) throw ConfigError("/deliberation/parallelism", "must be >= 1");
  if (!(c.collinearity_threshold > 0.0 && c.collinearity_threshold <= 1.0)) {
    throw ConfigError("/preprocess/collinearity_threshold", "must be in (0, 1]");
  }
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) throw ConfigError("/split/test_fraction", "must be in (0, 1)");
  if (c.subset_sizes.empty()) throw ConfigError("/evaluation/subset_sizes", "must not be empty");
  for (std::size_t i = 0; i < c.subset_sizes.size(); ++i) {
    const auto where = "/evaluation/subset_sizes/" + std::to_string(i);
    if (c.subset_sizes[i] == 0) throw ConfigError(where, "must be positive");
    if (i > 0 && c.subset_sizes[i] <= c.subset_sizes[i - 1]) throw ConfigError(where, "sizes must be ascending");
  }
  for (std::size_t i = 0; i < c.classifiers.size(); ++i) {
    try {
      c.classifiers[i].validate();
    } catch (const Error& e) {
      throw ConfigError("/evaluation/classifiers/" + std::to_string(i), e.what());
    }
  }
  if (c.seeds.empty()) throw ConfigError("/evaluation/seeds", "must not be empty");
  if (c.timing_repetitions == 0) throw ConfigError("/evaluation/timing_repetitions", "must be >= 1");
  for (std::size_t i = 0; i < c.methods.size(); ++i) {
    const auto& m = c.methods[i];
    if (m != "debate" && m != "llm-select" && m != "pca") {
      throw ConfigError("/evaluation/methods/" + std::to_string(i), "unknown method '" + m + "'");
    }
  }
  if (c.backend.kind == BackendKind::scripted && c.backend.script.empty()) {
    throw ConfigError("/backend/script", "scripted backend needs a script file");
  }
  if (c.backend.http.max_retries < 0) throw ConfigError("/backend/max_retries", "must be >= 0");
  if (c.backend.http.max_in_flight < 1) throw ConfigError("/backend/max_in_flight", "must be >= 1");
  if (c.backend.max_tokens < 1) throw ConfigError("/backend/max_tokens", "must be >= 1");
  if (c.backend.temperature < 0) throw ConfigError("/backend/temperature", "must be >= 0");
}

/// Builds a RunConfig from parsed JSON. Relative paths resolve against
/// `base_dir`.
inline RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
  using detail::field;
  if (!j.is_object()) throw ConfigError("/", "config must be a JSON object");
  RunConfig c;

  const auto& ds = detail::section(j, "dataset");
  c.dataset_path = detail::resolve(base_dir, field<std::string>(ds, "/dataset", "path", ""));
  c.label_column = field<std::string>(ds, "/dataset", "label_column", c.label_column);
  const auto nonfinite = field<std::string>(ds, "/dataset", "nonfinite", "drop_row");
  if (nonfinite == "drop_row") {
    c.nonfinite = NonFinitePolicy::drop_row;
  } else if (nonfinite == "error") {
    c.nonfinite = NonFinitePolicy::error;
  } else {
    throw ConfigError("/dataset/nonfinite", "must be 'drop_row' or 'error'");
  }

  c.output_dir = detail::resolve(base_dir, field<std::string>(j, "", "output_dir", "llmfs_out"));
  c.task_description = field<std::string>(j, "", "task_description", "");
  if (c.task_description.empty()) throw ConfigError("/task_description", "must be a non-empty string");

  const auto& be = detail::section(j, "backend");
  const auto kind = field<std::string>(be, "/backend", "kind", "scripted");
  if (kind == "scripted") {
    c.backend.kind = BackendKind::scripted;
  } else if (kind == "ollama") {
    c.backend.kind = BackendKind::ollama;
  } else {
    throw ConfigError("/backend/kind", "must be 'scripted' or 'ollama'");
  }
  c.backend.script = detail::resolve(base_dir, field<std::string>(be, "/backend", "script", ""));
  auto& http = c.backend.http;
  http.base_url = field<std::string>(be, "/backend", "base_url", http.base_url);
  http.model = field<std::string>(be, "/backend", "model", http.model);
  http.timeout_s = field<double>(be, "/backend", "timeout_s", http.timeout_s);
  http.max_retries = field<int>(be, "/backend", "max_retries", http.max_retries);
  http.backoff_s = field<double>(be, "/backend", "backoff_s", http.backoff_s);
  http.max_in_flight = field<int>(be, "/backend", "max_in_flight", http.max_in_flight);
  c.backend.temperature = field<double>(be, "/backend", "temperature", 0.0);
  c.backend.max_tokens = field<int>(be, "/backend", "max_tokens", 1024);
  if (be.contains("seed") && !be.at("seed").is_null()) c.backend.request_seed = field<std::int64_t>(be, "/backend", "seed", 0);

  const auto& de = detail::section(j, "deliberation");
  if (de.contains("weights")) {
    const auto& w = de.at("weights");
    if (!w.is_object()) throw ConfigError("/deliberation/weights", "must be an object {w_r, w_c}");
    c.weights.w_r = field<double>(w, "/deliberation/weights", "w_r", 0.5);
    c.weights.w_c = field<double>(w, "/deliberation/weights", "w_c", 1.0 - c.weights.w_r);
  }
  try {
    c.aggregation = aggregation_from_string(field<std::string>(de, "/deliberation", "aggregation", "formula"));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("/deliberation/aggregation", e.what());
  }
  try {
    c.failure_policy = failure_policy_from_string(field<std::string>(de, "/deliberation", "failure_policy", "soft"));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("/deliberation/failure_policy", e.what());
  }
  c.parallelism = field<int>(de, "/deliberation", "parallelism", c.parallelism);

  const auto& pp = detail::section(j, "preprocess");
  c.collinearity_threshold = field<double>(pp, "/preprocess", "collinearity_threshold", 0.9);
  c.undersample = field<bool>(pp, "/preprocess", "undersample", true);
  c.preprocess_seed = field<std::uint64_t>(pp, "/preprocess", "seed", 42);

  const auto& fe = detail::section(j, "features");
  const auto target = field<std::string>(fe, "/features", "correlation_target", "one_vs_rest");
  if (target == "one_vs_rest") {
    c.correlation_target = CorrelationTarget::one_vs_rest;
  } else if (target == "binary") {
    c.correlation_target = CorrelationTarget::binary;
  } else {
    throw ConfigError("/features/correlation_target", "must be 'one_vs_rest' or 'binary'");
  }
  c.benign_class = field<std::string>(fe, "/features", "benign_class", c.benign_class);

  const auto& sp = detail::section(j, "split");
  c.test_fraction = field<double>(sp, "/split", "test_fraction", 0.2);
  c.split_seed = field<std::uint64_t>(sp, "/split", "seed", 42);
  c.stratified = field<bool>(sp, "/split", "stratified", true);

  const auto& ev = detail::section(j, "evaluation");
  c.subset_sizes = field<std::vector<std::size_t>>(ev, "/evaluation", "subset_sizes", c.subset_sizes);
  c.seeds = field<std::vector<std::uint64_t>>(ev, "/evaluation", "seeds", c.seeds);
  c.timing_repetitions = field<std::size_t>(ev, "/evaluation", "timing_repetitions", 5);
  c.methods = field<std::vector<std::string>>(ev, "/evaluation", "methods", c.methods);
  if (ev.contains("classifiers")) {
    const auto& list = ev.at("classifiers");
    if (!list.is_array()) throw ConfigError("/evaluation/classifiers", "must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto where = "/evaluation/classifiers/" + std::to_string(i);
      ClassifierSpec spec;
      try {
        spec.kind = classifier_kind_from_string(field<std::string>(list[i], where, "kind", ""));
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw ConfigError(where + "/kind", e.what());
      }
      spec.hyperparams = field<std::map<std::string, double>>(list[i], where, "hyperparams", {});
      c.classifiers.push_back(std::move(spec));
    }
  } else {
    c.classifiers = {ClassifierSpec{ClassifierKind::logistic_regression, {}, 0},
                     ClassifierSpec{ClassifierKind::random_forest, {}, 0}};
  }

  const auto& rp = detail::section(j, "report");
  c.report_candidate = field<std::string>(rp, "/report", "candidate", c.report_candidate);
  c.report_baselines = field<std::vector<std::string>>(rp, "/report", "baselines", c.report_baselines);
  return c;
}

/// Environment overrides for CI: LLMFS_BASE_URL, LLMFS_MODEL, LLMFS_BACKEND.
inline void apply_env_overrides(RunConfig& c) {
  if (const char* v = std::getenv("LLMFS_BASE_URL"); v && *v) c.backend.http.base_url = v;
  if (const char* v = std::getenv("LLMFS_MODEL"); v && *v) c.backend.http.model = v;
  if (const char* v = std::getenv("LLMFS_BACKEND"); v && *v) {
    const std::string kind = v;
    if (kind == "scripted") {
      c.backend.kind = BackendKind::scripted;
    } else if (kind == "ollama") {
      c.backend.kind = BackendKind::ollama;
    } else {
      throw ConfigError("$LLMFS_BACKEND", "must be 'scripted' or 'ollama'");
    }
  }
}

/// Canonical JSON of the effective configuration (keys sorted).
inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["dataset"] = {{"path", c.dataset_path.generic_string()},
                  {"label_column", c.label_column},
                  {"nonfinite", c.nonfinite == NonFinitePolicy::drop_row ? "drop_row" : "error"}};
  j["output_dir"] = c.output_dir.generic_string();
  j["task_description"] = c.task_description;
  j["backend"] = {{"kind", c.backend.kind == BackendKind::scripted ? "scripted" : "ollama"},
                  {"script", c.backend.script.generic_string()},
                  {"base_url", c.backend.http.base_url},
                  {"model", c.backend.http.model},
                  {"timeout_s", c.backend.http.timeout_s},
                  {"max_retries", c.backend.http.max_retries},
                  {"backoff_s", c.backend.http.backoff_s},
                  {"max_in_flight", c.backend.http.max_in_flight},
                  {"temperature", c.backend.temperature},
                  {"max_tokens", c.backend.max_tokens},
                  {"seed", c.backend.request_seed ? nlohmann::json(*c.backend.request_seed) : nlohmann::json(nullptr)}};
  j["deliberation"] = {{"weights", {{"w_r", c.weights.w_r}, {"w_c", c.weights.w_c}}},
                       {"aggregation", to_string(c.aggregation)},
                       {"failure_policy", to_string(c.failure_policy)},
                       {"parallelism", c.parallelism}};
  j["preprocess"] = {{"collinearity_threshold", c.collinearity_threshold},
                     {"undersample", c.undersample},
                     {"seed", c.preprocess_seed}};
  j["features"] = {{"correlation_target", c.correlation_target == CorrelationTarget::one_vs_rest ? "one_vs_rest" : "binary"},
                   {"benign_class", c.benign_class}};
  j["split"] = {{"test_fraction", c.test_fraction}, {"seed", c.split_seed}, {"stratified", c.stratified}};
  nlohmann::json classifiers = nlohmann::json::array();
  for (const auto& s : c.classifiers) classifiers.push_back({{"kind", to_string(s.kind)}, {"hyperparams", s.hyperparams}});
  j["evaluation"] = {{"subset_sizes", c.subset_sizes},
                     {"classifiers", classifiers},
                     {"seeds", c.seeds},
                     {"timing_repetitions", c.timing_repetitions},
                     {"methods", c.methods}};
  j["report"] = {{"candidate", c.report_candidate}, {"baselines", c.report_baselines}};
  return j;
}

/// Hash of the effective configuration. The output location is excluded so
/// that identical runs written to different directories share a hash.
inline std::string config_hash(const RunConfig& c) {
  auto j = to_json(c);
  j.erase("output_dir");
  return fnv1a_hex(j.dump());
}

inline std::string run_id(const RunConfig& c) { return "run-" + config_hash(c); }

inline RunConfig load_config(const std::filesystem::path& path, bool env_overrides = true) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
  }
  auto c = config_from_json(j, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
  if (env_overrides) apply_env_overrides(c);
  validate(c);
  return c;
}

}  // namespace llmfs

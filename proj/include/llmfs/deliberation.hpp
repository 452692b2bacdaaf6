#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "llmfs/feature_stats.hpp"
#include "llmfs/llm_gateway.hpp"

namespace llmfs {

enum class AgentRole { Initiator = 0, Refiner = 1, Challenger = 2, Judge = 3 };

inline constexpr std::array<AgentRole, 4> kRoleOrder = {AgentRole::Initiator, AgentRole::Refiner,
                                                        AgentRole::Challenger, AgentRole::Judge};

inline std::string to_string(AgentRole r) {
  switch (r) {
    case AgentRole::Initiator: return "Initiator";
    case AgentRole::Refiner: return "Refiner";
    case AgentRole::Challenger: return "Challenger";
    case AgentRole::Judge: return "Judge";
  }
  return "?";
}

inline AgentRole role_from_string(std::string_view s) {
  for (auto r : kRoleOrder) {
    if (to_string(r) == s) return r;
  }
  throw Error("unknown agent role '" + std::string(s) + "'");
}

enum class ParseStatus { clean, fallback, failed };

inline std::string to_string(ParseStatus s) {
  switch (s) {
    case ParseStatus::clean: return "clean";
    case ParseStatus::fallback: return "fallback";
    case ParseStatus::failed: return "failed";
  }
  return "?";
}

inline ParseStatus parse_status_from_string(std::string_view s) {
  if (s == "clean") return ParseStatus::clean;
  if (s == "fallback") return ParseStatus::fallback;
  if (s == "failed") return ParseStatus::failed;
  throw Error("unknown parse status '" + std::string(s) + "'");
}

struct AgentTurn {
  AgentRole role = AgentRole::Initiator;
  std::string system_prompt;
  std::string prompt_text;
  std::string raw_response;
  std::optional<double> score;  // absent iff parse_status == failed
  std::string rationale;
  ParseStatus parse_status = ParseStatus::failed;

  bool operator==(const AgentTurn&) const = default;
};

struct JudgeWeights {
  double w_r = 0.5;
  double w_c = 0.5;

  static constexpr double kSumTolerance = 1e-12;

  void validate() const {
    if (!(w_r >= 0.0 && w_r <= 1.0 && w_c >= 0.0 && w_c <= 1.0)) throw Error("judge weights must lie in [0, 1]");
    if (std::abs(w_r + w_c - 1.0) > kSumTolerance) throw Error("judge weights must satisfy w_r + w_c = 1");
  }

  static JudgeWeights from_refined(double w_r) {
    JudgeWeights w{w_r, 1.0 - w_r};
    w.validate();
    return w;
  }
};

enum class AggregationMode { formula, judge_llm };
enum class FailurePolicy { soft, fast };

inline std::string to_string(AggregationMode m) { return m == AggregationMode::formula ? "formula" : "judge-llm"; }
inline std::string to_string(FailurePolicy p) { return p == FailurePolicy::soft ? "soft" : "fast"; }

inline AggregationMode aggregation_from_string(std::string_view s) {
  if (s == "formula") return AggregationMode::formula;
  if (s == "judge-llm") return AggregationMode::judge_llm;
  throw Error("aggregation must be 'formula' or 'judge-llm', got '" + std::string(s) + "'");
}

inline FailurePolicy failure_policy_from_string(std::string_view s) {
  if (s == "soft") return FailurePolicy::soft;
  if (s == "fast") return FailurePolicy::fast;
  throw Error("failure policy must be 'soft' or 'fast', got '" + std::string(s) + "'");
}

struct FeatureVerdict {
  std::string feature_name;
  double s_initial = 0.5;
  double s_refined = 0.5;
  double s_challenged = 0.5;
  double s_final = 0.5;
  double s_formula = 0.5;  // weighted combination, kept for audit in judge-llm mode
  std::string judge_rationale;
  std::vector<AgentTurn> turns;
  std::vector<std::string> flags;

  bool operator==(const FeatureVerdict&) const = default;
};

inline constexpr double kNeutralScore = 0.5;

/// S_final = w_r * S_refined + w_c * S_challenged.
inline double judge_aggregate(double s_refined, double s_challenged, const JudgeWeights& w) {
  return w.w_r * s_refined + w.w_c * s_challenged;
}

// ---------------------------------------------------------------------------
// Prompts

inline constexpr const char* kOutputContract =
    "Respond with a single JSON object and nothing else, in exactly this shape:\n"
    "{\"score\": <number between 0 and 1>, \"reasoning\": \"<your justification>\"}\n"
    "A score of 1 means the feature is essential for the task; 0 means it is useless.";

inline std::string system_prompt(AgentRole role) {
  switch (role) {
    case AgentRole::Initiator:
      return "You are the Initiator in a structured feature-selection debate. From the feature name and the "
             "task description alone, reason about what the feature measures and give a first, preliminary "
             "assessment of how relevant it is to the prediction task.";
    case AgentRole::Refiner:
      return "You are the Quantitative Refiner in a structured feature-selection debate. Strengthen the "
             "Initiator's assessment with supporting arguments grounded in the statistics supplied for the "
             "feature, in particular the mean and standard deviation of its correlation with the target.";
    case AgentRole::Challenger:
      return "You are the Critical Challenger in a structured feature-selection debate. Act as a peer reviewer "
             "of the Initiator's assessment: look for weak reasoning, redundancy with other features, "
             "susceptibility to attacker manipulation, and bias, and give structured counter-arguments.";
    case AgentRole::Judge:
      return "You are the Judge and final arbiter of a structured feature-selection debate. Weigh the supporting "
             "analysis against the critical analysis and decide the feature's final importance score.";
  }
  return {};
}

inline std::string format4(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

inline std::string score_text(const AgentTurn& t) {
  return t.score ? format4(*t.score) : std::string("unavailable");
}

inline std::string turn_block(const std::string& title, const AgentTurn& t) {
  return title + "\nScore: " + score_text(t) + "\nReasoning: " + (t.rationale.empty() ? t.raw_response : t.rationale) +
         "\n";
}

inline std::string metadata_block(const FeatureMetadata& m) {
  std::string s = "Feature statistics (training split):\n";
  s += "- mean: " + format4(m.mean) + "\n";
  s += "- standard deviation: " + format4(m.std) + "\n";
  s += "- feature-target correlation, mean across classes: " + format4(m.corr_mean) + "\n";
  s += "- feature-target correlation, standard deviation across classes: " + format4(m.corr_std) + "\n";
  s += "- per-class correlation (one-vs-rest Pearson):";
  for (const auto& [cls, r] : m.corr_per_class) s += " " + cls + "=" + format4(r) + ";";
  s += "\n";
  if (m.constant) s += "- note: the feature is constant on the training split\n";
  for (const auto& n : m.notes) s += "- note: " + n + "\n";
  return s;
}

/// User prompt for one role. `prior_turns` must hold exactly the turns the
/// role consumes, in role order.
inline std::string render_prompt(AgentRole role, const std::string& feature_name, const std::string& task_description,
                                 const FeatureMetadata& metadata, const std::vector<AgentTurn>& prior_turns,
                                 const JudgeWeights& weights = {}) {
  const auto needed = static_cast<std::size_t>(role);
  if (prior_turns.size() != needed) {
    throw Error("render_prompt: " + to_string(role) + " needs " + std::to_string(needed) + " prior turns, got " +
                std::to_string(prior_turns.size()));
  }
  for (std::size_t i = 0; i < needed; ++i) {
    if (prior_turns[i].role != kRoleOrder[i]) throw Error("render_prompt: prior turns out of role order");
  }

  std::string p = "Task description: " + task_description + "\n";
  p += "Feature under review: \"" + feature_name + "\"\n\n";
  switch (role) {
    case AgentRole::Initiator:
      p += "Give your initial semantic analysis of this feature and a preliminary relevance score.\n";
      break;
    case AgentRole::Refiner:
      p += turn_block("Initiator's assessment:", prior_turns[0]) + "\n";
      p += metadata_block(metadata) + "\n";
      p += "Build supporting arguments for the feature's importance using the statistics above, correct the "
           "Initiator where the numbers disagree, and give a refined score.\n";
      break;
    case AgentRole::Challenger:
      p += turn_block("Initiator's assessment:", prior_turns[0]) + "\n";
      p += turn_block("Quantitative Refiner's assessment:", prior_turns[1]) + "\n";
      p += metadata_block(metadata) + "\n";
      p += "Identify weaknesses, redundancies, or biases in the Initiator's argument, state your "
           "counter-arguments point by point, and give a challenged score.\n";
      break;
    case AgentRole::Judge:
      p += turn_block("Initiator's preliminary assessment:", prior_turns[0]) + "\n";
      p += turn_block("Analysis A (Quantitative Refiner):", prior_turns[1]) + "\n";
      p += turn_block("Analysis B (Critical Challenger):", prior_turns[2]) + "\n";
      p += "The reference final score is the weighted combination " + format4(weights.w_r) +
           " x (Analysis A score) + " + format4(weights.w_c) +
           " x (Analysis B score). Synthesize both analyses, state which arguments prevail and why, and give "
           "the final importance score.\n";
      break;
  }
  p += "\n";
  p += kOutputContract;
  return p;
}

// ---------------------------------------------------------------------------
// Output parsing

struct ParsedOutput {
  double score = kNeutralScore;  // meaningless when status == failed
  std::string rationale;
  ParseStatus status = ParseStatus::failed;
};

namespace detail {

/// End index (exclusive) of the balanced JSON object starting at `open`.
inline std::optional<std::size_t> match_object(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

inline std::optional<double> json_score(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return csv::parse_double(v.get<std::string>());
  return std::nullopt;
}

inline std::optional<ParsedOutput> parse_structured(std::string_view raw) {
  for (std::size_t open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
    const auto end = match_object(raw, open);
    if (!end) continue;
    const auto j = nlohmann::json::parse(raw.substr(open, *end - open), nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("score")) continue;
    const auto score = json_score(j.at("score"));
    if (!score || !std::isfinite(*score)) continue;
    ParsedOutput out;
    out.score = std::clamp(*score, 0.0, 1.0);
    out.status = ParseStatus::clean;
    for (const char* key : {"reasoning", "rationale", "reason"}) {
      if (j.contains(key) && j.at(key).is_string()) {
        out.rationale = j.at(key).get<std::string>();
        break;
      }
    }
    return out;
  }
  return std::nullopt;
}

/// First numeric literal that lands in [0, 1] after normalising "a/b" and
/// "a%" forms.
inline std::optional<double> first_unit_number(const std::string& raw) {
  static const std::regex number(R"((\d+(?:\.\d+)?|\.\d+)(?:\s*/\s*(\d+(?:\.\d+)?)|\s*(%))?)");
  for (auto it = std::sregex_iterator(raw.begin(), raw.end(), number); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const auto pos = static_cast<std::size_t>(m.position(0));
    if (pos > 0 && raw[pos - 1] == '-') continue;
    double v = std::stod(m[1].str());
    if (m[2].matched) {
      const double den = std::stod(m[2].str());
      if (den <= 0.0) continue;
      v /= den;
    } else if (m[3].matched) {
      v /= 100.0;
    }
    if (v >= 0.0 && v <= 1.0) return v;
  }
  return std::nullopt;
}

}  // namespace detail

/// Structured object first, then a numeric-literal fallback.
inline ParsedOutput parse_agent_output(const std::string& raw) {
  if (auto structured = detail::parse_structured(raw)) return *structured;
  if (auto v = detail::first_unit_number(raw)) return {*v, raw, ParseStatus::fallback};
  return {kNeutralScore, raw, ParseStatus::failed};
}

// ---------------------------------------------------------------------------
// Debate execution

struct DeliberationConfig {
  JudgeWeights weights;
  AggregationMode aggregation = AggregationMode::formula;
  FailurePolicy failure_policy = FailurePolicy::soft;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::optional<std::int64_t> request_seed;
  int parallelism = 1;
};

struct FeatureTiming {
  std::array<double, 4> turn_seconds{};
  double total_seconds = 0.0;
};

using ProgressCallback = std::function<void(std::size_t index, const FeatureVerdict&, const FeatureTiming&)>;

inline double turn_score_or_neutral(const AgentTurn& t) { return t.score.value_or(kNeutralScore); }

/// Recomputes the weighted combination from the stored turns; used by audit
/// replay.
inline double replay_formula(const FeatureVerdict& v, const JudgeWeights& w) {
  return judge_aggregate(turn_score_or_neutral(v.turns.at(1)), turn_score_or_neutral(v.turns.at(2)), w);
}

inline FeatureVerdict deliberate_feature(const FeatureMetadata& feature, const std::string& task_description,
                                         ChatBackend& backend, const DeliberationConfig& config,
                                         FeatureTiming* timing = nullptr) {
  config.weights.validate();
  FeatureVerdict v;
  v.feature_name = feature.name;
  const auto feature_start = std::chrono::steady_clock::now();
  bool backend_down = false;

  for (auto role : kRoleOrder) {
    AgentTurn turn;
    turn.role = role;
    turn.system_prompt = system_prompt(role);
    turn.prompt_text = render_prompt(role, feature.name, task_description, feature, v.turns, config.weights);
    const auto role_name = to_string(role);
    const auto turn_start = std::chrono::steady_clock::now();

    if (backend_down) {
      turn.parse_status = ParseStatus::failed;
      v.flags.push_back("skipped:" + role_name);
    } else {
      ChatRequest req;
      req.model = config.model;
      req.system_prompt = turn.system_prompt;
      req.user_prompt = turn.prompt_text;
      req.temperature = config.temperature;
      req.max_tokens = config.max_tokens;
      req.request_seed = config.request_seed;
      req.role_tag = role_name;
      req.subject_tag = feature.name;
      try {
        turn.raw_response = backend.complete(req).text;
        const auto parsed = parse_agent_output(turn.raw_response);
        turn.parse_status = parsed.status;
        turn.rationale = parsed.rationale;
        if (parsed.status != ParseStatus::failed) turn.score = parsed.score;
        if (parsed.status == ParseStatus::fallback) v.flags.push_back("parse_fallback:" + role_name);
        if (parsed.status == ParseStatus::failed) {
          if (config.failure_policy == FailurePolicy::fast) {
            throw Error("unparsable " + role_name + " output for feature '" + feature.name + "'");
          }
          v.flags.push_back("parse_failed:" + role_name);
        }
      } catch (const BackendError& e) {
        if (config.failure_policy == FailurePolicy::fast) throw;
        backend_down = true;
        turn.parse_status = ParseStatus::failed;
        turn.rationale = e.what();
        v.flags.push_back("backend_failure:" + role_name);
      }
    }
    if (timing) {
      timing->turn_seconds[static_cast<std::size_t>(role)] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - turn_start).count();
    }
    v.turns.push_back(std::move(turn));
  }

  v.s_initial = turn_score_or_neutral(v.turns[0]);
  v.s_refined = turn_score_or_neutral(v.turns[1]);
  v.s_challenged = turn_score_or_neutral(v.turns[2]);
  v.s_formula = judge_aggregate(v.s_refined, v.s_challenged, config.weights);
  const auto& judge = v.turns[3];
  v.judge_rationale = judge.rationale.empty() ? judge.raw_response : judge.rationale;
  if (config.aggregation == AggregationMode::judge_llm && judge.score) {
    v.s_final = *judge.score;
  } else {
    if (config.aggregation == AggregationMode::judge_llm) v.flags.push_back("judge_score_unavailable");
    v.s_final = v.s_formula;
  }
  if (timing) {
    timing->total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - feature_start).count();
  }
  return v;
}

/// Runs independent debates for every feature. The result order follows
/// the input order whatever the worker interleaving.
inline std::vector<FeatureVerdict> deliberate_all(const std::vector<FeatureMetadata>& features,
                                                  const std::string& task_description, ChatBackend& backend,
                                                  const DeliberationConfig& config,
                                                  const ProgressCallback& on_progress = {}) {
  if (features.empty()) throw Error("deliberate_all: empty feature list");
  config.weights.validate();
  std::vector<FeatureVerdict> out(features.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr first_error;
  std::mutex mu;

  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= features.size()) return;
      try {
        FeatureTiming timing;
        out[i] = deliberate_feature(features[i], task_description, backend, config, &timing);
        if (on_progress) {
          std::lock_guard lock(mu);
          on_progress(i, out[i], timing);
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first_error) first_error = std::current_exception();
        abort = true;
      }
    }
  };

  const auto n_workers = static_cast<std::size_t>(std::clamp<long>(config.parallelism, 1, static_cast<long>(features.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

}  // namespace llmfs

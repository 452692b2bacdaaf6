#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "llmfs/deliberation.hpp"

namespace llmfs {

// Audit log: JSON Lines, append-only. Each run contributes one "header"
// record followed by one "verdict" record per feature and a closing
// "footer" record.

struct AuditHeader {
  std::string run_id;
  std::string config_hash;
  std::string model;
  std::string backend;
  JudgeWeights weights;
  AggregationMode aggregation = AggregationMode::formula;
  std::string task_description;
  std::string timestamp;  // UTC, ISO-8601
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json to_json(const AgentTurn& t) {
  return {{"role", to_string(t.role)},
          {"system_prompt", t.system_prompt},
          {"prompt", t.prompt_text},
          {"raw_response", t.raw_response},
          {"score", t.score ? nlohmann::json(*t.score) : nlohmann::json(nullptr)},
          {"rationale", t.rationale},
          {"parse_status", to_string(t.parse_status)}};
}

inline AgentTurn turn_from_json(const nlohmann::json& j) {
  AgentTurn t;
  t.role = role_from_string(j.at("role").get<std::string>());
  t.system_prompt = j.value("system_prompt", "");
  t.prompt_text = j.at("prompt").get<std::string>();
  t.raw_response = j.at("raw_response").get<std::string>();
  if (!j.at("score").is_null()) t.score = j.at("score").get<double>();
  t.rationale = j.at("rationale").get<std::string>();
  t.parse_status = parse_status_from_string(j.at("parse_status").get<std::string>());
  return t;
}

inline nlohmann::json to_json(const FeatureVerdict& v) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : v.turns) turns.push_back(to_json(t));
  return {{"feature", v.feature_name}, {"s_initial", v.s_initial},   {"s_refined", v.s_refined},
          {"s_challenged", v.s_challenged}, {"s_formula", v.s_formula}, {"s_final", v.s_final},
          {"judge_rationale", v.judge_rationale}, {"flags", v.flags},  {"turns", turns}};
}

inline FeatureVerdict verdict_from_json(const nlohmann::json& j) {
  FeatureVerdict v;
  v.feature_name = j.at("feature").get<std::string>();
  v.s_initial = j.at("s_initial").get<double>();
  v.s_refined = j.at("s_refined").get<double>();
  v.s_challenged = j.at("s_challenged").get<double>();
  v.s_formula = j.at("s_formula").get<double>();
  v.s_final = j.at("s_final").get<double>();
  v.judge_rationale = j.at("judge_rationale").get<std::string>();
  v.flags = j.at("flags").get<std::vector<std::string>>();
  for (const auto& t : j.at("turns")) v.turns.push_back(turn_from_json(t));
  return v;
}

/// Appends records for one run to an audit file.
class AuditWriter {
 public:
  AuditWriter(const std::filesystem::path& path, const AuditHeader& header) : out_(path, std::ios::app | std::ios::binary) {
    if (!out_) throw Error("cannot open audit log " + path.string());
    write({{"type", "header"},
           {"run_id", header.run_id},
           {"config_hash", header.config_hash},
           {"model", header.model},
           {"backend", header.backend},
           {"weights", {{"w_r", header.weights.w_r}, {"w_c", header.weights.w_c}}},
           {"aggregation", to_string(header.aggregation)},
           {"task_description", header.task_description},
           {"timestamp", header.timestamp}});
  }

  void verdict(std::size_t index, const FeatureVerdict& v, const FeatureTiming& timing) {
    auto j = to_json(v);
    j["type"] = "verdict";
    j["index"] = index;
    j["wall_seconds"] = {{"Initiator", timing.turn_seconds[0]},
                         {"Refiner", timing.turn_seconds[1]},
                         {"Challenger", timing.turn_seconds[2]},
                         {"Judge", timing.turn_seconds[3]},
                         {"total", timing.total_seconds}};
    write(j);
  }

  void footer(std::size_t features, double seconds) {
    write({{"type", "footer"}, {"features", features}, {"wall_seconds", seconds}});
  }

 private:
  void write(const nlohmann::json& j) {
    out_ << j.dump() << '\n';
    out_.flush();
  }
  std::ofstream out_;
};

struct AuditRun {
  AuditHeader header;
  std::vector<std::pair<std::size_t, FeatureVerdict>> verdicts;  // (feature index, verdict)
  bool complete = false;  // footer seen
};

inline std::vector<AuditRun> read_audit(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open audit log " + path.string());
  std::vector<AuditRun> runs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        AuditRun run;
        auto& h = run.header;
        h.run_id = j.at("run_id").get<std::string>();
        h.config_hash = j.at("config_hash").get<std::string>();
        h.model = j.at("model").get<std::string>();
        h.backend = j.at("backend").get<std::string>();
        h.weights = {j.at("weights").at("w_r").get<double>(), j.at("weights").at("w_c").get<double>()};
        h.aggregation = aggregation_from_string(j.at("aggregation").get<std::string>());
        h.task_description = j.at("task_description").get<std::string>();
        h.timestamp = j.at("timestamp").get<std::string>();
        runs.push_back(std::move(run));
      } else if (type == "verdict") {
        if (runs.empty()) throw Error("verdict before any run header");
        runs.back().verdicts.emplace_back(j.at("index").get<std::size_t>(), verdict_from_json(j));
      } else if (type == "footer") {
        if (runs.empty()) throw Error("footer before any run header");
        runs.back().complete = true;
      } else {
        throw Error("unknown record type '" + type + "'");
      }
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return runs;
}

struct ReplayIssue {
  std::string run_id;
  std::string feature;
  std::string problem;
};

struct ReplayReport {
  std::size_t runs = 0;
  std::size_t verdicts = 0;
  std::size_t score_mismatches = 0;
  std::size_t structure_errors = 0;
  std::vector<ReplayIssue> issues;

  bool ok() const { return score_mismatches == 0 && structure_errors == 0; }
};

/// Recomputes the weighted combination from every stored turn pair and
/// compares it bit-for-bit with the stored value; also checks the four-turn
/// role order.
inline ReplayReport replay_audit(const std::vector<AuditRun>& runs) {
  ReplayReport rep;
  for (const auto& run : runs) {
    ++rep.runs;
    for (const auto& [index, v] : run.verdicts) {
      ++rep.verdicts;
      bool order_ok = v.turns.size() == kRoleOrder.size();
      for (std::size_t i = 0; order_ok && i < v.turns.size(); ++i) order_ok = v.turns[i].role == kRoleOrder[i];
      if (!order_ok) {
        ++rep.structure_errors;
        rep.issues.push_back({run.header.run_id, v.feature_name, "turns are not exactly Initiator, Refiner, Challenger, Judge"});
        continue;
      }
      const double recomputed = replay_formula(v, run.header.weights);
      const double stored = run.header.aggregation == AggregationMode::formula ? v.s_final : v.s_formula;
      if (recomputed != stored || v.s_formula != recomputed) {
        ++rep.score_mismatches;
        rep.issues.push_back({run.header.run_id, v.feature_name,
                              "stored " + csv::format_double(stored) + " != recomputed " + csv::format_double(recomputed)});
      }
    }
  }
  return rep;
}

}  // namespace llmfs

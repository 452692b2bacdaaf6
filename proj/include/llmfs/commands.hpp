#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "llmfs/audit.hpp"
#include "llmfs/config.hpp"
#include "llmfs/deliberation.hpp"
#include "llmfs/eval_harness.hpp"
#include "llmfs/feature_stats.hpp"
#include "llmfs/llm_gateway.hpp"
#include "llmfs/report.hpp"
#include "llmfs/selection.hpp"

namespace llmfs {

// Pipeline stages behind the command-line verbs. Each stage reads the
// artifacts of the previous one from the configured output directory.

inline std::unique_ptr<ChatBackend> make_backend(const RunConfig& c) {
  if (c.backend.kind == BackendKind::scripted) return ScriptedBackend::from_file(c.backend.script);
  return std::make_unique<OllamaBackend>(c.backend.http);
}

inline std::string backend_name(const RunConfig& c) {
  return c.backend.kind == BackendKind::scripted ? "scripted" : "ollama";
}

namespace detail {

inline nlohmann::json distribution_json(const ClassDistribution& d) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < d.class_names.size(); ++i) {
    j[d.class_names[i]] = {{"count", d.counts[i]}, {"percent", d.percents[i]}};
  }
  j["_total"] = d.total();
  return j;
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing artifact " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline void require(const std::filesystem::path& p, const char* hint) {
  if (!std::filesystem::exists(p)) throw Error("missing " + p.string() + " (run '" + hint + "' first)");
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline PreprocessReport cmd_preprocess(const RunConfig& c, std::ostream& log = std::cout) {
  validate(c);
  Warnings warnings;
  const auto raw = load_csv(c.dataset_path, c.label_column, &warnings, {c.nonfinite});
  auto rep = preprocess(raw, {c.collinearity_threshold, c.undersample, c.preprocess_seed}, &warnings);
  const auto hash = config_hash(c);

  std::filesystem::create_directories(c.output_dir);
  write_csv(rep.dataset, c.preprocessed_csv(), c.label_column, "config_hash=" + hash);

  nlohmann::json removed = nlohmann::json::array();
  for (const auto& r : rep.removed) {
    removed.push_back({{"dropped", r.dropped_feature}, {"kept", r.kept_feature}, {"abs_r", r.abs_r}});
  }
  nlohmann::json sidecar;
  sidecar["config_hash"] = hash;
  sidecar["source"] = c.dataset_path.generic_string();
  sidecar["raw_features"] = raw.cols();
  sidecar["constant_dropped"] = rep.constant_dropped;
  sidecar["collinear_removed"] = removed;
  sidecar["kept_features"] = rep.dataset.feature_names;
  sidecar["scaler"] = {{"features", rep.scaler.feature_names}, {"mean", rep.scaler.mean}, {"std", rep.scaler.std}};
  sidecar["distribution_before"] = detail::distribution_json(rep.before);
  sidecar["distribution_after"] = detail::distribution_json(rep.after);
  sidecar["warnings"] = warnings;
  detail::write_json(sidecar, c.preprocess_sidecar());

  for (const auto& w : warnings) log << "warning: " << w << '\n';
  log << "preprocess: " << raw.rows() << " rows x " << raw.cols() << " features -> " << rep.dataset.rows()
      << " rows x " << rep.dataset.cols() << " features\n";
  for (std::size_t i = 0; i < rep.after.class_names.size(); ++i) {
    log << "  " << rep.after.class_names[i] << ": " << rep.before.count(rep.after.class_names[i]) << " -> "
        << rep.after.counts[i] << '\n';
  }
  log << "  wrote " << c.preprocessed_csv().string() << '\n';
  return rep;
}

/// Loads the preprocessed table and splits it the way every later stage does.
inline std::pair<Dataset, Dataset> load_split(const RunConfig& c) {
  detail::require(c.preprocessed_csv(), "preprocess");
  const auto d = load_csv(c.preprocessed_csv(), c.label_column);
  return split(d, c.test_fraction, c.split_seed, c.stratified);
}

/// Feature metadata from the training partition plus removal notes from
/// the preprocessing sidecar.
inline std::vector<FeatureMetadata> training_metadata(const RunConfig& c, const Dataset& train) {
  auto meta = compute_metadata(train, {c.correlation_target, c.benign_class});
  if (std::filesystem::exists(c.preprocess_sidecar())) {
    const auto side = detail::read_json(c.preprocess_sidecar());
    std::vector<CollinearRemoval> removed;
    for (const auto& r : side.value("collinear_removed", nlohmann::json::array())) {
      removed.push_back({r.at("kept").get<std::string>(), r.at("dropped").get<std::string>(), r.at("abs_r").get<double>()});
    }
    attach_removal_notes(meta, removed);
  }
  return meta;
}

inline nlohmann::json metadata_json(const std::vector<FeatureMetadata>& meta, const std::string& hash) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : meta) {
    arr.push_back({{"name", m.name},
                   {"mean", m.mean},
                   {"std", m.std},
                   {"corr_per_class", m.corr_per_class},
                   {"corr_mean", m.corr_mean},
                   {"corr_std", m.corr_std},
                   {"constant", m.constant},
                   {"notes", m.notes}});
  }
  return {{"config_hash", hash}, {"features", arr}};
}

inline std::vector<FeatureVerdict> cmd_deliberate(const RunConfig& c, ChatBackend& backend,
                                                  std::ostream& log = std::cout) {
  validate(c);
  const auto [train, test] = load_split(c);
  const auto meta = training_metadata(c, train);
  const auto hash = config_hash(c);
  detail::write_json(metadata_json(meta, hash), c.metadata_file());

  if (const auto h = backend.health_check(); h != HealthStatus::ok) {
    throw BackendError("backend " + backend.id() + " not healthy: " + to_string(h));
  }

  AuditHeader header;
  header.run_id = run_id(c);
  header.config_hash = hash;
  header.model = c.backend.kind == BackendKind::scripted ? "scripted:" + c.backend.script.filename().string()
                                                          : c.backend.http.model;
  header.backend = backend.id();
  header.weights = c.weights;
  header.aggregation = c.aggregation;
  header.task_description = c.task_description;
  header.timestamp = utc_timestamp();
  AuditWriter audit(c.audit_file("debate"), header);

  // Audit records are written as features finish; the replay keys on the
  // stored index, not the line order.
  std::size_t done = 0;
  const auto start = std::chrono::steady_clock::now();
  auto progress = [&](std::size_t i, const FeatureVerdict& v, const FeatureTiming& t) {
    audit.verdict(i, v, t);
    ++done;
    log << "[" << done << "/" << meta.size() << "] " << v.feature_name << "  init=" << format4(v.s_initial)
        << " refined=" << format4(v.s_refined) << " challenged=" << format4(v.s_challenged)
        << " final=" << format4(v.s_final);
    if (!v.flags.empty()) {
      log << "  flags:";
      for (const auto& f : v.flags) log << ' ' << f;
    }
    log << '\n';
  };
  const auto verdicts = deliberate_all(meta, c.task_description, backend, c.deliberation(), progress);
  audit.footer(verdicts.size(), std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());

  const auto ranking = rank(verdicts, "debate", header.run_id);
  write_ranking(ranking, c.ranking_file("debate"));
  log << "deliberate: " << verdicts.size() << " features, " << backend.call_count() << " completions; wrote "
      << c.ranking_file("debate").string() << '\n';
  return verdicts;
}

inline Ranking cmd_select_baseline(const RunConfig& c, ChatBackend& backend, std::ostream& log = std::cout) {
  validate(c);
  const auto [train, test] = load_split(c);
  const auto meta = training_metadata(c, train);
  std::vector<SingleScore> transcript;
  const auto ranking = llm_select_score(meta, c.task_description, backend, c.deliberation(), run_id(c), &transcript);
  write_ranking(ranking, c.ranking_file("llm-select"));

  std::ofstream audit(c.audit_file("llm-select"), std::ios::app | std::ios::binary);
  audit << nlohmann::json{{"type", "header"},
                          {"run_id", run_id(c)},
                          {"config_hash", config_hash(c)},
                          {"backend", backend.id()},
                          {"timestamp", utc_timestamp()}}
               .dump()
        << '\n';
  for (const auto& s : transcript) {
    audit << nlohmann::json{{"type", "single"},
                            {"feature", s.feature_name},
                            {"raw_response", s.raw_response},
                            {"score", s.parsed.score},
                            {"parse_status", to_string(s.parsed.status)}}
                 .dump()
          << '\n';
  }
  log << "select-baseline: scored " << meta.size() << " features; wrote " << c.ranking_file("llm-select").string()
      << '\n';
  return ranking;
}

/// Full grid: methods x subset sizes x classifiers x seeds. Rows are
/// appended to the results table and also returned.
inline std::vector<EvalResult> cmd_evaluate(const RunConfig& c, std::ostream& log = std::cout) {
  validate(c);
  const auto [train, test] = load_split(c);
  const auto hash = config_hash(c);
  const auto expected_provenance = run_id(c);

  std::vector<EvalResult> rows;
  for (const auto& method : c.methods) {
    std::vector<std::pair<std::size_t, CellInput>> cells;
    if (method == "pca") {
      for (auto n : c.subset_sizes) {
        if (n > train.cols()) {
          log << "warning: pca k=" << n << " exceeds " << train.cols() << " features; clamped\n";
        }
        cells.push_back({n, CellInput{{}, std::min(n, train.cols())}});
      }
    } else {
      const auto path = c.ranking_file(method);
      if (!std::filesystem::exists(path)) throw Error("missing ranking file " + path.string());
      const auto ranking = read_ranking(path);
      if (ranking.provenance != expected_provenance) {
        log << "warning: " << path.string() << " was produced under " << ranking.provenance << ", current run is "
            << expected_provenance << '\n';
      }
      Warnings w;
      for (auto& s : top_n_subsets(ranking, c.subset_sizes, &w)) cells.push_back({s.n, CellInput{std::move(s.feature_names), 0}});
      for (const auto& m : w) log << "warning: " << m << '\n';
    }
    for (const auto& [n, input] : cells) {
      for (const auto& base_spec : c.classifiers) {
        for (auto seed : c.seeds) {
          auto spec = base_spec;
          spec.seed = seed;
          auto r = evaluate_cell(train, test, input, spec, c.timing_repetitions, method, n);
          r.config_hash = hash;
          log << "  " << method << " n=" << n << " " << r.classifier << " seed=" << seed
              << " acc=" << format4(r.accuracy) << " auc=" << format4(r.auc_macro_ovr) << '\n';
          rows.push_back(std::move(r));
        }
      }
    }
  }
  append_results(rows, c.results_file());
  log << "evaluate: " << rows.size() << " rows appended to " << c.results_file().string() << '\n';
  return rows;
}

inline Report cmd_report(const RunConfig& c, std::ostream& log = std::cout) {
  detail::require(c.results_file(), "evaluate");
  const auto rows = read_results(c.results_file());
  if (rows.empty()) throw Error(c.results_file().string() + ": no result rows");
  const auto rep = build_report(rows, c.report_candidate, c.report_baselines);
  write_report(rep, rows, c.report_dir(), config_hash(c));
  log << "report: " << rows.size() << " rows -> " << c.report_dir().string() << '\n';
  for (const auto& n : rep.notes) log << "note: " << n << '\n';
  return rep;
}

inline ReplayReport cmd_replay_audit(const std::filesystem::path& audit_path, std::ostream& log = std::cout) {
  const auto runs = read_audit(audit_path);
  const auto rep = replay_audit(runs);
  for (const auto& i : rep.issues) log << "mismatch: " << i.run_id << " " << i.feature << ": " << i.problem << '\n';
  for (const auto& r : runs) {
    if (!r.complete) log << "warning: run " << r.header.run_id << " has no footer (interrupted?)\n";
  }
  log << "replay-audit: " << rep.runs << " runs, " << rep.verdicts << " verdicts, " << rep.score_mismatches
      << " score mismatches, " << rep.structure_errors << " structure errors\n";
  return rep;
}

inline HealthStatus cmd_health(const RunConfig& c, ChatBackend& backend, std::ostream& log = std::cout) {
  const auto h = backend.health_check();
  log << backend_name(c) << " backend";
  if (c.backend.kind == BackendKind::ollama) log << " at " << c.backend.http.base_url << " model " << c.backend.http.model;
  log << ": " << to_string(h) << '\n';
  return h;
}

}  // namespace llmfs

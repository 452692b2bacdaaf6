#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "llmfs/commands.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::string backend;
  std::string model;
  std::string weights;  // "w_r,w_c" or just "w_r"
  std::string aggregation;
  std::string failure_policy;
};

llmfs::RunConfig load(const std::string& path, const Overrides& o) {
  auto c = llmfs::load_config(path);
  if (o.seed) c.seeds = {*o.seed};
  if (!o.backend.empty()) {
    if (o.backend == "scripted") {
      c.backend.kind = llmfs::BackendKind::scripted;
    } else if (o.backend == "ollama") {
      c.backend.kind = llmfs::BackendKind::ollama;
    } else {
      throw llmfs::ConfigError("--backend", "must be 'scripted' or 'ollama'");
    }
  }
  if (!o.model.empty()) c.backend.http.model = o.model;
  if (!o.weights.empty()) {
    const auto comma = o.weights.find(',');
    const auto wr = llmfs::csv::parse_double(o.weights.substr(0, comma));
    if (!wr) throw llmfs::ConfigError("--weights", "expected w_r or w_r,w_c");
    c.weights.w_r = *wr;
    c.weights.w_c = 1.0 - *wr;
    if (comma != std::string::npos) {
      const auto wc = llmfs::csv::parse_double(o.weights.substr(comma + 1));
      if (!wc) throw llmfs::ConfigError("--weights", "expected w_r or w_r,w_c");
      c.weights.w_c = *wc;
    }
  }
  if (!o.aggregation.empty()) c.aggregation = llmfs::aggregation_from_string(o.aggregation);
  if (!o.failure_policy.empty()) c.failure_policy = llmfs::failure_policy_from_string(o.failure_policy);
  llmfs::validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM-debate feature selection and evaluation pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { o.seed = s; },
                                            "evaluate with this single seed");
    sub->add_option("--backend", o.backend, "scripted | ollama")->check(CLI::IsMember({"scripted", "ollama"}));
    sub->add_option("--model", o.model, "model name for the HTTP backend");
    sub->add_option("--weights", o.weights, "judge weights as w_r[,w_c]");
    sub->add_option("--aggregation", o.aggregation, "formula | judge-llm")
        ->check(CLI::IsMember({"formula", "judge-llm"}));
    sub->add_option("--failure-policy", o.failure_policy, "soft | fast")->check(CLI::IsMember({"soft", "fast"}));
  };

  auto* pre = app.add_subcommand("preprocess", "clean, prune, standardize and undersample the dataset");
  auto* del = app.add_subcommand("deliberate", "run the four-role debate and write the ranking and audit log");
  auto* sel = app.add_subcommand("select-baseline", "score features with one prompt each");
  auto* eva = app.add_subcommand("evaluate", "train classifiers on every subset and append results");
  auto* rep = app.add_subcommand("report", "comparison tables, significance tests and curve data");
  auto* hlt = app.add_subcommand("health", "probe the configured backend");
  for (auto* s : {pre, del, sel, eva, rep, hlt}) add_common(s);

  auto* rpl = app.add_subcommand("replay-audit", "recompute every stored final score from an audit log");
  std::string audit_path;
  rpl->add_option("audit", audit_path, "audit log (JSON Lines)")->check(CLI::ExistingFile);
  rpl->add_option("--config", config_path, "use the debate audit log of this configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (rpl->parsed()) {
      if (audit_path.empty()) {
        if (config_path.empty()) throw llmfs::Error("replay-audit needs an audit path or --config");
        audit_path = llmfs::load_config(config_path).audit_file("debate").string();
      }
      return llmfs::cmd_replay_audit(audit_path).ok() ? 0 : 1;
    }
    const auto c = load(config_path, o);
    if (pre->parsed()) {
      llmfs::cmd_preprocess(c);
    } else if (del->parsed()) {
      auto backend = llmfs::make_backend(c);
      llmfs::cmd_deliberate(c, *backend);
    } else if (sel->parsed()) {
      auto backend = llmfs::make_backend(c);
      llmfs::cmd_select_baseline(c, *backend);
    } else if (eva->parsed()) {
      llmfs::cmd_evaluate(c);
    } else if (rep->parsed()) {
      llmfs::cmd_report(c);
    } else if (hlt->parsed()) {
      auto backend = llmfs::make_backend(c);
      return llmfs::cmd_health(c, *backend) == llmfs::HealthStatus::ok ? 0 : 2;
    }
  } catch (const llmfs::ConfigError& e) {
    std::cerr << "config error at " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

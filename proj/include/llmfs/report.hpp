#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "llmfs/csv.hpp"
#include "llmfs/eval_harness.hpp"
#include "llmfs/stats.hpp"

namespace llmfs {

struct BestAtN {
  std::string classifier;
  std::size_t n = 0;
  std::string best_accuracy_method;
  double best_accuracy = 0.0;
  std::string best_auc_method;
  double best_auc = 0.0;
};

/// One paired condition of candidate vs baseline timings.
struct SpeedupRow {
  std::string baseline;
  std::string classifier;
  std::string condition;
  double base_train = 0.0, new_train = 0.0, base_infer = 0.0, new_infer = 0.0;
  double train_speedup = 0.0, infer_speedup = 0.0;
};

struct SpeedupSummary {
  std::string baseline;
  std::string classifier;
  double mean_base_train = 0.0, mean_new_train = 0.0, mean_base_infer = 0.0, mean_new_infer = 0.0;
  double mean_train_speedup = 0.0, mean_infer_speedup = 0.0;  // average of per-condition ratios
  double ratio_of_mean_train = 0.0, ratio_of_mean_infer = 0.0;
};

struct DeltaRow {
  std::string baseline;
  std::string classifier;  // "all" for the aggregate over classifiers
  double base_accuracy = 0.0, new_accuracy = 0.0, delta_accuracy_pct = 0.0;
  double base_auc = 0.0, new_auc = 0.0, delta_auc_pct = 0.0;
};

struct SignificanceRow {
  std::string baseline;
  std::string metric;
  std::size_t pairs = 0;
  double mean_difference = 0.0;
  double t = 0.0;
  int df = 0;
  double p = 1.0;
  double d = 0.0;
  std::string effect;
  std::string note;
};

struct Report {
  std::vector<std::string> methods;
  std::vector<BestAtN> best;
  std::vector<SpeedupRow> speedups;
  std::vector<SpeedupSummary> speedup_summary;
  std::vector<DeltaRow> deltas;
  std::vector<SignificanceRow> significance;
  std::vector<std::string> notes;
};

namespace detail {

using CellKey = std::tuple<std::string, std::size_t, std::uint64_t>;  // classifier, n, seed

inline std::map<CellKey, EvalResult> cells_for(const std::vector<EvalResult>& rows, const std::string& method) {
  std::map<CellKey, EvalResult> out;
  for (const auto& r : rows) {
    if (r.method_id == method) out[{r.classifier, r.n, r.seed}] = r;
  }
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace detail

/// Builds every comparison table from a results table.
inline Report build_report(const std::vector<EvalResult>& rows, const std::string& candidate,
                           const std::vector<std::string>& baselines) {
  if (rows.empty()) throw Error("report: results table is empty");
  Report rep;
  std::set<std::string> method_set;
  for (const auto& r : rows) method_set.insert(r.method_id);
  rep.methods.assign(method_set.begin(), method_set.end());

  // Best method per (classifier, n), metrics averaged over seeds.
  std::map<std::tuple<std::string, std::size_t, std::string>, std::pair<std::vector<double>, std::vector<double>>> agg;
  for (const auto& r : rows) {
    auto& a = agg[{r.classifier, r.n, r.method_id}];
    a.first.push_back(r.accuracy);
    a.second.push_back(r.auc_macro_ovr);
  }
  std::map<std::pair<std::string, std::size_t>, BestAtN> best;
  for (const auto& [key, vals] : agg) {
    const auto& [clf, n, method] = key;
    auto [it, inserted] = best.try_emplace({clf, n});
    auto& b = it->second;
    const double acc = detail::mean_of(vals.first);
    const double auc = detail::mean_of(vals.second);
    if (inserted) {
      b = {clf, n, method, acc, method, auc};
      continue;
    }
    if (acc > b.best_accuracy) {
      b.best_accuracy = acc;
      b.best_accuracy_method = method;
    }
    if (auc > b.best_auc) {
      b.best_auc = auc;
      b.best_auc_method = method;
    }
  }
  for (auto& [k, b] : best) rep.best.push_back(b);

  if (!method_set.count(candidate) || method_set.size() < 2) {
    rep.notes.push_back("significance, delta and speedup sections skipped: results need the candidate method '" +
                        candidate + "' and at least one other method");
    return rep;
  }

  const auto cand = detail::cells_for(rows, candidate);
  for (const auto& base_name : baselines) {
    if (!method_set.count(base_name)) {
      rep.notes.push_back("baseline '" + base_name + "' not present in results; skipped");
      continue;
    }
    const auto base = detail::cells_for(rows, base_name);
    stats::PairedSamples acc, auc, train, infer;
    std::map<std::string, std::vector<SpeedupRow>> by_classifier;
    std::map<std::string, std::array<std::vector<double>, 4>> metric_by_classifier;  // base acc, new acc, base auc, new auc
    for (const auto& [key, b] : base) {
      const auto it = cand.find(key);
      if (it == cand.end()) continue;
      const auto& c = it->second;
      const auto& [clf, n, seed] = key;
      const std::string cond = clf + "/n=" + std::to_string(n) + "/seed=" + std::to_string(seed);
      for (auto* s : {&acc, &auc, &train, &infer}) s->labels.push_back(cond);
      acc.a.push_back(b.accuracy);
      acc.b.push_back(c.accuracy);
      auc.a.push_back(b.auc_macro_ovr);
      auc.b.push_back(c.auc_macro_ovr);
      train.a.push_back(b.train_time);
      train.b.push_back(c.train_time);
      infer.a.push_back(b.infer_time);
      infer.b.push_back(c.infer_time);

      SpeedupRow s;
      s.baseline = base_name;
      s.classifier = clf;
      s.condition = "n=" + std::to_string(n) + "/seed=" + std::to_string(seed);
      s.base_train = b.train_time;
      s.new_train = c.train_time;
      s.base_infer = b.infer_time;
      s.new_infer = c.infer_time;
      s.train_speedup = (b.train_time > 0 && c.train_time > 0) ? stats::speedup(b.train_time, c.train_time) : NAN;
      s.infer_speedup = (b.infer_time > 0 && c.infer_time > 0) ? stats::speedup(b.infer_time, c.infer_time) : NAN;
      by_classifier[clf].push_back(s);
      rep.speedups.push_back(s);

      auto& m = metric_by_classifier[clf];
      m[0].push_back(b.accuracy);
      m[1].push_back(c.accuracy);
      m[2].push_back(b.auc_macro_ovr);
      m[3].push_back(c.auc_macro_ovr);
    }
    if (acc.a.empty()) {
      rep.notes.push_back("no paired cells between '" + candidate + "' and '" + base_name + "'");
      continue;
    }

    for (const auto& [clf, list] : by_classifier) {
      SpeedupSummary sum;
      sum.baseline = base_name;
      sum.classifier = clf;
      std::vector<double> bt, nt, bi, ni, ts, is;
      for (const auto& s : list) {
        bt.push_back(s.base_train);
        nt.push_back(s.new_train);
        bi.push_back(s.base_infer);
        ni.push_back(s.new_infer);
        ts.push_back(s.train_speedup);
        is.push_back(s.infer_speedup);
      }
      sum.mean_base_train = detail::mean_of(bt);
      sum.mean_new_train = detail::mean_of(nt);
      sum.mean_base_infer = detail::mean_of(bi);
      sum.mean_new_infer = detail::mean_of(ni);
      sum.mean_train_speedup = detail::mean_of(ts);
      sum.mean_infer_speedup = detail::mean_of(is);
      sum.ratio_of_mean_train = sum.mean_new_train > 0 ? sum.mean_base_train / sum.mean_new_train : NAN;
      sum.ratio_of_mean_infer = sum.mean_new_infer > 0 ? sum.mean_base_infer / sum.mean_new_infer : NAN;
      rep.speedup_summary.push_back(sum);
    }

    // Per-classifier deltas, then their average as the overall figure.
    std::vector<double> dacc, dauc;
    for (const auto& [clf, m] : metric_by_classifier) {
      DeltaRow d;
      d.baseline = base_name;
      d.classifier = clf;
      d.base_accuracy = detail::mean_of(m[0]);
      d.new_accuracy = detail::mean_of(m[1]);
      d.base_auc = detail::mean_of(m[2]);
      d.new_auc = detail::mean_of(m[3]);
      d.delta_accuracy_pct = d.base_accuracy != 0 ? stats::delta_percent(d.base_accuracy, d.new_accuracy) : NAN;
      d.delta_auc_pct = d.base_auc != 0 ? stats::delta_percent(d.base_auc, d.new_auc) : NAN;
      dacc.push_back(d.delta_accuracy_pct);
      dauc.push_back(d.delta_auc_pct);
      rep.deltas.push_back(d);
    }
    DeltaRow all;
    all.baseline = base_name;
    all.classifier = "all";
    all.delta_accuracy_pct = detail::mean_of(dacc);
    all.delta_auc_pct = detail::mean_of(dauc);
    rep.deltas.push_back(all);

    auto significance = [&](const std::string& metric, const stats::PairedSamples& s) {
      SignificanceRow row;
      row.baseline = base_name;
      row.metric = metric;
      row.pairs = s.a.size();
      if (s.a.size() < 2) {
        row.note = "fewer than 2 pairs";
        rep.significance.push_back(row);
        return;
      }
      const auto diffs = s.differences();
      row.mean_difference = stats::mean_sd(diffs).mean;
      try {
        const auto t = stats::paired_t_test(s);
        row.t = t.t;
        row.df = t.df;
        row.p = t.p_two_sided;
        if (t.degenerate) {
          row.note = "zero-variance differences";
        } else {
          row.d = stats::cohens_d_paired(s);
          row.effect = stats::to_string(stats::effect_size_label(row.d));
        }
      } catch (const Error& e) {
        row.note = e.what();
      }
      rep.significance.push_back(row);
    };
    significance("auc", auc);
    significance("accuracy", acc);
    significance("train_time", train);
    significance("infer_time", infer);
  }
  return rep;
}

namespace detail {

inline std::string num(double v) { return std::isnan(v) ? std::string() : csv::format_double(v); }

inline std::string fixed(double v, int decimals) {
  if (std::isnan(v)) return "n/a";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(decimals);
  os << v;
  return os.str();
}

}  // namespace detail

/// Long-format per-(method, classifier, n, metric) mean and sd over seeds.
inline void write_curves(const std::vector<EvalResult>& rows, const std::filesystem::path& path,
                         const std::string& comment) {
  std::map<std::tuple<std::string, std::string, std::size_t, std::string>, std::vector<double>> series;
  for (const auto& r : rows) {
    series[{r.method_id, r.classifier, r.n, "accuracy"}].push_back(r.accuracy);
    series[{r.method_id, r.classifier, r.n, "auc"}].push_back(r.auc_macro_ovr);
    series[{r.method_id, r.classifier, r.n, "train_time"}].push_back(r.train_time);
    series[{r.method_id, r.classifier, r.n, "infer_time"}].push_back(r.infer_time);
  }
  std::ofstream out(path);
  out << "# " << comment << '\n' << "method,classifier,n,metric,mean,sd,count\n";
  for (const auto& [key, v] : series) {
    const auto& [method, clf, n, metric] = key;
    const double mean = detail::mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    out << csv::quote_if_needed(method) << ',' << clf << ',' << n << ',' << metric << ',' << csv::format_double(mean)
        << ',' << csv::format_double(sd) << ',' << v.size() << '\n';
  }
}

/// Writes best_by_n.csv, speedup.csv, speedup_summary.csv, delta.csv,
/// significance.csv, curves.csv and summary.txt into `dir`.
inline void write_report(const Report& rep, const std::vector<EvalResult>& rows, const std::filesystem::path& dir,
                         const std::string& config_hash) {
  std::filesystem::create_directories(dir);
  const std::string comment = "config_hash=" + config_hash;
  {
    std::ofstream out(dir / "best_by_n.csv");
    out << "# " << comment << '\n' << "classifier,n,best_accuracy_method,best_accuracy,best_auc_method,best_auc\n";
    for (const auto& b : rep.best) {
      out << b.classifier << ',' << b.n << ',' << csv::quote_if_needed(b.best_accuracy_method) << ','
          << csv::format_double(b.best_accuracy) << ',' << csv::quote_if_needed(b.best_auc_method) << ','
          << csv::format_double(b.best_auc) << '\n';
    }
  }
  {
    std::ofstream out(dir / "speedup.csv");
    out << "# " << comment << '\n'
        << "baseline,classifier,condition,base_train,new_train,base_infer,new_infer,train_speedup,infer_speedup\n";
    for (const auto& s : rep.speedups) {
      out << s.baseline << ',' << s.classifier << ',' << s.condition << ',' << detail::num(s.base_train) << ','
          << detail::num(s.new_train) << ',' << detail::num(s.base_infer) << ',' << detail::num(s.new_infer) << ','
          << detail::fixed(s.train_speedup, 2) << ',' << detail::fixed(s.infer_speedup, 2) << '\n';
    }
  }
  {
    std::ofstream out(dir / "speedup_summary.csv");
    out << "# " << comment << '\n'
        << "baseline,classifier,mean_base_train,mean_new_train,mean_base_infer,mean_new_infer,"
           "mean_train_speedup,mean_infer_speedup,ratio_of_mean_train,ratio_of_mean_infer\n";
    for (const auto& s : rep.speedup_summary) {
      out << s.baseline << ',' << s.classifier << ',' << detail::num(s.mean_base_train) << ','
          << detail::num(s.mean_new_train) << ',' << detail::num(s.mean_base_infer) << ','
          << detail::num(s.mean_new_infer) << ',' << detail::fixed(s.mean_train_speedup, 2) << ','
          << detail::fixed(s.mean_infer_speedup, 2) << ',' << detail::fixed(s.ratio_of_mean_train, 2) << ','
          << detail::fixed(s.ratio_of_mean_infer, 2) << '\n';
    }
  }
  {
    std::ofstream out(dir / "delta.csv");
    out << "# " << comment << '\n'
        << "baseline,classifier,base_accuracy,new_accuracy,delta_accuracy_pct,base_auc,new_auc,delta_auc_pct\n";
    for (const auto& d : rep.deltas) {
      const bool agg = d.classifier == "all";
      out << d.baseline << ',' << d.classifier << ',' << (agg ? "" : detail::num(d.base_accuracy)) << ','
          << (agg ? "" : detail::num(d.new_accuracy)) << ',' << detail::fixed(d.delta_accuracy_pct, 2) << ','
          << (agg ? "" : detail::num(d.base_auc)) << ',' << (agg ? "" : detail::num(d.new_auc)) << ','
          << detail::fixed(d.delta_auc_pct, 2) << '\n';
    }
  }
  {
    std::ofstream out(dir / "significance.csv");
    out << "# " << comment << '\n' << "baseline,metric,pairs,mean_difference,t,df,p_value,cohens_d,effect_size,note\n";
    for (const auto& s : rep.significance) {
      out << s.baseline << ',' << s.metric << ',' << s.pairs << ',' << csv::format_double(s.mean_difference) << ','
          << csv::format_double(s.t) << ',' << s.df << ',' << csv::format_double(s.p) << ','
          << csv::format_double(s.d) << ',' << s.effect << ',' << csv::quote_if_needed(s.note) << '\n';
    }
  }
  write_curves(rows, dir / "curves.csv", comment);

  std::ofstream txt(dir / "summary.txt");
  txt << "config_hash: " << config_hash << "\n";
  txt << "methods:";
  for (const auto& m : rep.methods) txt << ' ' << m;
  txt << "\n\nBest method per subset size (mean over seeds)\n";
  for (const auto& b : rep.best) {
    txt << "  " << b.classifier << " n=" << b.n << ": accuracy " << b.best_accuracy_method << " ("
        << detail::fixed(b.best_accuracy, 4) << "), auc " << b.best_auc_method << " (" << detail::fixed(b.best_auc, 4)
        << ")\n";
  }
  if (!rep.deltas.empty()) {
    txt << "\nDelta vs baseline (percent)\n";
    for (const auto& d : rep.deltas) {
      txt << "  vs " << d.baseline << " [" << d.classifier << "]: accuracy " << detail::fixed(d.delta_accuracy_pct, 2)
          << "%, auc " << detail::fixed(d.delta_auc_pct, 2) << "%\n";
    }
  }
  if (!rep.speedup_summary.empty()) {
    txt << "\nTraining/inference speedup (baseline time / candidate time)\n";
    for (const auto& s : rep.speedup_summary) {
      txt << "  vs " << s.baseline << " [" << s.classifier << "]: train mean-of-ratios "
          << detail::fixed(s.mean_train_speedup, 2) << "x, ratio-of-means " << detail::fixed(s.ratio_of_mean_train, 2)
          << "x; infer mean-of-ratios " << detail::fixed(s.mean_infer_speedup, 2) << "x\n";
    }
  }
  if (!rep.significance.empty()) {
    txt << "\nPaired t-test (candidate - baseline)\n";
    for (const auto& s : rep.significance) {
      txt << "  vs " << s.baseline << " " << s.metric << ": mean diff " << detail::fixed(s.mean_difference, 4)
          << ", p=" << detail::fixed(s.p, 3) << ", d=" << detail::fixed(s.d, 2) << " " << s.effect
          << (s.note.empty() ? "" : " (" + s.note + ")") << "\n";
    }
    txt << "  effect-size bands on |d|: <0.2 negligible, [0.2,0.5) small, [0.5,0.8) medium, >=0.8 large\n";
  }
  for (const auto& n : rep.notes) txt << "\nnote: " << n << "\n";
}

}  // namespace llmfs

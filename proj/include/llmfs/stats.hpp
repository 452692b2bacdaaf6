#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "llmfs/common.hpp"

namespace llmfs::stats {

struct PairedSamples {
  std::vector<std::string> labels;  // condition per pair; may be empty
  std::vector<double> a;
  std::vector<double> b;

  void validate() const {
    if (a.size() != b.size()) throw Error("paired samples: length mismatch");
    if (a.size() < 2) throw Error("paired samples: need at least 2 pairs");
    if (!labels.empty() && labels.size() != a.size()) throw Error("paired samples: label count mismatch");
  }

  /// b - a, so a positive mean means b is larger.
  std::vector<double> differences() const {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = b[i] - a[i];
    return d;
  }
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample (n - 1)
};

inline MeanSd mean_sd(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  MeanSd out;
  out.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - out.mean) * (v - out.mean);
  out.sd = x.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Special functions

namespace detail {

/// Continued fraction for the incomplete beta (modified Lentz).
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw Error("incomplete beta: a and b must be positive");
  if (x < 0.0 || x > 1.0) throw Error("incomplete beta: x must be in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// Two-sided tail probability P(|T| >= |t|) for Student's t with df degrees.
inline double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw Error("student t: df must be positive");
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(df / (df + t * t), 0.5 * df, 0.5);
}

inline double student_t_cdf(double t, double df) {
  const double tail = 0.5 * student_t_two_sided(t, df);
  return t >= 0.0 ? 1.0 - tail : tail;
}

// ---------------------------------------------------------------------------
// Tests and effect sizes

struct TTestResult {
  double t = 0.0;
  int df = 0;
  double p_two_sided = 1.0;
  bool degenerate = false;  // zero-variance differences; t is +-inf and p = 0
  double mean_difference = 0.0;
};

/// Paired Student's t-test on b - a.
inline TTestResult paired_t_test(const PairedSamples& s) {
  s.validate();
  const auto diffs = s.differences();
  const auto ms = mean_sd(diffs);
  TTestResult out;
  out.df = static_cast<int>(diffs.size()) - 1;
  out.mean_difference = ms.mean;
  if (ms.sd == 0.0) {
    if (ms.mean == 0.0) throw Error("paired_t_test: all differences are zero");
    out.degenerate = true;
    out.t = ms.mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    out.p_two_sided = 0.0;
    return out;
  }
  out.t = ms.mean / (ms.sd / std::sqrt(static_cast<double>(diffs.size())));
  out.p_two_sided = student_t_two_sided(out.t, out.df);
  return out;
}

/// mean(b - a) / sd(b - a), sample sd.
inline double cohens_d_paired(const PairedSamples& s) {
  s.validate();
  const auto ms = mean_sd(s.differences());
  if (ms.sd == 0.0) throw Error("cohens_d_paired: differences have zero variance");
  return ms.mean / ms.sd;
}

enum class EffectSize { negligible, small, medium, large };

inline std::string to_string(EffectSize e) {
  switch (e) {
    case EffectSize::negligible: return "negligible";
    case EffectSize::small: return "small";
    case EffectSize::medium: return "medium";
    case EffectSize::large: return "large";
  }
  return "?";
}

/// Bands on |d| with lower-inclusive boundaries at 0.2, 0.5, 0.8.
inline EffectSize effect_size_label(double d) {
  if (!std::isfinite(d)) throw Error("effect_size_label: d must be finite");
  const double m = std::abs(d);
  if (m < 0.2) return EffectSize::negligible;
  if (m < 0.5) return EffectSize::small;
  if (m < 0.8) return EffectSize::medium;
  return EffectSize::large;
}

inline double speedup(double t_base, double t_new) {
  if (!(t_base > 0.0) || !(t_new > 0.0)) throw Error("speedup: times must be positive");
  return t_base / t_new;
}

inline double delta_percent(double base, double next) {
  if (base == 0.0) throw Error("delta_percent: base must be non-zero");
  return 100.0 * (next - base) / base;
}

inline double round_to(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

}  // namespace llmfs::stats

#pragma once

// Calibration and failure-prediction metrics over (confidence, correct) pairs,
// plus histogram distances for measuring how steering shifts the confidence
// distribution.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "steerconf/error.hpp"

namespace steerconf {

struct EvalPair {
  double confidence = 0.0;
  bool correct = false;
};

/// Bin of confidence c among `bins` bins laid out as ((i-1)/B, i/B]; c = 0
/// belongs to the first bin. Returns a 0-based index.
inline int calibration_bin(double c, int bins) {
  if (c <= 0.0) return 0;
  int idx = static_cast<int>(std::ceil(c * bins)) - 1;
  idx = std::clamp(idx, 0, bins - 1);
  // c*B can land one ulp off a boundary; settle against the exact edges
  while (idx > 0 && c <= static_cast<double>(idx) / bins) --idx;
  while (idx < bins - 1 && c > static_cast<double>(idx + 1) / bins) ++idx;
  return idx;
}

struct ReliabilityBin {
  double bin_low = 0.0;
  double bin_high = 0.0;
  std::size_t count = 0;
  double mean_conf = 0.0;
  double accuracy = 0.0;
};

inline std::vector<ReliabilityBin> reliability_table(std::span<const EvalPair> pairs, int bins = 10,
                                                     bool include_empty = false) {
  if (pairs.empty()) throw Error("reliability_table of an empty pair list");
  if (bins < 1) throw Error("bin count must be >= 1");
  std::vector<std::size_t> count(static_cast<size_t>(bins), 0);
  std::vector<double> conf(static_cast<size_t>(bins), 0.0), hits(static_cast<size_t>(bins), 0.0);
  for (const auto& p : pairs) {
    const auto b = static_cast<size_t>(calibration_bin(p.confidence, bins));
    ++count[b];
    conf[b] += p.confidence;
    hits[b] += p.correct ? 1.0 : 0.0;
  }
  std::vector<ReliabilityBin> out;
  for (size_t b = 0; b < count.size(); ++b) {
    if (count[b] == 0 && !include_empty) continue;
    ReliabilityBin row{static_cast<double>(b) / bins, static_cast<double>(b + 1) / bins, count[b], 0.0, 0.0};
    if (count[b] > 0) {
      row.mean_conf = conf[b] / static_cast<double>(count[b]);
      row.accuracy = hits[b] / static_cast<double>(count[b]);
    }
    out.push_back(row);
  }
  return out;
}

inline double ece(std::span<const EvalPair> pairs, int bins = 10) {
  const auto table = reliability_table(pairs, bins);
  const auto n = static_cast<double>(pairs.size());
  double total = 0.0;
  for (const auto& row : table)
    total += static_cast<double>(row.count) / n * std::abs(row.accuracy - row.mean_conf);
  return total;
}

/// Normalized AUROC from the Mann-Whitney rank statistic (tied scores share
/// their average rank, i.e. count one half). nullopt when only one class is
/// present.
inline std::optional<double> auroc(std::span<const EvalPair> pairs) {
  std::size_t n_pos = 0;
  for (const auto& p : pairs) n_pos += p.correct ? 1 : 0;
  const std::size_t n_neg = pairs.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return pairs[a].confidence < pairs[b].confidence; });
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && pairs[order[j]].confidence == pairs[order[i]].confidence) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (pairs[order[k]].correct) pos_rank_sum += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

enum class PositiveClass { correct, incorrect };

/// Average precision with a descending-score sweep; tied scores enter
/// together as one threshold. For PositiveClass::incorrect the score is
/// 1 - confidence, so low confidence ranks first. nullopt without positives.
inline std::optional<double> auprc(std::span<const EvalPair> pairs, PositiveClass positive = PositiveClass::correct) {
  const bool want = positive == PositiveClass::correct;
  std::size_t total_pos = 0;
  for (const auto& p : pairs) total_pos += p.correct == want ? 1 : 0;
  if (total_pos == 0) return std::nullopt;

  auto score = [&](std::size_t i) { return want ? pairs[i].confidence : 1.0 - pairs[i].confidence; };
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score(a) > score(b); });

  double ap = 0.0, prev_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    const double s = score(order[i]);
    while (j < order.size() && score(order[j]) == s) {
      tp += pairs[order[j]].correct == want ? 1 : 0;
      ++j;
    }
    seen = j;
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

/// Confidence counts in 20 bins of 5 percentage points, split by correctness.
/// Bins are [0,5), [5,10), ..., [95,100]; 100 lands in the last bin.
struct ConfidenceHistogram {
  static constexpr int kBins = 20;
  static constexpr double kBinWidth = 5.0;

  std::array<std::size_t, kBins> correct{};
  std::array<std::size_t, kBins> incorrect{};
  double percent_sum = 0.0;  // exact mean = percent_sum / total()

  static int bin_of(double confidence) {
    // round away representation noise so 0.35 -> 35.0 lands in [35,40)
    const double pct = std::round(confidence * 100.0 * 1e6) / 1e6;
    return std::clamp(static_cast<int>(std::floor(pct / kBinWidth)), 0, kBins - 1);
  }

  void add(double confidence, bool is_correct) {
    const auto b = static_cast<size_t>(bin_of(confidence));
    (is_correct ? correct : incorrect)[b] += 1;
    percent_sum += confidence * 100.0;
  }

  std::size_t count(int bin) const { return correct[static_cast<size_t>(bin)] + incorrect[static_cast<size_t>(bin)]; }

  std::size_t total() const {
    std::size_t t = 0;
    for (int b = 0; b < kBins; ++b) t += count(b);
    return t;
  }

  double mean_percent() const { return percent_sum / static_cast<double>(total()); }
};

inline ConfidenceHistogram confidence_histogram(std::span<const EvalPair> pairs) {
  ConfidenceHistogram h;
  for (const auto& p : pairs) h.add(p.confidence, p.correct);
  return h;
}

struct DistributionShift {
  double wasserstein = 0.0;  // percentage points
  double js_div = 0.0;       // scaled by js_scale
  double mean_diff = 0.0;    // mean1 - mean2, percentage points
  double signed_wasserstein = 0.0;
  double signed_js = 0.0;
  bool zero_mean_diff = false;  // sign taken as + by convention
};

struct ShiftOptions {
  double js_log_base = std::exp(1.0);
  double js_scale = 100.0;
};

inline DistributionShift distribution_shift(const ConfidenceHistogram& h1, const ConfidenceHistogram& h2,
                                            ShiftOptions opts = {}) {
  const auto n1 = static_cast<double>(h1.total()), n2 = static_cast<double>(h2.total());
  if (n1 == 0.0 || n2 == 0.0) throw Error("distribution_shift needs non-empty histograms");
  constexpr int K = ConfidenceHistogram::kBins;
  std::array<double, K> p{}, q{};
  for (int b = 0; b < K; ++b) {
    p[static_cast<size_t>(b)] = static_cast<double>(h1.count(b)) / n1;
    q[static_cast<size_t>(b)] = static_cast<double>(h2.count(b)) / n2;
  }

  DistributionShift out;
  double cdf1 = 0.0, cdf2 = 0.0;
  for (int b = 0; b < K; ++b) {
    cdf1 += p[static_cast<size_t>(b)];
    cdf2 += q[static_cast<size_t>(b)];
    out.wasserstein += std::abs(cdf1 - cdf2) * ConfidenceHistogram::kBinWidth;
  }

  const double log_base = std::log(opts.js_log_base);
  double js = 0.0;
  for (size_t b = 0; b < static_cast<size_t>(K); ++b) {
    const double m = 0.5 * (p[b] + q[b]);
    if (p[b] > 0.0) js += 0.5 * p[b] * std::log(p[b] / m);
    if (q[b] > 0.0) js += 0.5 * q[b] * std::log(q[b] / m);
  }
  out.js_div = js / log_base * opts.js_scale;

  out.mean_diff = h1.mean_percent() - h2.mean_percent();
  out.zero_mean_diff = out.mean_diff == 0.0;
  const double sign = out.mean_diff < 0.0 ? -1.0 : 1.0;
  out.signed_wasserstein = sign * out.wasserstein;
  out.signed_js = sign * out.js_div;
  return out;
}

struct MetricsReport {
  std::size_t n = 0;
  std::size_t n_invalid = 0;
  double accuracy = 0.0;
  double ece = 0.0;
  std::optional<double> auroc;
  std::optional<double> pr_p;
  std::optional<double> pr_n;
  std::vector<ReliabilityBin> reliability_bins;
  double invalid_rate = 0.0;
};

/// `n_invalid` counts questions excluded before scoring; invalid_rate is
/// n_invalid / (n + n_invalid).
inline MetricsReport evaluate_pairs(std::span<const EvalPair> pairs, int bins = 10, std::size_t n_invalid = 0) {
  MetricsReport r;
  r.n = pairs.size();
  r.n_invalid = n_invalid;
  const auto attempted = r.n + n_invalid;
  r.invalid_rate = attempted == 0 ? 0.0 : static_cast<double>(n_invalid) / static_cast<double>(attempted);
  if (pairs.empty()) return r;
  std::size_t hits = 0;
  for (const auto& p : pairs) hits += p.correct ? 1 : 0;
  r.accuracy = static_cast<double>(hits) / static_cast<double>(r.n);
  r.ece = ece(pairs, bins);
  r.auroc = auroc(pairs);
  r.pr_p = auprc(pairs, PositiveClass::correct);
  r.pr_n = auprc(pairs, PositiveClass::incorrect);
  r.reliability_bins = reliability_table(pairs, bins);
  return r;
}

inline nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : r.reliability_bins)
    bins.push_back({{"bin_low", b.bin_low},
                    {"bin_high", b.bin_high},
                    {"count", b.count},
                    {"mean_conf", b.mean_conf},
                    {"accuracy", b.accuracy}});
  return {{"n", r.n},
          {"n_invalid", r.n_invalid},
          {"invalid_rate", r.invalid_rate},
          {"accuracy", r.accuracy},
          {"ece", r.ece},
          {"auroc", optional_json(r.auroc)},
          {"pr_p", optional_json(r.pr_p)},
          {"pr_n", optional_json(r.pr_n)},
          {"reliability_bins", bins}};
}

}  // namespace steerconf

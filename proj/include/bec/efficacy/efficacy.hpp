#pragma once

// Efficacy measurement: relative impact of a detector, exact Shapley
// attribution, precision estimates from review duty, conviction rate and the
// customer feedback store.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bec/classifier/logistic.hpp"

namespace bec::efficacy {

using classifier::ClassifierModel;
using classifier::LabeledVector;
using classifier::LabelSource;
using classifier::Verdict;

inline bool convicts(const std::vector<double>& d, const ClassifierModel& h) { return classifier::score(d, h) >= h.t; }

/// True when d is convicted and zeroing component i would flip the verdict.
inline bool impactful(TypeId i, const std::vector<double>& d, const ClassifierModel& h) {
  if (i >= d.size()) throw std::out_of_range("impactful: type id outside the detection vector");
  if (!convicts(d, h)) return false;
  std::vector<double> without = d;
  without[i] = 0.0;
  return !convicts(without, h);
}

/// Fraction of convicted vectors that detector i alone keeps convicted.
inline double relative_impact(TypeId i, const std::vector<std::vector<double>>& convicted, const ClassifierModel& h) {
  if (convicted.empty()) throw std::invalid_argument("relative_impact: no convicted vectors");
  std::size_t hits = 0;
  for (const auto& d : convicted) {
    if (!convicts(d, h)) throw std::invalid_argument("relative_impact: vector is not convicted by the model");
    hits += impactful(i, d, h);
  }
  return static_cast<double>(hits) / static_cast<double>(convicted.size());
}

inline constexpr std::size_t kMaxExactShapley = 20;

struct Attribution {
  TypeId type_id = 0;
  double value = 0.0;
};

/// Exact Shapley values of the active (nonzero) components for the game
/// v(S) = sigmoid(w . d_S), where d_S zeroes everything outside S.
inline std::vector<Attribution> shapley_values(const std::vector<double>& d, const ClassifierModel& h) {
  if (d.size() != h.w.size()) (void)classifier::score(d, h);  // throws the dimension error
  std::vector<TypeId> active;
  for (TypeId i = 0; i < d.size(); ++i) {
    if (d[i] != 0.0) active.push_back(i);
  }
  const std::size_t k = active.size();
  if (k > kMaxExactShapley) {
    throw std::invalid_argument("shapley_values: " + std::to_string(k) +
                                " active detections exceed the exact bound of 20; use a sampling estimator");
  }
  std::vector<Attribution> out;
  if (k == 0) return out;
  std::vector<double> contrib(k);
  for (std::size_t j = 0; j < k; ++j) contrib[j] = h.w[active[j]] * d[active[j]];
  const std::size_t n_masks = std::size_t{1} << k;
  std::vector<double> v(n_masks);
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (mask & (std::size_t{1} << j)) z += contrib[j];
    }
    v[mask] = classifier::sigmoid(z);
  }
  // weight(s) = s! (k - s - 1)! / k!
  std::vector<double> weight(k);
  for (std::size_t s = 0; s < k; ++s) {
    double lw = std::lgamma(static_cast<double>(s) + 1) + std::lgamma(static_cast<double>(k - s)) -
                std::lgamma(static_cast<double>(k) + 1);
    weight[s] = std::exp(lw);
  }
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t bit = std::size_t{1} << j;
    double phi = 0.0;
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
      if (mask & bit) continue;
      phi += weight[static_cast<std::size_t>(__builtin_popcountll(mask))] * (v[mask | bit] - v[mask]);
    }
    out.push_back({active[j], phi});
  }
  return out;
}

struct ImpactRow {
  TypeId type_id = 0;
  std::string name;
  std::size_t occurrences = 0;  // convicted emails where the detection is present
  double relative_impact = 0.0;
  double mean_shapley = 0.0;    // over convicted emails where it occurs
};

struct ImpactReport {
  std::size_t convicted = 0;
  std::vector<ImpactRow> rows;  // only types that occur in some conviction
  bool empty() const { return rows.empty(); }
};

/// Impact report over the convicted subset of `vectors`.
inline ImpactReport impact_report(const std::vector<std::vector<double>>& vectors, const ClassifierModel& h) {
  ImpactReport report;
  std::vector<std::vector<double>> convicted;
  for (const auto& d : vectors) {
    if (convicts(d, h)) convicted.push_back(d);
  }
  report.convicted = convicted.size();
  if (convicted.empty()) return report;
  const std::size_t m = h.w.size();
  std::vector<std::size_t> occurrences(m, 0), impactful_count(m, 0);
  std::vector<double> shapley_sum(m, 0.0);
  for (const auto& d : convicted) {
    for (const auto& a : shapley_values(d, h)) {
      ++occurrences[a.type_id];
      shapley_sum[a.type_id] += a.value;
      impactful_count[a.type_id] += impactful(a.type_id, d, h);
    }
  }
  for (TypeId i = 0; i < m; ++i) {
    if (occurrences[i] == 0) continue;
    report.rows.push_back({i, h.name_of(i), occurrences[i],
                           static_cast<double>(impactful_count[i]) / static_cast<double>(convicted.size()),
                           shapley_sum[i] / static_cast<double>(occurrences[i])});
  }
  return report;
}

// ---------------------------------------------------------------------------
// Review duty

inline constexpr std::size_t kMinReviewSample = 10;
inline constexpr std::size_t kMaxReviewSample = 50;

/// Uniform sample without replacement of n indices from [0, population);
/// the whole population, in order, if it is smaller than n.
inline std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n, std::uint64_t seed) {
  if (n < kMinReviewSample || n > kMaxReviewSample) {
    throw std::invalid_argument("review sample size must be between 10 and 50");
  }
  std::vector<std::size_t> idx(population);
  for (std::size_t i = 0; i < population; ++i) idx[i] = i;
  if (population <= n) return idx;
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates; the modulo keeps the draw sequence independent of
  // the standard library's distribution implementation
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng() % (population - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

template <typename T>
std::vector<T> sample_for_review(const std::vector<T>& day_convictions, std::size_t n, std::uint64_t seed) {
  std::vector<T> out;
  for (std::size_t i : sample_indices(day_convictions.size(), n, seed)) out.push_back(day_convictions[i]);
  return out;
}

enum class HumanLabel { TP, FP };

inline std::string_view to_string(HumanLabel l) { return l == HumanLabel::TP ? "TP" : "FP"; }

inline std::optional<HumanLabel> parse_human_label(std::string_view s) {
  if (s == "TP" || s == "tp") return HumanLabel::TP;
  if (s == "FP" || s == "fp") return HumanLabel::FP;
  return std::nullopt;
}

struct ReviewRecord {
  std::string record_id;
  std::string email_ref;
  std::vector<double> d;
  Verdict verdict;
  std::int64_t day = 0;
  std::optional<HumanLabel> human_label;
  std::string labeled_by;
  std::string labeled_at;
};

inline constexpr double kWilsonZ95 = 1.959963984540054;

struct PrecisionEstimate {
  std::size_t tp = 0;
  std::size_t fp = 0;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// TP / (TP + FP) with the Wilson score interval.
inline PrecisionEstimate wilson(std::size_t tp, std::size_t n, double z = kWilsonZ95) {
  if (n == 0) throw std::invalid_argument("precision_estimate: no labels");
  if (tp > n) throw std::invalid_argument("precision_estimate: more successes than trials");
  PrecisionEstimate e;
  e.tp = tp;
  e.fp = n - tp;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(tp) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2 * nn)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / denom;
  e.estimate = p;
  // the interval contains p exactly; rounding can put an endpoint a few ulps past it
  e.lower = std::clamp(centre - half, 0.0, p);
  e.upper = std::clamp(centre + half, p, 1.0);
  return e;
}

inline PrecisionEstimate precision_estimate(const std::vector<HumanLabel>& labels) {
  std::size_t tp = 0;
  for (auto l : labels) tp += l == HumanLabel::TP;
  return wilson(tp, labels.size());
}

/// Positive verdicts over all verdicts, i.e. (TP+FP)/(TP+FP+TN+FN).
inline double conviction_rate(const std::vector<int>& labels) {
  if (labels.empty()) throw std::invalid_argument("conviction_rate: empty window");
  std::size_t pos = 0;
  for (int l : labels) pos += l == 1;
  return static_cast<double>(pos) / static_cast<double>(labels.size());
}

inline double conviction_rate(const std::vector<Verdict>& window) {
  std::vector<int> labels;
  labels.reserve(window.size());
  for (const auto& v : window) labels.push_back(v.label);
  return conviction_rate(labels);
}

// ---------------------------------------------------------------------------
// Customer feedback

enum class FeedbackKind { customer_fp, customer_fn };

inline std::optional<FeedbackKind> parse_feedback_kind(std::string_view s) {
  if (s == "customer_fp" || s == "fp" || s == "FP") return FeedbackKind::customer_fp;
  if (s == "customer_fn" || s == "fn" || s == "FN") return FeedbackKind::customer_fn;
  return std::nullopt;
}

inline std::string_view to_string(FeedbackKind k) { return k == FeedbackKind::customer_fp ? "customer_fp" : "customer_fn"; }

/// Last write wins per email_ref; iteration order is first-submission order.
class FeedbackStore {
 public:
  LabeledVector ingest(FeedbackKind kind, const std::string& email_ref, std::vector<double> d) {
    LabeledVector lv{std::move(d), kind == FeedbackKind::customer_fn ? 1 : 0,
                     kind == FeedbackKind::customer_fn ? LabelSource::customer_fn : LabelSource::customer_fp};
    std::lock_guard lock(mu_);
    auto [it, inserted] = index_.try_emplace(email_ref, entries_.size());
    if (inserted) entries_.push_back({email_ref, lv});
    else entries_[it->second].second = lv;
    return lv;
  }

  std::vector<LabeledVector> labeled_vectors() const {
    std::lock_guard lock(mu_);
    std::vector<LabeledVector> out;
    for (const auto& e : entries_) out.push_back(e.second);
    return out;
  }

  std::optional<LabeledVector> find(const std::string& email_ref) const {
    std::lock_guard lock(mu_);
    auto it = index_.find(email_ref);
    if (it == index_.end()) return std::nullopt;
    return entries_[it->second].second;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

  std::size_t count(LabelSource source) const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(),
                                                  [&](const auto& e) { return e.second.source == source; }));
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::pair<std::string, LabeledVector>> entries_;
};

struct MetricPoint {
  std::int64_t timestamp = 0;  // day index
  std::optional<PrecisionEstimate> precision;
  double conviction_rate = 0.0;
  std::size_t processed = 0;
  std::size_t convictions = 0;
  std::size_t fp_feedback_count = 0;
  std::size_t fn_feedback_count = 0;
};

}  // namespace bec::efficacy

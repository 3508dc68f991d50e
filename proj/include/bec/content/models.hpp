#pragma once

// Segment classifier (multi-label) and the cheap prefilter that gates it.
//
// The reference classifier is a per-label logistic model over hashed word
// uni/bi-grams. The prefilter is a smaller unigram model trained on labels
// produced by the classifier (student-teacher).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "bec/content/features.hpp"
#include "bec/ingest/email.hpp"
#include "bec/util/text.hpp"
#include "bec/util/utf8.hpp"

namespace bec::content {

enum class Label : std::size_t { call_to_action = 0, urgency = 1, credential_request = 2 };
inline constexpr std::size_t kLabelCount = 3;
inline constexpr std::array<std::string_view, kLabelCount> kLabelNames = {"call_to_action", "urgency",
                                                                           "credential_request"};

struct SegmentLabels {
  double call_to_action = 0.0;
  double urgency = 0.0;
  double credential_request = 0.0;

  double operator[](std::size_t i) const {
    return i == 0 ? call_to_action : i == 1 ? urgency : credential_request;
  }
  double& operator[](std::size_t i) { return i == 0 ? call_to_action : i == 1 ? urgency : credential_request; }
};

enum class Provenance { manual, teacher, external_labeler };

struct LabeledSegment {
  std::string text;
  std::array<bool, kLabelCount> labels{};
  Provenance provenance = Provenance::manual;
};

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One logistic head: sigmoid(bias + sum of active weights).
struct LinearHead {
  std::vector<double> weights;
  double bias = 0.0;

  double logit(const SparseFeatures& f) const {
    double z = bias;
    for (auto i : f.indices) z += weights[i];
    return z;
  }
  double score(const SparseFeatures& f) const { return sigmoid(logit(f)); }

  bool any_active(const SparseFeatures& f) const {
    for (auto i : f.indices) {
      if (weights[i] != 0.0) return true;
    }
    return false;
  }
};

struct TrainConfig {
  std::uint64_t seed = 7;
  int epochs = 40;
  double learning_rate = 0.5;  // AdaGrad base rate
  double l2 = 1e-4;
  double positive_weight = 1.0;
};

struct HeadTrainResult {
  LinearHead head;
  bool degenerate = false;
};

/// AdaGrad SGD on the L2-regularized cross-entropy. Deterministic for a seed.
/// A label that is all-positive or all-negative yields a constant head at the
/// smoothed prior.
inline HeadTrainResult train_head(const std::vector<SparseFeatures>& x, const std::vector<bool>& y,
                                  std::uint32_t buckets, const TrainConfig& config) {
  HeadTrainResult result;
  result.head.weights.assign(buckets, 0.0);
  std::size_t positives = 0;
  for (bool v : y) positives += v;
  if (positives == 0 || positives == y.size()) {
    double prior = (static_cast<double>(positives) + 0.5) / (static_cast<double>(y.size()) + 1.0);
    result.head.bias = std::log(prior / (1.0 - prior));
    result.degenerate = true;
    return result;
  }
  std::vector<double> grad_sq(buckets, 0.0);
  double bias_sq = 0.0;
  std::vector<std::size_t> order(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(config.seed);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with explicit modulo so the sequence is library-independent
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    for (std::size_t idx : order) {
      const auto& f = x[idx];
      double p = result.head.score(f);
      double g = p - (y[idx] ? 1.0 : 0.0);
      if (y[idx]) g *= config.positive_weight;
      bias_sq += g * g;
      result.head.bias -= config.learning_rate * g / (std::sqrt(bias_sq) + 1e-8);
      for (auto i : f.indices) {
        double gi = g + config.l2 * result.head.weights[i];
        grad_sq[i] += gi * gi;
        result.head.weights[i] -= config.learning_rate * gi / (std::sqrt(grad_sq[i]) + 1e-8);
      }
    }
  }
  return result;
}

inline void write_head(std::ostream& out, std::string_view name, const LinearHead& head) {
  out << "head\t" << name << "\t" << format_double(head.bias) << "\n";
  for (std::size_t i = 0; i < head.weights.size(); ++i) {
    if (head.weights[i] != 0.0) out << "w\t" << i << "\t" << format_double(head.weights[i]) << "\n";
  }
}

namespace detail {

struct ModelReader {
  explicit ModelReader(std::istream& stream) : in(stream) {}

  std::istream& in;
  std::string line;
  std::size_t line_no = 0;
  bool pushed_back = false;

  bool next() {
    if (pushed_back) {
      pushed_back = false;
      return true;
    }
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty() && line[0] != '#') return true;
    }
    return false;
  }
  [[noreturn]] void fail(std::string_view what) const {
    throw std::runtime_error("model file line " + std::to_string(line_no) + ": " + std::string(what));
  }
  std::vector<std::string_view> fields() const { return text::split(line, '\t'); }
  std::string expect(std::string_view key) {
    if (!next()) fail("unexpected end of file, wanted " + std::string(key));
    auto f = fields();
    if (f.size() != 2 || f[0] != key) fail("expected '" + std::string(key) + "'");
    return std::string(f[1]);
  }
};

inline LinearHead read_head(ModelReader& r, std::string_view name, std::uint32_t buckets) {
  if (!r.next()) r.fail("missing head " + std::string(name));
  auto f = r.fields();
  if (f.size() != 3 || f[0] != "head" || f[1] != name) r.fail("expected head " + std::string(name));
  LinearHead head;
  head.weights.assign(buckets, 0.0);
  auto bias = text::parse_double(f[2]);
  if (!bias) r.fail("bad bias");
  head.bias = *bias;
  while (r.next()) {
    auto w = r.fields();
    if (w[0] != "w") {
      r.pushed_back = true;
      break;
    }
    if (w.size() != 3) r.fail("bad weight line");
    auto idx = text::parse_number<std::uint32_t>(w[1]);
    auto val = text::parse_double(w[2]);
    if (!idx || !val || *idx >= buckets) r.fail("bad weight line");
    head.weights[*idx] = *val;
  }
  return head;
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct SegmentClassifierModel {
  std::string version = "0";
  std::string manifest_version = "1";
  std::uint32_t buckets = kClassifierBuckets;
  std::array<LinearHead, kLabelCount> heads;

  SparseFeatures features(std::string_view s) const { return featurize(s, buckets, true); }

  void save(std::ostream& out) const {
    out << "# bec segment classifier\n";
    out << "format\tsegment-classifier-v1\n";
    out << "version\t" << version << "\n";
    out << "manifest_version\t" << manifest_version << "\n";
    out << "buckets\t" << buckets << "\n";
    for (std::size_t i = 0; i < kLabelCount; ++i) write_head(out, kLabelNames[i], heads[i]);
  }

  std::string serialize() const {
    std::ostringstream ss;
    save(ss);
    return ss.str();
  }

  static SegmentClassifierModel load(std::istream& in) {
    detail::ModelReader r{in};
    if (r.expect("format") != "segment-classifier-v1") r.fail("not a segment classifier model");
    SegmentClassifierModel m;
    m.version = r.expect("version");
    m.manifest_version = r.expect("manifest_version");
    auto b = text::parse_number<std::uint32_t>(r.expect("buckets"));
    if (!b || *b == 0) r.fail("bad bucket count");
    m.buckets = *b;
    for (std::size_t i = 0; i < kLabelCount; ++i) m.heads[i] = detail::read_head(r, kLabelNames[i], m.buckets);
    return m;
  }

  static SegmentClassifierModel load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open segment classifier model " + path);
    return load(in);
  }
};

/// Scores all labels. Text without tokens scores zero everywhere.
inline SegmentLabels classify_segment(std::string_view segment_text, const SegmentClassifierModel& model) {
  SegmentLabels out;
  auto f = model.features(segment_text);
  if (f.empty()) return out;
  for (std::size_t i = 0; i < kLabelCount; ++i) out[i] = model.heads[i].score(f);
  return out;
}

inline SegmentLabels classify_segment(const Segment& segment, const SegmentClassifierModel& model) {
  return classify_segment(segment.text, model);
}

struct ClassifierTrainReport {
  std::vector<std::string> warnings;
  std::array<bool, kLabelCount> degenerate{};
};

inline SegmentClassifierModel train_segment_classifier(const std::vector<LabeledSegment>& data,
                                                       const TrainConfig& config = {},
                                                       ClassifierTrainReport* report = nullptr) {
  if (data.empty()) throw std::invalid_argument("train_segment_classifier: no training data");
  SegmentClassifierModel model;
  std::vector<SparseFeatures> x;
  x.reserve(data.size());
  for (const auto& s : data) x.push_back(model.features(s.text));
  for (std::size_t label = 0; label < kLabelCount; ++label) {
    std::vector<bool> y;
    y.reserve(data.size());
    for (const auto& s : data) y.push_back(s.labels[label]);
    TrainConfig c = config;
    c.seed = config.seed + label;
    auto result = train_head(x, y, model.buckets, c);
    model.heads[label] = std::move(result.head);
    if (result.degenerate && report) {
      report->degenerate[label] = true;
      report->warnings.push_back("label " + std::string(kLabelNames[label]) +
                                 " has only one class; head set to the constant prior");
    }
  }
  return model;
}

struct LabelMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
  double f1() const {
    double p = precision(), r = recall();
    return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
  }
  double accuracy() const {
    std::size_t n = tp + fp + fn + tn;
    return n == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(n);
  }
};

inline std::array<LabelMetrics, kLabelCount> evaluate_classifier(const SegmentClassifierModel& model,
                                                                 const std::vector<LabeledSegment>& data,
                                                                 const std::array<double, kLabelCount>& thresholds = {0.5, 0.5, 0.5}) {
  std::array<LabelMetrics, kLabelCount> m{};
  for (const auto& s : data) {
    auto scores = classify_segment(s.text, model);
    for (std::size_t i = 0; i < kLabelCount; ++i) {
      bool pred = scores[i] >= thresholds[i];
      bool truth = s.labels[i];
      if (pred && truth) ++m[i].tp;
      else if (pred) ++m[i].fp;
      else if (truth) ++m[i].fn;
      else ++m[i].tn;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------

struct PrefilterModel {
  std::string version = "0";
  std::string manifest_version = "1";
  std::uint32_t buckets = kPrefilterBuckets;
  LinearHead head;
  double keep_threshold = 0.0;

  SparseFeatures features(std::string_view s) const { return featurize(s, buckets, false); }

  void save(std::ostream& out) const {
    out << "# bec segment prefilter\n";
    out << "format\tprefilter-v1\n";
    out << "version\t" << version << "\n";
    out << "manifest_version\t" << manifest_version << "\n";
    out << "buckets\t" << buckets << "\n";
    out << "keep_threshold\t" << format_double(keep_threshold) << "\n";
    write_head(out, "keep", head);
  }

  std::string serialize() const {
    std::ostringstream ss;
    save(ss);
    return ss.str();
  }

  static PrefilterModel load(std::istream& in) {
    detail::ModelReader r{in};
    if (r.expect("format") != "prefilter-v1") r.fail("not a prefilter model");
    PrefilterModel m;
    m.version = r.expect("version");
    m.manifest_version = r.expect("manifest_version");
    auto b = text::parse_number<std::uint32_t>(r.expect("buckets"));
    if (!b || *b == 0) r.fail("bad bucket count");
    m.buckets = *b;
    auto t = text::parse_double(r.expect("keep_threshold"));
    if (!t) r.fail("bad keep_threshold");
    m.keep_threshold = *t;
    m.head = detail::read_head(r, "keep", m.buckets);
    return m;
  }

  static PrefilterModel load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open prefilter model " + path);
    return load(in);
  }
};

/// Keep/drop decision. Segments that activate no learned feature are dropped.
inline bool prefilter(std::string_view segment_text, const PrefilterModel& model) {
  auto f = model.features(segment_text);
  if (!model.head.any_active(f)) return false;
  return model.head.score(f) >= model.keep_threshold;
}

inline bool prefilter(const Segment& segment, const PrefilterModel& model) { return prefilter(segment.text, model); }

struct PrefilterTrainConfig {
  TrainConfig train{.seed = 11, .epochs = 30, .learning_rate = 0.5, .l2 = 1e-4, .positive_weight = 2.0};
  std::array<double, kLabelCount> teacher_thresholds{0.5, 0.5, 0.5};
  std::uint32_t holdout_modulus = 5;  // every 5th segment (by hash) is held out
};

struct PrefilterTrainReport {
  std::vector<std::string> warnings;
  std::size_t train_size = 0;
  std::size_t holdout_size = 0;
  std::size_t holdout_teacher_positives = 0;
  double holdout_recall = 0.0;
  double holdout_drop_rate = 0.0;
  double corpus_drop_rate = 0.0;
};

inline bool is_holdout(std::string_view segment_text, std::uint64_t seed, std::uint32_t modulus) {
  return fnv1a(segment_text, fnv1a(std::to_string(seed))) % modulus == 0;
}

/// Student-teacher training: the teacher labels the corpus, a unigram student
/// learns those labels, and the keep threshold is the largest value that
/// keeps at least `target_recall` of the teacher positives in the held-out split.
inline PrefilterModel train_prefilter(const SegmentClassifierModel& teacher, const std::vector<std::string>& unlabeled,
                                      double target_recall, const PrefilterTrainConfig& config = {},
                                      PrefilterTrainReport* report = nullptr) {
  if (unlabeled.empty()) throw std::invalid_argument("train_prefilter: unlabeled corpus is empty");
  PrefilterTrainReport local;
  PrefilterTrainReport& rep = report ? *report : local;
  PrefilterModel model;
  model.manifest_version = teacher.manifest_version;

  auto teacher_positive = [&](const std::string& s) {
    auto scores = classify_segment(s, teacher);
    for (std::size_t i = 0; i < kLabelCount; ++i) {
      if (scores[i] >= config.teacher_thresholds[i]) return true;
    }
    return false;
  };

  std::vector<SparseFeatures> train_x;
  std::vector<bool> train_y;
  std::vector<std::size_t> holdout;
  std::vector<bool> labels(unlabeled.size());
  for (std::size_t i = 0; i < unlabeled.size(); ++i) {
    labels[i] = teacher_positive(unlabeled[i]);
    if (is_holdout(unlabeled[i], config.train.seed, config.holdout_modulus)) {
      holdout.push_back(i);
    } else {
      train_x.push_back(model.features(unlabeled[i]));
      train_y.push_back(labels[i]);
    }
  }
  rep.train_size = train_x.size();
  rep.holdout_size = holdout.size();
  if (!train_x.empty()) {
    auto result = train_head(train_x, train_y, model.buckets, config.train);
    model.head = std::move(result.head);
    if (result.degenerate) rep.warnings.push_back("teacher labels have a single class; student is constant");
  } else {
    model.head.weights.assign(model.buckets, 0.0);
  }

  std::vector<double> positive_scores;
  for (std::size_t i : holdout) {
    if (!labels[i]) continue;
    auto f = model.features(unlabeled[i]);
    // a segment with no learned features is always dropped, so it scores -inf
    positive_scores.push_back(model.head.any_active(f) ? model.head.score(f) : -1.0);
  }
  rep.holdout_teacher_positives = positive_scores.size();
  bool reachable = target_recall > 0.0 && target_recall <= 1.0 && !positive_scores.empty();
  if (reachable) {
    std::sort(positive_scores.begin(), positive_scores.end(), std::greater<>());
    auto needed = static_cast<std::size_t>(std::ceil(target_recall * static_cast<double>(positive_scores.size()) - 1e-9));
    needed = std::clamp<std::size_t>(needed, 1, positive_scores.size());
    double t = positive_scores[needed - 1];
    if (t < 0.0) reachable = false;
    else model.keep_threshold = t;
  }
  if (!reachable) {
    model.keep_threshold = 0.0;
    rep.warnings.push_back("target recall unreachable on the held-out split; threshold set to 0");
  }

  std::size_t kept_pos = 0, kept_holdout = 0;
  for (std::size_t i : holdout) {
    bool keep = prefilter(unlabeled[i], model);
    kept_holdout += keep;
    if (labels[i] && keep) ++kept_pos;
  }
  rep.holdout_recall = rep.holdout_teacher_positives == 0
                           ? 1.0
                           : static_cast<double>(kept_pos) / static_cast<double>(rep.holdout_teacher_positives);
  rep.holdout_drop_rate = holdout.empty() ? 0.0 : 1.0 - static_cast<double>(kept_holdout) / static_cast<double>(holdout.size());
  std::size_t kept_all = 0;
  for (const auto& s : unlabeled) kept_all += prefilter(s, model);
  rep.corpus_drop_rate = 1.0 - static_cast<double>(kept_all) / static_cast<double>(unlabeled.size());
  return model;
}

// ---------------------------------------------------------------------------
// Labeled-segment files: "text<TAB>cta:0|1<TAB>urg:0|1<TAB>cred:0|1", UTF-8.

struct LabeledImport {
  std::vector<LabeledSegment> segments;
  std::size_t malformed = 0;
  std::size_t duplicates = 0;
};

inline std::optional<LabeledSegment> parse_labeled_line(std::string_view line, Provenance provenance) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  auto f = text::split(line, '\t');
  if (f.size() != 4) return std::nullopt;
  LabeledSegment s;
  s.text = std::string(text::trim(f[0]));
  if (s.text.empty() || !utf8::is_valid(s.text)) return std::nullopt;
  static constexpr std::string_view kKeys[] = {"cta:", "urg:", "cred:"};
  for (std::size_t i = 0; i < kLabelCount; ++i) {
    std::string_view v = text::trim(f[i + 1]);
    if (!v.starts_with(kKeys[i]) || v.size() != kKeys[i].size() + 1) return std::nullopt;
    char c = v.back();
    if (c != '0' && c != '1') return std::nullopt;
    s.labels[i] = c == '1';
  }
  s.provenance = provenance;
  return s;
}

inline LabeledImport read_labeled_segments(std::istream& in, Provenance provenance) {
  LabeledImport out;
  std::unordered_set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty() || line[0] == '#') continue;
    auto s = parse_labeled_line(line, provenance);
    if (!s) {
      ++out.malformed;
      continue;
    }
    if (!seen.insert(s->text).second) {
      ++out.duplicates;
      continue;
    }
    out.segments.push_back(std::move(*s));
  }
  return out;
}

/// Offline labels produced by an external labeler (e.g. a generative model run
/// elsewhere). Reads a local file only.
inline LabeledImport import_external_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open external label file " + path);
  return read_labeled_segments(in, Provenance::external_labeler);
}

inline std::string format_labeled_line(const LabeledSegment& s) {
  return s.text + "\tcta:" + (s.labels[0] ? "1" : "0") + "\turg:" + (s.labels[1] ? "1" : "0") +
         "\tcred:" + (s.labels[2] ? "1" : "0");
}

}  // namespace bec::content

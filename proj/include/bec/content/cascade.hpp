#pragma once

// Content detectors: prefilter -> segment classifier -> per-label max over
// kept segments.

#include <array>
#include <atomic>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bec/content/models.hpp"
#include "bec/detectors/detection.hpp"
#include "bec/ingest/email.hpp"

namespace bec::content {

struct CascadeCounters {
  std::atomic<std::uint64_t> segments_seen{0};
  std::atomic<std::uint64_t> prefilter_calls{0};
  std::atomic<std::uint64_t> classifier_calls{0};

  void reset() {
    segments_seen = 0;
    prefilter_calls = 0;
    classifier_calls = 0;
  }
};

struct CascadeConfig {
  std::array<double, kLabelCount> thresholds{0.5, 0.5, 0.5};
  std::array<TypeId, kLabelCount> type_ids{5, 6, 7};
};

/// Sentence segments are the classification unit; the subject counts as one.
inline std::vector<const Segment*> content_segments(const ParsedEmail& email) {
  std::vector<const Segment*> out;
  for (const auto& s : email.segments) {
    if (s.kind == SegmentKind::sentence) out.push_back(&s);
  }
  return out;
}

inline std::vector<Detection> run_content_detectors(const ParsedEmail& email, const PrefilterModel& prefilter_model,
                                                    const SegmentClassifierModel& classifier_model,
                                                    const CascadeConfig& config = {},
                                                    CascadeCounters* counters = nullptr) {
  struct Best {
    double score = -1.0;
    const Segment* segment = nullptr;
  };
  std::array<Best, kLabelCount> best{};
  std::size_t kept = 0;
  for (const Segment* seg : content_segments(email)) {
    if (counters) {
      ++counters->segments_seen;
      ++counters->prefilter_calls;
    }
    if (!prefilter(seg->text, prefilter_model)) continue;
    ++kept;
    if (counters) ++counters->classifier_calls;
    SegmentLabels labels = classify_segment(seg->text, classifier_model);
    for (std::size_t i = 0; i < kLabelCount; ++i) {
      if (labels[i] > best[i].score) best[i] = {labels[i], seg};
    }
  }
  std::vector<Detection> out;
  for (std::size_t i = 0; i < kLabelCount; ++i) {
    if (!best[i].segment || best[i].score < config.thresholds[i] || best[i].score <= 0.0) continue;
    Detection d{config.type_ids[i], best[i].score, {}};
    d.metadata["segment"] = best[i].segment->text;
    d.metadata["segment_origin"] = std::string(to_string(best[i].segment->origin));
    d.metadata["char_range"] =
        std::to_string(best[i].segment->char_range.start) + "-" + std::to_string(best[i].segment->char_range.end);
    d.metadata["kept_segments"] = std::to_string(kept);
    out.push_back(std::move(d));
  }
  return out;
}

/// Immutable model pair shared by concurrent requests.
struct ContentModels {
  PrefilterModel prefilter;
  SegmentClassifierModel classifier;

  static std::shared_ptr<const ContentModels> load(const std::string& prefilter_path,
                                                   const std::string& classifier_path) {
    auto m = std::make_shared<ContentModels>();
    m->prefilter = PrefilterModel::load_file(prefilter_path);
    m->classifier = SegmentClassifierModel::load_file(classifier_path);
    return m;
  }
};

}  // namespace bec::content

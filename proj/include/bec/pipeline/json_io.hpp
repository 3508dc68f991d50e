#pragma once

// JSON views of pipeline results, shared by the CLI and the HTTP service.

#include <string>
#include <vector>

#include "bec/classifier/logistic.hpp"
#include "bec/efficacy/efficacy.hpp"
#include "bec/pipeline/pipeline.hpp"
#include "json.hpp"

namespace bec::pipeline {

using nlohmann::json;

inline json metadata_json(const Metadata& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

/// The classify response. Detections are listed iff their score is nonzero.
inline json classify_response(const ClassifyResult& r, const RegistryManifest& manifest) {
  json detections = json::array();
  for (const auto& c : r.verdict.contributing) {
    detections.push_back({{"type_id", c.type_id},
                          {"type", manifest.name_of(c.type_id)},
                          {"score", c.score},
                          {"weight", c.weight},
                          {"metadata", metadata_json(c.metadata)}});
  }
  json failures = json::array();
  for (const auto& f : r.detections.failures) failures.push_back({{"detector", f.detector}, {"error", f.message}});
  json j = {{"source_id", r.email.source_id},
            {"label", r.verdict.label},
            {"verdict", r.verdict.label == 1 ? "bec" : "benign"},
            {"probability", r.verdict.probability},
            {"detections", detections},
            {"short_circuited", r.detections.short_circuited},
            {"processing_time_ms", r.processing_time_ms},
            {"over_budget", r.over_budget},
            {"model_version", r.verdict.model_version},
            {"day", r.day},
            {"degraded_detectors", failures},
            {"parse_warnings", r.email.parse_warnings}};
  return j;
}

inline json model_json(const classifier::ClassifierModel& m) {
  json weights = json::array();
  for (std::size_t i = 0; i < m.w.size(); ++i) {
    weights.push_back({{"type_id", i}, {"name", m.name_of(i)}, {"weight", m.w[i]}});
  }
  return {{"version", m.version}, {"manifest_version", m.manifest_version}, {"threshold", m.t}, {"weights", weights}};
}

inline json diff_json(const std::vector<classifier::WeightDelta>& diff) {
  json rows = json::array();
  for (const auto& d : diff) {
    rows.push_back({{"type_id", d.type_id}, {"name", d.name}, {"before", d.before}, {"after", d.after}, {"delta", d.delta}});
  }
  return rows;
}

inline json impact_json(const efficacy::ImpactReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"type_id", r.type_id},
                    {"name", r.name},
                    {"occurrences", r.occurrences},
                    {"relative_impact", r.relative_impact},
                    {"mean_shapley", r.mean_shapley}});
  }
  return {{"convicted", report.convicted}, {"rows", rows}};
}

inline json precision_json(const efficacy::PrecisionEstimate& p) {
  return {{"tp", p.tp}, {"fp", p.fp}, {"estimate", p.estimate}, {"lower", p.lower}, {"upper", p.upper}};
}

inline json metric_json(const efficacy::MetricPoint& m) {
  json j = {{"timestamp", m.timestamp},
            {"processed", m.processed},
            {"convictions", m.convictions},
            {"conviction_rate", m.conviction_rate},
            {"fp_feedback_count", m.fp_feedback_count},
            {"fn_feedback_count", m.fn_feedback_count},
            {"precision", nullptr}};
  if (m.precision) j["precision"] = precision_json(*m.precision);
  return j;
}

}  // namespace bec::pipeline

#pragma once

// Pipeline configuration: a flat "key = value" file. Relative paths resolve
// against the directory holding the config file.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "bec/content/cascade.hpp"
#include "bec/detectors/context.hpp"
#include "bec/detectors/heuristic.hpp"
#include "bec/mailgraph/mail_graph.hpp"
#include "bec/util/text.hpp"

namespace bec::pipeline {

struct PipelineConfig {
  std::string manifest_path = "data/manifest.txt";
  std::string model_path = "data/model.txt";
  std::string prefilter_path = "data/models/prefilter.txt";
  std::string segment_model_path = "data/models/segment_classifier.txt";
  std::string model_cards_dir = "docs/model-cards";
  std::string data_dir = "workspace";

  mailgraph::Config graph;
  ContextDetectorConfig context;
  HeuristicConfig heuristic;
  content::CascadeConfig cascade;

  std::optional<double> threshold;  // overrides the model file's t when set
  double sigma_default = 1.0;
  double new_detector_sigma = 10.0;
  double latency_budget_ms = 5000.0;

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string api_token;  // empty = unauthenticated
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  auto d = text::parse_double(v);
  if (!d) throw std::runtime_error("config: '" + key + "' expects a number, got '" + v + "'");
  return *d;
}

inline int to_int(const std::string& key, const std::string& v) {
  auto d = text::parse_number<int>(v);
  if (!d) throw std::runtime_error("config: '" + key + "' expects an integer, got '" + v + "'");
  return *d;
}

}  // namespace detail

inline void apply_setting(PipelineConfig& c, const std::string& key, const std::string& value) {
  using detail::to_double;
  using detail::to_int;
  if (key == "registry.manifest") c.manifest_path = value;
  else if (key == "classifier.model") c.model_path = value;
  else if (key == "content.prefilter_model") c.prefilter_path = value;
  else if (key == "content.segment_model") c.segment_model_path = value;
  else if (key == "registry.model_cards") c.model_cards_dir = value;
  else if (key == "data_dir") c.data_dir = value;
  else if (key == "mailgraph.window_days") c.graph.window_days = to_int(key, value);
  else if (key == "mailgraph.batch_interval_ms") c.graph.batch_interval_ms = to_int(key, value);
  else if (key == "mailgraph.saturation_days") c.graph.saturation_days = to_int(key, value);
  else if (key == "mailgraph.saturation_count") c.graph.saturation_count = to_int(key, value);
  else if (key == "detectors.rarity_threshold") c.context.rarity_threshold = to_double(key, value);
  else if (key == "detectors.gate_threshold") c.context.gate_threshold = to_double(key, value);
  else if (key == "detectors.zero_width_threshold") c.heuristic.zero_width_threshold = static_cast<std::size_t>(to_int(key, value));
  else if (key == "content.threshold.call_to_action") c.cascade.thresholds[0] = to_double(key, value);
  else if (key == "content.threshold.urgency") c.cascade.thresholds[1] = to_double(key, value);
  else if (key == "content.threshold.credential_request") c.cascade.thresholds[2] = to_double(key, value);
  else if (key == "classifier.threshold") c.threshold = to_double(key, value);
  else if (key == "classifier.sigma_default") c.sigma_default = to_double(key, value);
  else if (key == "classifier.new_detector_sigma") c.new_detector_sigma = to_double(key, value);
  else if (key == "service.latency_budget_ms") c.latency_budget_ms = to_double(key, value);
  else if (key == "service.host") c.host = value;
  else if (key == "service.port") c.port = to_int(key, value);
  else if (key == "service.api_token") c.api_token = value;
  else throw std::runtime_error("config: unknown key '" + key + "'");
  c.context.graph = c.graph;
}

inline void validate(const PipelineConfig& c) {
  if (c.graph.window_days <= 0) throw std::runtime_error("config: mailgraph.window_days must be positive");
  if (c.graph.batch_interval_ms <= 0) throw std::runtime_error("config: mailgraph.batch_interval_ms must be positive");
  if (c.threshold && !(*c.threshold > 0.0 && *c.threshold < 1.0)) {
    throw std::runtime_error("config: classifier.threshold must lie in (0, 1)");
  }
  if (!(c.sigma_default > 0.0) || !(c.new_detector_sigma > 0.0)) {
    throw std::runtime_error("config: sigma values must be positive");
  }
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  PipelineConfig c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view l = text::trim(line);
    if (l.empty() || l[0] == '#') continue;
    auto eq = l.find('=');
    if (eq == std::string_view::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key(text::trim(l.substr(0, eq)));
    std::string value(text::trim(l.substr(eq + 1)));
    apply_setting(c, key, value);
  }
  // resolve relative paths against the config file's directory
  auto base = std::filesystem::path(path).parent_path();
  for (std::string* p : {&c.manifest_path, &c.model_path, &c.prefilter_path, &c.segment_model_path,
                         &c.model_cards_dir, &c.data_dir}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
  validate(c);
  return c;
}

/// Checks that every referenced file exists.
inline void check_files(const PipelineConfig& c) {
  for (const std::string* p : {&c.manifest_path, &c.model_path, &c.prefilter_path, &c.segment_model_path}) {
    if (!std::filesystem::exists(*p)) throw std::runtime_error("missing file: " + *p);
  }
  if (!std::filesystem::is_directory(c.model_cards_dir)) {
    throw std::runtime_error("missing model card directory: " + c.model_cards_dir);
  }
}

}  // namespace bec::pipeline

#pragma once

// The classification pipeline f = h . g: parse, look up the sender context,
// run the detection layer, then the classifier.

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "bec/classifier/logistic.hpp"
#include "bec/content/cascade.hpp"
#include "bec/detectors/context.hpp"
#include "bec/detectors/engine.hpp"
#include "bec/detectors/heuristic.hpp"
#include "bec/ingest/email.hpp"
#include "bec/mailgraph/mail_graph.hpp"
#include "bec/pipeline/config.hpp"

namespace bec::pipeline {

inline constexpr std::string_view kContentUnit = "content_cascade";

namespace detail {

inline std::vector<Detection> single(std::optional<Detection> d) {
  std::vector<Detection> out;
  if (d) out.push_back(std::move(*d));
  return out;
}

}  // namespace detail

struct LayerOptions {
  ContextDetectorConfig context;
  HeuristicConfig heuristic;
  content::CascadeConfig cascade;
  // null disables the content cascade
  std::shared_ptr<const content::ContentModels> content_models;
  std::shared_ptr<content::CascadeCounters> content_counters;
};

/// Registers the built-in detectors that are present and enabled in the
/// manifest. Cheap units run first, in the order listed here.
inline DetectionLayer build_detection_layer(const RegistryManifest& manifest, LayerOptions options) {
  DetectionLayer layer(manifest.dimension());
  auto enabled = [&](std::string_view name) -> std::optional<TypeId> {
    auto id = manifest.find(name);
    if (!id || !manifest.at(*id).enabled) return std::nullopt;
    return id;
  };
  if (auto id = enabled(types::kFrequentCommunication)) {
    auto cfg = options.context;
    layer.add({std::string(types::kFrequentCommunication), DetectorKind::benign_gate, CostClass::cheap,
               cfg.gate_threshold, [=, id = *id](const ParsedEmail&, const mailgraph::ContextSnapshot& ctx) {
                 return detail::single(detect_frequent_communication(ctx, id, cfg));
               }});
  }
  if (auto id = enabled(types::kRareCommunication)) {
    auto cfg = options.context;
    layer.add({std::string(types::kRareCommunication), DetectorKind::malicious_signal, CostClass::cheap, 1.0,
               [=, id = *id](const ParsedEmail&, const mailgraph::ContextSnapshot& ctx) {
                 return detail::single(detect_rare_communication(ctx, id, cfg));
               }});
  }
  if (auto id = enabled(types::kAddressMasquerade)) {
    auto cfg = options.heuristic;
    layer.add({std::string(types::kAddressMasquerade), DetectorKind::malicious_signal, CostClass::cheap, 1.0,
               [=, id = *id](const ParsedEmail& e, const mailgraph::ContextSnapshot&) {
                 return detail::single(detect_address_masquerade(e, id, cfg));
               }});
  }
  if (auto id = enabled(types::kUnicodeMasquerade)) {
    layer.add({std::string(types::kUnicodeMasquerade), DetectorKind::malicious_signal, CostClass::cheap, 1.0,
               [id = *id](const ParsedEmail& e, const mailgraph::ContextSnapshot&) {
                 return detail::single(detect_unicode_masquerade(visible_text(e), id));
               }});
  }
  if (auto id = enabled(types::kZeroWidthAbuse)) {
    auto cfg = options.heuristic;
    layer.add({std::string(types::kZeroWidthAbuse), DetectorKind::malicious_signal, CostClass::cheap, 1.0,
               [=, id = *id](const ParsedEmail& e, const mailgraph::ContextSnapshot&) {
                 return detail::single(detect_zero_width_abuse(visible_text(e), id, cfg));
               }});
  }
  if (options.content_models) {
    auto cfg = options.cascade;
    const std::string_view names[] = {types::kCallToAction, types::kUrgency, types::kCredentialRequest};
    bool any = false;
    for (std::size_t i = 0; i < content::kLabelCount; ++i) {
      auto id = enabled(names[i]);
      // a disabled label keeps an out-of-range id so the cascade drops it
      cfg.type_ids[i] = id ? *id : manifest.dimension();
      if (id) any = true;
    }
    if (any) {
      auto models = options.content_models;
      auto counters = options.content_counters;
      const std::size_t m = manifest.dimension();
      layer.add({std::string(kContentUnit), DetectorKind::malicious_signal, CostClass::expensive, 1.0,
                 [=](const ParsedEmail& e, const mailgraph::ContextSnapshot&) {
                   auto found = content::run_content_detectors(e, models->prefilter, models->classifier, cfg,
                                                               counters.get());
                   std::erase_if(found, [m](const Detection& d) { return d.type_id >= m; });
                   return found;
                 }});
    }
  }
  return layer;
}

/// Day index used by the Mail Graph (days since the Unix epoch, UTC).
inline mailgraph::Day day_of(std::int64_t epoch_seconds) {
  return static_cast<mailgraph::Day>(epoch_seconds >= 0 ? epoch_seconds / 86400 : (epoch_seconds - 86399) / 86400);
}

struct ClassifyResult {
  ParsedEmail email;
  DetectionVector detections;
  classifier::Verdict verdict;
  mailgraph::Day day = 0;
  std::string recipient;  // the recipient whose context was used
  double processing_time_ms = 0.0;
  bool over_budget = false;
};

class Pipeline {
 public:
  Pipeline(RegistryManifest manifest, classifier::ClassifierModel model,
           std::shared_ptr<const content::ContentModels> content_models, PipelineConfig config = {})
      : config_(std::move(config)),
        manifest_(std::move(manifest)),
        graph_(config_.graph),
        counters_(std::make_shared<content::CascadeCounters>()),
        content_models_(std::move(content_models)),
        layer_(build_detection_layer(manifest_, {config_.context, config_.heuristic, config_.cascade,
                                                 content_models_, counters_})) {
    install_model(std::move(model));
  }

  static Pipeline from_config(const PipelineConfig& config) {
    check_files(config);
    auto manifest = RegistryManifest::load(config.manifest_path);
    manifest.load_model_cards(config.model_cards_dir);
    auto model = classifier::load_model_file(config.model_path);
    auto content_models = content::ContentModels::load(config.prefilter_path, config.segment_model_path);
    return Pipeline(std::move(manifest), std::move(model), std::move(content_models), config);
  }

  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  const PipelineConfig& config() const { return config_; }
  const RegistryManifest& manifest() const { return manifest_; }
  mailgraph::MailGraph& graph() { return graph_; }
  const mailgraph::MailGraph& graph() const { return graph_; }
  const DetectionLayer& layer() const { return layer_; }
  content::CascadeCounters& content_counters() { return *counters_; }

  std::shared_ptr<const classifier::ClassifierModel> model() const {
    std::lock_guard lock(model_mutex_);
    return model_;
  }

  /// Atomic versioned swap. Requests already holding the old pointer finish on it.
  void install_model(classifier::ClassifierModel model) {
    if (config_.threshold) model.t = *config_.threshold;
    model.validate();
    model.check_manifest(manifest_);
    auto p = std::make_shared<const classifier::ClassifierModel>(std::move(model));
    std::lock_guard lock(model_mutex_);
    model_ = std::move(p);
  }

  /// Day to use for an email: its Date header, else the graph's latest day.
  mailgraph::Day resolve_day(const ParsedEmail& email, std::optional<mailgraph::Day> fallback = std::nullopt) const {
    if (email.date_epoch) return day_of(*email.date_epoch);
    if (fallback) return *fallback;
    return graph_.latest_day().value_or(0);
  }

  /// Runs detection and classification. The context is taken for the first
  /// recipient; the graph is not modified.
  ClassifyResult classify(const ParsedEmail& email, std::optional<mailgraph::Day> day = std::nullopt) const {
    const auto start = std::chrono::steady_clock::now();
    auto model = this->model();
    ClassifyResult r;
    r.email = email;
    r.day = resolve_day(email, day);
    r.recipient = email.recipients.empty() ? std::string{} : email.recipients.front();
    auto ctx = graph_.get_context(email.from_address, r.recipient, mailgraph::org_of(r.recipient), r.day);
    r.detections = layer_.run(email, ctx);
    r.verdict = classifier::classify(r.detections, *model);
    r.processing_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    r.over_budget = r.processing_time_ms > config_.latency_budget_ms;
    return r;
  }

  ClassifyResult classify(const RawEmail& raw, std::optional<mailgraph::Day> day = std::nullopt) const {
    const auto start = std::chrono::steady_clock::now();
    ClassifyResult r = classify(parse_email(raw), day);
    r.processing_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    r.over_budget = r.processing_time_ms > config_.latency_budget_ms;
    return r;
  }

  /// Graph updates describing this email (one per recipient org).
  std::vector<mailgraph::GraphUpdate> graph_updates(const ParsedEmail& email, mailgraph::Day day) const {
    return mailgraph::updates_for_email(email.from_address, email.recipients, day);
  }

  void record(const ParsedEmail& email, std::optional<mailgraph::Day> day = std::nullopt) {
    auto updates = graph_updates(email, resolve_day(email, day));
    graph_.record_emails(updates);
  }

 private:
  PipelineConfig config_;
  RegistryManifest manifest_;
  mailgraph::MailGraph graph_;
  std::shared_ptr<content::CascadeCounters> counters_;
  std::shared_ptr<const content::ContentModels> content_models_;
  DetectionLayer layer_;
  mutable std::mutex model_mutex_;
  std::shared_ptr<const classifier::ClassifierModel> model_;
};

}  // namespace bec::pipeline

#pragma once

// The detection layer: runs registered detector units over a parsed email
// and its context and assembles the detection score vector.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "bec/detectors/detection.hpp"
#include "bec/ingest/email.hpp"
#include "bec/mailgraph/mail_graph.hpp"

namespace bec {

using DetectorFn = std::function<std::vector<Detection>(const ParsedEmail&, const mailgraph::ContextSnapshot&)>;

/// One executable detector. A unit may emit several detection types
/// (the content cascade emits three).
struct DetectorUnit {
  std::string name;
  DetectorKind kind = DetectorKind::malicious_signal;
  CostClass cost_class = CostClass::cheap;
  double gate_threshold = 1.0;  // only used by benign gates
  DetectorFn run;
};

class DetectionLayer {
 public:
  explicit DetectionLayer(std::size_t dimension) : dimension_(dimension) {}

  DetectionLayer(const DetectionLayer&) = delete;
  DetectionLayer& operator=(const DetectionLayer&) = delete;
  DetectionLayer(DetectionLayer&&) = default;
  DetectionLayer& operator=(DetectionLayer&&) = default;

  std::size_t dimension() const { return dimension_; }

  void add(DetectorUnit unit) {
    if (!unit.run) throw std::invalid_argument("detector unit '" + unit.name + "' has no run function");
    for (const auto& e : entries_) {
      if (e->unit.name == unit.name) throw std::invalid_argument("duplicate detector unit '" + unit.name + "'");
    }
    auto entry = std::make_unique<Entry>();
    entry->unit = std::move(unit);
    entries_.push_back(std::move(entry));
  }

  /// Execution order: registration order within cost class, cheap first.
  std::vector<std::string> execution_order() const {
    std::vector<std::string> names;
    for (const Entry* e : ordered()) names.push_back(e->unit.name);
    return names;
  }

  DetectionVector run(const ParsedEmail& email, const mailgraph::ContextSnapshot& ctx) const {
    DetectionVector out;
    out.d.assign(dimension_, 0.0);
    for (const Entry* e : ordered()) {
      e->invocations.fetch_add(1, std::memory_order_relaxed);
      std::vector<Detection> found;
      try {
        found = e->unit.run(email, ctx);
      } catch (const std::exception& ex) {
        out.failures.push_back({e->unit.name, ex.what()});
        continue;
      } catch (...) {
        out.failures.push_back({e->unit.name, "unknown error"});
        continue;
      }
      bool gate_fired = false;
      for (auto& det : found) {
        if (det.type_id >= dimension_ || !std::isfinite(det.score)) {
          out.failures.push_back({e->unit.name, "invalid detection (type " + std::to_string(det.type_id) + ")"});
          continue;
        }
        det.score = std::clamp(det.score, 0.0, 1.0);
        if (det.score == 0.0) continue;
        if (e->unit.kind == DetectorKind::benign_gate && det.score >= e->unit.gate_threshold) gate_fired = true;
        merge(out, std::move(det));
      }
      if (gate_fired) {
        out.short_circuited = true;
        break;
      }
    }
    return out;
  }

  std::uint64_t invocations(std::string_view unit_name) const {
    for (const auto& e : entries_) {
      if (e->unit.name == unit_name) return e->invocations.load();
    }
    throw std::out_of_range("no detector unit '" + std::string(unit_name) + "'");
  }

  void reset_counters() {
    for (auto& e : entries_) e->invocations.store(0);
  }

  const DetectorUnit& unit(std::string_view name) const {
    for (const auto& e : entries_) {
      if (e->unit.name == name) return e->unit;
    }
    throw std::out_of_range("no detector unit '" + std::string(name) + "'");
  }

  std::vector<std::string> unit_names() const {
    std::vector<std::string> names;
    for (const auto& e : entries_) names.push_back(e->unit.name);
    return names;
  }

 private:
  struct Entry {
    DetectorUnit unit;
    mutable std::atomic<std::uint64_t> invocations{0};
  };

  std::vector<const Entry*> ordered() const {
    std::vector<const Entry*> order;
    for (const auto& e : entries_) order.push_back(e.get());
    std::stable_partition(order.begin(), order.end(),
                          [](const Entry* e) { return e->unit.cost_class == CostClass::cheap; });
    return order;
  }

  // Keeps one backing detection per type: the highest score wins.
  static void merge(DetectionVector& out, Detection det) {
    double& slot = out.d[det.type_id];
    auto it = std::find_if(out.detections.begin(), out.detections.end(),
                           [&](const Detection& x) { return x.type_id == det.type_id; });
    if (it == out.detections.end()) {
      slot = det.score;
      out.detections.push_back(std::move(det));
      return;
    }
    if (det.score > it->score) {
      slot = det.score;
      *it = std::move(det);
    }
  }

  std::size_t dimension_;
  std::vector<std::unique_ptr<Entry>> entries_;
};

}  // namespace bec

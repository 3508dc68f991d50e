#pragma once

// Communication-frequency detectors over a Mail Graph context snapshot.

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>

#include "bec/detectors/detection.hpp"
#include "bec/mailgraph/mail_graph.hpp"

namespace bec {

struct ContextDetectorConfig {
  double rarity_threshold = 0.3;
  double gate_threshold = 0.8;
  mailgraph::Config graph;
};

namespace detail {

inline std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace detail

/// Fires when the sender is rare for the recipient (user scope below the
/// rarity threshold). Score is 1 - max(user, org) stability, so an org-level
/// relationship reduces it; metadata lists every scope that is rare.
inline std::optional<Detection> detect_rare_communication(const mailgraph::ContextSnapshot& ctx, TypeId type_id,
                                                          const ContextDetectorConfig& config = {}) {
  const double user = mailgraph::stability_score(ctx.user_edge, ctx.snapshot_day, config.graph);
  const double org = mailgraph::stability_score(ctx.org_edge, ctx.snapshot_day, config.graph);
  if (user >= config.rarity_threshold) return std::nullopt;
  const double score = 1.0 - std::max(user, org);
  if (score <= 0.0) return std::nullopt;
  Detection d{type_id, score, {}};
  d.metadata["rare_scopes"] = org < config.rarity_threshold ? "user,org" : "user";
  d.metadata["user_stability"] = detail::fixed(user);
  d.metadata["org_stability"] = detail::fixed(org);
  d.metadata["user_emails"] = std::to_string(ctx.user_edge.total_count);
  d.metadata["org_emails"] = std::to_string(ctx.org_edge.total_count);
  d.metadata["sender_emails"] = std::to_string(ctx.global_sender.total_count);
  return d;
}

/// Benign gate: fires when user-scope stability reaches the gate threshold.
inline std::optional<Detection> detect_frequent_communication(const mailgraph::ContextSnapshot& ctx, TypeId type_id,
                                                              const ContextDetectorConfig& config = {}) {
  const double user = mailgraph::stability_score(ctx.user_edge, ctx.snapshot_day, config.graph);
  if (user < config.gate_threshold || user <= 0.0) return std::nullopt;
  Detection d{type_id, user, {}};
  d.metadata["user_stability"] = detail::fixed(user);
  d.metadata["active_days"] = std::to_string(ctx.user_edge.distinct_active_days);
  d.metadata["user_emails"] = std::to_string(ctx.user_edge.total_count);
  return d;
}

}  // namespace bec

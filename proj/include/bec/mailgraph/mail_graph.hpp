#pragma once

// Sender/recipient communication statistics at user, org and global scope.
//
// Every GraphUpdate adds one email to the global sender edge and the
// sender->org edge, and one per recipient to the sender->recipient edges,
// which keeps user <= org <= global by construction. Counts are kept in
// day buckets and only the last `window_days` days are retained.

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <shared_mutex>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "bec/util/text.hpp"

namespace bec::mailgraph {

using Day = std::int64_t;

struct Config {
  int window_days = 30;
  int batch_interval_ms = 1000;
  double saturation_days = 5.0;    // D_sat
  double saturation_count = 10.0;  // C_sat
};

struct EdgeStats {
  std::map<Day, std::uint64_t> daily_counts;
  std::uint64_t total_count = 0;
  std::uint32_t distinct_active_days = 0;
  std::optional<Day> first_seen_day;
  std::optional<Day> last_seen_day;

  bool empty() const { return total_count == 0; }

  static EdgeStats from_buckets(std::map<Day, std::uint64_t> buckets) {
    EdgeStats s;
    for (auto it = buckets.begin(); it != buckets.end();) {
      it = it->second == 0 ? buckets.erase(it) : std::next(it);
    }
    s.daily_counts = std::move(buckets);
    for (const auto& [day, count] : s.daily_counts) {
      s.total_count += count;
      ++s.distinct_active_days;
    }
    if (!s.daily_counts.empty()) {
      s.first_seen_day = s.daily_counts.begin()->first;
      s.last_seen_day = s.daily_counts.rbegin()->first;
    }
    return s;
  }

  friend bool operator==(const EdgeStats&, const EdgeStats&) = default;
};

struct ContextSnapshot {
  EdgeStats user_edge;
  EdgeStats org_edge;
  EdgeStats global_sender;
  Day snapshot_day = 0;
};

struct GraphUpdate {
  std::string sender;
  std::vector<std::string> recipients;
  std::string recipient_org;
  Day day = 0;
};

struct UpdateSummary {
  std::size_t updates_applied = 0;
  std::size_t edges_touched = 0;
};

/// Lowercases and strips a "+tag" suffix from the local part.
inline std::string normalize_address(std::string_view address) {
  std::string a = text::to_lower(text::trim(address));
  auto at = a.rfind('@');
  if (at == std::string::npos) return a;
  auto plus = a.find('+');
  if (plus != std::string::npos && plus < at && plus > 0) a.erase(plus, at - plus);
  return a;
}

inline std::string org_of(std::string_view address) {
  std::string a = normalize_address(address);
  auto at = a.rfind('@');
  return at == std::string::npos ? std::string{} : a.substr(at + 1);
}

/// Keeps only buckets with day - window < bucket <= day.
inline EdgeStats window_as_of(const EdgeStats& stats, Day day, int window_days) {
  std::map<Day, std::uint64_t> kept;
  for (const auto& [d, c] : stats.daily_counts) {
    if (d <= day && day - d < window_days) kept.emplace(d, c);
  }
  return EdgeStats::from_buckets(std::move(kept));
}

/// min(1, active_days / D_sat) * min(1, total / C_sat) over the window ending at `day`.
inline double stability_score(const EdgeStats& stats, Day day, const Config& config = {}) {
  EdgeStats w = window_as_of(stats, day, config.window_days);
  if (w.total_count == 0) return 0.0;
  double days = std::min(1.0, static_cast<double>(w.distinct_active_days) / config.saturation_days);
  double count = std::min(1.0, static_cast<double>(w.total_count) / config.saturation_count);
  return days * count;
}

enum class Scope { user, org, global };

inline std::string_view to_string(Scope s) {
  switch (s) {
    case Scope::user: return "user";
    case Scope::org: return "org";
    case Scope::global: return "global";
  }
  return "?";
}

class MailGraph {
 public:
  explicit MailGraph(Config config = {}) : config_(config) {
    if (config_.window_days <= 0) throw std::invalid_argument("mailgraph.window_days must be positive");
  }

  MailGraph(const MailGraph& other) : config_(other.config_) {
    std::shared_lock lock(other.mutex_);
    edges_ = other.edges_;
    latest_day_ = other.latest_day_;
    sequence_ = other.sequence_;
  }

  const Config& config() const { return config_; }

  UpdateSummary record_emails(std::span<const GraphUpdate> batch) {
    UpdateSummary summary;
    if (batch.empty()) return summary;
    std::set<std::tuple<Scope, std::string, std::string>> touched;
    std::unique_lock lock(mutex_);
    for (const auto& u : batch) {
      if (u.recipients.empty()) continue;
      const std::string sender = normalize_address(u.sender);
      const std::string org = text::to_lower(u.recipient_org);
      bump({Scope::global, sender, ""}, u.day, 1, touched);
      bump({Scope::org, sender, org}, u.day, 1, touched);
      for (const auto& r : u.recipients) bump({Scope::user, sender, normalize_address(r)}, u.day, 1, touched);
      latest_day_ = latest_day_ ? std::max(*latest_day_, u.day) : u.day;
      ++summary.updates_applied;
      ++sequence_;
    }
    evict_locked();
    summary.edges_touched = touched.size();
    return summary;
  }

  UpdateSummary record_email(const GraphUpdate& update) { return record_emails(std::span(&update, 1)); }

  ContextSnapshot get_context(std::string_view sender, std::string_view recipient, std::string_view org,
                              Day day) const {
    const std::string s = normalize_address(sender);
    ContextSnapshot snap;
    snap.snapshot_day = day;
    std::shared_lock lock(mutex_);
    snap.user_edge = lookup({Scope::user, s, normalize_address(recipient)}, day);
    snap.org_edge = lookup({Scope::org, s, text::to_lower(org)}, day);
    snap.global_sender = lookup({Scope::global, s, ""}, day);
    return snap;
  }

  std::optional<Day> latest_day() const {
    std::shared_lock lock(mutex_);
    return latest_day_;
  }

  /// Number of updates applied since construction (or as restored from a snapshot).
  std::uint64_t sequence() const {
    std::shared_lock lock(mutex_);
    return sequence_;
  }

  std::size_t edge_count() const {
    std::shared_lock lock(mutex_);
    return edges_.size();
  }

  // Snapshot format, one record per line, tab separated:
  //   # bec mail-graph snapshot v1
  //   window_days <W>
  //   latest_day <day>          (omitted for an empty graph)
  //   sequence <n>
  //   edge <scope> <sender> <target> <day>:<count>[,<day>:<count>...]
  // target is the recipient (user), the org id (org) or "*" (global).
  void save_snapshot(std::ostream& out) const {
    std::shared_lock lock(mutex_);
    out << "# bec mail-graph snapshot v1\n";
    out << "window_days\t" << config_.window_days << "\n";
    if (latest_day_) out << "latest_day\t" << *latest_day_ << "\n";
    out << "sequence\t" << sequence_ << "\n";
    for (const auto& [key, buckets] : edges_) {
      out << "edge\t" << to_string(key.scope) << "\t" << key.sender << "\t"
          << (key.scope == Scope::global ? std::string("*") : key.target) << "\t";
      bool first = true;
      for (const auto& [d, c] : buckets) {
        if (!first) out << ",";
        first = false;
        out << d << ":" << c;
      }
      out << "\n";
    }
  }

  /// Replaces the graph contents with a snapshot. Throws std::runtime_error on malformed input.
  void load_snapshot(std::istream& in) {
    std::map<EdgeKey, std::map<Day, std::uint64_t>> edges;
    std::optional<Day> latest;
    std::uint64_t seq = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      auto f = text::split(line, '\t');
      auto fail = [&] { throw std::runtime_error("mail-graph snapshot line " + std::to_string(line_no) + " malformed"); };
      if (f[0] == "window_days") {
        continue;  // configuration wins over the stored value
      } else if (f[0] == "latest_day" && f.size() == 2) {
        auto v = text::parse_number<Day>(f[1]);
        if (!v) fail();
        latest = *v;
      } else if (f[0] == "sequence" && f.size() == 2) {
        auto v = text::parse_number<std::uint64_t>(f[1]);
        if (!v) fail();
        seq = *v;
      } else if (f[0] == "edge" && f.size() == 5) {
        EdgeKey key;
        if (f[1] == "user") key.scope = Scope::user;
        else if (f[1] == "org") key.scope = Scope::org;
        else if (f[1] == "global") key.scope = Scope::global;
        else fail();
        key.sender = std::string(f[2]);
        key.target = key.scope == Scope::global ? std::string{} : std::string(f[3]);
        auto& buckets = edges[key];
        if (!f[4].empty()) {
          for (auto item : text::split(f[4], ',')) {
            auto colon = item.find(':');
            if (colon == std::string_view::npos) fail();
            auto d = text::parse_number<Day>(item.substr(0, colon));
            auto c = text::parse_number<std::uint64_t>(item.substr(colon + 1));
            if (!d || !c) fail();
            buckets[*d] += *c;
          }
        }
      } else {
        fail();
      }
    }
    std::unique_lock lock(mutex_);
    edges_ = std::move(edges);
    latest_day_ = latest;
    sequence_ = seq;
    evict_locked();
  }

  friend bool operator==(const MailGraph& a, const MailGraph& b) {
    std::shared_lock la(a.mutex_);
    std::shared_lock lb(b.mutex_);
    return a.edges_ == b.edges_ && a.latest_day_ == b.latest_day_;
  }

 private:
  struct EdgeKey {
    Scope scope = Scope::global;
    std::string sender;
    std::string target;
    auto operator<=>(const EdgeKey&) const = default;
  };

  void bump(const EdgeKey& key, Day day, std::uint64_t n,
            std::set<std::tuple<Scope, std::string, std::string>>& touched) {
    edges_[key][day] += n;
    touched.emplace(key.scope, key.sender, key.target);
  }

  EdgeStats lookup(const EdgeKey& key, Day day) const {
    auto it = edges_.find(key);
    if (it == edges_.end()) return {};
    std::map<Day, std::uint64_t> kept;
    for (const auto& [d, c] : it->second) {
      if (d <= day && day - d < config_.window_days) kept.emplace(d, c);
    }
    return EdgeStats::from_buckets(std::move(kept));
  }

  // Drops buckets that can no longer fall inside any window ending at or after latest_day_.
  void evict_locked() {
    if (!latest_day_) return;
    const Day horizon = *latest_day_ - config_.window_days;
    for (auto it = edges_.begin(); it != edges_.end();) {
      auto& buckets = it->second;
      buckets.erase(buckets.begin(), buckets.upper_bound(horizon));
      it = buckets.empty() ? edges_.erase(it) : std::next(it);
    }
  }

  Config config_;
  mutable std::shared_mutex mutex_;
  std::map<EdgeKey, std::map<Day, std::uint64_t>> edges_;
  std::optional<Day> latest_day_;
  std::uint64_t sequence_ = 0;
};

// ---------------------------------------------------------------------------
// Append-only update log: "<day>\t<sender>\t<org>\t<recipient>[\t<recipient>...]"

inline std::string format_update_line(const GraphUpdate& u) {
  std::string line = std::to_string(u.day) + "\t" + u.sender + "\t" + u.recipient_org;
  for (const auto& r : u.recipients) line += "\t" + r;
  return line;
}

inline std::optional<GraphUpdate> parse_update_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  auto f = text::split(line, '\t');
  if (f.size() < 4) return std::nullopt;
  auto day = text::parse_number<Day>(f[0]);
  if (!day || f[1].empty()) return std::nullopt;
  GraphUpdate u;
  u.day = *day;
  u.sender = std::string(f[1]);
  u.recipient_org = std::string(f[2]);
  for (std::size_t i = 3; i < f.size(); ++i) {
    if (!f[i].empty()) u.recipients.emplace_back(f[i]);
  }
  if (u.recipients.empty()) return std::nullopt;
  return u;
}

/// Replays an update log into the graph; malformed lines are counted and skipped.
inline std::size_t replay_update_log(MailGraph& graph, std::istream& in, std::size_t* skipped = nullptr) {
  std::vector<GraphUpdate> batch;
  std::string line;
  std::size_t bad = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (auto u = parse_update_line(line)) batch.push_back(std::move(*u));
    else ++bad;
  }
  graph.record_emails(batch);
  if (skipped) *skipped = bad;
  return batch.size();
}

/// Groups an email's recipients by org so each group becomes one GraphUpdate.
inline std::vector<GraphUpdate> updates_for_email(std::string_view sender, const std::vector<std::string>& recipients,
                                                  Day day) {
  std::map<std::string, std::vector<std::string>> by_org;
  for (const auto& r : recipients) {
    std::string n = normalize_address(r);
    if (n.find('@') == std::string::npos) continue;
    auto& list = by_org[org_of(n)];
    if (std::find(list.begin(), list.end(), n) == list.end()) list.push_back(n);
  }
  std::vector<GraphUpdate> out;
  for (auto& [org, list] : by_org) out.push_back({normalize_address(sender), std::move(list), org, day});
  return out;
}

/// Single-writer queue: producers enqueue, a background thread applies
/// batches every batch_interval_ms. Readers of the graph may see data up to
/// one interval stale.
class BatchWriter {
 public:
  explicit BatchWriter(MailGraph& graph) : graph_(graph), worker_([this] { run(); }) {}
  BatchWriter(const BatchWriter&) = delete;
  BatchWriter& operator=(const BatchWriter&) = delete;
  ~BatchWriter() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    worker_.join();
  }

  void enqueue(GraphUpdate update) {
    std::lock_guard lock(mutex_);
    pending_.push_back(std::move(update));
  }

  /// Applies everything queued so far before returning.
  void flush() {
    std::vector<GraphUpdate> batch;
    {
      std::lock_guard lock(mutex_);
      batch.swap(pending_);
    }
    std::lock_guard apply(apply_mutex_);
    graph_.record_emails(batch);
  }

 private:
  void run() {
    std::unique_lock lock(mutex_);
    while (!stop_) {
      cv_.wait_for(lock, std::chrono::milliseconds(std::max(1, graph_.config().batch_interval_ms)));
      lock.unlock();
      flush();
      lock.lock();
    }
    lock.unlock();
    flush();
  }

  MailGraph& graph_;
  std::mutex mutex_;
  std::mutex apply_mutex_;
  std::condition_variable cv_;
  std::vector<GraphUpdate> pending_;
  bool stop_ = false;
  std::thread worker_;
};

}  // namespace bec::mailgraph

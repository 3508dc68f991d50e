#pragma once

// File-backed service state. Every mutation is appended to events.jsonl
// before it is applied, so replaying the log on startup rebuilds the same
// metrics, review queue, feedback store and Mail Graph. The graph also has a
// periodic snapshot; events before the snapshot's offset are not re-applied
// to the graph.
//
// Layout of the data directory:
//   events.jsonl            append-only event log
//   graph.snapshot          Mail Graph snapshot
//   graph.snapshot.offset   number of events the snapshot covers
//   models/model-<v>.txt    every classifier model ever installed

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "bec/efficacy/efficacy.hpp"
#include "bec/pipeline/json_io.hpp"
#include "bec/pipeline/pipeline.hpp"

namespace bec::service {

using nlohmann::json;

struct NotFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Conflict : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StoredClassification {
  std::string record_id;
  std::string email_ref;
  mailgraph::Day day = 0;
  std::vector<double> d;
  classifier::Verdict verdict;
  std::string subject;
  std::string from;
};

struct ModelUpdateResult {
  std::string previous_version;
  std::string version;
  std::vector<classifier::WeightDelta> diff;
  std::size_t training_size = 0;
};

inline std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Workspace {
 public:
  static constexpr std::size_t kDefaultReviewSample = 10;

  /// Opens (or creates) the workspace and replays its event log into `pipeline`.
  Workspace(std::filesystem::path dir, pipeline::Pipeline& pipeline) : dir_(std::move(dir)), pipeline_(pipeline) {
    std::filesystem::create_directories(dir_ / "models");
    initial_version_ = pipeline_.model()->version;
    save_model_copy(*pipeline_.model());
    replay();
    log_.open(dir_ / "events.jsonl", std::ios::app);
    if (!log_) throw std::runtime_error("cannot open event log in " + dir_.string());
  }

  ~Workspace() {
    writer_.reset();
  }

  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  const std::filesystem::path& dir() const { return dir_; }
  pipeline::Pipeline& pipeline() { return pipeline_; }

  /// Routes graph updates through a background single-writer queue.
  void enable_batching() {
    std::lock_guard lock(mu_);
    if (!writer_) writer_ = std::make_unique<mailgraph::BatchWriter>(pipeline_.graph());
  }

  void flush_graph() {
    std::lock_guard lock(mu_);
    if (writer_) writer_->flush();
  }

  // --- classification ------------------------------------------------------

  /// Classifies and records the email (event log + Mail Graph queue).
  std::pair<pipeline::ClassifyResult, StoredClassification> classify(const RawEmail& raw) {
    auto result = pipeline_.classify(raw);
    std::lock_guard lock(mu_);
    StoredClassification s;
    s.record_id = "r" + std::to_string(classifications_.size() + 1);
    auto mid = result.email.header("Message-ID");
    s.email_ref = mid && !text::trim(*mid).empty() ? std::string(text::trim(*mid))
                                                     : (!raw.source_id.empty() ? raw.source_id : s.record_id);
    s.day = result.day;
    s.d = result.detections.d;
    s.verdict = result.verdict;
    s.subject = result.email.subject;
    s.from = result.email.from_address;
    json updates = json::array();
    for (const auto& u : pipeline_.graph_updates(result.email, result.day)) {
      updates.push_back({{"day", u.day}, {"sender", u.sender}, {"org", u.recipient_org}, {"recipients", u.recipients}});
    }
    json ev = {{"event", "classify"}, {"record_id", s.record_id}, {"email_ref", s.email_ref},
               {"day", s.day},        {"d", s.d},                 {"verdict", verdict_json(s.verdict)},
               {"subject", s.subject}, {"from", s.from},          {"updates", updates}};
    append(ev);
    apply(ev, true);
    return {std::move(result), classifications_.back()};
  }

  // --- feedback ------------------------------------------------------------

  classifier::LabeledVector feedback(efficacy::FeedbackKind kind, const std::string& email_ref,
                                     std::optional<std::vector<double>> d = std::nullopt) {
    std::lock_guard lock(mu_);
    json ev = {{"event", "feedback"}, {"email_ref", email_ref}, {"kind", std::string(efficacy::to_string(kind))}};
    if (d) {
      if (d->size() != pipeline_.manifest().dimension()) throw std::invalid_argument("feedback vector has wrong dimension");
      ev["d"] = *d;
    } else if (!by_ref_.count(email_ref)) {
      throw NotFound("unknown email_ref " + email_ref);
    }
    append(ev);
    apply(ev, true);
    return *feedback_.find(email_ref);
  }

  // --- review duty ---------------------------------------------------------

  std::vector<efficacy::ReviewRecord> sample_review(std::optional<mailgraph::Day> day, std::size_t n,
                                                    std::uint64_t seed) {
    std::lock_guard lock(mu_);
    return sample_locked(day, n, seed);
  }

  /// Sampled records still waiting for a label. Samples the latest day with
  /// convictions if it has not been sampled yet.
  std::vector<efficacy::ReviewRecord> review_queue() {
    std::lock_guard lock(mu_);
    if (!convictions_by_day_.empty()) {
      auto latest = convictions_by_day_.rbegin()->first;
      if (!sampled_days_.count(latest)) {
        sample_locked(latest, kDefaultReviewSample, static_cast<std::uint64_t>(latest));
      }
    }
    std::vector<efficacy::ReviewRecord> out;
    for (const auto& id : sampled_order_) {
      const auto& rec = reviews_.at(id);
      if (!rec.human_label) out.push_back(rec);
    }
    return out;
  }

  efficacy::ReviewRecord label(const std::string& record_id, efficacy::HumanLabel label, const std::string& labeled_by) {
    std::lock_guard lock(mu_);
    if (!reviews_.count(record_id)) throw NotFound("unknown or unsampled record_id " + record_id);
    json ev = {{"event", "review_label"},
               {"record_id", record_id},
               {"label", std::string(efficacy::to_string(label))},
               {"labeled_by", labeled_by},
               {"labeled_at", utc_timestamp()}};
    append(ev);
    apply(ev, true);
    return reviews_.at(record_id);
  }

  std::vector<efficacy::ReviewRecord> reviewed() const {
    std::lock_guard lock(mu_);
    std::vector<efficacy::ReviewRecord> out;
    for (const auto& id : sampled_order_) {
      if (reviews_.at(id).human_label) out.push_back(reviews_.at(id));
    }
    return out;
  }

  // --- model updates -------------------------------------------------------

  std::vector<classifier::LabeledVector> labeled_data() const {
    std::lock_guard lock(mu_);
    return labeled_data_locked();
  }

  ModelUpdateResult update_model(std::optional<double> sigma, const std::map<std::string, double>& sigma_overrides = {}) {
    std::lock_guard lock(mu_);
    auto data = labeled_data_locked();
    if (data.empty()) throw Conflict("no labeled data: label review records or submit feedback first");
    auto current = pipeline_.model();
    classifier::PriorSpec prior;
    prior.w_b = current->w;
    prior.sigma_diag.assign(current->w.size(), sigma.value_or(pipeline_.config().sigma_default));
    for (const auto& [name, s] : sigma_overrides) {
      auto id = pipeline_.manifest().find(name);
      if (!id) throw std::invalid_argument("unknown detection type in sigma overrides: " + name);
      prior.sigma_diag[*id] = s;
    }
    classifier::MapConfig cfg;
    cfg.baseline_threshold = current->t;
    cfg.version = initial_version_ + ".u" + std::to_string(model_updates_ + 1);
    cfg.manifest_version = current->manifest_version;
    cfg.names = current->names;
    auto next = classifier::map_estimate(data, prior, cfg);
    save_model_copy(next);
    json ev = {{"event", "model"}, {"version", next.version}, {"file", model_file(next.version).filename().string()}};
    append(ev);
    ModelUpdateResult r{current->version, next.version, classifier::compare_weights(*current, next), data.size()};
    apply(ev, true);
    return r;
  }

  // --- reporting -----------------------------------------------------------

  efficacy::ImpactReport impact() const {
    std::lock_guard lock(mu_);
    std::vector<std::vector<double>> vectors;
    for (const auto& c : classifications_) vectors.push_back(c.d);
    return efficacy::impact_report(vectors, *pipeline_.model());
  }

  std::vector<efficacy::MetricPoint> metrics() const {
    std::lock_guard lock(mu_);
    std::map<mailgraph::Day, efficacy::MetricPoint> points;
    std::map<mailgraph::Day, std::vector<efficacy::HumanLabel>> labels;
    for (const auto& c : classifications_) {
      auto& p = points[c.day];
      p.timestamp = c.day;
      ++p.processed;
      p.convictions += c.verdict.label == 1;
    }
    for (const auto& id : sampled_order_) {
      const auto& rec = reviews_.at(id);
      if (rec.human_label) labels[rec.day].push_back(*rec.human_label);
    }
    for (const auto& [ref, kind_day] : feedback_days_) {
      auto& p = points[kind_day.second];
      p.timestamp = kind_day.second;
      if (kind_day.first == efficacy::FeedbackKind::customer_fp) ++p.fp_feedback_count;
      else ++p.fn_feedback_count;
    }
    std::vector<efficacy::MetricPoint> out;
    for (auto& [day, p] : points) {
      p.conviction_rate = p.processed ? static_cast<double>(p.convictions) / static_cast<double>(p.processed) : 0.0;
      if (auto it = labels.find(day); it != labels.end()) p.precision = efficacy::precision_estimate(it->second);
      out.push_back(p);
    }
    return out;
  }

  std::vector<StoredClassification> classifications() const {
    std::lock_guard lock(mu_);
    return classifications_;
  }

  std::size_t event_count() const {
    std::lock_guard lock(mu_);
    return event_count_;
  }

  /// Writes the Mail Graph snapshot covering every event so far.
  void snapshot() {
    std::lock_guard lock(mu_);
    if (writer_) writer_->flush();
    auto tmp = dir_ / "graph.snapshot.tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      pipeline_.graph().save_snapshot(out);
    }
    std::filesystem::rename(tmp, dir_ / "graph.snapshot");
    std::ofstream(dir_ / "graph.snapshot.offset", std::ios::trunc) << event_count_ << "\n";
  }

  static json verdict_json(const classifier::Verdict& v) {
    json contributing = json::array();
    for (const auto& c : v.contributing) {
      contributing.push_back({{"type_id", c.type_id},
                              {"name", c.name},
                              {"score", c.score},
                              {"weight", c.weight},
                              {"metadata", pipeline::metadata_json(c.metadata)}});
    }
    return {{"label", v.label}, {"probability", v.probability}, {"model_version", v.model_version},
            {"contributing", contributing}};
  }

  static classifier::Verdict verdict_from_json(const json& j) {
    classifier::Verdict v;
    v.label = j.at("label").get<int>();
    v.probability = j.at("probability").get<double>();
    v.model_version = j.at("model_version").get<std::string>();
    for (const auto& c : j.at("contributing")) {
      classifier::Contribution x;
      x.type_id = c.at("type_id").get<TypeId>();
      x.name = c.at("name").get<std::string>();
      x.score = c.at("score").get<double>();
      x.weight = c.at("weight").get<double>();
      for (const auto& [k, val] : c.at("metadata").items()) x.metadata[k] = val.get<std::string>();
      v.contributing.push_back(std::move(x));
    }
    return v;
  }

  static json review_json(const efficacy::ReviewRecord& r) {
    return {{"record_id", r.record_id},
            {"email_ref", r.email_ref},
            {"day", r.day},
            {"d", r.d},
            {"verdict", verdict_json(r.verdict)},
            {"human_label", r.human_label ? json(std::string(efficacy::to_string(*r.human_label))) : json(nullptr)},
            {"labeled_by", r.labeled_by},
            {"labeled_at", r.labeled_at}};
  }

 private:
  std::filesystem::path model_file(const std::string& version) const { return dir_ / "models" / ("model-" + version + ".txt"); }

  void save_model_copy(const classifier::ClassifierModel& m) {
    auto path = model_file(m.version);
    if (!std::filesystem::exists(path)) classifier::save_model_file(path.string(), m);
  }

  void append(const json& ev) {
    log_ << ev.dump() << "\n";
    log_.flush();
    if (!log_) throw std::runtime_error("failed to append to event log");
  }

  std::vector<classifier::LabeledVector> labeled_data_locked() const {
    std::vector<classifier::LabeledVector> out;
    for (const auto& id : sampled_order_) {
      const auto& r = reviews_.at(id);
      if (!r.human_label) continue;
      out.push_back({r.d, *r.human_label == efficacy::HumanLabel::TP ? 1 : 0, classifier::LabelSource::review_duty});
    }
    for (auto& lv : feedback_.labeled_vectors()) out.push_back(std::move(lv));
    return out;
  }

  std::vector<efficacy::ReviewRecord> sample_locked(std::optional<mailgraph::Day> day, std::size_t n,
                                                    std::uint64_t seed) {
    if (convictions_by_day_.empty()) return {};
    mailgraph::Day target = day.value_or(convictions_by_day_.rbegin()->first);
    std::vector<std::string> population;
    if (auto it = convictions_by_day_.find(target); it != convictions_by_day_.end()) {
      for (const auto& id : it->second) {
        if (!reviews_.count(id)) population.push_back(id);
      }
    }
    auto chosen = efficacy::sample_for_review(population, n, seed);
    json ev = {{"event", "review_sample"}, {"day", target}, {"n", n}, {"seed", seed}, {"record_ids", chosen}};
    append(ev);
    apply(ev, true);
    std::vector<efficacy::ReviewRecord> out;
    for (const auto& id : chosen) out.push_back(reviews_.at(id));
    return out;
  }

  void apply(const json& ev, bool graph) {
    ++event_count_;
    const std::string type = ev.at("event").get<std::string>();
    if (type == "classify") {
      StoredClassification s;
      s.record_id = ev.at("record_id").get<std::string>();
      s.email_ref = ev.at("email_ref").get<std::string>();
      s.day = ev.at("day").get<mailgraph::Day>();
      s.d = ev.at("d").get<std::vector<double>>();
      s.verdict = verdict_from_json(ev.at("verdict"));
      s.subject = ev.value("subject", "");
      s.from = ev.value("from", "");
      by_ref_[s.email_ref] = classifications_.size();
      by_record_[s.record_id] = classifications_.size();
      if (s.verdict.label == 1) convictions_by_day_[s.day].push_back(s.record_id);
      classifications_.push_back(std::move(s));
      if (graph) {
        std::vector<mailgraph::GraphUpdate> updates;
        for (const auto& u : ev.at("updates")) {
          updates.push_back({u.at("sender").get<std::string>(), u.at("recipients").get<std::vector<std::string>>(),
                             u.at("org").get<std::string>(), u.at("day").get<mailgraph::Day>()});
        }
        if (writer_) {
          for (auto& u : updates) writer_->enqueue(std::move(u));
        } else {
          pipeline_.graph().record_emails(updates);
        }
      }
    } else if (type == "feedback") {
      const auto ref = ev.at("email_ref").get<std::string>();
      auto kind = efficacy::parse_feedback_kind(ev.at("kind").get<std::string>());
      if (!kind) throw std::runtime_error("event log: bad feedback kind");
      std::vector<double> d;
      mailgraph::Day day = classifications_.empty() ? 0 : classifications_.back().day;
      if (ev.contains("d")) {
        d = ev.at("d").get<std::vector<double>>();
        if (auto it = by_ref_.find(ref); it != by_ref_.end()) day = classifications_[it->second].day;
      } else {
        const auto& c = classifications_.at(by_ref_.at(ref));
        d = c.d;
        day = c.day;
      }
      feedback_.ingest(*kind, ref, std::move(d));
      feedback_days_[ref] = {*kind, day};
    } else if (type == "review_sample") {
      auto day = ev.at("day").get<mailgraph::Day>();
      sampled_days_.insert(day);
      for (const auto& id : ev.at("record_ids").get<std::vector<std::string>>()) {
        if (reviews_.count(id)) continue;
        const auto& c = classifications_.at(by_record_.at(id));
        efficacy::ReviewRecord r;
        r.record_id = c.record_id;
        r.email_ref = c.email_ref;
        r.d = c.d;
        r.verdict = c.verdict;
        r.day = c.day;
        reviews_[id] = r;
        sampled_order_.push_back(id);
      }
    } else if (type == "review_label") {
      auto& r = reviews_.at(ev.at("record_id").get<std::string>());
      r.human_label = efficacy::parse_human_label(ev.at("label").get<std::string>());
      r.labeled_by = ev.value("labeled_by", "");
      r.labeled_at = ev.value("labeled_at", "");
    } else if (type == "model") {
      ++model_updates_;
      auto model = classifier::load_model_file((dir_ / "models" / ev.at("file").get<std::string>()).string());
      pipeline_.install_model(std::move(model));
    } else {
      throw std::runtime_error("event log: unknown event '" + type + "'");
    }
  }

  void replay() {
    std::size_t offset = 0;
    if (std::filesystem::exists(dir_ / "graph.snapshot")) {
      std::ifstream in(dir_ / "graph.snapshot");
      pipeline_.graph().load_snapshot(in);
      std::ifstream off(dir_ / "graph.snapshot.offset");
      if (!(off >> offset)) offset = 0;
    }
    std::ifstream in(dir_ / "events.jsonl");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      json ev;
      try {
        ev = json::parse(line);
      } catch (const json::parse_error&) {
        throw std::runtime_error("event log line " + std::to_string(line_no) + " is not valid JSON");
      }
      apply(ev, event_count_ >= offset);
    }
  }

  std::filesystem::path dir_;
  pipeline::Pipeline& pipeline_;
  std::string initial_version_;
  std::ofstream log_;
  std::unique_ptr<mailgraph::BatchWriter> writer_;
  mutable std::mutex mu_;
  std::size_t event_count_ = 0;
  std::size_t model_updates_ = 0;

  std::vector<StoredClassification> classifications_;
  std::map<std::string, std::size_t> by_ref_;
  std::map<std::string, std::size_t> by_record_;
  std::map<mailgraph::Day, std::vector<std::string>> convictions_by_day_;
  std::set<mailgraph::Day> sampled_days_;
  std::map<std::string, efficacy::ReviewRecord> reviews_;
  std::vector<std::string> sampled_order_;
  efficacy::FeedbackStore feedback_;
  std::map<std::string, std::pair<efficacy::FeedbackKind, mailgraph::Day>> feedback_days_;
};

}  // namespace bec::service

// becscan: batch front end and HTTP service for the BEC detection pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bec/classifier/logistic.hpp"
#include "bec/content/cascade.hpp"
#include "bec/content/models.hpp"
#include "bec/efficacy/efficacy.hpp"
#include "bec/ingest/email.hpp"
#include "bec/pipeline/config.hpp"
#include "bec/pipeline/corpus.hpp"
#include "bec/pipeline/json_io.hpp"
#include "bec/pipeline/pipeline.hpp"
#include "bec/service/server.hpp"
#include "bec/service/workspace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Files under `path` (or `path` itself), sorted for reproducible output.
std::vector<fs::path> list_emails(const fs::path& path) {
  std::vector<fs::path> out;
  if (fs::is_regular_file(path)) return {path};
  if (!fs::is_directory(path)) throw DataError("no such file or directory: " + path.string());
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file() && e.path().extension() == ".eml") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Globals {
  std::string config_path;
  std::string data_dir;
  std::optional<double> threshold;
};

bec::pipeline::PipelineConfig load_config(const Globals& g) {
  bec::pipeline::PipelineConfig c;
  std::string path = g.config_path;
  if (path.empty() && fs::exists("becscan.conf")) path = "becscan.conf";
  if (!path.empty()) c = bec::pipeline::load_config(path);
  if (!g.data_dir.empty()) c.data_dir = g.data_dir;
  if (g.threshold) c.threshold = g.threshold;
  bec::pipeline::validate(c);
  return c;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) ;
  return v[std::min(v.size() - 1, idx == 0 ? 0 : idx - 1)];
}

std::string detected_types(const bec::pipeline::ClassifyResult& r, const bec::RegistryManifest& m) {
  std::string out;
  for (const auto& c : r.verdict.contributing) {
    if (!out.empty()) out += ",";
    out += m.name_of(c.type_id);
  }
  return out.empty() ? "-" : out;
}

// --- subcommands -------------------------------------------------------------

int cmd_parse(const std::string& file) {
  auto email = bec::parse_email({read_file(file), file});
  json segs = json::array();
  for (const auto& s : email.segments) {
    segs.push_back({{"text", s.text},
                    {"kind", std::string(bec::to_string(s.kind))},
                    {"origin", std::string(bec::to_string(s.origin))},
                    {"char_range", {s.char_range.start, s.char_range.end}}});
  }
  json j = {{"from_display_name", email.from_display_name},
            {"from_address", email.from_address},
            {"recipients", email.recipients},
            {"subject", email.subject},
            {"date_epoch", email.date_epoch ? json(*email.date_epoch) : json(nullptr)},
            {"body_text", email.body_text},
            {"segments", segs},
            {"urls", email.urls},
            {"warnings", email.parse_warnings}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

struct ClassifyOptions {
  std::string path;
  std::string history;
  std::string graph_snapshot;
  bool record = false;
  bool full_json = false;
};

int cmd_classify(const Globals& g, const ClassifyOptions& o) {
  auto config = load_config(g);
  auto pipeline = bec::pipeline::Pipeline::from_config(config);
  if (!o.graph_snapshot.empty()) {
    std::ifstream in(o.graph_snapshot);
    if (!in) throw DataError("cannot read graph snapshot " + o.graph_snapshot);
    pipeline.graph().load_snapshot(in);
  }
  if (!o.history.empty()) {
    for (const auto& p : list_emails(o.history)) pipeline.record(bec::parse_email({read_file(p), p.string()}));
  }
  // --record stores each verdict in the workspace event log, as POST /v1/classify does
  std::unique_ptr<bec::service::Workspace> ws;
  if (o.record) ws = std::make_unique<bec::service::Workspace>(config.data_dir, pipeline);
  const fs::path root = fs::is_directory(o.path) ? fs::path(o.path) : fs::path(o.path).parent_path();
  std::vector<double> times;
  std::vector<int> labels;
  for (const auto& p : list_emails(o.path)) {
    bec::RawEmail raw{read_file(p), fs::relative(p, root).generic_string()};
    auto result = ws ? ws->classify(raw).first : pipeline.classify(raw);
    times.push_back(result.processing_time_ms);
    labels.push_back(result.verdict.label);
    const std::string rel = fs::relative(p, root).generic_string();
    if (o.full_json) {
      auto j = bec::pipeline::classify_response(result, pipeline.manifest());
      j["file"] = rel;
      std::cout << j.dump() << "\n";
    } else {
      char prob[32];
      std::snprintf(prob, sizeof prob, "%.6f", result.verdict.probability);
      std::cout << rel << "\t" << result.verdict.label << "\t" << prob << "\t"
                << (result.detections.short_circuited ? "gated" : "full") << "\t"
                << detected_types(result, pipeline.manifest()) << "\n";
    }
  }
  if (labels.empty()) throw DataError("no .eml files found under " + o.path);
  if (ws) ws->snapshot();
  const double rate = bec::efficacy::conviction_rate(labels);
  std::size_t convictions = 0;
  for (int l : labels) convictions += l;
  std::fprintf(stderr, "# emails %zu convictions %zu conviction_rate %.6g\n", labels.size(), convictions, rate);
  std::fprintf(stderr, "# latency_ms p50 %.3f p75 %.3f p99 %.3f\n", percentile(times, 0.5), percentile(times, 0.75),
               percentile(times, 0.99));
  return 0;
}

int cmd_ingest(const Globals& g, const std::string& dir) {
  auto config = load_config(g);
  auto pipeline = bec::pipeline::Pipeline::from_config(config);
  bec::service::Workspace ws(config.data_dir, pipeline);
  std::size_t n = 0;
  for (const auto& p : list_emails(dir)) {
    pipeline.record(bec::parse_email({read_file(p), p.string()}));
    ++n;
  }
  ws.snapshot();
  std::cout << "ingested " << n << " emails; graph has " << pipeline.graph().edge_count() << " edges, latest day "
            << pipeline.graph().latest_day().value_or(0) << "\n";
  return 0;
}

int cmd_train_classifier(const std::string& data, const std::string& out, std::uint64_t seed) {
  std::ifstream in(data);
  if (!in) throw DataError("cannot read " + data);
  auto imported = bec::content::read_labeled_segments(in, bec::content::Provenance::manual);
  std::vector<bec::content::LabeledSegment> train, heldout;
  for (auto& s : imported.segments) {
    (bec::content::is_holdout(s.text, seed, 5) ? heldout : train).push_back(std::move(s));
  }
  bec::content::TrainConfig cfg;
  cfg.seed = seed;
  bec::content::ClassifierTrainReport report;
  auto model = bec::content::train_segment_classifier(train, cfg, &report);
  model.version = "seg-" + std::to_string(seed);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  auto metrics = bec::content::evaluate_classifier(model, heldout);
  std::printf("segments %zu (train %zu, held-out %zu), malformed %zu, duplicates %zu\n", imported.segments.size(),
              train.size(), heldout.size(), imported.malformed, imported.duplicates);
  for (std::size_t i = 0; i < bec::content::kLabelCount; ++i) {
    std::printf("held-out %-20s precision %.4f recall %.4f f1 %.4f\n",
                std::string(bec::content::kLabelNames[i]).c_str(), metrics[i].precision(), metrics[i].recall(),
                metrics[i].f1());
  }
  std::ofstream f(out, std::ios::trunc);
  if (!f) throw DataError("cannot write " + out);
  model.save(f);
  return 0;
}

int cmd_train_prefilter(const std::string& teacher_path, const std::string& data, const std::string& out,
                        double target_recall) {
  auto teacher = bec::content::SegmentClassifierModel::load_file(teacher_path);
  std::ifstream in(data);
  if (!in) throw DataError("cannot read " + data);
  auto imported = bec::content::read_labeled_segments(in, bec::content::Provenance::manual);
  std::vector<std::string> texts;
  for (const auto& s : imported.segments) texts.push_back(s.text);
  bec::content::PrefilterTrainReport report;
  auto model = bec::content::train_prefilter(teacher, texts, target_recall, {}, &report);
  model.version = "pre-" + teacher.version;
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  std::printf("train %zu held-out %zu teacher-positive %zu\n", report.train_size, report.holdout_size,
              report.holdout_teacher_positives);
  std::printf("keep_threshold %.6f held-out recall %.4f held-out drop rate %.4f corpus drop rate %.4f\n",
              model.keep_threshold, report.holdout_recall, report.holdout_drop_rate, report.corpus_drop_rate);
  std::ofstream f(out, std::ios::trunc);
  if (!f) throw DataError("cannot write " + out);
  model.save(f);
  return 0;
}

int cmd_update_weights(const Globals& g, double sigma) {
  auto config = load_config(g);
  auto pipeline = bec::pipeline::Pipeline::from_config(config);
  bec::service::Workspace ws(config.data_dir, pipeline);
  auto r = ws.update_model(sigma);
  std::printf("model %s -> %s (%zu labeled vectors)\n", r.previous_version.c_str(), r.version.c_str(), r.training_size);
  for (const auto& d : r.diff) {
    std::printf("%-24s %+.6f  (%.6f -> %.6f)\n", d.name.c_str(), d.delta, d.before, d.after);
  }
  return 0;
}

int cmd_report(const Globals& g, bool impact, bool precision) {
  auto config = load_config(g);
  auto pipeline = bec::pipeline::Pipeline::from_config(config);
  bec::service::Workspace ws(config.data_dir, pipeline);
  if (!impact && !precision) impact = precision = true;
  if (impact) {
    auto report = ws.impact();
    std::printf("# impact over %zu convicted emails\n", report.convicted);
    std::printf("type_id\tname\toccurrences\trelative_impact\tmean_shapley\n");
    for (const auto& r : report.rows) {
      std::printf("%zu\t%s\t%zu\t%.4f\t%.4f\n", r.type_id, r.name.c_str(), r.occurrences, r.relative_impact,
                  r.mean_shapley);
    }
  }
  if (precision) {
    std::printf("# daily metrics\n");
    std::printf("day\tprocessed\tconvictions\tconviction_rate\tprecision\tlower95\tupper95\tfp_feedback\tfn_feedback\n");
    for (const auto& m : ws.metrics()) {
      if (m.precision) {
        std::printf("%lld\t%zu\t%zu\t%.6g\t%.4f\t%.4f\t%.4f\t%zu\t%zu\n", static_cast<long long>(m.timestamp),
                    m.processed, m.convictions, m.conviction_rate, m.precision->estimate, m.precision->lower,
                    m.precision->upper, m.fp_feedback_count, m.fn_feedback_count);
      } else {
        std::printf("%lld\t%zu\t%zu\t%.6g\t-\t-\t-\t%zu\t%zu\n", static_cast<long long>(m.timestamp), m.processed,
                    m.convictions, m.conviction_rate, m.fp_feedback_count, m.fn_feedback_count);
      }
    }
  }
  return 0;
}

int cmd_sample_review(const Globals& g, std::size_t n, std::uint64_t seed, std::optional<std::int64_t> day,
                      bool commit) {
  auto config = load_config(g);
  auto pipeline = bec::pipeline::Pipeline::from_config(config);
  bec::service::Workspace ws(config.data_dir, pipeline);
  std::vector<bec::efficacy::ReviewRecord> sample;
  if (commit) {
    sample = ws.sample_review(day, n, seed);
  } else {
    std::map<std::int64_t, std::vector<bec::service::StoredClassification>> by_day;
    for (const auto& c : ws.classifications()) {
      if (c.verdict.label == 1) by_day[c.day].push_back(c);
    }
    if (!by_day.empty()) {
      auto target = day.value_or(by_day.rbegin()->first);
      for (const auto& c : bec::efficacy::sample_for_review(by_day[target], n, seed)) {
        bec::efficacy::ReviewRecord r;
        r.record_id = c.record_id;
        r.email_ref = c.email_ref;
        r.day = c.day;
        r.d = c.d;
        r.verdict = c.verdict;
        sample.push_back(std::move(r));
      }
    }
  }
  for (const auto& r : sample) {
    std::printf("%s\t%s\t%lld\t%.6f\n", r.record_id.c_str(), r.email_ref.c_str(), static_cast<long long>(r.day),
                r.verdict.probability);
  }
  return 0;
}

int cmd_gen_corpus(const bec::pipeline::CorpusSpec& spec, const std::string& out) {
  if (!(spec.prevalence >= 0.0 && spec.prevalence <= 1.0)) throw DataError("prevalence must lie in [0, 1]");
  auto corpus = bec::pipeline::generate_corpus(spec);
  fs::create_directories(fs::path(out) / "emails");
  fs::create_directories(fs::path(out) / "history");
  auto write = [&](const bec::pipeline::GeneratedEmail& e) {
    std::ofstream f(fs::path(out) / e.name, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + e.name);
    f << e.bytes;
  };
  for (const auto& e : corpus.history) write(e);
  std::ofstream labels(fs::path(out) / "labels.tsv", std::ios::trunc);
  labels << "# file\tlabel\tkind\n";
  for (const auto& e : corpus.traffic) {
    write(e);
    labels << e.name << "\t" << e.label << "\t" << e.kind << "\n";
  }
  std::printf("wrote %zu traffic emails (%zu positive) and %zu history emails to %s\n", corpus.traffic.size(),
              corpus.positives(), corpus.history.size(), out.c_str());
  return 0;
}

volatile std::sig_atomic_t g_stop = 0;
httplib::Server* g_server = nullptr;

int cmd_serve(const Globals& g, std::optional<int> port) {
  auto config = load_config(g);
  auto pipeline = bec::pipeline::Pipeline::from_config(config);
  bec::service::Workspace ws(config.data_dir, pipeline);
  ws.enable_batching();
  bec::service::Service service(ws, config.api_token);
  httplib::Server server;
  service.mount(server);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  const int p = port.value_or(config.port);
  std::fprintf(stderr, "serving on http://%s:%d (workspace %s, model %s)\n", config.host.c_str(), p,
               config.data_dir.c_str(), pipeline.model()->version.c_str());
  if (!server.listen(config.host, p)) throw DataError("cannot listen on port " + std::to_string(p));
  ws.snapshot();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"becscan: business email compromise detection pipeline"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("-c,--config", g.config_path, "Pipeline config file (key = value)");
  app.add_option("--data-dir", g.data_dir, "Workspace directory (overrides data_dir)");
  app.add_option("--threshold", g.threshold, "Override the classifier threshold t");

  auto* parse = app.add_subcommand("parse", "Parse one .eml file and print its fields as JSON");
  std::string parse_file;
  parse->add_option("file", parse_file)->required();

  auto* classify = app.add_subcommand("classify", "Classify an .eml file or every .eml under a directory");
  ClassifyOptions copt;
  classify->add_option("path", copt.path)->required();
  classify->add_option("--history", copt.history, "Warm the Mail Graph from these emails first");
  classify->add_option("--graph", copt.graph_snapshot, "Load a Mail Graph snapshot first");
  classify->add_flag("--record", copt.record, "Store each verdict in the workspace and record the email into its Mail Graph");
  classify->add_flag("--json", copt.full_json, "Print the full JSON response per email");

  auto* ingest = app.add_subcommand("ingest", "Warm the workspace Mail Graph from a directory of emails");
  std::string ingest_dir;
  ingest->add_option("dir", ingest_dir)->required();

  auto* tc = app.add_subcommand("train-classifier", "Train the segment classifier on labeled segments");
  std::string tc_data = "data/segments.tsv", tc_out = "data/models/segment_classifier.txt";
  std::uint64_t tc_seed = 7;
  tc->add_option("--data", tc_data);
  tc->add_option("--out", tc_out);
  tc->add_option("--seed", tc_seed);

  auto* tp = app.add_subcommand("train-prefilter", "Train the segment prefilter from the classifier's labels");
  std::string tp_teacher = "data/models/segment_classifier.txt", tp_data = "data/segments.tsv",
              tp_out = "data/models/prefilter.txt";
  double tp_recall = 0.95;
  tp->add_option("--teacher", tp_teacher);
  tp->add_option("--data", tp_data);
  tp->add_option("--out", tp_out);
  tp->add_option("--target-recall", tp_recall)->check(CLI::Range(0.0, 1.0));

  auto* uw = app.add_subcommand("update-weights", "MAP update of the classifier from stored labels");
  double uw_sigma = 1.0;
  uw->add_option("--sigma", uw_sigma)->required()->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Impact and precision report for the workspace");
  bool rep_impact = false, rep_precision = false;
  report->add_flag("--impact", rep_impact);
  report->add_flag("--precision", rep_precision);

  auto* sr = app.add_subcommand("sample-review", "Draw a review sample of one day's convictions");
  std::size_t sr_n = 10;
  std::uint64_t sr_seed = 0;
  std::optional<std::int64_t> sr_day;
  bool sr_commit = false;
  sr->add_option("--n", sr_n)->check(CLI::Range(10, 50));
  sr->add_option("--seed", sr_seed);
  sr->add_option("--day", sr_day);
  sr->add_flag("--commit", sr_commit, "Add the sample to the review queue");

  auto* gc = app.add_subcommand("gen-corpus", "Generate synthetic traffic with a given BEC prevalence");
  bec::pipeline::CorpusSpec spec;
  std::string gc_out = "corpus";
  gc->add_option("--size", spec.size);
  gc->add_option("--prevalence", spec.prevalence);
  gc->add_option("--seed", spec.seed);
  gc->add_option("--out", gc_out);

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::optional<int> port;
  serve->add_option("--port", port);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*parse) return cmd_parse(parse_file);
    if (*classify) return cmd_classify(g, copt);
    if (*ingest) return cmd_ingest(g, ingest_dir);
    if (*tc) return cmd_train_classifier(tc_data, tc_out, tc_seed);
    if (*tp) return cmd_train_prefilter(tp_teacher, tp_data, tp_out, tp_recall);
    if (*uw) return cmd_update_weights(g, uw_sigma);
    if (*report) return cmd_report(g, rep_impact, rep_precision);
    if (*sr) return cmd_sample_review(g, sr_n, sr_seed, sr_day, sr_commit);
    if (*gc) return cmd_gen_corpus(spec, gc_out);
    if (*serve) return cmd_serve(g, port);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

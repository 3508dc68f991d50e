#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "bec/content/cascade.hpp"

namespace {

using namespace bec;
using namespace bec::content;

const std::string kSource = BEC_SOURCE_DIR;

LabeledSegment labeled(std::string text, bool cta, bool urg, bool cred) {
  LabeledSegment s;
  s.text = std::move(text);
  s.labels = {cta, urg, cred};
  return s;
}

std::vector<LabeledSegment> toy_set() {
  return {
      labeled("please send the payment", true, false, false),
      labeled("please wire the money", true, false, false),
      labeled("send me your password", true, false, true),
      labeled("reply with your password", true, false, true),
      labeled("this is urgent do it now", false, true, false),
      labeled("urgent reply needed now", false, true, false),
      labeled("the meeting notes are attached", false, false, false),
      labeled("lunch was great yesterday", false, false, false),
      labeled("the weather is nice", false, false, false),
      labeled("our report is finished", false, false, false),
  };
}

const std::vector<LabeledSegment>& shipped_segments() {
  static const std::vector<LabeledSegment> data = [] {
    std::ifstream in(kSource + "/data/segments.tsv");
    return read_labeled_segments(in, Provenance::manual).segments;
  }();
  return data;
}

const ContentModels& shipped() {
  static const auto m = ContentModels::load(kSource + "/data/models/prefilter.txt",
                                            kSource + "/data/models/segment_classifier.txt");
  return *m;
}

ParsedEmail with_body(const std::string& body) {
  ParsedEmail e;
  e.body_text = body;
  e.segments = extract_segments(e);
  return e;
}

double label_score(const std::vector<Detection>& found, TypeId id) {
  for (const auto& d : found) {
    if (d.type_id == id) return d.score;
  }
  return 0.0;
}

// --- segment classifier ---------------------------------------------------------

TEST(SegmentClassifier, SeparableToySetIsFitExactly) {
  auto data = toy_set();
  auto model = train_segment_classifier(data);
  for (const auto& s : data) {
    auto scores = classify_segment(s.text, model);
    for (std::size_t i = 0; i < kLabelCount; ++i) {
      EXPECT_EQ(scores[i] >= 0.5, s.labels[i]) << s.text << " label " << kLabelNames[i];
    }
  }
}

TEST(SegmentClassifier, SingleExampleTrainsWithDegenerateWarnings) {
  ClassifierTrainReport report;
  auto model = train_segment_classifier({labeled("send money", true, false, false)}, {}, &report);
  EXPECT_EQ(report.warnings.size(), 3u);
  auto scores = classify_segment("send money", model);
  for (std::size_t i = 0; i < kLabelCount; ++i) EXPECT_TRUE(std::isfinite(scores[i]));
}

TEST(SegmentClassifier, SingleClassLabelIsFlagged) {
  auto data = toy_set();
  for (auto& s : data) s.labels[1] = false;
  ClassifierTrainReport report;
  train_segment_classifier(data, {}, &report);
  EXPECT_FALSE(report.degenerate[0]);
  EXPECT_TRUE(report.degenerate[1]);
  EXPECT_FALSE(report.degenerate[2]);
  ASSERT_EQ(report.warnings.size(), 1u);
  EXPECT_NE(report.warnings[0].find("urgency"), std::string::npos);
}

TEST(SegmentClassifier, EmptyTrainingSetThrows) {
  EXPECT_THROW(train_segment_classifier({}), std::invalid_argument);
}

TEST(SegmentClassifier, TrainingIsBitIdenticalForASeed) {
  auto a = train_segment_classifier(toy_set(), {.seed = 3});
  auto b = train_segment_classifier(toy_set(), {.seed = 3});
  EXPECT_EQ(a.serialize(), b.serialize());
}

TEST(SegmentClassifier, SerializationRoundTrip) {
  auto a = train_segment_classifier(toy_set());
  std::stringstream ss(a.serialize());
  auto b = SegmentClassifierModel::load(ss);
  EXPECT_EQ(a.serialize(), b.serialize());
  for (const auto& s : toy_set()) {
    auto x = classify_segment(s.text, a);
    auto y = classify_segment(s.text, b);
    for (std::size_t i = 0; i < kLabelCount; ++i) EXPECT_NEAR(x[i], y[i], 1e-9);
  }
}

TEST(SegmentClassifier, ShippedModelOnCanonicalSentences) {
  const auto& clf = shipped().classifier;
  auto pay = classify_segment("Please make the payment by end of day.", clf);
  EXPECT_GE(pay.call_to_action, 0.5);
  EXPECT_GE(pay.urgency, 0.5);
  auto cred = classify_segment("Please confirm your password.", clf);
  EXPECT_GE(cred.credential_request, 0.5);
  auto neutral = classify_segment("Here are the meeting notes.", clf);
  EXPECT_LT(neutral.call_to_action, 0.5);
  EXPECT_LT(neutral.urgency, 0.5);
  EXPECT_LT(neutral.credential_request, 0.5);
  auto empty = classify_segment("", clf);
  EXPECT_EQ(empty.call_to_action, 0.0);
}

TEST(SegmentClassifier, ScoresAreProbabilities) {
  const auto& clf = shipped().classifier;
  for (const auto& s : shipped_segments()) {
    auto x = classify_segment(s.text, clf);
    for (std::size_t i = 0; i < kLabelCount; ++i) {
      ASSERT_GE(x[i], 0.0);
      ASSERT_LE(x[i], 1.0);
    }
  }
}

// --- prefilter -----------------------------------------------------------------

TEST(Prefilter, ThresholdIsKthHighestHeldOutPositive) {
  std::vector<std::string> texts;
  for (const auto& s : shipped_segments()) texts.push_back(s.text);
  PrefilterTrainConfig cfg;
  PrefilterTrainReport report;
  const double target = 0.95;
  auto pf = train_prefilter(shipped().classifier, texts, target, cfg, &report);

  // recompute the held-out teacher positives and their student scores here
  std::vector<double> scores;
  for (const auto& t : texts) {
    if (!is_holdout(t, cfg.train.seed, cfg.holdout_modulus)) continue;
    auto teacher = classify_segment(t, shipped().classifier);
    bool positive = teacher.call_to_action >= 0.5 || teacher.urgency >= 0.5 || teacher.credential_request >= 0.5;
    if (!positive) continue;
    auto f = pf.features(t);
    scores.push_back(pf.head.any_active(f) ? pf.head.score(f) : -1.0);
  }
  ASSERT_EQ(scores.size(), report.holdout_teacher_positives);
  std::sort(scores.begin(), scores.end(), std::greater<>());
  const auto k = static_cast<std::size_t>(std::ceil(target * static_cast<double>(scores.size())));
  EXPECT_DOUBLE_EQ(pf.keep_threshold, scores[k - 1]);
  std::size_t kept = 0;
  for (double s : scores) kept += s >= pf.keep_threshold;
  EXPECT_GE(static_cast<double>(kept) / static_cast<double>(scores.size()), target);
  EXPECT_NEAR(report.holdout_recall, static_cast<double>(kept) / static_cast<double>(scores.size()), 1e-12);
}

TEST(Prefilter, UnreachableTargetWarns) {
  PrefilterTrainReport report;
  auto pf = train_prefilter(shipped().classifier, {"hello there", "nice weather"}, 0.95, {}, &report);
  EXPECT_EQ(pf.keep_threshold, 0.0);
  EXPECT_FALSE(report.warnings.empty());
}

TEST(Prefilter, EmptyCorpusThrows) {
  EXPECT_THROW(train_prefilter(shipped().classifier, {}, 0.95), std::invalid_argument);
}

TEST(Prefilter, SerializationRoundTrip) {
  std::stringstream ss(shipped().prefilter.serialize());
  auto b = PrefilterModel::load(ss);
  EXPECT_EQ(b.serialize(), shipped().prefilter.serialize());
  EXPECT_EQ(b.keep_threshold, shipped().prefilter.keep_threshold);
}

TEST(Prefilter, DropsTextWithoutLearnedFeatures) {
  EXPECT_FALSE(prefilter("", shipped().prefilter));
  EXPECT_FALSE(prefilter("zzqxv wvvqz", shipped().prefilter));
}

// --- cascade -------------------------------------------------------------------

TEST(Cascade, CountersAreSound) {
  CascadeCounters counters;
  auto e = with_body(
      "Hi Bob,\n\nHere are the meeting notes. Please make the payment by end of day.\n\nPlease confirm your password.");
  auto found = run_content_detectors(e, shipped().prefilter, shipped().classifier, {}, &counters);
  std::size_t sentences = 0;
  for (const auto& s : e.segments) sentences += s.kind == SegmentKind::sentence;
  EXPECT_EQ(counters.segments_seen.load(), sentences);
  EXPECT_EQ(counters.prefilter_calls.load(), sentences);
  EXPECT_LE(counters.classifier_calls.load(), counters.prefilter_calls.load());
  EXPECT_GT(label_score(found, 5), 0.0);
  EXPECT_GT(label_score(found, 7), 0.0);
}

TEST(Cascade, LabelScoreIsMaxOverKeptSegments) {
  const std::string a = "I need this done in the next hour.";
  const std::string b = "Please make the payment by end of day.";
  auto found = run_content_detectors(with_body(a + " " + b), shipped().prefilter, shipped().classifier);
  double expected = 0.0;
  for (const auto& s : {a, b}) {
    if (prefilter(s, shipped().prefilter)) expected = std::max(expected, classify_segment(s, shipped().classifier).urgency);
  }
  ASSERT_GE(expected, 0.5);
  EXPECT_DOUBLE_EQ(label_score(found, 6), expected);
}

TEST(Cascade, AddingSegmentsNeverLowersAScore) {
  std::vector<std::string> pool;
  for (std::size_t i = 0; i < shipped_segments().size(); i += 37) pool.push_back(shipped_segments()[i].text);
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    std::string body;
    for (int k = 0; k < 3; ++k) body += pool[rng() % pool.size()] + "\n\n";
    std::string more = body + pool[rng() % pool.size()];
    auto small = run_content_detectors(with_body(body), shipped().prefilter, shipped().classifier);
    auto large = run_content_detectors(with_body(more), shipped().prefilter, shipped().classifier);
    for (TypeId id : {5u, 6u, 7u}) EXPECT_GE(label_score(large, id), label_score(small, id)) << more;
  }
}

TEST(Cascade, EmptyEmailHasNoDetections) {
  CascadeCounters counters;
  EXPECT_TRUE(run_content_detectors(with_body(""), shipped().prefilter, shipped().classifier, {}, &counters).empty());
  EXPECT_EQ(counters.segments_seen.load(), 0u);
}

TEST(Cascade, DetectionCarriesSegmentMetadata) {
  auto found = run_content_detectors(with_body("Please confirm your password."), shipped().prefilter,
                                     shipped().classifier);
  ASSERT_FALSE(found.empty());
  for (const auto& d : found) {
    EXPECT_EQ(d.metadata.at("segment"), "Please confirm your password.");
    EXPECT_EQ(d.metadata.at("segment_origin"), "body");
  }
}

// --- labeled data import -----------------------------------------------------------

TEST(ExternalLabels, ValidMalformedAndDuplicateLines) {
  auto path = std::filesystem::temp_directory_path() / "bec_external_labels.tsv";
  {
    std::ofstream out(path);
    out << "# header\n";
    out << "Wire the funds today.\tcta:1\turg:1\tcred:0\n";
    out << "Send me your password.\tcta:1\turg:0\tcred:1\n";
    out << "Nice talk yesterday.\tcta:0\turg:0\tcred:0\n";
    out << "broken line without labels\n";
    out << "Wire the funds today.\tcta:1\turg:1\tcred:0\n";
  }
  auto imported = import_external_labels(path.string());
  EXPECT_EQ(imported.segments.size(), 3u);
  EXPECT_EQ(imported.malformed, 1u);
  EXPECT_EQ(imported.duplicates, 1u);
  for (const auto& s : imported.segments) EXPECT_EQ(s.provenance, Provenance::external_labeler);
  EXPECT_TRUE(imported.segments[1].labels[2]);
  std::filesystem::remove(path);
}

TEST(ExternalLabels, EmptyFileAndMissingFile) {
  auto path = std::filesystem::temp_directory_path() / "bec_external_empty.tsv";
  { std::ofstream out(path); }
  auto imported = import_external_labels(path.string());
  EXPECT_TRUE(imported.segments.empty());
  EXPECT_EQ(imported.malformed, 0u);
  std::filesystem::remove(path);
  EXPECT_THROW(import_external_labels(path.string()), std::runtime_error);
}

TEST(ExternalLabels, LineFormatRoundTrip) {
  auto s = labeled("Pay now.", true, true, false);
  auto parsed = parse_labeled_line(format_labeled_line(s), Provenance::teacher);
  ASSERT_TRUE(parsed);
  EXPECT_EQ(parsed->text, s.text);
  EXPECT_EQ(parsed->labels, s.labels);
  EXPECT_FALSE(parse_labeled_line("Pay now.\tcta:2\turg:0\tcred:0", Provenance::manual));
  EXPECT_FALSE(parse_labeled_line("\tcta:1\turg:0\tcred:0", Provenance::manual));
}

}  // namespace

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "bec/efficacy/efficacy.hpp"
#include "oracles.hpp"

namespace {

using namespace bec;
using namespace bec::efficacy;

ClassifierModel model_of(std::vector<double> w, double t) {
  ClassifierModel m;
  m.w = std::move(w);
  m.t = t;
  for (std::size_t i = 0; i < m.w.size(); ++i) m.names.push_back("type" + std::to_string(i));
  return m;
}

// Random sparse instance with k active components out of m.
std::vector<double> random_vector(std::mt19937_64& rng, std::size_t m, std::size_t k) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> d(m, 0.0);
  std::vector<std::size_t> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t j = 0; j < k; ++j) d[idx[j]] = u(rng);
  return d;
}

std::vector<double> random_weights(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::vector<double> w(m);
  for (auto& x : w) x = u(rng);
  return w;
}

// --- Eq. (2) ---------------------------------------------------------------------------

TEST(Impactful, LoneDetectionThatConvicts) {
  auto h = model_of({0.0, 5.0, 0.0}, 0.9);
  EXPECT_TRUE(impactful(1, {0.0, 1.0, 0.0}, h));
}

TEST(Impactful, NotConvictedIsNeverImpactful) {
  auto h = model_of({1.0, 1.0}, 0.99);
  for (TypeId i : {0u, 1u}) EXPECT_FALSE(impactful(i, {1.0, 1.0}, h));
}

TEST(Impactful, RedundantStrongDetections) {
  // either alone gives sigmoid(3) = 0.953 >= 0.9
  auto h = model_of({3.0, 3.0}, 0.9);
  EXPECT_TRUE(oracle::convicted({1, 0}, h.w, h.t));
  EXPECT_TRUE(oracle::convicted({0, 1}, h.w, h.t));
  EXPECT_FALSE(impactful(0, {1.0, 1.0}, h));
  EXPECT_FALSE(impactful(1, {1.0, 1.0}, h));
}

TEST(Impactful, MatchesBruteForceRemoval) {
  std::mt19937_64 rng(51);
  for (int fixture = 0; fixture < 100; ++fixture) {
    auto w = random_weights(rng, 8);
    const double t = 0.5 + 0.45 * static_cast<double>(rng() % 100) / 100.0;
    auto h = model_of(w, t);
    auto d = random_vector(rng, 8, 1 + rng() % 8);
    for (TypeId i = 0; i < 8; ++i) {
      EXPECT_EQ(impactful(i, d, h), oracle::removal_flips(i, d, w, t));
      if (impactful(i, d, h)) {
        EXPECT_TRUE(oracle::convicted(d, w, t));
      }
    }
  }
}

TEST(RelativeImpact, Examples) {
  auto h = model_of({0.0, 5.0, 5.0}, 0.9);
  std::vector<std::vector<double>> only_1 = {{0, 1, 0}, {0, 1, 0}, {1, 1, 0}};
  EXPECT_DOUBLE_EQ(relative_impact(2, only_1, h), 0.0);
  EXPECT_DOUBLE_EQ(relative_impact(1, only_1, h), 1.0);
  EXPECT_THROW(relative_impact(1, {}, h), std::invalid_argument);
  EXPECT_THROW(relative_impact(1, {{0, 0, 0}}, h), std::invalid_argument);
}

TEST(RelativeImpact, MixedFixtureEqualsHandCount) {
  // w = (2, 2, 0.5), t = 0.9 (logit 2.197). Removal flips by hand:
  auto h = model_of({2.0, 2.0, 0.5}, 0.9);
  std::vector<std::vector<double>> convicted = {
      {1, 1, 0},    // z=4: removing 0 -> 2 < 2.197, flips
      {1, 1, 1},    // z=4.5: removing 0 -> 2.5, holds
      {1, 0, 1},    // z=2.5: removing 0 -> 0.5, flips
      {0, 1, 1},    // no type 0
      {1, 0.5, 1},  // z=3.5: removing 0 -> 1.5, flips
      {1, 1, 0.8},  // z=4.4: removing 0 -> 2.4, holds
      {0, 1, 0.5},  // z=2.25, no type 0
      {1, 0.2, 0.5},  // z=2.65: removing 0 -> 0.65, flips
      {0.9, 0.9, 0.5},  // z=3.85: removing 0 -> 2.05, flips
      {1, 1, 0.4},  // z=4.2: removing 0 -> 2.2 >= 2.197, holds
  };
  for (const auto& d : convicted) ASSERT_TRUE(oracle::convicted(d, h.w, h.t));
  EXPECT_DOUBLE_EQ(relative_impact(0, convicted, h), 5.0 / 10.0);
}

TEST(RelativeImpact, ZeroWeightDetectorHasZeroImpact) {
  std::mt19937_64 rng(53);
  for (int i = 0; i < 200; ++i) {
    auto w = random_weights(rng, 6);
    w[3] = 0.0;
    auto h = model_of(w, 0.6);
    std::vector<std::vector<double>> convicted;
    // some weight draws convict nothing; skip those
    for (int tries = 0; convicted.size() < 10 && tries < 10000; ++tries) {
      auto d = random_vector(rng, 6, 1 + rng() % 6);
      if (convicts(d, h)) convicted.push_back(d);
    }
    if (convicted.empty()) continue;
    EXPECT_EQ(relative_impact(3, convicted, h), 0.0);
  }
}

// --- Shapley ------------------------------------------------------------------------------

TEST(Shapley, SingleDetection) {
  auto h = model_of({0.0, 2.0, 0.0}, 0.5);
  auto a = shapley_values({0.0, 0.7, 0.0}, h);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].type_id, 1u);
  EXPECT_NEAR(a[0].value, oracle::logistic(1.4) - 0.5, 1e-15);
}

TEST(Shapley, SymmetricDetectionsGetEqualValues) {
  auto h = model_of({1.5, -2.0, 1.5, 0.7}, 0.5);
  auto a = shapley_values({0.8, 1.0, 0.8, 0.3}, h);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_NEAR(a[0].value, a[2].value, 1e-15);
}

TEST(Shapley, MatchesPermutationOracleForEveryKUpToSix) {
  std::mt19937_64 rng(57);
  for (std::size_t k = 0; k <= 6; ++k) {
    for (int trial = 0; trial < 50; ++trial) {
      auto w = random_weights(rng, 8);
      auto d = random_vector(rng, 8, k);
      auto exact = shapley_values(d, model_of(w, 0.5));
      auto oracle_phi = oracle::shapley_by_permutation(d, w);
      ASSERT_EQ(exact.size(), k);
      for (const auto& a : exact) EXPECT_NEAR(a.value, oracle_phi[a.type_id], 1e-10) << "k=" << k;
    }
  }
}

TEST(Shapley, EfficiencyAndNullPlayer) {
  std::mt19937_64 rng(59);
  for (int i = 0; i < 1000; ++i) {
    auto w = random_weights(rng, 8);
    const std::size_t null_player = rng() % 8;
    w[null_player] = 0.0;
    auto d = random_vector(rng, 8, rng() % 9);
    auto attribution = shapley_values(d, model_of(w, 0.5));
    double sum = 0.0;
    for (const auto& a : attribution) {
      sum += a.value;
      if (a.type_id == null_player) {
        EXPECT_NEAR(a.value, 0.0, 1e-15);
      }
    }
    EXPECT_NEAR(sum, oracle::logistic(oracle::dot(w, d)) - 0.5, 1e-10);
  }
}

TEST(Shapley, MoreThanTwentyActiveThrows) {
  std::vector<double> d(21, 1.0), w(21, 0.1);
  EXPECT_THROW(shapley_values(d, model_of(w, 0.5)), std::invalid_argument);
  d[0] = 0.0;
  EXPECT_NO_THROW(shapley_values(d, model_of(w, 0.5)));
}

TEST(ImpactReport, EmptyWithoutConvictions) {
  auto h = model_of({1.0, 1.0}, 0.99);
  auto r = impact_report({{0.1, 0.1}, {0, 0}}, h);
  EXPECT_EQ(r.convicted, 0u);
  EXPECT_TRUE(r.empty());
}

TEST(ImpactReport, RowsAverageOverOccurrences) {
  auto h = model_of({-4.0, 5.0, 1.0}, 0.9);
  std::vector<std::vector<double>> vs = {{0, 1, 0}, {0, 1, 1}, {0, 0, 1}, {1, 1, 0}};
  auto r = impact_report(vs, h);
  EXPECT_EQ(r.convicted, 2u);  // {0,1,0} and {0,1,1}; the others fall below t
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].type_id, 1u);
  EXPECT_EQ(r.rows[0].occurrences, 2u);
  EXPECT_DOUBLE_EQ(r.rows[0].relative_impact, 1.0);
  const double phi_lone = oracle::logistic(5.0) - 0.5;
  const double phi_pair = oracle::shapley_by_permutation({0, 1, 1}, h.w)[1];
  EXPECT_NEAR(r.rows[0].mean_shapley, (phi_lone + phi_pair) / 2.0, 1e-12);
  EXPECT_EQ(r.rows[1].type_id, 2u);
  EXPECT_EQ(r.rows[1].occurrences, 1u);
  EXPECT_DOUBLE_EQ(r.rows[1].relative_impact, 0.0);
}

// --- review sampling ------------------------------------------------------------------------

TEST(ReviewSample, SmallPopulationReturnedWhole) {
  auto s = sample_indices(5, 10, 1);
  EXPECT_EQ(s, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(ReviewSample, DeterministicDistinctAndInRange) {
  auto a = sample_indices(1000, 25, 7);
  EXPECT_EQ(a, sample_indices(1000, 25, 7));
  EXPECT_NE(a, sample_indices(1000, 25, 8));
  std::set<std::size_t> distinct(a.begin(), a.end());
  EXPECT_EQ(distinct.size(), 25u);
  for (auto i : a) EXPECT_LT(i, 1000u);
}

TEST(ReviewSample, SizeBounds) {
  EXPECT_THROW(sample_indices(100, 9, 1), std::invalid_argument);
  EXPECT_THROW(sample_indices(100, 51, 1), std::invalid_argument);
  EXPECT_NO_THROW(sample_indices(100, 50, 1));
}

TEST(ReviewSample, InclusionFrequencyIsUniform) {
  const std::size_t population = 100, n = 10, draws = 10000;
  std::vector<std::size_t> hits(population, 0);
  for (std::size_t seed = 0; seed < draws; ++seed) {
    for (auto i : sample_indices(population, n, seed)) ++hits[i];
  }
  auto band = oracle::binomial_band(static_cast<double>(draws), 0.1, 3.0);
  for (std::size_t i = 0; i < population; ++i) {
    EXPECT_GE(static_cast<double>(hits[i]), band.lower) << i;
    EXPECT_LE(static_cast<double>(hits[i]), band.upper) << i;
  }
}

TEST(ReviewSample, SampleForReviewPicksByIndex) {
  std::vector<std::string> day;
  for (int i = 0; i < 40; ++i) day.push_back("rec" + std::to_string(i));
  auto picked = sample_for_review(day, 10, 3);
  auto idx = sample_indices(40, 10, 3);
  ASSERT_EQ(picked.size(), 10u);
  for (std::size_t j = 0; j < 10; ++j) EXPECT_EQ(picked[j], day[idx[j]]);
}

// --- precision and conviction rate -----------------------------------------------------------------

TEST(Precision, AllTruePositivesOfTwenty) {
  auto e = precision_estimate(std::vector<HumanLabel>(20, HumanLabel::TP));
  EXPECT_DOUBLE_EQ(e.estimate, 1.0);
  EXPECT_NEAR(e.lower, 0.8389, 5e-5);
  auto o = oracle::wilson(20, 20, kWilsonZ95);
  EXPECT_NEAR(e.lower, o.lower, 1e-12);
  EXPECT_NEAR(e.upper, std::min(1.0, o.upper), 1e-12);
}

TEST(Precision, EightOfTen) {
  std::vector<HumanLabel> labels(8, HumanLabel::TP);
  labels.push_back(HumanLabel::FP);
  labels.push_back(HumanLabel::FP);
  auto e = precision_estimate(labels);
  EXPECT_DOUBLE_EQ(e.estimate, 0.8);
  EXPECT_EQ(e.tp, 8u);
  EXPECT_EQ(e.fp, 2u);
  auto o = oracle::wilson(8, 10, kWilsonZ95);
  EXPECT_NEAR(e.lower, o.lower, 1e-12);
  EXPECT_NEAR(e.upper, o.upper, 1e-12);
}

TEST(Precision, MatchesOracleOverAllCounts) {
  for (std::size_t n = 1; n <= 50; ++n) {
    for (std::size_t tp = 0; tp <= n; ++tp) {
      auto e = wilson(tp, n);
      auto o = oracle::wilson(static_cast<double>(tp), static_cast<double>(n), kWilsonZ95);
      EXPECT_NEAR(e.lower, std::max(0.0, o.lower), 1e-12);
      EXPECT_NEAR(e.upper, std::min(1.0, o.upper), 1e-12);
      EXPECT_LE(e.lower, e.estimate);
      EXPECT_GE(e.upper, e.estimate);
    }
  }
}

TEST(Precision, EmptyThrows) { EXPECT_THROW(precision_estimate({}), std::invalid_argument); }

TEST(ConvictionRate, Examples) {
  EXPECT_EQ(conviction_rate(std::vector<int>(10, 0)), 0.0);
  std::vector<int> one(10000, 0);
  one[42] = 1;
  EXPECT_DOUBLE_EQ(conviction_rate(one), 1e-4);
  EXPECT_EQ(conviction_rate(std::vector<int>(7, 1)), 1.0);
  EXPECT_THROW(conviction_rate(std::vector<int>{}), std::invalid_argument);
  Verdict pos;
  pos.label = 1;
  EXPECT_DOUBLE_EQ(conviction_rate(std::vector<Verdict>{pos, Verdict{}}), 0.5);
}

// --- feedback --------------------------------------------------------------------------------------

TEST(Feedback, KindsMapToLabels) {
  FeedbackStore store;
  auto fp = store.ingest(FeedbackKind::customer_fp, "a", {1, 0});
  EXPECT_EQ(fp.y, 0);
  EXPECT_EQ(fp.source, LabelSource::customer_fp);
  auto fn = store.ingest(FeedbackKind::customer_fn, "b", {0, 1});
  EXPECT_EQ(fn.y, 1);
  EXPECT_EQ(fn.source, LabelSource::customer_fn);
  EXPECT_EQ(store.size(), 2u);
}

TEST(Feedback, DuplicateRefUpdatesInPlace) {
  FeedbackStore store;
  store.ingest(FeedbackKind::customer_fp, "a", {1, 0});
  store.ingest(FeedbackKind::customer_fp, "b", {1, 1});
  store.ingest(FeedbackKind::customer_fn, "a", {0.5, 0});
  EXPECT_EQ(store.size(), 2u);
  auto a = store.find("a");
  ASSERT_TRUE(a);
  EXPECT_EQ(a->y, 1);
  EXPECT_EQ(store.labeled_vectors().front().d, (std::vector<double>{0.5, 0}));
  EXPECT_EQ(store.count(LabelSource::customer_fn), 1u);
  EXPECT_FALSE(store.find("zzz"));
}

TEST(Feedback, KindParsing) {
  EXPECT_EQ(parse_feedback_kind("customer_fp"), FeedbackKind::customer_fp);
  EXPECT_EQ(parse_feedback_kind("FN"), FeedbackKind::customer_fn);
  EXPECT_FALSE(parse_feedback_kind("maybe"));
}

}  // namespace

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "bec/classifier/logistic.hpp"
#include "oracles.hpp"

namespace {

using namespace bec;
using namespace bec::classifier;

const std::string kSource = BEC_SOURCE_DIR;

ClassifierModel model_of(std::vector<double> w, double t = 0.5) {
  ClassifierModel m;
  m.w = std::move(w);
  m.t = t;
  for (std::size_t i = 0; i < m.w.size(); ++i) m.names.push_back("type" + std::to_string(i));
  return m;
}

Verdict verdict(int label, double p, std::string version, std::vector<Contribution> c = {}) {
  Verdict v;
  v.label = label;
  v.probability = p;
  v.model_version = std::move(version);
  v.contributing = std::move(c);
  return v;
}

Verdict random_verdict(std::mt19937_64& rng) {
  // a coarse probability grid produces ties often, which is the hard case
  double p = static_cast<double>(rng() % 5) / 4.0;
  Verdict v = verdict(static_cast<int>(rng() % 2), p, "v" + std::to_string(rng() % 3));
  if (rng() % 2) v.contributing.push_back({rng() % 3, "x", static_cast<double>(rng() % 3) / 2.0, 1.0, {}});
  return v;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  Eigen::VectorXd e(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) e[static_cast<Eigen::Index>(i)] = v[i];
  return e;
}

std::vector<oracle::Sample> as_samples(const std::vector<LabeledVector>& data) {
  std::vector<oracle::Sample> out;
  for (const auto& s : data) out.push_back({s.d, s.y});
  return out;
}

// Labels drawn from a logistic model with weights `truth` over binary detection vectors.
std::vector<LabeledVector> synthetic(std::size_t n, const std::vector<double>& truth, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<LabeledVector> data;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledVector s;
    for (std::size_t j = 0; j < truth.size(); ++j) s.d.push_back(u(rng) < 0.5 ? 1.0 : u(rng));
    s.y = u(rng) < oracle::logistic(oracle::dot(truth, s.d)) ? 1 : 0;
    data.push_back(std::move(s));
  }
  return data;
}

// --- score / classify -----------------------------------------------------------

TEST(Score, ZeroWeightsGiveOneHalf) {
  EXPECT_DOUBLE_EQ(score({1, 0.3, 0.7}, model_of({0, 0, 0})), 0.5);
  EXPECT_DOUBLE_EQ(score({0, 0, 0}, model_of({2, -4, 1})), 0.5);
}

TEST(Score, HandComputedSigmoidOfOne) {
  std::vector<double> w(8, 0.0), d(8, 0.0);
  w[0] = 2;
  w[1] = -1;
  d[0] = d[1] = 1;
  EXPECT_NEAR(score(d, model_of(w)), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(score(d, model_of(w)), 0.7311, 5e-5);
}

TEST(Score, DimensionMismatchNamesBothManifestVersions) {
  auto m = model_of({1, 1, 1});
  m.manifest_version = "7";
  try {
    score({1, 1}, m, "3");
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("manifest version 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("manifest version 7"), std::string::npos) << msg;
  }
}

TEST(Score, MonotoneInEveryComponentForNonNegativeWeights) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 5000; ++i) {
    std::vector<double> w(8), d(8);
    for (auto& x : w) x = 3.0 * u(rng);
    for (auto& x : d) x = u(rng);
    auto m = model_of(w);
    const double base = score(d, m);
    std::size_t j = rng() % 8;
    d[j] = std::min(1.0, d[j] + u(rng));
    EXPECT_GE(score(d, m), base);
  }
}

TEST(Classify, ThresholdIsInclusive) {
  auto m = model_of({1.0});
  m.t = score({1.0}, m);
  auto v = classify(std::vector<double>{1.0}, m);
  EXPECT_EQ(v.probability, m.t);
  EXPECT_EQ(v.label, 1);
  m.t = std::nextafter(m.t, 1.0);
  EXPECT_EQ(classify(std::vector<double>{1.0}, m).label, 0);
}

TEST(Classify, EmptyVectorBelowThreshold) {
  auto v = classify(std::vector<double>(4, 0.0), model_of({1, 2, 3, 4}, 0.6));
  EXPECT_EQ(v.label, 0);
  EXPECT_TRUE(v.contributing.empty());
}

TEST(Classify, LabelFlipsWhenThresholdCrossesScore) {
  auto m = model_of({0.8, 0.4});
  const std::vector<double> d{1.0, 0.5};
  const double p = score(d, m);
  for (int k = 0; k <= 100; ++k) {
    m.t = k / 100.0;
    EXPECT_EQ(classify(d, m).label, p >= m.t ? 1 : 0);
  }
}

TEST(Classify, ContributingIsExactlyTheNonzeroDetections) {
  DetectionVector dv;
  dv.d = {0.0, 0.7, 0.0, 1.0};
  dv.detections = {{1, 0.7, {{"why", "rare"}}}, {3, 1.0, {{"why", "masquerade"}}}};
  auto v = classify(dv, model_of({-4, 1, 1.5, 2}));
  ASSERT_EQ(v.contributing.size(), 2u);
  EXPECT_EQ(v.contributing[0].type_id, 1u);
  EXPECT_EQ(v.contributing[0].weight, 1.0);
  EXPECT_EQ(v.contributing[0].metadata.at("why"), "rare");
  EXPECT_EQ(v.contributing[1].type_id, 3u);
}

// --- combine ------------------------------------------------------------------------

TEST(Combine, Examples) {
  auto a = verdict(0, 0.3, "a");
  EXPECT_EQ(combine({a}), a);
  EXPECT_EQ(combine({a, verdict(1, 0.2, "b")}).label, 1);
  auto both_below = combine({verdict(0, 0.3, "a"), verdict(0, 0.9, "b")});
  EXPECT_EQ(both_below.label, 0);
  EXPECT_EQ(both_below.probability, 0.9);
  EXPECT_EQ(both_below.model_version, "b");
  EXPECT_THROW(combine({}), std::invalid_argument);
}

TEST(Combine, IdempotentCommutativeAssociative) {
  std::mt19937_64 rng(43);
  for (int i = 0; i < 3000; ++i) {
    auto a = random_verdict(rng), b = random_verdict(rng), c = random_verdict(rng);
    EXPECT_EQ(combine({a, a}), combine({a}));
    EXPECT_EQ(combine({a, b}), combine({b, a}));
    EXPECT_EQ(combine({combine({a, b}), c}), combine({a, combine({b, c})}));
    EXPECT_EQ(combine({a, b, c}), combine({c, a, b}));
  }
}

// --- model files ------------------------------------------------------------------

TEST(ModelFile, ShippedModelLoadsAndRoundTrips) {
  auto m = load_model_file(kSource + "/data/model.txt");
  EXPECT_EQ(m.w.size(), 8u);
  EXPECT_EQ(m.t, 0.9);
  std::stringstream ss(serialize_model(m));
  auto back = load_model(ss);
  EXPECT_EQ(back.w, m.w);
  EXPECT_EQ(back.t, m.t);
  EXPECT_EQ(back.names, m.names);
  EXPECT_EQ(back.version, m.version);
}

TEST(ModelFile, RejectsGarbage) {
  std::stringstream ss("this is not a model\n");
  EXPECT_THROW(load_model(ss), std::runtime_error);
}

TEST(CompareWeights, Contract) {
  auto a = model_of({1, 2, 3});
  for (const auto& d : compare_weights(a, a)) EXPECT_EQ(d.delta, 0.0);
  auto b = a;
  b.w[1] = 2.5;
  auto diff = compare_weights(a, b);
  std::size_t nonzero = 0;
  for (const auto& d : diff) nonzero += d.delta != 0.0;
  EXPECT_EQ(nonzero, 1u);
  EXPECT_EQ(diff[0].type_id, 1u);
  EXPECT_DOUBLE_EQ(diff[0].delta, 0.5);
  b.w[2] = 1;
  diff = compare_weights(a, b);
  for (std::size_t i = 1; i < diff.size(); ++i) EXPECT_GE(std::abs(diff[i - 1].delta), std::abs(diff[i].delta));
  b.manifest_version = "2";
  EXPECT_THROW(compare_weights(a, b), std::invalid_argument);
}

// --- MAP estimate ------------------------------------------------------------------

TEST(MapObjective, ValueMatchesDefinition) {
  auto data = synthetic(40, {1.5, -1.0, 0.5}, 1);
  PriorSpec prior{{0.2, -0.3, 0.1}, {1.0, 2.0, 0.5}};
  Objective obj{data, prior};
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> w{u(rng), u(rng), u(rng)};
    EXPECT_NEAR(obj.value(to_eigen(w)), oracle::neg_log_posterior(as_samples(data), w, prior.w_b, prior.sigma_diag),
                1e-9);
  }
}

TEST(MapObjective, GradientMatchesCentralDifferences) {
  auto data = synthetic(60, {2.0, -1.0, 0.5, 1.0}, 3);
  PriorSpec prior{{0.5, 0.0, -0.5, 1.0}, {1.0, 0.3, 3.0, 10.0}};
  Objective obj{data, prior};
  auto f = [&](const std::vector<double>& w) { return obj.value(to_eigen(w)); };
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> w{u(rng), u(rng), u(rng), u(rng)};
    auto analytic = to_std(obj.gradient(to_eigen(w)));
    auto numeric = oracle::central_difference(f, w);
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double rel = std::abs(analytic[j] - numeric[j]) / std::max(1.0, std::abs(numeric[j]));
      EXPECT_LT(rel, 1e-5) << "component " << j;
    }
  }
}

TEST(MapEstimate, TinySigmaPinsWeightsToPrior) {
  auto data = synthetic(200, {3.0, -2.0, 1.0, 0.0, 2.0, -1.0, 1.0, 0.5}, 5);
  PriorSpec prior{{-4, 1, 1.5, 2, 2, 0.6, 0.4, 0.9}, std::vector<double>(8, 1e-6)};
  auto m = map_estimate(data, prior);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_LT(std::abs(m.w[j] - prior.w_b[j]), 1e-3);
}

TEST(MapEstimate, MatchesGridSearchOracle) {
  const std::vector<double> w_b{0.5, -0.5, 0.0};
  const std::vector<double> sigma{1.0, 1.0, 2.0};
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    auto data = synthetic(30, {2.0, -1.5, 1.0}, seed);
    auto m = map_estimate(data, {w_b, sigma});
    auto samples = as_samples(data);
    auto f = [&](const std::vector<double>& w) { return oracle::neg_log_posterior(samples, w, w_b, sigma); };
    auto coarse = oracle::grid_minimize(f, {0, 0, 0}, 5.0, 0.1);
    auto fine = oracle::grid_minimize(f, coarse, 0.2, 0.01);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(m.w[j], fine[j], 1e-2) << "seed " << seed << " w" << j;
  }
}

TEST(MapEstimate, LargeSigmaFitsSeparableData) {
  std::vector<LabeledVector> data;
  for (double a : {0.6, 0.8, 1.0}) {
    data.push_back({{a, 0.0}, 1});
    data.push_back({{0.0, a}, 0});
  }
  auto m = map_estimate(data, {{0.0, 0.0}, {1e3, 1e3}});
  for (const auto& s : data) EXPECT_EQ(score(s.d, m) >= 0.5 ? 1 : 0, s.y);
}

TEST(MapEstimate, SigmaSweepTradesFitForCloseness) {
  const std::vector<double> w_b{-1.0, 0.5, 0.5, 0.0};
  auto data = synthetic(300, {1.0, 2.0, -1.0, 1.5}, 21);
  double last_loss = std::numeric_limits<double>::infinity();
  double last_distance = 0.0;
  for (double sigma : {1e-4, 1e-3, 1e-2, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0}) {
    auto m = map_estimate(data, {w_b, std::vector<double>(4, sigma)});
    const double loss = log_loss(data, m.w);
    double distance = 0.0;
    for (std::size_t j = 0; j < 4; ++j) distance += (m.w[j] - w_b[j]) * (m.w[j] - w_b[j]);
    distance = std::sqrt(distance);
    EXPECT_LE(loss, last_loss + 1e-6) << "sigma " << sigma;
    EXPECT_GE(distance, last_distance - 1e-6) << "sigma " << sigma;
    last_loss = loss;
    last_distance = distance;
  }
}

TEST(MapEstimate, ThresholdCarriedOverUnlessOverridden) {
  auto data = synthetic(20, {1.0, 1.0}, 7);
  auto baseline = model_of({0.5, 0.5}, 0.9);
  EXPECT_EQ(map_update(baseline, data, 1.0, "v2").t, 0.9);
  MapConfig cfg;
  cfg.threshold = 0.7;
  EXPECT_EQ(map_estimate(data, {{0, 0}, {1, 1}}, cfg).t, 0.7);
}

TEST(MapEstimate, RejectsBadInput) {
  auto data = synthetic(10, {1.0, 1.0}, 8);
  EXPECT_THROW(map_estimate({}, {{0, 0}, {1, 1}}), std::invalid_argument);
  EXPECT_THROW(map_estimate(data, {{0, 0}, {1, 0}}), std::invalid_argument);
  EXPECT_THROW(map_estimate(data, {{0, 0}, {1, -2}}), std::invalid_argument);
  EXPECT_THROW(map_estimate(data, {{0, 0, 0}, {1, 1, 1}}), std::invalid_argument);
}

TEST(MapEstimate, NonConvergenceCarriesLastIterate) {
  auto data = synthetic(50, {2.0, -1.0}, 9);
  MapConfig cfg;
  cfg.max_iterations = 1;
  cfg.gradient_tolerance = 0.0;
  try {
    map_estimate(data, {{0, 0}, {1, 1}}, cfg);
    FAIL() << "expected MapConvergenceError";
  } catch (const MapConvergenceError& e) {
    EXPECT_EQ(e.last_iterate.size(), 2u);
    EXPECT_GT(e.gradient_norm, 0.0);
  }
}

TEST(MapEstimate, Deterministic) {
  auto data = synthetic(100, {1.0, -1.0, 2.0}, 10);
  auto a = map_estimate(data, {{0, 0, 0}, {1, 1, 1}});
  auto b = map_estimate(data, {{0, 0, 0}, {1, 1, 1}});
  EXPECT_EQ(a.w, b.w);
}

TEST(MakePrior, NewDetectorsStartAtZeroWithWiderSigma) {
  auto baseline = model_of({1.0, 2.0});
  baseline.names = {std::string(types::kFrequentCommunication), std::string(types::kRareCommunication)};
  auto prior = make_prior(baseline, default_manifest(), 1.0, 10.0);
  ASSERT_EQ(prior.w_b.size(), 8u);
  EXPECT_EQ(prior.w_b[0], 1.0);
  EXPECT_EQ(prior.w_b[1], 2.0);
  EXPECT_EQ(prior.sigma_diag[1], 1.0);
  for (std::size_t j = 2; j < 8; ++j) {
    EXPECT_EQ(prior.w_b[j], 0.0);
    EXPECT_EQ(prior.sigma_diag[j], 10.0);
  }
}

}  // namespace

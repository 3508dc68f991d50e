#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <random>
#include <sstream>
#include <thread>

#include "bec/mailgraph/mail_graph.hpp"
#include "oracles.hpp"

namespace {

using namespace bec::mailgraph;

GraphUpdate update(const std::string& sender, const std::string& recipient, Day day) {
  return {sender, {recipient}, org_of(recipient), day};
}

TEST(MailGraph, EmptyBatchTouchesNothing) {
  MailGraph g;
  std::vector<GraphUpdate> none;
  auto s = g.record_emails(none);
  EXPECT_EQ(s.edges_touched, 0u);
  EXPECT_EQ(s.updates_applied, 0u);
}

TEST(MailGraph, SingleEmailIncrementsAllScopes) {
  MailGraph g;
  auto s = g.record_email(update("s@x.example", "r1@corp.example", 10));
  EXPECT_EQ(s.edges_touched, 3u);
  auto ctx = g.get_context("s@x.example", "r1@corp.example", "corp.example", 10);
  EXPECT_EQ(ctx.user_edge.total_count, 1u);
  EXPECT_EQ(ctx.user_edge.distinct_active_days, 1u);
  EXPECT_EQ(ctx.org_edge.total_count, 1u);
  EXPECT_EQ(ctx.global_sender.total_count, 1u);
  EXPECT_EQ(ctx.user_edge.first_seen_day, 10);
  EXPECT_EQ(ctx.user_edge.last_seen_day, 10);
}

TEST(MailGraph, UnknownSenderIsAllZero) {
  MailGraph g;
  g.record_email(update("s@x.example", "r1@corp.example", 10));
  auto ctx = g.get_context("nobody@y.example", "r1@corp.example", "corp.example", 10);
  EXPECT_TRUE(ctx.user_edge.empty());
  EXPECT_TRUE(ctx.org_edge.empty());
  EXPECT_TRUE(ctx.global_sender.empty());
}

// Three emails: two to r1 in corp, one to someone at other.example.
// Hand count: user(r1)=2, user(r2)=0, org(corp)=2, global=3.
TEST(MailGraph, ScopesOnThreeEmailFixture) {
  MailGraph g;
  std::vector<GraphUpdate> batch = {update("s@x.example", "r1@corp.example", 4),
                                    update("s@x.example", "r1@corp.example", 5),
                                    update("s@x.example", "q@other.example", 5)};
  g.record_emails(batch);
  auto r1 = g.get_context("s@x.example", "r1@corp.example", "corp.example", 5);
  auto r2 = g.get_context("s@x.example", "r2@corp.example", "corp.example", 5);
  EXPECT_EQ(r1.user_edge.total_count, 2u);
  EXPECT_EQ(r1.user_edge.distinct_active_days, 2u);
  EXPECT_EQ(r2.user_edge.total_count, 0u);
  EXPECT_EQ(r2.org_edge.total_count, 2u);
  EXPECT_EQ(r2.global_sender.total_count, 3u);
}

// Five emails on day 10. Replaying the rule by hand: a bucket on day b is
// visible on day q iff b <= q and q - b < W. At q = 10 + W + 1 nothing is.
TEST(MailGraph, WindowEvictsOldBuckets) {
  const int W = 30;
  MailGraph g(Config{.window_days = W});
  for (int i = 0; i < 5; ++i) g.record_email(update("s@x.example", "r@corp.example", 10));
  EXPECT_EQ(g.get_context("s@x.example", "r@corp.example", "corp.example", 10).user_edge.total_count, 5u);
  EXPECT_EQ(g.get_context("s@x.example", "r@corp.example", "corp.example", 10 + W - 1).user_edge.total_count, 5u);
  EXPECT_EQ(g.get_context("s@x.example", "r@corp.example", "corp.example", 10 + W).user_edge.total_count, 0u);
  auto late = g.get_context("s@x.example", "r@corp.example", "corp.example", 10 + W + 1);
  EXPECT_EQ(late.user_edge.total_count, 0u);
  EXPECT_EQ(late.org_edge.total_count, 0u);
  EXPECT_EQ(late.global_sender.total_count, 0u);

  // advancing the clock with other traffic physically drops the old buckets
  g.record_email(update("other@y.example", "r@corp.example", 10 + W + 1));
  EXPECT_EQ(g.edge_count(), 3u);
}

TEST(MailGraph, AddressNormalization) {
  EXPECT_EQ(normalize_address(" John.Doe+news@Example.COM "), "john.doe@example.com");
  EXPECT_EQ(normalize_address("+x@a.b"), "+x@a.b");
  EXPECT_EQ(org_of("Bob@Company.com"), "company.com");
  MailGraph g;
  g.record_email(update("A+tag@X.example", "R@corp.example", 1));
  EXPECT_EQ(g.get_context("a@x.example", "r@corp.example", "corp.example", 1).user_edge.total_count, 1u);
}

TEST(StabilityScore, EmptyIsZero) { EXPECT_EQ(stability_score({}, 0), 0.0); }

TEST(StabilityScore, FiveOverFiveDaysBeatsOneDayBurst) {
  std::map<Day, std::uint64_t> spread{{1, 1}, {2, 1}, {3, 1}, {4, 1}, {5, 1}};
  std::map<Day, std::uint64_t> burst{{5, 5}};
  EXPECT_GT(stability_score(EdgeStats::from_buckets(spread), 5), stability_score(EdgeStats::from_buckets(burst), 5));
}

TEST(StabilityScore, SaturatesAtOne) {
  const int W = 30;
  std::map<Day, std::uint64_t> daily;
  std::vector<std::pair<long, long>> hand;
  for (Day d = 1; d <= W; ++d) {
    daily[d] = 10;
    hand.emplace_back(d, 10);
  }
  EXPECT_DOUBLE_EQ(oracle::stability(hand, W, W), 1.0);
  EXPECT_DOUBLE_EQ(stability_score(EdgeStats::from_buckets(daily), W), 1.0);
}

TEST(StabilityScore, MatchesFormulaOnRandomStats) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 2000; ++i) {
    std::map<Day, std::uint64_t> b;
    std::vector<std::pair<long, long>> hand;
    const int n = static_cast<int>(rng() % 12);
    for (int k = 0; k < n; ++k) {
      Day d = static_cast<Day>(rng() % 60);
      std::uint64_t c = 1 + rng() % 6;
      b[d] += c;
      hand.emplace_back(d, static_cast<long>(c));
    }
    Day today = static_cast<Day>(rng() % 70);
    EXPECT_NEAR(stability_score(EdgeStats::from_buckets(b), today), oracle::stability(hand, today, 30), 1e-15);
  }
}

// At fixed total count, spreading the same emails over more days never
// lowers the score.
TEST(StabilityScore, MonotoneInActiveDays) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t total = 1 + rng() % 40;
    const std::uint64_t days_a = 1 + rng() % std::min<std::uint64_t>(total, 30);
    const std::uint64_t days_b = days_a + rng() % (std::min<std::uint64_t>(total, 30) - days_a + 1);
    auto spread = [&](std::uint64_t days) {
      std::map<Day, std::uint64_t> b;
      for (std::uint64_t k = 0; k < total; ++k) b[static_cast<Day>(100 - static_cast<Day>(k % days))] += 1;
      return EdgeStats::from_buckets(b);
    };
    EXPECT_LE(stability_score(spread(days_a), 100), stability_score(spread(days_b), 100) + 1e-15);
  }
}

TEST(EdgeStats, InvariantsHold) {
  std::mt19937_64 rng(29);
  MailGraph g;
  std::vector<GraphUpdate> batch;
  for (int i = 0; i < 400; ++i) {
    batch.push_back(update("s" + std::to_string(rng() % 4) + "@x.example",
                           "r" + std::to_string(rng() % 5) + "@" + (rng() % 2 ? "a.example" : "b.example"),
                           static_cast<Day>(rng() % 50)));
  }
  g.record_emails(batch);
  for (int s = 0; s < 4; ++s) {
    for (int r = 0; r < 5; ++r) {
      for (const char* org : {"a.example", "b.example"}) {
        auto ctx = g.get_context("s" + std::to_string(s) + "@x.example", "r" + std::to_string(r) + "@" + org, org, 49);
        for (const EdgeStats* e : {&ctx.user_edge, &ctx.org_edge, &ctx.global_sender}) {
          std::uint64_t sum = 0;
          for (auto [d, c] : e->daily_counts) sum += c;
          EXPECT_EQ(e->total_count, sum);
          EXPECT_EQ(e->distinct_active_days, e->daily_counts.size());
          EXPECT_LE(e->daily_counts.size(), 30u);
        }
        EXPECT_LE(ctx.user_edge.total_count, ctx.org_edge.total_count);
        EXPECT_LE(ctx.org_edge.total_count, ctx.global_sender.total_count);
      }
    }
  }
}

TEST(MailGraph, BatchedEqualsUnbatched) {
  std::mt19937_64 rng(31);
  std::vector<GraphUpdate> batch;
  for (int i = 0; i < 500; ++i) {
    batch.push_back(update("s" + std::to_string(rng() % 6) + "@x.example", "r" + std::to_string(rng() % 6) + "@corp.example",
                           static_cast<Day>(rng() % 45)));
  }
  MailGraph one, many;
  one.record_emails(batch);
  for (const auto& u : batch) many.record_email(u);
  EXPECT_TRUE(one == many);
  // and order within the batch does not matter either
  std::shuffle(batch.begin(), batch.end(), rng);
  MailGraph shuffled;
  shuffled.record_emails(batch);
  EXPECT_TRUE(one == shuffled);
}

TEST(MailGraph, SnapshotRoundTrip) {
  MailGraph g;
  for (Day d = 1; d <= 12; ++d) g.record_email(update("s@x.example", "r@corp.example", d));
  g.record_email({"t@y.example", {"a@corp.example", "b@corp.example"}, "corp.example", 12});
  std::stringstream ss;
  g.save_snapshot(ss);
  MailGraph restored;
  restored.load_snapshot(ss);
  EXPECT_TRUE(g == restored);
  EXPECT_EQ(restored.sequence(), g.sequence());
}

TEST(MailGraph, MalformedSnapshotThrows) {
  std::stringstream ss("edge\tuser\ts\n");
  MailGraph g;
  EXPECT_THROW(g.load_snapshot(ss), std::runtime_error);
}

TEST(MailGraph, UpdateLogReplay) {
  std::stringstream log;
  std::vector<GraphUpdate> ups = {update("s@x.example", "r@corp.example", 3), update("s@x.example", "q@corp.example", 4)};
  for (const auto& u : ups) log << format_update_line(u) << "\n";
  log << "garbage line\n";
  MailGraph replayed, direct;
  std::size_t skipped = 0;
  EXPECT_EQ(replay_update_log(replayed, log, &skipped), 2u);
  EXPECT_EQ(skipped, 1u);
  direct.record_emails(ups);
  EXPECT_TRUE(replayed == direct);
}

TEST(MailGraph, UpdatesForEmailGroupByOrg) {
  auto ups = updates_for_email("S@x.example", {"a@corp.example", "B@corp.example", "c@other.example", "bad"}, 7);
  ASSERT_EQ(ups.size(), 2u);
  EXPECT_EQ(ups[0].recipient_org, "corp.example");
  EXPECT_EQ(ups[0].recipients, (std::vector<std::string>{"a@corp.example", "b@corp.example"}));
  EXPECT_EQ(ups[1].recipient_org, "other.example");
}

TEST(BatchWriter, ConcurrentReadersSeeConsistentCounts) {
  MailGraph g(Config{.window_days = 30, .batch_interval_ms = 1});
  {
    BatchWriter writer(g);
    std::atomic<bool> done{false};
    std::thread reader([&] {
      while (!done) {
        auto ctx = g.get_context("s@x.example", "r@corp.example", "corp.example", 5);
        ASSERT_LE(ctx.user_edge.total_count, ctx.org_edge.total_count);
        ASSERT_LE(ctx.org_edge.total_count, ctx.global_sender.total_count);
      }
    });
    for (int i = 0; i < 2000; ++i) writer.enqueue(update("s@x.example", i % 2 ? "r@corp.example" : "q@corp.example", 5));
    writer.flush();
    done = true;
    reader.join();
  }
  EXPECT_EQ(g.get_context("s@x.example", "r@corp.example", "corp.example", 5).org_edge.total_count, 2000u);
}

}  // namespace

#include <gtest/gtest.h>

#include <cmath>

#include "oracle.hpp"
#include "vbt/corpus.hpp"
#include "vbt/random.hpp"

namespace vbt {
namespace {

ProgramDef triple_writer() {
  ProgramDef p("triple");
  const VarId a = p.global("a");
  p.global("unused");
  p.add_thread([a](ThreadCtx& ctx) -> Task<> {
    for (int i = 0; i < 3; ++i) co_await ctx.write(a, i);
  });
  return p;
}

// a is accessed twice, or four times if the flag is already set.
ProgramDef branchy() {
  ProgramDef p("branchy");
  const VarId a = p.global("a");
  const VarId flag = p.global("flag");
  p.add_thread([a, flag](ThreadCtx& ctx) -> Task<> {
    const Value f = co_await ctx.read(flag);
    const int n = f ? 4 : 2;
    for (int i = 0; i < n; ++i) co_await ctx.read(a);
  });
  p.add_thread([flag](ThreadCtx& ctx) -> Task<> { co_await ctx.write(flag, 1); });
  return p;
}

TEST(Profile, CountsDeterministicAccesses) {
  const ProgramDef p = triple_writer();
  const auto prof = estimate_access_profile(p, 3);
  EXPECT_EQ(prof.of(*p.find_site("a")), 3u);
  EXPECT_EQ(prof.of(*p.find_site("unused")), 0u);
  EXPECT_EQ(prof.sites(), 2);
  EXPECT_EQ(prof.total(), 3u);
}

TEST(Profile, TakesMaximumOverRuns) {
  const ProgramDef p = branchy();
  // brute force: the largest count any interleaving produces
  std::uint64_t most = 0;
  const SiteId a = *p.find_site("a");
  testing::for_each_interleaving(p, [&](const testing::Interleaving& it) {
    std::uint64_t n = 0;
    for (const auto& e : it.trace) n += e.var && e.var->site == a;
    most = std::max(most, n);
  });
  EXPECT_EQ(most, 4u);
  EXPECT_EQ(estimate_access_profile(p, 2).of(a), most);
}

TEST(Profile, RejectsZeroRuns) { EXPECT_THROW(estimate_access_profile(triple_writer(), 0), std::invalid_argument); }

TEST(Pct, DepthOneHasNoChangePoints) {
  const ProgramDef p = programs::fig2();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto r = pct_run(p, 10, 1, s);
    EXPECT_TRUE(r.plan.points.empty());
    EXPECT_EQ(r.result.c_used, 0);
    std::vector<Priority> sorted = r.initial_priorities;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, (std::vector<Priority>{1, 2}));
  }
}

TEST(Pct, ChangePointsAreDistinctAndInRange) {
  const ProgramDef p = programs::fig9();
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto r = pct_run(p, 12, 4, s);
    ASSERT_EQ(r.plan.points.size(), 3u);
    std::set<std::uint64_t> when;
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_GE(r.plan.points[i].when, 1u);
      EXPECT_LE(r.plan.points[i].when, 12u);
      EXPECT_EQ(r.plan.points[i].priority, static_cast<Priority>(i + 1));
      when.insert(r.plan.points[i].when);
    }
    EXPECT_EQ(when.size(), 3u);
    std::vector<Priority> sorted = r.initial_priorities;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, (std::vector<Priority>{4, 5, 6}));
  }
}

double hit_rate(int trials, const std::function<bool(std::uint64_t)>& run) {
  int hits = 0;
  for (int i = 0; i < trials; ++i) hits += run(static_cast<std::uint64_t>(i));
  return static_cast<double>(hits) / trials;
}

double three_sigma(double p, int trials) { return 3 * std::sqrt(p * (1 - p) / trials); }

TEST(Pct, Fig1DepthOneMeetsBound) {
  const ProgramDef p = programs::fig1();
  const int trials = 4000;
  const double rate = hit_rate(trials, [&](std::uint64_t s) { return pct_run(p, 1, 1, s).result.buggy(); });
  const double bound = pct_bound(2, 1, 1);
  EXPECT_DOUBLE_EQ(bound, 0.5);
  EXPECT_GE(rate, bound - three_sigma(bound, trials));
}

TEST(Pct, Fig2DepthTwoMeetsBound) {
  const ProgramDef p = programs::fig2();
  const auto k = estimate_access_profile(p, 4).max_steps;
  const int trials = 4000;
  const double rate = hit_rate(trials, [&](std::uint64_t s) { return pct_run(p, k, 2, s).result.buggy(); });
  const double bound = pct_bound(2, k, 2);
  EXPECT_GE(rate, bound - three_sigma(bound, trials));
}

TEST(Pctvb, Fig2ConditionedOnAMeetsBound) {
  const ProgramDef p = programs::fig2();
  const auto prof = estimate_access_profile(p, 4);
  const SiteId a = *p.find_site("a");
  const int trials = 4000;
  const double rate = hit_rate(trials, [&](std::uint64_t s) {
    return pctvb_run(p, 2, 1, prof, s, std::vector<SiteId>{a}).result.buggy();
  });
  const double bound = pctvb_bound(2, {prof.of(a)}, 2);
  EXPECT_GE(rate, bound - three_sigma(bound, trials));
}

TEST(Pctvb, SingleVariableChangePointsAreUniformOverItsAccesses) {
  const ProgramDef p = triple_writer();
  const auto prof = estimate_access_profile(p, 1);
  std::vector<int> hist(4, 0);
  const int trials = 6000;
  for (int s = 0; s < trials; ++s) {
    const auto r = pctvb_run(p, 2, 1, prof, static_cast<std::uint64_t>(s) + 1000, std::vector<SiteId>{*p.find_site("a")});
    ASSERT_EQ(r.plan.points.size(), 1u);
    ++hist[r.plan.points[0].when];
    EXPECT_EQ(r.plan.points[0].site, *p.find_site("a"));
  }
  EXPECT_EQ(hist[0], 0);
  for (int j = 1; j <= 3; ++j) EXPECT_NEAR(hist[j], trials / 3.0, 3 * std::sqrt(trials * (1.0 / 3) * (2.0 / 3)));
}

TEST(Pctvb, UnaccessedChosenSiteNeverFires) {
  const ProgramDef p = triple_writer();
  const auto prof = estimate_access_profile(p, 1);
  const auto r = pctvb_run(p, 3, 1, prof, 5, std::vector<SiteId>{*p.find_site("unused")});
  EXPECT_TRUE(r.plan.points.empty());
  EXPECT_FALSE(r.result.buggy());
}

TEST(Bounds, PctExamples) {
  EXPECT_DOUBLE_EQ(pct_bound(2, 4, 2), 1.0 / 8);
  EXPECT_DOUBLE_EQ(pct_bound(7, 123, 1), 1.0 / 7);
  EXPECT_DOUBLE_EQ(pct_bound(1, 10, 3), 1.0 / 100);
  EXPECT_THROW(pct_bound(0, 1, 1), std::invalid_argument);
}

TEST(Bounds, PctvbExamples) {
  EXPECT_DOUBLE_EQ(pctvb_bound(2, {2}, 2), 1.0 / 4);
  EXPECT_DOUBLE_EQ(pctvb_bound(3, {4, 6}, 3), pct_bound(3, 10, 3));
  EXPECT_DOUBLE_EQ(full_bound(2, 4, 1, {2}, 2), 1.0 / 16);
}

// Property: bounds are probabilities and the all-variable case is PCT's.
TEST(Bounds, AreProbabilities) {
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const int n = 1 + static_cast<int>(rng.below(6));
    const int d = 1 + static_cast<int>(rng.below(4));
    std::vector<std::uint64_t> ks;
    const int q = 1 + static_cast<int>(rng.below(5));
    for (int j = 0; j < q; ++j) ks.push_back(1 + rng.below(20));
    std::uint64_t k = 0;
    for (auto x : ks) k += x;
    for (double b : {pct_bound(n, k, d), pctvb_bound(n, ks, d), full_bound(n, q, 1, {ks[0]}, d)}) {
      EXPECT_GT(b, 0.0);
      EXPECT_LE(b, 1.0);
    }
    EXPECT_DOUBLE_EQ(pctvb_bound(n, ks, d), pct_bound(n, k, d));
    EXPECT_DOUBLE_EQ(full_bound(n, q, q, ks, d), pct_bound(n, k, d));
  }
}

TEST(Jensen, Examples) {
  const auto a = jensen_compare(std::vector<std::uint64_t>{1, 3});
  EXPECT_DOUBLE_EQ(a.e1, 1.0 / 4);
  EXPECT_DOUBLE_EQ(a.e2, 1.0 / 3);
  const auto b = jensen_compare(std::vector<std::uint64_t>{5, 5, 5, 5});
  EXPECT_NEAR(b.e1, b.e2, 1e-15);
  const auto c = jensen_compare(std::vector<std::uint64_t>{1, 99});
  EXPECT_GT(c.e2, 20 * c.e1);
}

TEST(Jensen, ZeroSitesExcluded) {
  const auto a = jensen_compare(std::vector<std::uint64_t>{1, 0, 3});
  EXPECT_DOUBLE_EQ(a.e1, 1.0 / 4);
  EXPECT_DOUBLE_EQ(a.e2, 1.0 / 3);
  EXPECT_THROW(jensen_compare(std::vector<std::uint64_t>{0, 0}), std::invalid_argument);
}

// Property: E1 <= E2 for every positive profile.
TEST(Jensen, FirstNeverExceedsSecond) {
  Rng rng(31);
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::uint64_t> k(1 + rng.below(8));
    for (auto& x : k) x = 1 + rng.below(1000);
    const auto j = jensen_compare(k);
    EXPECT_LE(j.e1, j.e2 * (1 + 1e-12));
  }
}

TEST(VbHelps, Examples) {
  EXPECT_TRUE(vb_helps(100, 1, 3, 1.0));
  EXPECT_FALSE(vb_helps(100, 2, 3, 1.0));
  EXPECT_FALSE(vb_helps(10, 3, 4, 1.0));
  EXPECT_TRUE(vb_helps(5, 1, 2, 0.5));
  EXPECT_THROW(vb_helps(5, 1, 2, 0.0), std::invalid_argument);
}

TEST(Experiment, BugFreeProgramTimesOut) {
  const ProgramDef p = programs::uniform_access();
  for (const auto& s : {Strategy::pct(2), Strategy::pctvb(2, 1), Strategy::exhaustive_bounded(1, 1, 2)}) {
    const auto r = executions_to_bug(p, s, 30, 3, 1);
    EXPECT_TRUE(r.all_timed_out()) << to_string(s);
    EXPECT_FALSE(r.mean_found().has_value());
    EXPECT_DOUBLE_EQ(r.mean_censored(), 30.0);
  }
}

TEST(Experiment, ShallowBugFoundQuickly) {
  const ProgramDef p = make_planted(0, 0, 2);
  for (const auto& s : {Strategy::pct(1), Strategy::exhaustive_bounded(0, 0, 2), Strategy::exhaustive_unbounded(0)}) {
    const auto r = executions_to_bug(p, s, 1000, 50, 4);
    EXPECT_EQ(r.timed_out(), 0) << to_string(s);
    ASSERT_TRUE(r.mean_found().has_value());
    EXPECT_LT(*r.mean_found(), 10.0) << to_string(s);
  }
}

TEST(Experiment, CsvRows) {
  const auto r = executions_to_bug(programs::fig1(), Strategy::pct(1), 50, 3, 2);
  const std::string csv = r.csv();
  EXPECT_EQ(csv.rfind("trial,executions,found\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(Experiment, SameSeedSameResult) {
  const ProgramDef p = programs::fig2();
  const auto a = executions_to_bug(p, Strategy::pctvb(2, 1), 200, 5, 9);
  const auto b = executions_to_bug(p, Strategy::pctvb(2, 1), 200, 5, 9);
  EXPECT_EQ(a.csv(), b.csv());
}

}  // namespace
}  // namespace vbt

#include <gtest/gtest.h>

#include "oracle.hpp"
#include "vbt/corpus.hpp"

namespace vbt {

void PrintTo(const Signature& s, std::ostream* os) { *os << to_string(s); }

namespace {

ExecutionResult run_choices(const ProgramDef& p, const std::vector<ThreadId>& choices) {
  return replay(p, testing::schedule_of(p, choices));
}

TEST(Corpus, Fig1IncrementBeforeAssertFails) {
  const auto r = run_choices(programs::fig1(), {1, 1, 1, 0, 0, 0});
  EXPECT_EQ(r.bug_id(), "assert:a==0");
}

TEST(Corpus, Fig9NeedsBothIncrementsInside) {
  const ProgramDef p = programs::fig9();
  // a changes between the reads of a, b does not change between the reads of b
  const auto pass = run_choices(p, {0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 2, 2, 2});
  EXPECT_FALSE(pass.buggy());
  const auto fail = run_choices(p, {0, 0, 1, 1, 1, 0, 0, 2, 2, 2, 0, 0});
  EXPECT_EQ(fail.bug_id(), "assert:t1==t2||t3==t4");
}

TEST(Corpus, CatalogNamesAreUniqueAndFindable) {
  std::set<std::string> names;
  for (const auto& e : corpus_catalog()) {
    EXPECT_TRUE(names.insert(e.name).second) << e.name;
    EXPECT_EQ(find_corpus_entry(e.name), &e);
    EXPECT_FALSE(e.note.empty());
  }
  EXPECT_EQ(find_corpus_entry("nope"), nullptr);
  for (const char* required : {"fig1", "fig2", "fig3", "fig4", "fig7", "fig8", "fig9", "allocation-vector",
                               "pctf-pair"}) {
    EXPECT_NE(find_corpus_entry(required), nullptr) << required;
  }
}

// Ground truth: every catalog entry classifies to its recorded signature.
TEST(Corpus, CatalogSignaturesReproduce) {
  for (const auto& e : corpus_catalog()) {
    const auto got = classify_bug(e.make(), {2, 2, 3});
    if (!e.expected) {
      EXPECT_FALSE(got.has_value()) << e.name;
      continue;
    }
    ASSERT_TRUE(got.has_value()) << e.name;
    EXPECT_EQ(got->signature, *e.expected) << e.name << " got " << to_string(got->signature);
  }
}

TEST(Corpus, BugFreeControlsHaveNoBuggyInterleaving) {
  for (const auto& p : {programs::locked_counter(), programs::producer_consumer()}) {
    EXPECT_TRUE(testing::brute_force_bugs(p).empty()) << p.name();
  }
}

// Too many interleavings to enumerate, but readers never conflict, so the
// unbounded pruned search covers it.
TEST(Corpus, UniformAccessHasNoBuggySchedule) {
  const ProgramDef p = programs::uniform_access();
  ExplorationConfig cfg;
  cfg.order_mode = OrderMode::Exhaustive;
  cfg.c_max = 16;
  cfg.v = 16;
  cfg.t = p.max_threads();
  const auto r = explore(p, TrackedSet::all(), cfg);
  EXPECT_FALSE(r.bug_found());
  EXPECT_GT(r.schedules_pruned, 0u);
}

// Property: every corpus program stays within the action ceiling.
TEST(Corpus, TerminatesUnderRandomSchedules) {
  for (const auto& e : corpus_catalog()) {
    const ProgramDef p = e.make();
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto r = testing::random_run(p, s);
      EXPECT_LT(r.trace.size(), kDefaultStepLimit) << e.name;
      EXPECT_TRUE(r.buggy() || r.trace.back().kind == ActionKind::Halt || r.deadlocked) << e.name;
    }
  }
}

class PlantedTemplate : public ::testing::TestWithParam<Signature> {};

TEST_P(PlantedTemplate, ClassifiesToItsOwnSignature) {
  const Signature s = GetParam();
  const ProgramDef p = make_planted(s.c, s.v, s.t);
  const auto got = classify_bug(p, {s.c, s.v, std::max(s.t, 3)});
  ASSERT_TRUE(got.has_value()) << to_string(s);
  EXPECT_EQ(got->signature, s);
}

INSTANTIATE_TEST_SUITE_P(Supported, PlantedTemplate,
                         ::testing::Values(Signature{0, 0, 2}, Signature{0, 0, 3}, Signature{0, 0, 4},
                                           Signature{1, 1, 2}, Signature{1, 1, 3}, Signature{2, 1, 2},
                                           Signature{2, 2, 2}, Signature{2, 2, 3}),
                         [](const auto& info) {
                           return "c" + std::to_string(info.param.c) + "v" + std::to_string(info.param.v) + "t" +
                                  std::to_string(info.param.t);
                         });

TEST(Planted, DecoysKeepSignature) {
  PlantOptions opt;
  opt.decoys = 3;
  const ProgramDef p = make_planted(2, 1, 2, opt);
  EXPECT_EQ(p.name(), "planted:2,1,2:3");
  const auto got = classify_bug(p, {2, 2, 2});
  ASSERT_TRUE(got.has_value());
  EXPECT_EQ(got->signature, (Signature{2, 1, 2}));
}

TEST(Planted, ExtraThreadsAddThreads) {
  PlantOptions opt;
  opt.extra_threads = 3;
  EXPECT_EQ(make_planted(1, 1, 2, opt).max_threads(), 5);
}

TEST(Planted, UnsupportedTuples) {
  EXPECT_THROW(make_planted(3, 1, 2), Unsupported);
  EXPECT_THROW(make_planted(1, 2, 2), Unsupported);
  EXPECT_THROW(make_planted(0, 0, 6), Unsupported);
  EXPECT_THROW(make_planted_from_spec("2;1;2"), std::invalid_argument);
  EXPECT_EQ(make_planted_from_spec("0,0,3").max_threads(), 3);
  EXPECT_EQ(make_planted_from_spec("2,1,2:20").globals().size(), 21u);
}

TEST(Frequencies, Fig1AccessesATwice) {
  const ProgramDef p = programs::fig1();
  const auto prof = profile_access_frequencies(p, 4);
  EXPECT_DOUBLE_EQ(prof.mean_accesses.at(*p.find_site("a")), 2.0);
}

TEST(Frequencies, PctfPairShowsTwoFrequencies) {
  const ProgramDef p = programs::pctf_pair(0.1);
  const auto prof = profile_access_frequencies(p, 4);
  const double x = prof.mean_accesses.at(*p.find_site("x"));
  const double y = prof.mean_accesses.at(*p.find_site("y"));
  EXPECT_DOUBLE_EQ(x, 3.0);
  EXPECT_DOUBLE_EQ(y, 30.0);
  int occupied = 0;
  for (const auto& b : prof.buckets) occupied += !b.sites.empty();
  EXPECT_EQ(occupied, 2);
}

TEST(Frequencies, UniformAccessIsOneBucket) {
  const auto prof = profile_access_frequencies(programs::uniform_access(), 3);
  ASSERT_EQ(prof.buckets.size(), 1u);
  EXPECT_EQ(prof.buckets[0].sites.size(), 3u);
}

}  // namespace
}  // namespace vbt

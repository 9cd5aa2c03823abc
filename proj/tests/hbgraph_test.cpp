#include <gtest/gtest.h>

#include <map>

#include "oracle.hpp"
#include "vbt/corpus.hpp"
#include "vbt/hbgraph.hpp"

namespace vbt {
namespace {

using testing::for_each_interleaving;
using testing::Interleaving;

std::vector<TraceEntry> trace_of(const ProgramDef& p, const std::vector<ThreadId>& choices) {
  Machine m(p);
  for (ThreadId t : choices) m.step(t);
  return m.trace();
}

HBKey incremental_key(const std::vector<TraceEntry>& trace) {
  HbKeyBuilder b;
  for (const auto& e : trace) b.add(e);
  return b.key();
}

TEST(HbGraph, SingleThreadHasNoEdges) {
  ProgramDef p("solo");
  const VarId a = p.global("a");
  p.add_thread([a](ThreadCtx& ctx) -> Task<> {
    co_await ctx.write(a, 1);
    co_await ctx.read(a);
    co_await ctx.fetch_add(a, 2);
  });
  const auto g = build_hb_graph(trace_of(p, {0, 0, 0, 0, 0}));
  EXPECT_TRUE(g.edges.empty());
  EXPECT_EQ(g.node_count(), 5u);
}

TEST(HbGraph, Fig1IncrementFirstGivesOneEdge) {
  const ProgramDef p = programs::fig1();
  const auto g = build_hb_graph(trace_of(p, {1, 1, 1, 0, 0, 0}));
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0].from, (HbNode{1, 1}));
  EXPECT_EQ(g.edges[0].to, (HbNode{0, 1}));
}

TEST(HbGraph, ConcurrentReadersHaveNoEdges) {
  ProgramDef p("readers");
  const VarId a = p.global("a");
  for (int i = 0; i < 2; ++i) p.add_thread([a](ThreadCtx& ctx) -> Task<> { co_await ctx.read(a); });
  const auto g = build_hb_graph(trace_of(p, {0, 1, 0, 1, 0, 1}));
  EXPECT_TRUE(g.edges.empty());
}

TEST(HbGraph, LockOperationsConflict) {
  const ProgramDef p = programs::abba_deadlock();
  // thread 0 runs to completion, then thread 1
  const auto g = build_hb_graph(trace_of(p, {0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1}));
  EXPECT_FALSE(g.edges.empty());
  for (const auto& e : g.edges) {
    EXPECT_EQ(e.from.thread, 0);
    EXPECT_EQ(e.to.thread, 1);
  }
}

TEST(HbKey, Fig1SameOrderOnAEqualKeys) {
  const ProgramDef p = programs::fig1();
  const auto a = trace_of(p, {1, 1, 1, 0, 0, 0});
  const auto b = trace_of(p, {0, 1, 1, 0, 1, 0});
  EXPECT_EQ(canonical_key(build_hb_graph(a)), canonical_key(build_hb_graph(b)));
  EXPECT_EQ(incremental_key(a), incremental_key(b));
}

TEST(HbKey, Fig1OppositeOrdersDiffer) {
  const ProgramDef p = programs::fig1();
  const auto a = trace_of(p, {1, 1, 1, 0, 0, 0});
  const auto b = trace_of(p, {0, 0, 0, 0, 1, 1, 1});
  EXPECT_NE(canonical_key(build_hb_graph(a)), canonical_key(build_hb_graph(b)));
  EXPECT_NE(incremental_key(a), incremental_key(b));
}

TEST(HbKey, EmptyTraceSentinel) {
  EXPECT_EQ(canonical_key(build_hb_graph({})), empty_hb_key());
  EXPECT_EQ(canonical_key(HBGraph{}), empty_hb_key());
  EXPECT_EQ(HbKeyBuilder{}.key(), HbKeyBuilder{}.key());
}

std::vector<ProgramDef> small_programs() {
  return {programs::fig1(),         programs::fig2(),          programs::fig3(),
          programs::fig4(),         programs::fig7(),          programs::fig8(),
          programs::fig9(),         programs::abba_deadlock(), programs::producer_consumer(),
          programs::locked_counter()};
}

// Property: the incremental key partitions complete interleavings exactly as
// the canonical key of the full graph does.
TEST(HbProperty, IncrementalKeyMatchesCanonicalKey) {
  for (const auto& p : small_programs()) {
    std::map<HBKey, HBKey> canon_to_inc;
    std::map<HBKey, HBKey> inc_to_canon;
    for_each_interleaving(
        p,
        [&](const Interleaving& it) {
          const HBKey canon = canonical_key(build_hb_graph(it.trace));
          const HBKey inc = incremental_key(it.trace);
          const auto [a, fresh_a] = canon_to_inc.emplace(canon, inc);
          const auto [b, fresh_b] = inc_to_canon.emplace(inc, canon);
          EXPECT_EQ(a->second, inc) << p.name();
          EXPECT_EQ(b->second, canon) << p.name();
        },
        200000);
    EXPECT_GT(canon_to_inc.size(), 1u) << p.name();
  }
}

// Property: equal keys imply equal assertion outcome and final shared state.
TEST(HbProperty, EqualKeysAgreeOnOutcome) {
  for (const auto& p : small_programs()) {
    std::map<HBKey, std::pair<std::string, std::vector<Value>>> seen;
    for_each_interleaving(
        p,
        [&](const Interleaving& it) {
          const auto outcome = std::make_pair(it.outcome, it.final_values);
          const auto [pos, fresh] = seen.emplace(canonical_key(build_hb_graph(it.trace)), outcome);
          if (!fresh) {
            EXPECT_EQ(pos->second, outcome) << p.name();
          }
        },
        200000);
  }
}

// Property: edges follow trace order, so there are at most L^2 of them.
TEST(HbProperty, EdgesFollowTraceOrder) {
  for (const auto& p : small_programs()) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto r = testing::random_run(p, seed);
      const auto g = build_hb_graph(r.trace);
      const std::size_t l = r.trace.size();
      EXPECT_LE(g.edges.size(), l * l);
      std::map<HbNode, std::uint32_t> pos;
      for (const auto& e : r.trace) pos[{e.thread, e.index}] = e.step;
      for (const auto& e : g.edges) {
        EXPECT_NE(e.from.thread, e.to.thread);
        EXPECT_LT(pos.at(e.from), pos.at(e.to));
      }
      EXPECT_EQ(incremental_key(r.trace), r.hb_key);
    }
  }
}

}  // namespace
}  // namespace vbt

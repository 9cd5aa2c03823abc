#pragma once

// Modeled example programs with known bug signatures, planted-bug
// generators, and access-frequency profiling.

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vbt/explore.hpp"
#include "vbt/testkit.hpp"

namespace vbt {

class Unsupported : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CorpusEntry {
  std::string name;
  std::function<ProgramDef()> make;
  std::optional<Signature> expected;  // nullopt: bug-free
  std::string note;
};

namespace programs {

inline ProgramDef fig1() {
  ProgramDef p("fig1");
  const VarId a = p.global("a", 0);
  p.add_thread([a](ThreadCtx& ctx) -> Task<> {
    const Value x = co_await ctx.read(a);
    co_await ctx.check(x == 0, "a==0");
  });
  p.add_thread([a](ThreadCtx& ctx) -> Task<> { co_await ctx.fetch_add(a, 1); });
  return p;
}

inline ProgramDef fig2() {
  ProgramDef p("fig2");
  const VarId a = p.global("a", 0);
  p.add_thread([a](ThreadCtx& ctx) -> Task<> {
    const Value t1 = co_await ctx.read(a);
    const Value t2 = co_await ctx.read(a);
    co_await ctx.check(t1 == t2, "t1==t2");
  });
  p.add_thread([a](ThreadCtx& ctx) -> Task<> { co_await ctx.fetch_add(a, 1); });
  return p;
}

inline ProgramDef fig3() {
  ProgramDef p("fig3");
  const VarId a = p.global("a", 0);
  p.add_thread([a](ThreadCtx& ctx) -> Task<> {
    const Value t1 = co_await ctx.read(a);
    const Value t2 = co_await ctx.read(a);
    co_await ctx.check(t1 == t2, "t1==t2");
  });
  p.add_thread([a](ThreadCtx& ctx) -> Task<> {
    co_await ctx.write(a, 1);
    co_await ctx.write(a, 0);
  });
  return p;
}

inline ProgramDef fig4() {
  ProgramDef p("fig4");
  const VarId a = p.global("a", 0);
  const VarId b = p.global("b", 0);
  p.add_thread([a, b](ThreadCtx& ctx) -> Task<> {
    const Value t1 = co_await ctx.read(a);
    const Value t2 = co_await ctx.read(a);
    const Value t3 = co_await ctx.read(b);
    co_await ctx.check(t1 == t2 || t3 != 1, "t1==t2||t3!=1");
  });
  p.add_thread([a, b](ThreadCtx& ctx) -> Task<> {
    co_await ctx.write(a, 1);
    co_await ctx.write(b, 1);
    co_await ctx.write(b, 0);
  });
  return p;
}

inline ProgramDef fig7() {
  ProgramDef p("fig7");
  const VarId a = p.global("a", 0);
  p.add_thread([a](ThreadCtx& ctx) -> Task<> { co_await ctx.fetch_add(a, 1); });
  p.add_thread([a](ThreadCtx& ctx) -> Task<> { co_await ctx.fetch_add(a, 1); });
  p.add_thread([a](ThreadCtx& ctx) -> Task<> {
    const Value x = co_await ctx.read(a);
    co_await ctx.check(x != 2, "a!=2");
  });
  return p;
}

// The printed assertion compares the reads the wrong way round and can never
// fail; this checks the intended "at most one increment between the reads".
inline ProgramDef fig8() {
  ProgramDef p("fig8");
  const VarId a = p.global("a", 0);
  p.add_thread([a](ThreadCtx& ctx) -> Task<> {
    const Value t1 = co_await ctx.read(a);
    const Value t2 = co_await ctx.read(a);
    co_await ctx.check(t2 <= t1 + 1, "t2<=t1+1");
  });
  p.add_thread([a](ThreadCtx& ctx) -> Task<> { co_await ctx.fetch_add(a, 1); });
  p.add_thread([a](ThreadCtx& ctx) -> Task<> { co_await ctx.fetch_add(a, 1); });
  return p;
}

inline ProgramDef fig9() {
  ProgramDef p("fig9");
  const VarId a = p.global("a", 0);
  const VarId b = p.global("b", 0);
  p.add_thread([a, b](ThreadCtx& ctx) -> Task<> {
    const Value t1 = co_await ctx.read(a);
    const Value t2 = co_await ctx.read(a);
    const Value t3 = co_await ctx.read(b);
    const Value t4 = co_await ctx.read(b);
    co_await ctx.check(t1 == t2 || t3 == t4, "t1==t2||t3==t4");
  });
  p.add_thread([a](ThreadCtx& ctx) -> Task<> { co_await ctx.fetch_add(a, 1); });
  p.add_thread([b](ThreadCtx& ctx) -> Task<> { co_await ctx.fetch_add(b, 1); });
  return p;
}

namespace alloc_vector {

inline constexpr std::int32_t kBlocks = 6;

struct Shared {
  VarId monitor;
  ArrayRef allocated;
};

inline Task<Value> find_free_block(ThreadCtx& ctx, Shared s) {
  auto frame = ctx.enter("FindFreeBlock");
  co_await ctx.lock(s.monitor);
  Value found = -1;
  for (std::int32_t i = 0; i < kBlocks && found < 0; ++i) {
    if (co_await ctx.read(s.allocated, i) == 0) found = i;
  }
  co_await ctx.unlock(s.monitor);
  co_return found;
}

inline Task<bool> is_block_free(ThreadCtx& ctx, Shared s, Value b) {
  auto frame = ctx.enter("IsBlockFree");
  co_await ctx.lock(s.monitor);
  const Value flag = co_await ctx.read(s.allocated, static_cast<std::int32_t>(b));
  co_await ctx.unlock(s.monitor);
  co_return flag == 0;
}

inline Task<> mark_block_allocated(ThreadCtx& ctx, Shared s, Value b) {
  auto frame = ctx.enter("MarkBlockAllocated");
  co_await ctx.lock(s.monitor);
  co_await ctx.write(s.allocated, static_cast<std::int32_t>(b), 1);
  co_await ctx.unlock(s.monitor);
}

inline Task<> free_all_blocks(ThreadCtx& ctx, Shared s) {
  auto frame = ctx.enter("FreeAllBlocks");
  co_await ctx.lock(s.monitor);
  for (std::int32_t i = 0; i < kBlocks; ++i) co_await ctx.write(s.allocated, i, 0);
  co_await ctx.unlock(s.monitor);
}

inline Task<> client(ThreadCtx& ctx, Shared s) {
  const Value b = co_await find_free_block(ctx, s);
  if (b < 0) co_return;
  const bool free = co_await is_block_free(ctx, s, b);
  co_await ctx.check(free, "IsBlockFree(b)");
  co_await mark_block_allocated(ctx, s, b);
  co_await free_all_blocks(ctx, s);
}

}  // namespace alloc_vector

inline ProgramDef allocation_vector() {
  ProgramDef p("allocation-vector");
  alloc_vector::Shared s{p.mutex("monitor"), p.global_array("allocated", alloc_vector::kBlocks, 0)};
  p.add_thread([s](ThreadCtx& ctx) -> Task<> { co_await alloc_vector::client(ctx, s); });
  p.add_thread([s](ThreadCtx& ctx) -> Task<> { co_await alloc_vector::client(ctx, s); });
  return p;
}

inline ProgramDef abba_deadlock() {
  ProgramDef p("abba-deadlock");
  const VarId m1 = p.mutex("m1");
  const VarId m2 = p.mutex("m2");
  p.add_thread([m1, m2](ThreadCtx& ctx) -> Task<> {
    co_await ctx.lock(m1);
    co_await ctx.lock(m2);
    co_await ctx.unlock(m2);
    co_await ctx.unlock(m1);
  });
  p.add_thread([m1, m2](ThreadCtx& ctx) -> Task<> {
    co_await ctx.lock(m2);
    co_await ctx.lock(m1);
    co_await ctx.unlock(m1);
    co_await ctx.unlock(m2);
  });
  return p;
}

/// x has three accesses (two reads straddling one increment is the bug);
/// y is read round(3/ratio) times just before, so lower ratios make x the
/// rarer variable.
inline ProgramDef pctf_pair(double ratio) {
  if (!(ratio > 0.0)) throw std::invalid_argument("pctf-pair ratio must be positive");
  ProgramDef p("pctf-pair");
  const VarId x = p.global("x", 0);
  const VarId y = p.global("y", 0);
  const int y_reads = std::max(1, static_cast<int>(std::lround(3.0 / ratio)));
  p.add_thread([x, y, y_reads](ThreadCtx& ctx) -> Task<> {
    Value sum = 0;
    for (int i = 0; i < y_reads; ++i) sum += co_await ctx.read(y);
    const Value t1 = co_await ctx.read(x);
    const Value t2 = co_await ctx.read(x);
    co_await ctx.check(t1 == t2, "x-stable");
    (void)sum;
  });
  p.add_thread([x](ThreadCtx& ctx) -> Task<> { co_await ctx.fetch_add(x, 1); });
  return p;
}

inline ProgramDef locked_counter() {
  ProgramDef p("locked-counter");
  const VarId m = p.mutex("m");
  const VarId count = p.global("count", 0);
  p.set_max_threads(3);
  p.add_thread([m, count](ThreadCtx& ctx) -> Task<> {
    const ThreadBody worker = [m, count](ThreadCtx& w) -> Task<> {
      co_await w.lock(m);
      const Value c = co_await w.read(count);
      co_await w.write(count, c + 1);
      co_await w.unlock(m);
    };
    const ThreadId w1 = co_await ctx.spawn(worker);
    const ThreadId w2 = co_await ctx.spawn(worker);
    co_await ctx.join(w1);
    co_await ctx.join(w2);
    const Value total = co_await ctx.read(count);
    co_await ctx.check(total == 2, "count==2");
  });
  return p;
}

inline ProgramDef producer_consumer() {
  ProgramDef p("producer-consumer");
  const VarId m = p.mutex("m");
  const VarId ready = p.condition("ready");
  const VarId item = p.global("item", 0);
  p.add_thread([m, ready, item](ThreadCtx& ctx) -> Task<> {
    co_await ctx.lock(m);
    co_await ctx.write(item, 7);
    co_await ctx.notify(ready);
    co_await ctx.unlock(m);
  });
  p.add_thread([m, ready, item](ThreadCtx& ctx) -> Task<> {
    co_await ctx.lock(m);
    Value got = co_await ctx.read(item);
    while (got == 0) {
      co_await ctx.wait(ready, m);
      got = co_await ctx.read(item);
    }
    co_await ctx.unlock(m);
    co_await ctx.check(got == 7, "item==7");
  });
  return p;
}

/// Three threads each read three shared variables once; nothing can fail.
inline ProgramDef uniform_access() {
  ProgramDef p("uniform-access");
  std::vector<VarId> vars;
  for (int i = 0; i < 3; ++i) vars.push_back(p.global("u" + std::to_string(i), i));
  for (int t = 0; t < 3; ++t) {
    p.add_thread([vars](ThreadCtx& ctx) -> Task<> {
      Value sum = 0;
      for (const auto& v : vars) sum += co_await ctx.read(v);
      co_await ctx.check(sum == 3, "sum==3");
    });
  }
  return p;
}

}  // namespace programs

// ---------------------------------------------------------------------------
// Planted bugs

struct PlantOptions {
  int decoys = 0;        // extra shared variables written by the bug threads
  int decoy_rounds = 1;  // writes per decoy per thread
  int extra_threads = 0; // threads that only touch their own variable
};

namespace detail {

inline Task<> decoy_prelude(ThreadCtx& ctx, std::vector<VarId> decoys, int rounds) {
  for (int r = 0; r < rounds; ++r) {
    for (const auto& d : decoys) co_await ctx.write(d, ctx.id());
  }
}

}  // namespace detail

/// Program whose minimal signature is (c, v, t). Supported: (0,0,2..5),
/// (1,1,2..5), (2,1,2), (2,2,2), (2,2,3).
inline ProgramDef make_planted(int c, int v, int t, const PlantOptions& opt = {}) {
  const Signature sig{c, v, t};
  const bool supported = (c == 0 && v == 0 && t >= 2 && t <= 5) || (c == 1 && v == 1 && t >= 2 && t <= 5) ||
                         sig == Signature{2, 1, 2} || sig == Signature{2, 2, 2} || sig == Signature{2, 2, 3};
  if (!supported) throw Unsupported("no planted-bug template for " + to_string(sig));
  if (opt.decoys < 0 || opt.decoy_rounds < 0 || opt.extra_threads < 0) {
    throw std::invalid_argument("planted-bug options must be non-negative");
  }

  std::string name = "planted:" + std::to_string(c) + "," + std::to_string(v) + "," + std::to_string(t);
  if (opt.decoys > 0) name += ":" + std::to_string(opt.decoys);
  ProgramDef p(name);
  const VarId a = p.global("a", 0);
  const VarId b = (v == 2) ? p.global("b", 0) : VarId{};
  std::vector<VarId> decoys;
  for (int i = 0; i < opt.decoys; ++i) decoys.push_back(p.global("d" + std::to_string(i), 0));
  const int rounds = opt.decoy_rounds;
  auto incrementer = [decoys, rounds](VarId target) {
    return [decoys, rounds, target](ThreadCtx& ctx) -> Task<> {
      co_await detail::decoy_prelude(ctx, decoys, rounds);
      co_await ctx.fetch_add(target, 1);
    };
  };

  if (c == 0) {
    for (int i = 0; i < t - 1; ++i) p.add_thread(incrementer(a));
    const Value forbidden = t - 1;
    p.add_thread([a, decoys, rounds, forbidden](ThreadCtx& ctx) -> Task<> {
      co_await detail::decoy_prelude(ctx, decoys, rounds);
      const Value x = co_await ctx.read(a);
      co_await ctx.check(x != forbidden, "a!=" + std::to_string(forbidden));
    });
  } else if (c == 1) {
    const Value slack = t - 2;
    p.add_thread([a, decoys, rounds, slack](ThreadCtx& ctx) -> Task<> {
      co_await detail::decoy_prelude(ctx, decoys, rounds);
      const Value t1 = co_await ctx.read(a);
      const Value t2 = co_await ctx.read(a);
      co_await ctx.check(t2 - t1 <= slack, "a-drift<=" + std::to_string(slack));
    });
    for (int i = 0; i < t - 1; ++i) p.add_thread(incrementer(a));
  } else if (v == 1) {
    p.add_thread([a, decoys, rounds](ThreadCtx& ctx) -> Task<> {
      co_await detail::decoy_prelude(ctx, decoys, rounds);
      const Value t1 = co_await ctx.read(a);
      const Value t2 = co_await ctx.read(a);
      co_await ctx.check(t1 == t2, "t1==t2");
    });
    p.add_thread([a, decoys, rounds](ThreadCtx& ctx) -> Task<> {
      co_await detail::decoy_prelude(ctx, decoys, rounds);
      co_await ctx.write(a, 1);
      co_await ctx.write(a, 0);
    });
  } else if (t == 2) {
    p.add_thread([a, b, decoys, rounds](ThreadCtx& ctx) -> Task<> {
      co_await detail::decoy_prelude(ctx, decoys, rounds);
      const Value t1 = co_await ctx.read(a);
      const Value t2 = co_await ctx.read(a);
      const Value t3 = co_await ctx.read(b);
      co_await ctx.check(t1 == t2 || t3 != 1, "t1==t2||t3!=1");
    });
    p.add_thread([a, b, decoys, rounds](ThreadCtx& ctx) -> Task<> {
      co_await detail::decoy_prelude(ctx, decoys, rounds);
      co_await ctx.write(a, 1);
      co_await ctx.write(b, 1);
      co_await ctx.write(b, 0);
    });
  } else {
    p.add_thread([a, b, decoys, rounds](ThreadCtx& ctx) -> Task<> {
      co_await detail::decoy_prelude(ctx, decoys, rounds);
      const Value t1 = co_await ctx.read(a);
      const Value t2 = co_await ctx.read(a);
      const Value t3 = co_await ctx.read(b);
      const Value t4 = co_await ctx.read(b);
      co_await ctx.check(t1 == t2 || t3 == t4, "t1==t2||t3==t4");
    });
    p.add_thread(incrementer(a));
    p.add_thread(incrementer(b));
  }

  for (int i = 0; i < opt.extra_threads; ++i) {
    const VarId own = p.global("own" + std::to_string(i), 0);
    p.add_thread([own](ThreadCtx& ctx) -> Task<> {
      co_await ctx.write(own, 1);
      co_await ctx.write(own, 2);
    });
  }
  return p;
}

/// Parses "c,v,t" or "c,v,t:Q" (Q decoy variables).
inline ProgramDef make_planted_from_spec(const std::string& spec) {
  int c = 0, v = 0, t = 0, q = 0;
  char s1 = 0, s2 = 0, s3 = 0;
  std::istringstream in(spec);
  in >> c >> s1 >> v >> s2 >> t;
  if (!in || s1 != ',' || s2 != ',') throw std::invalid_argument("planted spec must be c,v,t[:Q]");
  if (in >> s3) {
    if (s3 != ':' || !(in >> q)) throw std::invalid_argument("planted spec must be c,v,t[:Q]");
  }
  PlantOptions opt;
  opt.decoys = q;
  return make_planted(c, v, t, opt);
}

// ---------------------------------------------------------------------------
// Catalog

inline const std::vector<CorpusEntry>& corpus_catalog() {
  static const std::vector<CorpusEntry> catalog = {
      {"fig1", programs::fig1, Signature{0, 0, 2}, "assert reads a before the increment"},
      {"fig2", programs::fig2, Signature{1, 1, 2}, "increment between two reads"},
      {"fig3", programs::fig3, Signature{2, 1, 2}, "reads straddle a=1 / a=0"},
      {"fig4", programs::fig4, Signature{2, 2, 2}, "needs preemptions at both a and b"},
      {"fig7", programs::fig7, Signature{0, 0, 3}, "checker must follow both increments"},
      {"fig8", programs::fig8, Signature{1, 1, 3}, "two increments between two reads"},
      {"fig9", programs::fig9, Signature{2, 2, 3}, "a and b each change between paired reads"},
      {"allocation-vector", programs::allocation_vector, Signature{2, 1, 2},
       "monitor-protected block vector with 6 blocks"},
      {"abba-deadlock", programs::abba_deadlock, Signature{1, 1, 2}, "lock-order inversion"},
      {"pctf-pair", [] { return programs::pctf_pair(0.1); }, Signature{1, 1, 2},
       "rare buggy variable x, frequent y (ratio 1/10)"},
      {"locked-counter", programs::locked_counter, std::nullopt, "spawn/join with a mutex-protected counter"},
      {"producer-consumer", programs::producer_consumer, std::nullopt, "wait/notify handoff"},
      {"uniform-access", programs::uniform_access, std::nullopt, "three threads, three variables, read-only"},
  };
  return catalog;
}

inline const CorpusEntry* find_corpus_entry(const std::string& name) {
  for (const auto& e : corpus_catalog()) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Access frequency profiling

struct FrequencyBucket {
  double lo = 0;
  double hi = 0;
  std::vector<SiteId> sites;
};

struct FrequencyProfile {
  std::map<SiteId, double> mean_accesses;
  std::vector<FrequencyBucket> buckets;
};

/// Per-site mean access counts over round-robin runs with rotated start, and
/// a histogram with ceil(log2(Q)) + 1 equal-width buckets (one bucket when all
/// means coincide).
inline FrequencyProfile profile_access_frequencies(const ProgramDef& prog, int runs, std::uint64_t seed = 0) {
  if (runs < 1) throw std::invalid_argument("profile needs at least one run");
  FrequencyProfile out;
  std::map<SiteId, std::uint64_t> totals;
  for (int r = 0; r < runs; ++r) {
    const auto res = round_robin_run(prog, static_cast<int>((seed + static_cast<std::uint64_t>(r)) %
                                                            static_cast<std::uint64_t>(std::max(1, prog.max_threads()))));
    for (const auto& [site, count] : res.access_counts) totals[site] += count;
  }
  for (const auto& [site, total] : totals) out.mean_accesses[site] = static_cast<double>(total) / runs;
  if (out.mean_accesses.empty()) return out;

  double lo = out.mean_accesses.begin()->second;
  double hi = lo;
  for (const auto& [site, m] : out.mean_accesses) {
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  if (hi - lo < 1e-9) {
    FrequencyBucket bucket{lo, hi, {}};
    for (const auto& [site, m] : out.mean_accesses) bucket.sites.push_back(site);
    out.buckets.push_back(std::move(bucket));
    return out;
  }
  const auto q = static_cast<double>(out.mean_accesses.size());
  const int count = static_cast<int>(std::ceil(std::log2(q))) + 1;
  const double width = (hi - lo) / count;
  for (int i = 0; i < count; ++i) out.buckets.push_back({lo + i * width, lo + (i + 1) * width, {}});
  for (const auto& [site, m] : out.mean_accesses) {
    const int k = std::min(count - 1, static_cast<int>((m - lo) / width));
    out.buckets[static_cast<std::size_t>(k)].sites.push_back(site);
  }
  return out;
}

}  // namespace vbt

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "vbt/testkit.hpp"
#include "vbt/util.hpp"

namespace vbt {

struct HbNode {
  ThreadId thread = 0;
  std::uint32_t index = 0;

  friend bool operator==(const HbNode&, const HbNode&) = default;
  friend auto operator<=>(const HbNode&, const HbNode&) = default;
};

struct HbEdge {
  HbNode from;
  HbNode to;

  friend bool operator==(const HbEdge&, const HbEdge&) = default;
  friend auto operator<=>(const HbEdge&, const HbEdge&) = default;
};

/// Happens-before graph of one execution. Nodes are labeled (thread, index);
/// an edge joins two actions of different threads that touch the same
/// variable, in trace order, when at least one of them writes. Mutex and
/// condition operations count as writes to their variable.
struct HBGraph {
  std::vector<std::uint32_t> nodes_per_thread;
  std::vector<HbEdge> edges;

  std::size_t node_count() const {
    std::size_t n = 0;
    for (auto c : nodes_per_thread) n += c;
    return n;
  }
};

using HBKey = Hash128;

inline HBGraph build_hb_graph(std::span<const TraceEntry> trace) {
  HBGraph g;
  struct Seen {
    HbNode node;
    bool write;
  };
  std::unordered_map<VarId, std::vector<Seen>, VarIdHash> by_var;
  for (const auto& e : trace) {
    const auto t = static_cast<std::size_t>(e.thread);
    if (g.nodes_per_thread.size() <= t) g.nodes_per_thread.resize(t + 1, 0);
    g.nodes_per_thread[t] = std::max(g.nodes_per_thread[t], e.index + 1);
    const HbNode self{e.thread, e.index};
    for (std::uint8_t i = 0; i < e.access_count; ++i) {
      const Access& a = e.accesses[i];
      auto& prior = by_var[a.var];
      for (const auto& p : prior) {
        if (p.node.thread != e.thread && (p.write || a.write)) g.edges.push_back({p.node, self});
      }
      prior.push_back({self, a.write});
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  return g;
}

/// Digest of the labeled graph; equal exactly when node and edge sets match
/// (up to hash collision). The empty graph maps to a fixed key.
inline HBKey canonical_key(const HBGraph& g) {
  Hasher h;
  std::size_t threads = g.nodes_per_thread.size();
  while (threads > 0 && g.nodes_per_thread[threads - 1] == 0) --threads;
  h.add(threads);
  for (std::size_t t = 0; t < threads; ++t) h.add(g.nodes_per_thread[t]);
  auto edges = g.edges;
  std::sort(edges.begin(), edges.end());
  h.add(edges.size());
  for (const auto& e : edges) {
    h.add(static_cast<std::uint64_t>(e.from.thread)).add(e.from.index);
    h.add(static_cast<std::uint64_t>(e.to.thread)).add(e.to.index);
  }
  return h.digest();
}

inline HBKey empty_hb_key() { return canonical_key(HBGraph{}); }

/// Incrementally maintained key with the same equivalence as
/// canonical_key(build_hb_graph(trace)), in O(1) per access.
///
/// Per variable, the conflict edges are fixed by the access sequence up to
/// swapping adjacent reads, so each variable keeps a hash chain over writes and
/// a commutative sum over the reads since the last write. The global key sums
/// per-variable and per-thread contributions, so updating one variable is a
/// subtract and an add.
class HbKeyBuilder {
 public:
  void add(const TraceEntry& e) {
    const auto t = static_cast<std::size_t>(e.thread);
    if (counts_.size() <= t) counts_.resize(t + 1, 0);
    if (counts_[t] > 0) remove(thread_term(e.thread, counts_[t]));
    counts_[t] = std::max(counts_[t], e.index + 1);
    insert(thread_term(e.thread, counts_[t]));
    for (std::uint8_t i = 0; i < e.access_count; ++i) {
      const Access& a = e.accesses[i];
      VarState& st = vars_[a.var];
      if (st.touched) remove(var_term(a.var, st));
      st.touched = true;
      const std::uint64_t token = node_token(e.thread, e.index);
      if (a.write) {
        st.chain_a = mix64(st.chain_a ^ mix64(st.reads_a + st.read_count)) ^ token;
        st.chain_b = mix64(st.chain_b + mix64(st.reads_b ^ st.read_count) + token * 3);
        st.chain_a = mix64(st.chain_a);
        st.reads_a = st.reads_b = 0;
        st.read_count = 0;
      } else {
        st.reads_a += mix64(token);
        st.reads_b += mix64(token ^ 0x5bd1e995ULL);
        ++st.read_count;
      }
      insert(var_term(a.var, st));
    }
  }

  HBKey key() const { return {mix64(sum_a_ ^ 0xa5a5ULL), mix64(sum_b_ + 0x5a5aULL)}; }

 private:
  struct VarState {
    std::uint64_t chain_a = 0x9e37ULL;
    std::uint64_t chain_b = 0x79b9ULL;
    std::uint64_t reads_a = 0;
    std::uint64_t reads_b = 0;
    std::uint64_t read_count = 0;
    bool touched = false;
  };
  struct Term {
    std::uint64_t a;
    std::uint64_t b;
  };

  static std::uint64_t node_token(ThreadId t, std::uint32_t index) {
    return mix64((static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)) << 32) | index);
  }
  static Term thread_term(ThreadId t, std::uint32_t count) {
    const std::uint64_t x = mix64(0x7468ULL ^ (static_cast<std::uint64_t>(t) << 32) ^ count);
    return {x, mix64(x ^ 0x1111ULL)};
  }
  static Term var_term(const VarId& v, const VarState& st) {
    const std::uint64_t id = VarIdHash{}(v) ^ (static_cast<std::uint64_t>(v.loop_iter) << 48);
    const std::uint64_t a = mix64(id ^ mix64(st.chain_a ^ mix64(st.reads_a + st.read_count)));
    const std::uint64_t b = mix64((id * 7) + mix64(st.chain_b + mix64(st.reads_b ^ st.read_count)));
    return {a, b};
  }
  void insert(Term t) {
    sum_a_ += t.a;
    sum_b_ += t.b;
  }
  void remove(Term t) {
    sum_a_ -= t.a;
    sum_b_ -= t.b;
  }

  std::vector<std::uint32_t> counts_;
  std::unordered_map<VarId, VarState, VarIdHash> vars_;
  std::uint64_t sum_a_ = 0;
  std::uint64_t sum_b_ = 0;
};

}  // namespace vbt

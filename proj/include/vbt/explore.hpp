#pragma once

// Iterative context bounding over variable subsets and thread-bounded
// priority orders, with happens-before pruning, dynamic variable bounding,
// and the minimal (c, v, t) bug classifier.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "vbt/permcover.hpp"
#include "vbt/scheduler.hpp"

namespace vbt {

enum class OrderMode : std::uint8_t {
  Random,      // thread-bounded random priority orders, P_{n+i} slots
  Exhaustive,  // every initial order, every insertion rank at each preemption
};

struct ExplorationConfig {
  int c_max = 2;
  int v = 1;
  int t = 2;
  std::uint32_t l = 0;
  double epsilon = 0.01;
  std::uint64_t seed = 1;
  bool prune = true;
  bool shared_first = true;
  OrderMode order_mode = OrderMode::Random;
  bool dynamic_vb = false;
  unsigned workers = 1;
  bool stop_on_first_bug = false;
  std::uint64_t max_runs = 0;  // 0: unlimited
  std::size_t max_witnesses = 1;
  std::size_t step_limit = kDefaultStepLimit;
  /// Called once per executed schedule, in execution order.
  std::function<void(const ExecutionResult&)> observer;
};

struct PlannedPreemption {
  std::uint32_t step = 0;
  Priority value = 0;

  friend bool operator==(const PlannedPreemption&, const PlannedPreemption&) = default;
};

/// Frontier element: the initial priority assignment plus the preemptions
/// that lead to the state it represents (re-executed from scratch).
struct WorkItem {
  std::vector<Priority> initial;
  std::vector<Priority> slots;  // values for successive preemptions (random mode)
  std::vector<PlannedPreemption> preemptions;

  friend bool operator==(const WorkItem&, const WorkItem&) = default;
};

struct BugReport {
  std::string id;
  int c_used = 0;
  int v_used = 0;
  int t_used = 0;
  std::uint64_t found_at_run = 0;  // 1-based index among executed schedules
  std::vector<VarId> tracked;      // variable set under which it was found
  Schedule schedule;
  std::vector<WorkItem> witnesses;
};

struct BoundStats {
  int c = 0;
  std::uint64_t executed = 0;
  std::uint64_t pruned = 0;
};

struct ExplorationReport {
  std::uint64_t schedules_executed = 0;
  std::uint64_t schedules_pruned = 0;
  std::uint64_t schedules_generated = 0;
  std::uint64_t var_sets = 0;
  bool budget_exhausted = false;
  std::vector<BoundStats> per_bound;
  std::vector<BugReport> bugs;

  bool bug_found() const { return !bugs.empty(); }
  const BugReport* find_bug(const std::string& id) const {
    for (const auto& b : bugs) {
      if (b.id == id) return &b;
    }
    return nullptr;
  }
  std::set<std::string> bug_ids() const {
    std::set<std::string> out;
    for (const auto& b : bugs) out.insert(b.id);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Priority orders and variable sets

/// Deduplicated random priority orders over n threads and c preemption slots,
/// enough to cover every ordering of t+c fragments with probability 1-epsilon.
inline std::vector<PriorityOrder> gen_priority_orders(int n, int c, int t, double epsilon, std::uint64_t seed) {
  const int m = n + c;
  std::vector<PriorityOrder> out;
  if (m <= 1) {
    std::vector<int> identity(static_cast<std::size_t>(m));
    std::iota(identity.begin(), identity.end(), 1);
    out.push_back({identity, n});
    return out;
  }
  const int span = std::clamp(t + c, 1, m);
  const std::uint64_t count = required_permutations(m, span, epsilon);
  const double distinct = factorial(m);
  Rng rng(seed);
  std::set<std::vector<int>> seen;
  for (std::uint64_t i = 0; i < count && static_cast<double>(seen.size()) < distinct; ++i) {
    auto p = random_permutation(m, rng);
    if (seen.insert(p).second) out.push_back({std::move(p), n});
  }
  return out;
}

struct VarInfo {
  VarId var;
  bool shared = false;
  std::uint64_t accesses = 0;
};

/// Every v-subset exactly once; with shared_first, subsets with fewer
/// non-shared members come earlier.
inline std::vector<std::vector<VarId>> enumerate_var_sets(const std::vector<VarInfo>& vars, int v,
                                                          bool shared_first) {
  std::vector<VarInfo> order = vars;
  if (shared_first) {
    std::stable_partition(order.begin(), order.end(), [](const VarInfo& x) { return x.shared; });
  }
  std::vector<std::pair<int, std::vector<VarId>>> sets;
  for (const auto& idx : combinations(static_cast<int>(order.size()), v)) {
    std::vector<VarId> s;
    int unshared = 0;
    for (int i : idx) {
      s.push_back(order[static_cast<std::size_t>(i)].var);
      if (!order[static_cast<std::size_t>(i)].shared) ++unshared;
    }
    sets.emplace_back(shared_first ? unshared : 0, std::move(s));
  }
  std::stable_sort(sets.begin(), sets.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::vector<VarId>> out;
  out.reserve(sets.size());
  for (auto& s : sets) out.push_back(std::move(s.second));
  return out;
}

inline TrackedSet tracked_set_of(const std::vector<VarId>& vars, std::uint32_t l) {
  TrackedSet s;
  s.loop_bound = l;
  for (const auto& v : vars) s.patterns.push_back(VarPattern::exact(v));
  return s;
}

/// Run without priorities: round-robin over enabled threads, one step each,
/// starting from thread `start`.
inline ExecutionResult round_robin_run(const ProgramDef& prog, int start,
                                       std::size_t step_limit = kDefaultStepLimit) {
  Machine m(prog, step_limit);
  HbKeyBuilder hb;
  Schedule sched;
  sched.program = prog.name();
  sched.initial_priorities.assign(static_cast<std::size_t>(prog.max_threads()), 0);
  int next = start;
  while (!m.finished()) {
    const int count = m.thread_count();
    ThreadId pick = -1;
    for (int k = 0; k < count; ++k) {
      const ThreadId cand = ((next + k) % count + count) % count;
      if (m.enabled(cand)) {
        pick = cand;
        break;
      }
    }
    const TraceEntry& e = m.step(pick);
    hb.add(e);
    sched.decisions.push_back({e.step, pick, false, 0});
    next = pick + 1;
  }
  return detail::collect(m, std::move(sched), 0, {}, hb.key());
}

inline bool is_program_variable(const VarId& v) {
  return v.site != kThreadSite && v.alloc_index != kAllocCounter;
}

/// Variables seen in preparatory runs (loop_iter within l), flagged shared
/// when some run had two threads access them.
inline std::vector<VarInfo> discover_variables(const ProgramDef& prog, std::uint32_t l, int runs = 0,
                                               std::size_t step_limit = kDefaultStepLimit) {
  if (runs <= 0) runs = std::max(1, prog.max_threads());
  std::map<VarId, VarInfo> found;
  for (int r = 0; r < runs; ++r) {
    const auto res = round_robin_run(prog, r, step_limit);
    std::map<VarId, std::set<ThreadId>> users;
    for (const auto& e : res.trace) {
      for (std::uint8_t i = 0; i < e.access_count; ++i) {
        const VarId& v = e.accesses[i].var;
        if (!is_program_variable(v) || v.loop_iter > l) continue;
        users[v].insert(e.thread);
        auto& info = found[v];
        info.var = v;
        ++info.accesses;
      }
    }
    for (const auto& [v, threads] : users) {
      if (threads.size() >= 2) found[v].shared = true;
    }
  }
  std::vector<VarInfo> out;
  for (auto& [v, info] : found) out.push_back(info);
  return out;
}

// ---------------------------------------------------------------------------
// Search

namespace detail {

inline constexpr Priority kRankSpacing = Priority{1} << 32;

struct Child {
  WorkItem item;
  HBKey key;
};

struct ItemOutcome {
  ExecutionResult result;
  std::vector<Child> children;
};

inline HBKey state_key(const Executor& ex, ThreadId t, Priority value, const std::vector<Priority>& slots,
                       int next_slot, const std::set<VarId>* preempted) {
  const Machine& m = ex.machine();
  std::vector<Priority> live;
  std::vector<Priority> prio = ex.priorities();
  prio[static_cast<std::size_t>(t)] = value;
  for (std::size_t u = 0; u < prio.size(); ++u) {
    const bool halted = static_cast<int>(u) < m.thread_count() && m.halted(static_cast<ThreadId>(u));
    if (!halted) live.push_back(prio[u]);
  }
  for (std::size_t i = static_cast<std::size_t>(next_slot); i < slots.size(); ++i) live.push_back(slots[i]);
  std::vector<Priority> sorted = live;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  auto rank = [&](Priority p) {
    return static_cast<std::uint64_t>(std::lower_bound(sorted.begin(), sorted.end(), p) - sorted.begin());
  };

  Hasher h;
  const HBKey prefix = ex.hb().key();
  h.add(prefix.hi).add(prefix.lo);
  h.add(static_cast<std::uint64_t>(ex.c_used() + 1));
  for (std::size_t u = 0; u < prio.size(); ++u) {
    const bool halted = static_cast<int>(u) < m.thread_count() && m.halted(static_cast<ThreadId>(u));
    h.add(halted ? ~std::uint64_t{0} : rank(prio[u]));
    h.add(static_cast<std::uint64_t>(static_cast<int>(u) < m.thread_count() ? ex.yield_count(static_cast<ThreadId>(u)) : 0));
  }
  for (std::size_t i = static_cast<std::size_t>(next_slot); i < slots.size(); ++i) h.add(rank(slots[i]));
  if (preempted) {
    h.add(preempted->size());
    for (const auto& v : *preempted) {
      h.add(v.site).add(v.alloc_index).add(static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.element)));
    }
  }
  return h.digest();
}

/// Insertion values for a preempted thread in exhaustive order mode: one per
/// rank position that leaves some other enabled thread above it.
inline std::vector<Priority> rank_insertions(const Executor& ex, ThreadId t) {
  const Machine& m = ex.machine();
  std::vector<Priority> others;
  Priority top_enabled = 0;
  bool any_enabled = false;
  const auto& prio = ex.priorities();
  for (std::size_t u = 0; u < prio.size(); ++u) {
    const auto tu = static_cast<ThreadId>(u);
    if (tu == t) continue;
    const bool spawned = tu < m.thread_count();
    if (spawned && m.halted(tu)) continue;
    others.push_back(prio[u]);
    if (spawned && m.enabled(tu)) {
      top_enabled = any_enabled ? std::max(top_enabled, prio[u]) : prio[u];
      any_enabled = true;
    }
  }
  std::vector<Priority> out;
  if (!any_enabled) return out;
  std::sort(others.begin(), others.end());
  others.erase(std::unique(others.begin(), others.end()), others.end());
  for (std::size_t k = 0; k < others.size() && others[k] <= top_enabled; ++k) {
    if (k == 0) {
      out.push_back(others[0] - kRankSpacing);
    } else {
      if (others[k] - others[k - 1] < 2) throw std::logic_error("priority rank space exhausted");
      out.push_back(others[k - 1] + (others[k] - others[k - 1]) / 2);
    }
  }
  return out;
}

inline ItemOutcome run_item(const ProgramDef& prog, const TrackedSet& tracked, const ExplorationConfig& cfg,
                            const WorkItem& item) {
  ItemOutcome out;
  std::size_t pos = 0;
  const bool key_has_vars = cfg.dynamic_vb && cfg.v < cfg.c_max;
  RunConfig rc;
  rc.initial_priorities = item.initial;
  rc.tracked = &tracked;
  rc.step_limit = cfg.step_limit;
  rc.hook = [&](const StepPoint& p, const Executor& ex) -> std::optional<PriorityChange> {
    if (pos < item.preemptions.size()) {
      if (p.step != item.preemptions[pos].step) return std::nullopt;
      return PriorityChange{item.preemptions[pos++].value, true};
    }
    if (!p.eligible || !p.thread_enabled || ex.c_used() >= cfg.c_max) return std::nullopt;
    std::set<VarId> preempted = ex.preempted_vars();
    if (cfg.dynamic_vb && p.kind != ActionKind::Start) {
      if (!preempted.count(*p.var) && static_cast<int>(preempted.size()) >= cfg.v) return std::nullopt;
      preempted.insert(*p.var);
    }
    std::vector<Priority> values;
    if (cfg.order_mode == OrderMode::Random) {
      const auto slot = static_cast<std::size_t>(ex.c_used());
      if (slot >= item.slots.size()) return std::nullopt;
      if (ex.would_violate(p.thread, item.slots[slot])) values.push_back(item.slots[slot]);
    } else {
      values = rank_insertions(ex, p.thread);
    }
    for (Priority value : values) {
      Child ch;
      ch.item.initial = item.initial;
      ch.item.slots = item.slots;
      ch.item.preemptions = item.preemptions;
      ch.item.preemptions.push_back({p.step, value});
      if (cfg.prune) {
        ch.key = state_key(ex, p.thread, value, item.slots, ex.c_used() + 1, key_has_vars ? &preempted : nullptr);
      }
      out.children.push_back(std::move(ch));
    }
    return std::nullopt;
  };
  out.result = execute(prog, std::move(rc));
  // Search recurses before enqueueing, so later points are queued first.
  std::reverse(out.children.begin(), out.children.end());
  return out;
}

inline std::vector<ItemOutcome> run_batch(const ProgramDef& prog, const TrackedSet& tracked,
                                          const ExplorationConfig& cfg, const std::vector<WorkItem>& items,
                                          std::size_t begin, std::size_t end) {
  std::vector<ItemOutcome> out(end - begin);
  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(end - begin)));
  if (workers <= 1) {
    for (std::size_t i = begin; i < end; ++i) out[i - begin] = run_item(prog, tracked, cfg, items[i]);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = begin + w; i < end; i += workers) out[i - begin] = run_item(prog, tracked, cfg, items[i]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

inline std::vector<WorkItem> root_items(const ProgramDef& prog, const ExplorationConfig& cfg) {
  const int n = prog.max_threads();
  std::vector<WorkItem> roots;
  if (cfg.order_mode == OrderMode::Random) {
    for (const auto& order : gen_priority_orders(n, cfg.c_max, cfg.t, cfg.epsilon, cfg.seed)) {
      WorkItem w;
      w.initial = order.initial();
      for (int i = 0; i < order.fragment_slots(); ++i) w.slots.push_back(order.slot(i));
      roots.push_back(std::move(w));
    }
  } else {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 1);
    do {
      WorkItem w;
      for (int p : perm) w.initial.push_back(p * kRankSpacing);
      roots.push_back(std::move(w));
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return roots;
}

}  // namespace detail

/// Iterative context bounding with one tracked variable set: every schedule
/// with c preemptions runs before any with c+1.
inline ExplorationReport explore(const ProgramDef& prog, const TrackedSet& tracked, const ExplorationConfig& cfg) {
  if (cfg.c_max < 0 || cfg.v < 0 || cfg.t < 2 || !(cfg.epsilon > 0 && cfg.epsilon < 1)) {
    throw std::invalid_argument("invalid exploration bounds");
  }
  ExplorationReport report;
  report.var_sets = 1;
  std::unordered_set<HBKey, Hash128Hasher> seen;
  std::map<std::string, std::size_t> bug_index;
  std::vector<WorkItem> queue = detail::root_items(prog, cfg);
  report.schedules_generated = queue.size();
  const std::size_t batch = std::max<std::size_t>(1, cfg.workers) * 8;
  std::vector<VarId> tracked_vars;
  for (const auto& p : tracked.patterns) tracked_vars.push_back(VarId{p.site, p.alloc_index.value_or(0), p.element.value_or(-1), 0});

  bool stop = false;
  for (int bound = 0; bound <= cfg.c_max && !stop && !queue.empty(); ++bound) {
    BoundStats stats{bound, 0, 0};
    std::vector<WorkItem> next;
    for (std::size_t begin = 0; begin < queue.size() && !stop; begin += batch) {
      std::size_t end = std::min(queue.size(), begin + batch);
      if (cfg.max_runs) {
        const std::uint64_t left = cfg.max_runs - report.schedules_executed;
        end = std::min<std::size_t>(end, begin + static_cast<std::size_t>(left));
      }
      auto outcomes = detail::run_batch(prog, tracked, cfg, queue, begin, end);
      for (std::size_t k = 0; k < outcomes.size() && !stop; ++k) {
        auto& o = outcomes[k];
        ++report.schedules_executed;
        ++stats.executed;
        if (cfg.observer) cfg.observer(o.result);
        if (o.result.buggy()) {
          const std::string id = o.result.bug_id();
          auto it = bug_index.find(id);
          if (it == bug_index.end()) {
            BugReport b;
            b.id = id;
            b.c_used = o.result.c_used;
            b.v_used = o.result.v_used;
            b.t_used = o.result.t_used;
            b.found_at_run = report.schedules_executed;
            b.tracked = tracked_vars;
            b.schedule = o.result.schedule;
            b.witnesses.push_back(queue[begin + k]);
            bug_index[id] = report.bugs.size();
            report.bugs.push_back(std::move(b));
          } else if (report.bugs[it->second].witnesses.size() < cfg.max_witnesses) {
            report.bugs[it->second].witnesses.push_back(queue[begin + k]);
          }
          if (cfg.stop_on_first_bug) stop = true;
        }
        for (auto& ch : o.children) {
          ++report.schedules_generated;
          if (cfg.prune && !seen.insert(ch.key).second) {
            ++report.schedules_pruned;
            ++stats.pruned;
            continue;
          }
          next.push_back(std::move(ch.item));
        }
        if (cfg.max_runs && report.schedules_executed >= cfg.max_runs) {
          report.budget_exhausted = true;
          stop = true;
        }
      }
    }
    report.per_bound.push_back(stats);
    queue = std::move(next);
  }
  return report;
}

namespace detail {

inline void merge_into(ExplorationReport& total, ExplorationReport part) {
  const std::uint64_t offset = total.schedules_executed;
  total.schedules_executed += part.schedules_executed;
  total.schedules_pruned += part.schedules_pruned;
  total.schedules_generated += part.schedules_generated;
  total.var_sets += part.var_sets;
  total.budget_exhausted = total.budget_exhausted || part.budget_exhausted;
  for (const auto& s : part.per_bound) {
    if (total.per_bound.size() <= static_cast<std::size_t>(s.c)) total.per_bound.push_back({s.c, 0, 0});
    total.per_bound[static_cast<std::size_t>(s.c)].executed += s.executed;
    total.per_bound[static_cast<std::size_t>(s.c)].pruned += s.pruned;
  }
  for (auto& b : part.bugs) {
    BugReport* existing = nullptr;
    for (auto& x : total.bugs) {
      if (x.id == b.id) existing = &x;
    }
    if (!existing) {
      b.found_at_run += offset;
      total.bugs.push_back(std::move(b));
    } else {
      for (auto& w : b.witnesses) existing->witnesses.push_back(std::move(w));
    }
  }
}

}  // namespace detail

/// Explores every v-subset of the discovered variables (no pruning across
/// subsets). With v = 0 only the fake first-access points are preemptible.
inline ExplorationReport explore_bounded(const ProgramDef& prog, const ExplorationConfig& cfg,
                                         const std::vector<VarInfo>* known = nullptr) {
  std::vector<VarInfo> discovered;
  if (!known) {
    discovered = discover_variables(prog, cfg.l, 0, cfg.step_limit);
    known = &discovered;
  }
  const int v = std::min<int>(cfg.v, static_cast<int>(known->size()));
  ExplorationReport total;
  for (const auto& set : enumerate_var_sets(*known, v, cfg.shared_first)) {
    ExplorationConfig sub = cfg;
    if (cfg.max_runs) {
      if (total.schedules_executed >= cfg.max_runs) {
        total.budget_exhausted = true;
        break;
      }
      sub.max_runs = cfg.max_runs - total.schedules_executed;
    }
    detail::merge_into(total, explore(prog, tracked_set_of(set, cfg.l), sub));
    for (auto& b : total.bugs) b.witnesses.resize(std::min(b.witnesses.size(), cfg.max_witnesses));
    if (cfg.stop_on_first_bug && total.bug_found()) break;
  }
  return total;
}

/// Every variable tracked; after the first v preemptions, further ones are
/// allowed only at variables already preempted at.
inline ExplorationReport explore_dynamic_vb(const ProgramDef& prog, ExplorationConfig cfg) {
  if (cfg.v < 1) throw std::invalid_argument("dynamic variable bounding needs v >= 1");
  cfg.dynamic_vb = true;
  return explore(prog, TrackedSet::all(cfg.l), cfg);
}

// ---------------------------------------------------------------------------
// Thread bound measurement and classification

namespace detail {

struct Marker {
  ThreadId thread;
  std::uint32_t index;
};

inline ExecutionResult run_with_markers(const ProgramDef& prog, const std::vector<Priority>& initial,
                                        const std::vector<Marker>& markers, const std::vector<Priority>& values,
                                        std::size_t step_limit) {
  RunConfig rc;
  rc.initial_priorities = initial;
  rc.step_limit = step_limit;
  rc.hook = [&](const StepPoint& p, const Executor&) -> std::optional<PriorityChange> {
    for (std::size_t i = 0; i < markers.size(); ++i) {
      if (markers[i].thread == p.thread && markers[i].index == p.thread_index) {
        return PriorityChange{values[i], false};
      }
    }
    return std::nullopt;
  };
  return execute(prog, std::move(rc));
}

}  // namespace detail

/// Smallest number of threads whose fragments' relative order alone forces
/// the bug, measured on a witness: slots are the initial thread priorities
/// and the priorities taken at each preemption (a fragment belongs to the
/// preempted thread). A slot set F forces the bug if every slot permutation
/// agreeing with the witness on F reproduces it. Never below 2.
inline int measure_thread_bound(const ProgramDef& prog, const WorkItem& witness, const std::string& bug_id,
                                std::uint64_t seed = 1, std::size_t step_limit = kDefaultStepLimit) {
  const int n = prog.max_threads();
  std::vector<detail::Marker> markers;
  std::vector<Priority> marker_values;
  {
    RunConfig rc;
    rc.initial_priorities = witness.initial;
    rc.step_limit = step_limit;
    std::size_t pos = 0;
    rc.hook = [&](const StepPoint& p, const Executor&) -> std::optional<PriorityChange> {
      if (pos < witness.preemptions.size() && witness.preemptions[pos].step == p.step) {
        markers.push_back({p.thread, p.thread_index});
        marker_values.push_back(witness.preemptions[pos].value);
        return PriorityChange{witness.preemptions[pos++].value, false};
      }
      return std::nullopt;
    };
    const auto r = execute(prog, std::move(rc));
    if (r.bug_id() != bug_id) throw std::logic_error("witness does not reproduce " + bug_id);
  }
  const int m = n + static_cast<int>(markers.size());
  if (m > 16) throw std::invalid_argument("too many fragments to measure the thread bound");
  std::vector<Priority> wvals(witness.initial.begin(), witness.initial.begin() + n);
  wvals.insert(wvals.end(), marker_values.begin(), marker_values.end());
  std::vector<int> owner(static_cast<std::size_t>(m));
  for (int i = 0; i < n; ++i) owner[static_cast<std::size_t>(i)] = i;
  for (std::size_t i = 0; i < markers.size(); ++i) owner[static_cast<std::size_t>(n) + i] = markers[i].thread;

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) pairs.emplace_back(i, j);
  }
  auto agreement = [&](const std::vector<int>& perm) {
    std::uint64_t mask = 0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto [i, j] = pairs[k];
      const bool w = wvals[static_cast<std::size_t>(i)] > wvals[static_cast<std::size_t>(j)];
      const bool p = perm[static_cast<std::size_t>(i)] > perm[static_cast<std::size_t>(j)];
      if (w == p) mask |= std::uint64_t{1} << k;
    }
    return mask;
  };
  std::vector<std::uint64_t> clean;  // agreement masks of non-reproducing orders
  auto test = [&](const std::vector<int>& perm) {
    std::vector<Priority> init(perm.begin(), perm.begin() + n);
    std::vector<Priority> vals(perm.begin() + n, perm.end());
    const auto r = detail::run_with_markers(prog, init, markers, vals, step_limit);
    if (r.bug_id() != bug_id) clean.push_back(agreement(perm));
  };
  std::vector<int> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 1);
  if (m <= 8) {
    do {
      test(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    Rng rng(seed);
    for (int i = 0; i < 20000; ++i) test(random_permutation(m, rng));
  }
  std::sort(clean.begin(), clean.end());
  clean.erase(std::unique(clean.begin(), clean.end()), clean.end());

  int best = m;
  for (std::uint32_t f = 1; f < (1u << m); ++f) {
    std::uint64_t need = 0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      if ((f >> pairs[k].first & 1u) && (f >> pairs[k].second & 1u)) need |= std::uint64_t{1} << k;
    }
    const bool forces = std::none_of(clean.begin(), clean.end(), [&](std::uint64_t a) { return (a & need) == need; });
    if (!forces) continue;
    std::set<int> threads;
    for (int i = 0; i < m; ++i) {
      if (f >> i & 1u) threads.insert(owner[static_cast<std::size_t>(i)]);
    }
    best = std::min(best, static_cast<int>(threads.size()));
  }
  return std::max(2, best);
}

struct Signature {
  int c = 0;
  int v = 0;
  int t = 0;

  friend bool operator==(const Signature&, const Signature&) = default;
  friend auto operator<=>(const Signature&, const Signature&) = default;
};

inline std::string to_string(const Signature& s) {
  return "(" + std::to_string(s.c) + "," + std::to_string(s.v) + "," + std::to_string(s.t) + ")";
}

struct Classification {
  Signature signature;
  std::string bug_id;
  Schedule schedule;
  std::uint64_t schedules_executed = 0;  // across all bounds tried
};

struct ClassifyOptions {
  std::uint64_t seed = 1;
  double epsilon = 0.01;
  std::uint32_t l = 0;
  std::size_t max_witnesses = 32;
  unsigned workers = 1;
  std::size_t step_limit = kDefaultStepLimit;
};

/// Lexicographically minimal (c, v, t) at which some bug manifests, or
/// nullopt if none does within the limits.
inline std::optional<Classification> classify_bug(const ProgramDef& prog, Signature limits,
                                                  const ClassifyOptions& opt = {}) {
  const auto vars = discover_variables(prog, opt.l, 0, opt.step_limit);
  std::uint64_t executed = 0;
  for (int c = 0; c <= limits.c; ++c) {
    for (int v = 0; v <= std::min({c, limits.v, static_cast<int>(vars.size())}); ++v) {
      ExplorationConfig cfg;
      cfg.c_max = c;
      cfg.v = v;
      cfg.t = std::max(2, limits.t);
      cfg.l = opt.l;
      cfg.epsilon = opt.epsilon;
      cfg.seed = opt.seed;
      cfg.max_witnesses = opt.max_witnesses;
      cfg.workers = opt.workers;
      cfg.step_limit = opt.step_limit;
      const auto report = explore_bounded(prog, cfg, &vars);
      executed += report.schedules_executed;
      if (!report.bug_found()) continue;
      std::optional<Classification> best;
      for (const auto& bug : report.bugs) {
        for (const auto& w : bug.witnesses) {
          const int t = measure_thread_bound(prog, w, bug.id, opt.seed, opt.step_limit);
          if (!best || t < best->signature.t) {
            best = Classification{{c, v, t}, bug.id, bug.schedule, 0};
            if (w != bug.witnesses.front()) {
              RunConfig rc;
              rc.initial_priorities = w.initial;
              rc.step_limit = opt.step_limit;
              std::size_t pos = 0;
              rc.hook = [&](const StepPoint& p, const Executor&) -> std::optional<PriorityChange> {
                if (pos < w.preemptions.size() && w.preemptions[pos].step == p.step) {
                  return PriorityChange{w.preemptions[pos++].value, false};
                }
                return std::nullopt;
              };
              best->schedule = execute(prog, std::move(rc)).schedule;
            }
          }
        }
      }
      best->schedules_executed = executed;
      return best;
    }
  }
  return std::nullopt;
}

}  // namespace vbt

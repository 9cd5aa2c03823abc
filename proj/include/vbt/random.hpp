#pragma once

// Randomized priority schedulers (PCT, and PCTVB which restricts change
// points to accesses of a few variables), their probability bounds, and the
// executions-to-bug experiment harness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vbt/explore.hpp"
#include "vbt/scheduler.hpp"

namespace vbt {

struct AccessProfile {
  std::map<SiteId, std::uint64_t> k;  // per-site upper bound on accesses per run
  std::uint64_t max_steps = 0;        // upper bound on steps per run

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (const auto& [site, n] : k) s += n;
    return s;
  }
  int sites() const { return static_cast<int>(k.size()); }
  std::uint64_t of(SiteId s) const {
    auto it = k.find(s);
    return it == k.end() ? 0 : it->second;
  }
};

/// Maximum per-site access counts (and steps) over `runs` round-robin runs,
/// rotating the starting thread. Declared sites never accessed get 0.
inline AccessProfile estimate_access_profile(const ProgramDef& prog, int runs, std::uint64_t seed = 0) {
  if (runs < 1) throw std::invalid_argument("estimate_access_profile: runs must be >= 1");
  AccessProfile prof;
  for (const auto& g : prog.globals()) prof.k[g.var.site] = 0;
  for (SiteId s : prog.heap_sites()) prof.k[s] = 0;
  const auto n = static_cast<std::uint64_t>(std::max(1, prog.max_threads()));
  for (int r = 0; r < runs; ++r) {
    const auto res = round_robin_run(prog, static_cast<int>((seed + static_cast<std::uint64_t>(r)) % n));
    for (const auto& [site, count] : res.access_counts) prof.k[site] = std::max(prof.k[site], count);
    prof.max_steps = std::max<std::uint64_t>(prof.max_steps, res.trace.size());
  }
  return prof;
}

struct ChangePoint {
  SiteId site = 0;         // PCTVB only
  std::uint64_t when = 0;  // PCT: 1-based step; PCTVB: 1-based access of `site`
  Priority priority = 0;

  friend bool operator==(const ChangePoint&, const ChangePoint&) = default;
};

struct ChangePointPlan {
  std::vector<SiteId> sites;  // PCTVB variable set
  std::vector<ChangePoint> points;
};

struct RandomRun {
  ExecutionResult result;
  ChangePointPlan plan;
  std::vector<Priority> initial_priorities;
};

namespace detail {

/// `count` distinct indices from [0, universe), in draw order.
inline std::vector<std::uint64_t> sample_distinct(std::uint64_t universe, std::uint64_t count, Rng& rng) {
  count = std::min(count, universe);
  std::vector<std::uint64_t> out;
  std::set<std::uint64_t> used;
  while (out.size() < count) {
    const std::uint64_t x = rng.below(universe);
    if (used.insert(x).second) out.push_back(x);
  }
  return out;
}

/// Priorities d..d+n-1 in random thread order.
inline std::vector<Priority> random_initial(int n, int d, Rng& rng) {
  std::vector<Priority> prio(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) prio[static_cast<std::size_t>(i)] = d + i;
  rng.shuffle(prio);
  return prio;
}

}  // namespace detail

/// One PCT run: random initial priorities d..d+n-1; d-1 distinct change points
/// over steps 1..k; the i-th drawn point lowers the running thread to i.
inline RandomRun pct_run(const ProgramDef& prog, std::uint64_t k, int d, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("pct_run: d must be >= 1");
  Rng rng(seed);
  const int n = prog.max_threads();
  RandomRun out;
  out.initial_priorities = detail::random_initial(n, d, rng);
  const auto draws = detail::sample_distinct(std::max<std::uint64_t>(k, 1), static_cast<std::uint64_t>(d - 1), rng);
  for (std::size_t i = 0; i < draws.size(); ++i) {
    out.plan.points.push_back({0, draws[i] + 1, static_cast<Priority>(i + 1)});
  }
  RunConfig rc;
  rc.initial_priorities = out.initial_priorities;
  const auto& points = out.plan.points;
  rc.hook = [&points](const StepPoint& p, const Executor&) -> std::optional<PriorityChange> {
    for (const auto& cp : points) {
      if (cp.when == p.step + 1u) return PriorityChange{cp.priority, false};
    }
    return std::nullopt;
  };
  out.result = execute(prog, std::move(rc));
  return out;
}

/// One PCTVB run: v sites chosen uniformly (unless given), d-1 distinct change
/// points drawn from {(q, j) : q chosen, 1 <= j <= k_q}; (q, j) fires after the
/// j-th access of site q. Initial order is a uniform random thread order.
inline RandomRun pctvb_run(const ProgramDef& prog, int d, int v, const AccessProfile& profile, std::uint64_t seed,
                           std::optional<std::vector<SiteId>> chosen = std::nullopt) {
  if (d < 1) throw std::invalid_argument("pctvb_run: d must be >= 1");
  Rng rng(seed);
  const int n = prog.max_threads();
  RandomRun out;
  {
    const auto order = random_permutation(n, rng);
    out.initial_priorities.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.initial_priorities[static_cast<std::size_t>(i)] = d - 1 + order[static_cast<std::size_t>(i)];
  }
  if (chosen) {
    out.plan.sites = *chosen;
  } else {
    std::vector<SiteId> all;
    for (const auto& [site, k] : profile.k) all.push_back(site);
    for (auto i : detail::sample_distinct(all.size(), static_cast<std::uint64_t>(std::max(v, 0)), rng)) {
      out.plan.sites.push_back(all[i]);
    }
  }
  std::vector<std::pair<SiteId, std::uint64_t>> universe;
  for (SiteId q : out.plan.sites) {
    for (std::uint64_t j = 1; j <= profile.of(q); ++j) universe.emplace_back(q, j);
  }
  const auto draws = detail::sample_distinct(universe.size(), static_cast<std::uint64_t>(d - 1), rng);
  for (std::size_t i = 0; i < draws.size(); ++i) {
    out.plan.points.push_back({universe[draws[i]].first, universe[draws[i]].second, static_cast<Priority>(i + 1)});
  }

  std::map<SiteId, std::uint64_t> seen;
  RunConfig rc;
  rc.initial_priorities = out.initial_priorities;
  const auto& points = out.plan.points;
  rc.hook = [&](const StepPoint&, const Executor& ex) -> std::optional<PriorityChange> {
    const TraceEntry& e = ex.machine().trace().back();
    std::optional<PriorityChange> change;
    for (std::uint8_t a = 0; a < e.access_count; ++a) {
      const SiteId s = e.accesses[a].var.site;
      if (!is_program_variable(e.accesses[a].var)) continue;
      const std::uint64_t j = ++seen[s];
      for (const auto& cp : points) {
        if (cp.site == s && cp.when == j) change = PriorityChange{cp.priority, false};
      }
    }
    return change;
  };
  out.result = execute(prog, std::move(rc));
  return out;
}

// ---------------------------------------------------------------------------
// Bounds

inline double pct_bound(int n, std::uint64_t k, int d) {
  if (n < 1 || k < 1 || d < 1) throw std::invalid_argument("pct_bound: need n, k, d >= 1");
  return 1.0 / (n * std::pow(static_cast<double>(k), d - 1));
}

inline double pctvb_bound(int n, const std::vector<std::uint64_t>& k_list, int d) {
  std::uint64_t sum = 0;
  for (auto k : k_list) sum += k;
  return pct_bound(n, sum, d);
}

inline double full_bound(int n, int q, int v, const std::vector<std::uint64_t>& k_list, int d) {
  return pctvb_bound(n, k_list, d) / binomial(q, v);
}

struct JensenPair {
  double e1 = 0;
  double e2 = 0;
};

/// E1 = 1/sum(k_q), E2 = (1/Q) sum 1/(Q k_q), over sites with k_q > 0.
inline JensenPair jensen_compare(const std::vector<std::uint64_t>& k) {
  std::vector<double> pos;
  for (auto x : k) {
    if (x > 0) pos.push_back(static_cast<double>(x));
  }
  if (pos.empty()) throw std::invalid_argument("jensen_compare: no accessed sites");
  const auto q = static_cast<double>(pos.size());
  double sum = 0;
  double inv = 0;
  for (double x : pos) {
    sum += x;
    inv += 1.0 / (q * x);
  }
  return {1.0 / sum, inv / q};
}

inline JensenPair jensen_compare(const AccessProfile& profile) {
  std::vector<std::uint64_t> k;
  for (const auto& [site, n] : profile.k) k.push_back(n);
  return jensen_compare(k);
}

/// Whether restricting change points to v of Q variables improves the bound
/// for a depth-d bug, given f = (accesses of the chosen variables) / (k/Q).
inline bool vb_helps(int q, int v, int d, double f) {
  if (q < 1 || v < 1 || d < 1 || !(f > 0)) throw std::invalid_argument("vb_helps: invalid arguments");
  return std::pow(static_cast<double>(q), d - v - 1) >= std::pow(v * f, d - 1);
}

// ---------------------------------------------------------------------------
// Experiment harness

enum class StrategyKind : std::uint8_t { PCT, PCTVB, Exhaustive };

struct Strategy {
  StrategyKind kind = StrategyKind::PCT;
  int d = 2;
  int v = 1;
  // Exhaustive: bounded explores every v-subset with thread-bounded orders;
  // unbounded tracks everything with every priority order.
  ExplorationConfig exhaustive;
  bool bounded = true;
  int profile_runs = 8;

  static Strategy pct(int d) { return {StrategyKind::PCT, d, 0, {}, true, 8}; }
  static Strategy pctvb(int d, int v) { return {StrategyKind::PCTVB, d, v, {}, true, 8}; }
  static Strategy exhaustive_bounded(int c, int v, int t) {
    Strategy s{StrategyKind::Exhaustive, 0, v, {}, true, 8};
    s.exhaustive.c_max = c;
    s.exhaustive.v = v;
    s.exhaustive.t = t;
    return s;
  }
  static Strategy exhaustive_unbounded(int c) {
    Strategy s{StrategyKind::Exhaustive, 0, 0, {}, false, 8};
    s.exhaustive.c_max = c;
    s.exhaustive.order_mode = OrderMode::Exhaustive;
    return s;
  }
};

inline std::string to_string(const Strategy& s) {
  switch (s.kind) {
    case StrategyKind::PCT:
      return "pct(d=" + std::to_string(s.d) + ")";
    case StrategyKind::PCTVB:
      return "pctvb(d=" + std::to_string(s.d) + ",v=" + std::to_string(s.v) + ")";
    case StrategyKind::Exhaustive:
      return s.bounded ? "exhaustive" + to_string(Signature{s.exhaustive.c_max, s.exhaustive.v, s.exhaustive.t})
                       : "exhaustive-unbounded(c=" + std::to_string(s.exhaustive.c_max) + ")";
  }
  return "?";
}

struct TrialResult {
  int trial = 0;
  std::uint64_t executions = 0;  // runs until the first bug, or max_runs
  bool found = false;
};

struct ExperimentResult {
  std::vector<TrialResult> trials;
  std::uint64_t max_runs = 0;

  int timed_out() const {
    return static_cast<int>(std::count_if(trials.begin(), trials.end(), [](const auto& t) { return !t.found; }));
  }
  bool all_timed_out() const { return !trials.empty() && timed_out() == static_cast<int>(trials.size()); }
  /// Mean over trials that found the bug; nullopt when none did.
  std::optional<double> mean_found() const {
    double sum = 0;
    int n = 0;
    for (const auto& t : trials) {
      if (t.found) {
        sum += static_cast<double>(t.executions);
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
  }
  /// Mean with timed-out trials counted at max_runs (a lower bound).
  double mean_censored() const {
    double sum = 0;
    for (const auto& t : trials) sum += static_cast<double>(t.executions);
    return trials.empty() ? 0.0 : sum / static_cast<double>(trials.size());
  }
  std::string csv() const {
    std::ostringstream out;
    out << "trial,executions,found\n";
    for (const auto& t : trials) out << t.trial << ',' << t.executions << ',' << (t.found ? 1 : 0) << '\n';
    return out.str();
  }
};

/// Per trial, runs the strategy until the first buggy execution or max_runs.
inline ExperimentResult executions_to_bug(const ProgramDef& prog, const Strategy& strategy, std::uint64_t max_runs,
                                          int trials, std::uint64_t seed) {
  ExperimentResult out;
  out.max_runs = max_runs;
  std::optional<AccessProfile> profile;
  if (strategy.kind != StrategyKind::Exhaustive) profile = estimate_access_profile(prog, strategy.profile_runs, seed);
  std::optional<std::vector<VarInfo>> vars;
  if (strategy.kind == StrategyKind::Exhaustive && strategy.bounded) {
    vars = discover_variables(prog, strategy.exhaustive.l, 0, strategy.exhaustive.step_limit);
  }

  for (int trial = 0; trial < trials; ++trial) {
    TrialResult tr;
    tr.trial = trial;
    const std::uint64_t trial_seed = derive_seed(seed, static_cast<std::uint64_t>(trial));
    if (strategy.kind == StrategyKind::Exhaustive) {
      ExplorationConfig cfg = strategy.exhaustive;
      cfg.seed = trial_seed;
      cfg.stop_on_first_bug = true;
      cfg.max_runs = max_runs;
      const ExplorationReport rep = strategy.bounded ? explore_bounded(prog, cfg, &*vars)
                                                     : explore(prog, TrackedSet::all(cfg.l), cfg);
      tr.found = rep.bug_found();
      tr.executions = tr.found ? rep.bugs.front().found_at_run : std::max(rep.schedules_executed, max_runs);
    } else {
      for (std::uint64_t run = 0; run < max_runs; ++run) {
        const std::uint64_t run_seed = derive_seed(trial_seed, run);
        const RandomRun r = strategy.kind == StrategyKind::PCT
                                ? pct_run(prog, std::max<std::uint64_t>(profile->max_steps, 1), strategy.d, run_seed)
                                : pctvb_run(prog, strategy.d, strategy.v, *profile, run_seed);
        if (r.result.buggy()) {
          tr.found = true;
          tr.executions = run + 1;
          break;
        }
      }
      if (!tr.found) tr.executions = max_runs;
    }
    out.trials.push_back(tr);
  }
  return out;
}

}  // namespace vbt

#pragma once

// Deterministic cooperative executor for modeled programs: one action per
// step, strict priority scheduling, wait/notify emulation, yield handling,
// preemption accounting, and schedule record/replay.

#include <algorithm>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vbt/hbgraph.hpp"
#include "vbt/testkit.hpp"

namespace vbt {

using Priority = std::int64_t;

inline constexpr std::size_t kDefaultStepLimit = 10000;
inline constexpr std::uint32_t kYieldThreshold = 100;
inline constexpr std::uint32_t kAllocCounter = 0xffffffffu;

class ReplayDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ThreadStatus : std::uint8_t { Runnable, Blocked, Halted };

struct StatusInfo {
  ThreadStatus status = ThreadStatus::Runnable;
  std::optional<VarId> blocked_on;
};

// ---------------------------------------------------------------------------
// Machine: program state plus the semantics of each action. Policy-free.

class Machine {
 public:
  explicit Machine(const ProgramDef& prog, std::size_t step_limit = kDefaultStepLimit)
      : prog_(&prog), step_limit_(step_limit) {
    for (const auto& g : prog.globals()) {
      if (g.size == 0) {
        memory_[{g.var.site, 0, -1}] = g.init;
      } else {
        for (std::int32_t i = 0; i < g.size; ++i) memory_[{g.var.site, 0, i}] = g.init;
      }
    }
    for (const auto& body : prog.threads()) add_thread(&body, nullptr);
  }

  Machine(const Machine&) = delete;
  Machine& operator=(const Machine&) = delete;

  const ProgramDef& program() const { return *prog_; }
  int thread_count() const { return static_cast<int>(threads_.size()); }

  ActionKind next_kind(ThreadId t) const {
    const auto& th = at(t);
    if (!th.started) return ActionKind::Start;
    if (th.reacquire && !th.waiting_on) return ActionKind::Lock;
    if (th.task.done()) return ActionKind::Halt;
    return th.ctx->pending_.kind;
  }

  StatusInfo status(ThreadId t) const {
    const auto& th = at(t);
    if (th.halted) return {ThreadStatus::Halted, std::nullopt};
    if (th.waiting_on) return {ThreadStatus::Blocked, th.waiting_on};
    switch (next_kind(t)) {
      case ActionKind::Lock: {
        const VarId m = th.reacquire ? *th.reacquire : th.ctx->pending_.var;
        if (owner_.count(m)) return {ThreadStatus::Blocked, m};
        break;
      }
      case ActionKind::Join: {
        const ThreadId target = th.ctx->pending_.target;
        if (target < 0 || target >= thread_count()) {
          throw ModelError("join on unknown thread " + std::to_string(target));
        }
        if (!at(target).halted) return {ThreadStatus::Blocked, thread_var(target)};
        break;
      }
      default:
        break;
    }
    return {ThreadStatus::Runnable, std::nullopt};
  }

  bool enabled(ThreadId t) const { return status(t).status == ThreadStatus::Runnable; }
  bool halted(ThreadId t) const { return at(t).halted; }

  std::vector<ThreadId> enabled_threads() const {
    std::vector<ThreadId> out;
    for (ThreadId t = 0; t < thread_count(); ++t) {
      if (enabled(t)) out.push_back(t);
    }
    return out;
  }

  bool all_halted() const {
    return std::all_of(threads_.begin(), threads_.end(), [](const auto& th) { return th.halted; });
  }
  bool assertion_failed() const { return failed_; }
  const std::string& failed_assertion() const { return failed_label_; }
  /// No further step is possible: assertion failure, normal end, or deadlock.
  bool finished() const { return failed_ || enabled_threads().empty(); }

  std::optional<ThreadId> mutex_owner(const VarId& m) const {
    auto it = owner_.find(m);
    if (it == owner_.end()) return std::nullopt;
    return it->second;
  }

  Value value(const Location& loc) const {
    auto it = memory_.find(loc);
    if (it == memory_.end()) throw ModelError("read of unallocated cell");
    return it->second;
  }
  Value value(const VarId& v) const { return value(Location{v.site, v.alloc_index, v.element}); }

  const std::vector<TraceEntry>& trace() const { return trace_; }
  const std::map<SiteId, std::uint64_t>& access_counts() const { return access_counts_; }

  /// Executes the next action of `t` and runs its body up to the following
  /// action. Returns the recorded trace entry.
  const TraceEntry& step(ThreadId t) {
    if (failed_) throw std::logic_error("step after assertion failure");
    if (!enabled(t)) throw std::logic_error("step of a thread that is not enabled");
    if (trace_.size() >= step_limit_) {
      throw ModelError("step limit of " + std::to_string(step_limit_) + " actions exceeded");
    }
    ThreadState& th = at(t);
    TraceEntry e;
    e.step = static_cast<std::uint32_t>(trace_.size());
    e.thread = t;
    e.index = th.executed++;
    e.kind = next_kind(t);
    bool resume = true;

    switch (e.kind) {
      case ActionKind::Start:
        th.started = true;
        e.add_access(thread_var(t), false);
        break;
      case ActionKind::Halt:
        th.halted = true;
        resume = false;
        e.add_access(thread_var(t), true);
        break;
      case ActionKind::Lock: {
        const VarId m = th.reacquire ? *th.reacquire : th.ctx->pending_.var;
        owner_[m] = t;
        th.reacquire.reset();
        e.var = m;
        e.add_access(m, true);
        count_access(m);
        break;
      }
      default:
        resume = execute_pending(t, e);
        break;
    }
    trace_.push_back(std::move(e));
    if (resume) resume_thread(t);
    return trace_.back();
  }

  /// Condition wait: releases `mutex`, blocks on `cond`, and arranges for the
  /// mutex to be re-acquired as the thread's next step once notified.
  void wait_s(ThreadId t, const VarId& cond, const VarId& mutex) {
    auto it = owner_.find(mutex);
    if (it == owner_.end() || it->second != t) {
      throw ModelError("wait on " + prog_->describe(cond) + " without holding " + prog_->describe(mutex));
    }
    owner_.erase(it);
    ThreadState& th = at(t);
    th.waiting_on = cond;
    th.reacquire = mutex;
  }

  /// Wakes every thread waiting on `cond`. Woken threads still have to
  /// re-acquire their mutex.
  void notify_s(ThreadId, const VarId& cond) {
    for (auto& th : threads_) {
      if (th.waiting_on && *th.waiting_on == cond) th.waiting_on.reset();
    }
  }

 private:
  struct ThreadState {
    std::unique_ptr<ThreadCtx> ctx;
    std::unique_ptr<ThreadBody> owned_body;
    const ThreadBody* body = nullptr;
    Task<> task;  // declared after ctx: frames may touch ctx when destroyed
    bool started = false;
    bool halted = false;
    std::optional<VarId> waiting_on;
    std::optional<VarId> reacquire;
    std::uint32_t executed = 0;
  };

  ThreadState& at(ThreadId t) { return threads_.at(static_cast<std::size_t>(t)); }
  const ThreadState& at(ThreadId t) const { return threads_.at(static_cast<std::size_t>(t)); }

  ThreadId add_thread(const ThreadBody* body, std::unique_ptr<ThreadBody> owned) {
    const auto tid = static_cast<ThreadId>(threads_.size());
    if (tid >= prog_->max_threads()) {
      throw ModelError("program spawned more than max_threads=" + std::to_string(prog_->max_threads()));
    }
    ThreadState th;
    th.ctx = std::make_unique<ThreadCtx>(tid, prog_->array_mode());
    th.owned_body = std::move(owned);
    th.body = th.owned_body ? th.owned_body.get() : body;
    th.task = (*th.body)(*th.ctx);
    th.ctx->resume_ = th.task.handle();
    threads_.push_back(std::move(th));
    return tid;
  }

  void count_access(const VarId& v) { ++access_counts_[v.site]; }

  bool execute_pending(ThreadId t, TraceEntry& e) {
    ThreadCtx& ctx = *at(t).ctx;
    const Action& a = ctx.pending_;
    switch (a.kind) {
      case ActionKind::Read:
        ctx.result_ = value(a.loc);
        e.var = a.var;
        e.value = ctx.result_;
        e.add_access(a.var, false);
        count_access(a.var);
        return true;
      case ActionKind::Write:
        cell(a.loc) = a.value;
        e.var = a.var;
        e.value = a.value;
        e.add_access(a.var, true);
        count_access(a.var);
        return true;
      case ActionKind::Update: {
        Value& c = cell(a.loc);
        ctx.result_ = c;
        c += a.value;
        e.var = a.var;
        e.value = c;
        e.add_access(a.var, true);
        count_access(a.var);
        return true;
      }
      case ActionKind::Unlock: {
        auto it = owner_.find(a.var);
        if (it == owner_.end() || it->second != t) {
          throw ModelError("unlock of " + prog_->describe(a.var) + " by a thread that does not hold it");
        }
        owner_.erase(it);
        e.var = a.var;
        e.add_access(a.var, true);
        count_access(a.var);
        return true;
      }
      case ActionKind::Wait:
        wait_s(t, a.var, a.mutex);
        e.var = a.var;
        e.add_access(a.var, true);
        e.add_access(a.mutex, true);
        count_access(a.var);
        count_access(a.mutex);
        return false;
      case ActionKind::Notify:
        notify_s(t, a.var);
        e.var = a.var;
        e.add_access(a.var, true);
        count_access(a.var);
        return true;
      case ActionKind::Spawn: {
        auto body = std::make_unique<ThreadBody>(*a.body);
        const ThreadId child = add_thread(nullptr, std::move(body));
        at(t).ctx->result_ = child;  // `at` again: add_thread may reallocate
        e.value = child;
        e.add_access(thread_var(child), true);
        return true;
      }
      case ActionKind::Join:
        e.value = a.target;
        e.add_access(thread_var(a.target), false);
        return true;
      case ActionKind::Yield:
        return true;
      case ActionKind::Assert:
        e.label = a.label;
        e.value = a.predicate ? 1 : 0;
        if (!a.predicate) {
          failed_ = true;
          failed_label_ = a.label;
          return false;
        }
        return true;
      case ActionKind::Alloc: {
        const VarId v = alloc_var(a.site, ctx.callstack_hash(), counters_);
        memory_[{v.site, v.alloc_index, -1}] = 0;
        ctx.alloc_result_ = v;
        e.var = v;
        e.value = v.alloc_index;
        e.add_access(v, true);
        // The per-site counter orders allocations at one site, so HB-equal
        // runs also agree on allocation indices.
        e.add_access(VarId{v.site, kAllocCounter, -1, 0}, true);
        return true;
      }
      default:
        throw std::logic_error("unexpected pending action");
    }
  }

  Value& cell(const Location& loc) {
    auto it = memory_.find(loc);
    if (it == memory_.end()) throw ModelError("write to unallocated cell");
    return it->second;
  }

  void resume_thread(ThreadId t) {
    ThreadState& th = at(t);
    th.ctx->resume_.resume();
    if (th.task.done()) th.task.rethrow_if_failed();
  }

  const ProgramDef* prog_;
  std::size_t step_limit_;
  std::vector<ThreadState> threads_;
  std::map<Location, Value> memory_;
  std::map<VarId, ThreadId> owner_;
  AllocCounters counters_;
  std::vector<TraceEntry> trace_;
  std::map<SiteId, std::uint64_t> access_counts_;
  bool failed_ = false;
  std::string failed_label_;
};

// ---------------------------------------------------------------------------
// Schedules

struct Decision {
  std::uint32_t step = 0;
  ThreadId thread = 0;
  bool preempt = false;
  Priority priority = 0;  // thread's priority after this step

  friend bool operator==(const Decision&, const Decision&) = default;
};

struct Schedule {
  std::string program;
  std::vector<Priority> initial_priorities;
  std::vector<Decision> decisions;

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

/// Line-oriented, platform-independent schedule record:
///   vbt-schedule 1
///   program <name>
///   priorities <k> <p0> ... <pk-1>
///   decisions <m>
///   <step> <thread> <P|-> <priority>     (m lines)
///   end
inline std::string serialize_schedule(const Schedule& s) {
  std::ostringstream out;
  out << "vbt-schedule 1\n";
  out << "program " << s.program << "\n";
  out << "priorities " << s.initial_priorities.size();
  for (auto p : s.initial_priorities) out << ' ' << p;
  out << "\ndecisions " << s.decisions.size() << "\n";
  for (const auto& d : s.decisions) {
    out << d.step << ' ' << d.thread << ' ' << (d.preempt ? 'P' : '-') << ' ' << d.priority << "\n";
  }
  out << "end\n";
  return out.str();
}

/// Reads the first schedule block in `in`; lines before it are skipped, so a
/// whole report file can be passed.
inline Schedule parse_schedule(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    if (line == "vbt-schedule 1") break;
  }
  if (!in) throw std::runtime_error("no schedule block found");
  Schedule s;
  auto expect = [&](const std::string& key) -> std::istringstream {
    if (!std::getline(in, line)) throw std::runtime_error("truncated schedule");
    std::istringstream fields(line);
    std::string k;
    fields >> k;
    if (k != key) throw std::runtime_error("expected '" + key + "' in schedule, got '" + k + "'");
    return fields;
  };
  {
    auto f = expect("program");
    f >> s.program;
  }
  {
    auto f = expect("priorities");
    std::size_t k = 0;
    f >> k;
    s.initial_priorities.resize(k);
    for (auto& p : s.initial_priorities) f >> p;
    if (!f) throw std::runtime_error("malformed priorities line");
  }
  std::size_t m = 0;
  {
    auto f = expect("decisions");
    f >> m;
  }
  s.decisions.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("truncated schedule");
    std::istringstream f(line);
    Decision d;
    char mark = '-';
    f >> d.step >> d.thread >> mark >> d.priority;
    if (!f || (mark != 'P' && mark != '-')) throw std::runtime_error("malformed decision: " + line);
    d.preempt = mark == 'P';
    s.decisions.push_back(d);
  }
  if (!std::getline(in, line) || line != "end") throw std::runtime_error("missing schedule terminator");
  return s;
}

inline Schedule parse_schedule(const std::string& text) {
  std::istringstream in(text);
  return parse_schedule(in);
}

// ---------------------------------------------------------------------------
// Execution results

struct ExecutionResult {
  std::vector<TraceEntry> trace;
  bool assertion_failed = false;
  std::string failed_assertion;
  bool deadlocked = false;
  std::map<SiteId, std::uint64_t> access_counts;
  Schedule schedule;
  int c_used = 0;  // priority-order violations executed
  int v_used = 0;  // distinct variables at which they happened
  int t_used = 0;  // threads incident to a cross-thread conflict
  std::vector<VarId> preempted_vars;
  HBKey hb_key;

  bool buggy() const { return assertion_failed || deadlocked; }
  std::string bug_id() const {
    if (assertion_failed) return "assert:" + failed_assertion;
    if (deadlocked) return "deadlock";
    return {};
  }
  HBGraph hb() const { return build_hb_graph(trace); }
};

inline std::string trace_to_string(const ProgramDef& prog, const std::vector<TraceEntry>& trace) {
  std::ostringstream out;
  for (const auto& e : trace) {
    out << e.step << ' ' << e.thread << ' ' << e.index << ' ' << to_string(e.kind);
    if (e.var) out << ' ' << prog.describe(*e.var);
    out << ' ' << e.value;
    if (!e.label.empty()) out << ' ' << e.label;
    out << '\n';
  }
  return out.str();
}

namespace detail {

inline int threads_in_conflicts(const std::vector<TraceEntry>& trace) {
  struct Use {
    std::set<ThreadId> access;
    std::set<ThreadId> write;
  };
  std::map<VarId, Use> uses;
  for (const auto& e : trace) {
    for (std::uint8_t i = 0; i < e.access_count; ++i) {
      auto& u = uses[e.accesses[i].var];
      u.access.insert(e.thread);
      if (e.accesses[i].write) u.write.insert(e.thread);
    }
  }
  std::set<ThreadId> incident;
  for (const auto& [var, u] : uses) {
    if (u.access.size() < 2 || u.write.empty()) continue;
    for (ThreadId x : u.access) {
      const bool other_writer = u.write.size() > 1 || !u.write.count(x);
      if (u.write.count(x) || other_writer) incident.insert(x);
    }
  }
  return static_cast<int>(incident.size());
}

inline ExecutionResult collect(const Machine& m, Schedule schedule, int c_used,
                               const std::set<VarId>& preempted, const HBKey& key) {
  ExecutionResult r;
  r.trace = m.trace();
  r.assertion_failed = m.assertion_failed();
  r.failed_assertion = m.failed_assertion();
  r.deadlocked = !m.assertion_failed() && !m.all_halted() && m.enabled_threads().empty();
  r.access_counts = m.access_counts();
  r.schedule = std::move(schedule);
  r.c_used = c_used;
  r.preempted_vars.assign(preempted.begin(), preempted.end());
  r.v_used = static_cast<int>(preempted.size());
  r.t_used = threads_in_conflicts(r.trace);
  if (c_used >= 1) r.t_used = std::max(r.t_used, 2);
  r.hb_key = key;
  return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Priority scheduling

struct PickResult {
  enum class Kind : std::uint8_t { Thread, Deadlock, ProgramEnd };
  Kind kind = Kind::ProgramEnd;
  ThreadId thread = -1;
};

/// The runnable thread with maximal priority; ties go to the lower id.
inline PickResult highest_priority_enabled(const Machine& m, const std::vector<Priority>& prio) {
  PickResult best{PickResult::Kind::ProgramEnd, -1};
  bool any_alive = false;
  for (ThreadId t = 0; t < m.thread_count(); ++t) {
    if (m.halted(t)) continue;
    any_alive = true;
    if (!m.enabled(t)) continue;
    if (best.thread < 0 || prio[static_cast<std::size_t>(t)] > prio[static_cast<std::size_t>(best.thread)]) {
      best = {PickResult::Kind::Thread, t};
    }
  }
  if (best.thread < 0) best.kind = any_alive ? PickResult::Kind::Deadlock : PickResult::Kind::ProgramEnd;
  return best;
}

/// A step boundary offered to a priority hook.
struct StepPoint {
  std::uint32_t step = 0;
  ThreadId thread = 0;
  std::uint32_t thread_index = 0;
  ActionKind kind = ActionKind::Start;
  std::optional<VarId> var;
  bool eligible = false;        // fake first access, or access to a tracked variable
  bool thread_enabled = false;  // running thread could continue
};

struct PriorityChange {
  Priority value = 0;
  bool preemption = true;  // explorer preemption: must sit on an eligible point
};

class Executor;
using PriorityHook = std::function<std::optional<PriorityChange>(const StepPoint&, const Executor&)>;

struct RunConfig {
  std::vector<Priority> initial_priorities;  // by thread id, spawned threads included
  const TrackedSet* tracked = nullptr;       // null: only fake first-access points
  PriorityHook hook;
  std::size_t step_limit = kDefaultStepLimit;
};

/// Runs one execution under strict priority scheduling. Hooks observe every
/// step and may change the running thread's priority; a change that leaves a
/// higher-priority thread enabled is a preemption and is counted.
class Executor {
 public:
  Executor(const ProgramDef& prog, RunConfig cfg)
      : machine_(prog, cfg.step_limit), cfg_(std::move(cfg)), prio_(cfg_.initial_priorities) {
    const auto n = static_cast<std::size_t>(prog.max_threads());
    if (prio_.size() < n) {
      throw std::invalid_argument("need " + std::to_string(n) + " initial priorities, got " +
                                  std::to_string(prio_.size()));
    }
    yields_.assign(prio_.size(), 0);
    eff_tid_.resize(prio_.size());
    for (std::size_t i = 0; i < eff_tid_.size(); ++i) eff_tid_[i] = static_cast<int>(i);
    schedule_.program = prog.name();
    schedule_.initial_priorities = prio_;
  }

  ExecutionResult run() {
    while (true) {
      if (machine_.assertion_failed()) break;
      const PickResult pick = highest_priority_enabled(machine_, prio_);
      if (pick.kind != PickResult::Kind::Thread) break;
      step(pick.thread);
    }
    return detail::collect(machine_, schedule_, c_used_, preempted_, hb_.key());
  }

  const Machine& machine() const { return machine_; }
  const ProgramDef& program() const { return machine_.program(); }
  const std::vector<Priority>& priorities() const { return prio_; }
  Priority priority(ThreadId t) const { return prio_.at(static_cast<std::size_t>(t)); }
  int c_used() const { return c_used_; }
  const std::set<VarId>& preempted_vars() const { return preempted_; }
  const HbKeyBuilder& hb() const { return hb_; }
  std::uint32_t yield_count(ThreadId t) const { return yields_.at(static_cast<std::size_t>(t)); }
  int effective_tid(ThreadId t) const { return eff_tid_.at(static_cast<std::size_t>(t)); }
  const Schedule& schedule() const { return schedule_; }

  /// True if giving `t` priority `value` would let another enabled thread run.
  bool would_violate(ThreadId t, Priority value) const {
    if (!machine_.enabled(t)) return false;
    for (ThreadId u = 0; u < machine_.thread_count(); ++u) {
      if (u != t && machine_.enabled(u) && prio_[static_cast<std::size_t>(u)] > value) return true;
    }
    return false;
  }

  /// Consecutive-yield accounting; past the threshold the thread drops below
  /// every current priority.
  void handle_yield(ThreadId t) {
    auto& count = yields_.at(static_cast<std::size_t>(t));
    ++count;
    if (count > kYieldThreshold) {
      prio_[static_cast<std::size_t>(t)] = *std::min_element(prio_.begin(), prio_.end()) - 1;
    }
  }

 private:
  void step(ThreadId t) {
    const TraceEntry& e = machine_.step(t);
    hb_.add(e);
    schedule_.decisions.push_back({e.step, t, false, prio_[static_cast<std::size_t>(t)]});
    if (e.kind == ActionKind::Yield) {
      handle_yield(t);
    } else {
      yields_[static_cast<std::size_t>(t)] = 0;
    }
    if (!cfg_.hook) {
      schedule_.decisions.back().priority = prio_[static_cast<std::size_t>(t)];
      return;
    }
    StepPoint p;
    p.step = e.step;
    p.thread = t;
    p.thread_index = e.index;
    p.kind = e.kind;
    p.var = e.var;
    p.eligible = is_eligible(e);
    p.thread_enabled = !machine_.assertion_failed() && machine_.enabled(t);
    if (machine_.assertion_failed()) return;
    if (auto change = cfg_.hook(p, *this)) apply(p, *change);
    schedule_.decisions.back().priority = prio_[static_cast<std::size_t>(t)];
  }

  bool is_eligible(const TraceEntry& e) const {
    switch (e.kind) {
      case ActionKind::Start:
        return true;
      case ActionKind::Read:
      case ActionKind::Write:
      case ActionKind::Update:
      case ActionKind::Lock:
      case ActionKind::Unlock:
      case ActionKind::Wait:
      case ActionKind::Notify:
        return cfg_.tracked && e.var && cfg_.tracked->contains(*e.var);
      default:
        return false;
    }
  }

  void apply(const StepPoint& p, const PriorityChange& change) {
    if (change.preemption && !p.eligible) {
      throw std::logic_error("preemption requested at a non-eligible point (step " +
                             std::to_string(p.step) + ")");
    }
    const bool violation = would_violate(p.thread, change.value);
    prio_[static_cast<std::size_t>(p.thread)] = change.value;
    if (!violation) return;
    ++c_used_;
    eff_tid_[static_cast<std::size_t>(p.thread)] += machine_.program().max_threads();
    schedule_.decisions.back().preempt = true;
    if (p.var && p.kind != ActionKind::Start) preempted_.insert(*p.var);
  }

  Machine machine_;
  RunConfig cfg_;
  std::vector<Priority> prio_;
  std::vector<std::uint32_t> yields_;
  std::vector<int> eff_tid_;
  Schedule schedule_;
  int c_used_ = 0;
  std::set<VarId> preempted_;
  HbKeyBuilder hb_;
};

inline ExecutionResult execute(const ProgramDef& prog, RunConfig cfg) {
  Executor ex(prog, std::move(cfg));
  return ex.run();
}

/// Permutation of 1..(n+c): entries [0, n) are initial thread priorities,
/// entry n+i is the priority taken by a thread at its (i+1)-th preemption.
struct PriorityOrder {
  std::vector<int> perm;
  int threads = 0;

  int fragment_slots() const { return static_cast<int>(perm.size()) - threads; }
  std::vector<Priority> initial() const {
    return std::vector<Priority>(perm.begin(), perm.begin() + threads);
  }
  Priority slot(int preemption_index) const {
    return perm.at(static_cast<std::size_t>(threads + preemption_index));
  }
  bool valid() const {
    std::vector<int> s = perm;
    std::sort(s.begin(), s.end());
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != static_cast<int>(i) + 1) return false;
    }
    return threads >= 0 && threads <= static_cast<int>(perm.size());
  }

  friend bool operator==(const PriorityOrder&, const PriorityOrder&) = default;
  friend auto operator<=>(const PriorityOrder&, const PriorityOrder&) = default;
};

/// Decision source for run(): asked at each eligible point where the running
/// thread is still enabled.
using Preemptor = std::function<bool(const StepPoint&)>;

inline ExecutionResult run(const ProgramDef& prog, const PriorityOrder& order, Preemptor preemptor,
                           const TrackedSet* tracked = nullptr) {
  RunConfig cfg;
  cfg.initial_priorities = order.initial();
  cfg.tracked = tracked;
  if (preemptor) {
    cfg.hook = [&order, preemptor](const StepPoint& p, const Executor& ex) -> std::optional<PriorityChange> {
      if (!p.eligible || !p.thread_enabled || !preemptor(p)) return std::nullopt;
      if (ex.c_used() >= order.fragment_slots()) {
        throw std::logic_error("preemption beyond the priority order's fragment slots");
      }
      return PriorityChange{order.slot(ex.c_used()), true};
    };
  }
  return execute(prog, std::move(cfg));
}

/// Re-executes a recorded schedule step by step.
inline ExecutionResult replay(const ProgramDef& prog, const Schedule& sched,
                              std::size_t step_limit = kDefaultStepLimit) {
  if (!sched.program.empty() && sched.program != prog.name()) {
    throw ReplayDivergence("schedule recorded for '" + sched.program + "', not '" + prog.name() + "'");
  }
  Machine m(prog, step_limit);
  HbKeyBuilder hb;
  int c_used = 0;
  std::set<VarId> preempted;
  for (std::size_t i = 0; i < sched.decisions.size(); ++i) {
    const Decision& d = sched.decisions[i];
    if (d.step != i) throw ReplayDivergence("decision " + std::to_string(i) + " has step " + std::to_string(d.step));
    if (m.assertion_failed()) throw ReplayDivergence("program failed before schedule ended");
    if (d.thread < 0 || d.thread >= m.thread_count() || !m.enabled(d.thread)) {
      throw ReplayDivergence("thread " + std::to_string(d.thread) + " not enabled at step " + std::to_string(i));
    }
    const TraceEntry& e = m.step(d.thread);
    hb.add(e);
    if (d.preempt) {
      ++c_used;
      if (e.var && e.kind != ActionKind::Start) preempted.insert(*e.var);
    }
  }
  if (!m.finished()) throw ReplayDivergence("schedule ended while threads were still enabled");
  return detail::collect(m, sched, c_used, preempted, hb.key());
}

}  // namespace vbt

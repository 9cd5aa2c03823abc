#pragma once

// Modeled-program API. A program is a set of thread bodies written as C++20
// coroutines; every `co_await ctx.<op>(...)` is one scheduler-visible atomic
// action. Bodies never run on OS threads; the scheduler resumes them one
// action at a time.

#include <compare>
#include <coroutine>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vbt/util.hpp"

namespace vbt {

/// Raised when a modeled program breaks the model's rules (unlock of a mutex
/// it does not own, out-of-bounds array index, step limit, ...).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ThreadId = int;
using Value = std::int64_t;
using SiteId = std::uint32_t;

/// Pseudo-site naming per-thread handles used by spawn/join/start/halt.
inline constexpr SiteId kThreadSite = 0xffffffffu;

/// Identity of a tracked variable. `element` is -1 for scalars and for a
/// whole array; per-element array tracking sets it to the index.
struct VarId {
  SiteId site = 0;
  std::uint32_t alloc_index = 0;
  std::int32_t element = -1;
  std::uint32_t loop_iter = 0;

  friend bool operator==(const VarId&, const VarId&) = default;
  friend auto operator<=>(const VarId&, const VarId&) = default;
};

struct VarIdHash {
  std::size_t operator()(const VarId& v) const noexcept {
    return static_cast<std::size_t>(
        mix64((static_cast<std::uint64_t>(v.site) << 32) ^ v.alloc_index ^
              (static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.element)) << 20)));
  }
};

inline VarId thread_var(ThreadId tid) {
  return VarId{kThreadSite, static_cast<std::uint32_t>(tid), -1, 0};
}

/// Storage cell. Differs from VarId only in whole-array mode, where every
/// element shares one VarId but keeps its own cell.
struct Location {
  SiteId site = 0;
  std::uint32_t alloc_index = 0;
  std::int32_t element = -1;

  friend bool operator==(const Location&, const Location&) = default;
  friend auto operator<=>(const Location&, const Location&) = default;
};

enum class ArrayMode : std::uint8_t { PerElement, WholeArray };

struct ArrayRef {
  VarId base;
  std::int32_t size = 0;
};

// ---------------------------------------------------------------------------
// Variable naming

/// Per-execution counters behind heap-variable naming.
struct AllocCounters {
  std::map<SiteId, std::uint32_t> per_site;
  std::map<std::pair<SiteId, std::uint64_t>, std::uint32_t> per_callstack;
};

/// Names the next allocation at `site`: alloc_index counts executions of the
/// site, loop_iter counts prior executions with the same call-stack hash.
inline VarId alloc_var(SiteId site, std::uint64_t callstack_hash, AllocCounters& counters) {
  std::uint32_t& count = counters.per_site[site];
  std::uint32_t& lin = counters.per_callstack[{site, callstack_hash}];
  VarId v{site, count, -1, lin};
  ++count;
  ++lin;
  return v;
}

struct VarPattern {
  SiteId site = 0;
  std::optional<std::uint32_t> alloc_index;
  std::optional<std::int32_t> element;

  bool matches(const VarId& v) const {
    return v.site == site && (!alloc_index || *alloc_index == v.alloc_index) &&
           (!element || *element == v.element);
  }

  static VarPattern exact(const VarId& v) { return {v.site, v.alloc_index, v.element}; }

  friend bool operator==(const VarPattern&, const VarPattern&) = default;
  friend auto operator<=>(const VarPattern&, const VarPattern&) = default;
};

inline bool is_tracked(const VarId& var, const std::vector<VarPattern>& tracked,
                       std::uint32_t loop_bound) {
  if (var.loop_iter > loop_bound) return false;
  for (const auto& p : tracked) {
    if (p.matches(var)) return true;
  }
  return false;
}

/// The set of variables whose accesses are preemption points.
struct TrackedSet {
  std::vector<VarPattern> patterns;
  std::uint32_t loop_bound = 0;
  bool everything = false;

  bool contains(const VarId& v) const {
    if (v.site == kThreadSite) return false;
    if (everything) return v.loop_iter <= loop_bound;
    return is_tracked(v, patterns, loop_bound);
  }

  static TrackedSet all(std::uint32_t loop_bound = 0) { return {{}, loop_bound, true}; }
};

inline VarId resolve_array_var(const ArrayRef& array, std::int32_t index, ArrayMode mode) {
  if (index < 0 || index >= array.size) {
    throw ModelError("array index " + std::to_string(index) + " out of bounds (size " +
                     std::to_string(array.size) + ")");
  }
  if (mode == ArrayMode::WholeArray) return array.base;
  VarId v = array.base;
  v.element = index;
  return v;
}

// ---------------------------------------------------------------------------
// Actions and trace entries

enum class ActionKind : std::uint8_t {
  Start,   // fake access before a thread's first action
  Read,
  Write,
  Update,  // atomic read-modify-write (a++)
  Alloc,
  Lock,
  Unlock,
  Wait,
  Notify,
  Spawn,
  Join,
  Yield,
  Assert,
  Halt,
};

inline std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Start: return "start";
    case ActionKind::Read: return "read";
    case ActionKind::Write: return "write";
    case ActionKind::Update: return "update";
    case ActionKind::Alloc: return "alloc";
    case ActionKind::Lock: return "lock";
    case ActionKind::Unlock: return "unlock";
    case ActionKind::Wait: return "wait";
    case ActionKind::Notify: return "notify";
    case ActionKind::Spawn: return "spawn";
    case ActionKind::Join: return "join";
    case ActionKind::Yield: return "yield";
    case ActionKind::Assert: return "assert";
    case ActionKind::Halt: return "halt";
  }
  return "?";
}

class ThreadCtx;
template <typename T = void>
class Task;
using ThreadBody = std::function<Task<>(ThreadCtx&)>;

struct Action {
  ActionKind kind = ActionKind::Start;
  VarId var;             // accessed variable, or cond for Wait
  VarId mutex;           // Wait only
  Location loc;          // cell for Read/Write/Update
  Value value = 0;       // written value / delta
  ThreadId target = -1;  // Join
  bool predicate = true; // Assert
  SiteId site = 0;       // Alloc
  std::string label;     // Assert id
  const ThreadBody* body = nullptr;  // Spawn
};

struct Access {
  VarId var;
  bool write = false;
};

struct TraceEntry {
  std::uint32_t step = 0;
  ThreadId thread = 0;
  std::uint32_t index = 0;  // per-thread action ordinal
  ActionKind kind = ActionKind::Start;
  std::optional<VarId> var;
  Value value = 0;
  std::string label;
  Access accesses[2];
  std::uint8_t access_count = 0;

  void add_access(const VarId& v, bool write) { accesses[access_count++] = Access{v, write}; }
};

// ---------------------------------------------------------------------------
// Coroutine task type

namespace detail {

struct PromiseBase {
  std::coroutine_handle<> continuation;
  std::exception_ptr error;

  struct FinalAwaiter {
    bool await_ready() const noexcept { return false; }
    template <typename P>
    std::coroutine_handle<> await_suspend(std::coroutine_handle<P> h) const noexcept {
      auto next = h.promise().continuation;
      return next ? next : std::noop_coroutine();
    }
    void await_resume() const noexcept {}
  };

  std::suspend_always initial_suspend() const noexcept { return {}; }
  FinalAwaiter final_suspend() const noexcept { return {}; }
  void unhandled_exception() noexcept { error = std::current_exception(); }
};

template <typename T>
struct Promise : PromiseBase {
  std::optional<T> value;
  Task<T> get_return_object();
  void return_value(T v) { value = std::move(v); }
};

template <>
struct Promise<void> : PromiseBase {
  Task<void> get_return_object();
  void return_void() {}
};

}  // namespace detail

/// Lazily started coroutine. Awaiting a Task runs it to completion inside the
/// awaiting thread body, so helper routines can issue actions too.
template <typename T>
class [[nodiscard]] Task {
 public:
  using promise_type = detail::Promise<T>;
  using Handle = std::coroutine_handle<promise_type>;

  Task() = default;
  explicit Task(Handle h) : handle_(h) {}
  Task(Task&& o) noexcept : handle_(std::exchange(o.handle_, {})) {}
  Task& operator=(Task&& o) noexcept {
    if (this != &o) {
      reset();
      handle_ = std::exchange(o.handle_, {});
    }
    return *this;
  }
  Task(const Task&) = delete;
  Task& operator=(const Task&) = delete;
  ~Task() { reset(); }

  bool valid() const { return static_cast<bool>(handle_); }
  bool done() const { return handle_.done(); }
  Handle handle() const { return handle_; }

  void rethrow_if_failed() const {
    if (handle_ && handle_.promise().error) std::rethrow_exception(handle_.promise().error);
  }

  auto operator co_await() && noexcept {
    struct Awaiter {
      Handle h;
      bool await_ready() const noexcept { return false; }
      std::coroutine_handle<> await_suspend(std::coroutine_handle<> parent) noexcept {
        h.promise().continuation = parent;
        return h;
      }
      T await_resume() {
        if (h.promise().error) std::rethrow_exception(h.promise().error);
        if constexpr (!std::is_void_v<T>) return std::move(*h.promise().value);
      }
    };
    return Awaiter{handle_};
  }

 private:
  void reset() {
    if (handle_) handle_.destroy();
    handle_ = {};
  }
  Handle handle_;
};

namespace detail {
template <typename T>
Task<T> Promise<T>::get_return_object() {
  return Task<T>(std::coroutine_handle<Promise<T>>::from_promise(*this));
}
inline Task<void> Promise<void>::get_return_object() {
  return Task<void>(std::coroutine_handle<Promise<void>>::from_promise(*this));
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Thread context

class Machine;

/// Handle through which a thread body issues actions. One per modeled thread.
class ThreadCtx {
 public:
  ThreadCtx(ThreadId tid, ArrayMode mode) : tid_(tid), array_mode_(mode) {}
  ThreadCtx(const ThreadCtx&) = delete;
  ThreadCtx& operator=(const ThreadCtx&) = delete;

  ThreadId id() const { return tid_; }

  template <typename R>
  struct Awaiter {
    ThreadCtx* ctx;
    Action action;
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h) noexcept {
      ctx->pending_ = std::move(action);
      ctx->resume_ = h;
    }
    R await_resume() const noexcept {
      if constexpr (std::is_same_v<R, VarId>) {
        return ctx->alloc_result_;
      } else if constexpr (!std::is_void_v<R>) {
        return static_cast<R>(ctx->result_);
      }
    }
  };

  Awaiter<Value> read(const VarId& v) { return {this, access(ActionKind::Read, v, scalar_loc(v))}; }
  Awaiter<Value> read(const ArrayRef& a, std::int32_t i) {
    return {this, access(ActionKind::Read, resolve_array_var(a, i, array_mode_), element_loc(a, i))};
  }
  Awaiter<void> write(const VarId& v, Value x) {
    Action act = access(ActionKind::Write, v, scalar_loc(v));
    act.value = x;
    return {this, std::move(act)};
  }
  Awaiter<void> write(const ArrayRef& a, std::int32_t i, Value x) {
    Action act = access(ActionKind::Write, resolve_array_var(a, i, array_mode_), element_loc(a, i));
    act.value = x;
    return {this, std::move(act)};
  }
  /// Atomic add; returns the previous value.
  Awaiter<Value> fetch_add(const VarId& v, Value delta) {
    Action act = access(ActionKind::Update, v, scalar_loc(v));
    act.value = delta;
    return {this, std::move(act)};
  }
  Awaiter<void> lock(const VarId& m) { return {this, access(ActionKind::Lock, m, scalar_loc(m))}; }
  Awaiter<void> unlock(const VarId& m) { return {this, access(ActionKind::Unlock, m, scalar_loc(m))}; }
  /// Releases `m`, blocks until notified on `cond`, then re-acquires `m`.
  Awaiter<void> wait(const VarId& cond, const VarId& m) {
    Action act = access(ActionKind::Wait, cond, scalar_loc(cond));
    act.mutex = m;
    return {this, std::move(act)};
  }
  Awaiter<void> notify(const VarId& cond) {
    return {this, access(ActionKind::Notify, cond, scalar_loc(cond))};
  }
  Awaiter<ThreadId> spawn(const ThreadBody& body) {
    Action act;
    act.kind = ActionKind::Spawn;
    act.body = &body;
    return {this, std::move(act)};
  }
  Awaiter<void> join(ThreadId t) {
    Action act;
    act.kind = ActionKind::Join;
    act.target = t;
    return {this, std::move(act)};
  }
  Awaiter<void> yield() {
    Action act;
    act.kind = ActionKind::Yield;
    return {this, std::move(act)};
  }
  /// Assertion over thread-local state; failure ends the run as buggy.
  Awaiter<void> check(bool predicate, std::string id) {
    Action act;
    act.kind = ActionKind::Assert;
    act.predicate = predicate;
    act.label = std::move(id);
    return {this, std::move(act)};
  }
  Awaiter<VarId> alloc(SiteId site) {
    Action act;
    act.kind = ActionKind::Alloc;
    act.site = site;
    return {this, std::move(act)};
  }

  /// RAII call-frame marker feeding the call-stack hash used for
  /// loop-iteration numbering of allocations.
  class Frame {
   public:
    Frame(ThreadCtx& ctx, std::string_view label) : ctx_(&ctx) { ctx.frames_.push_back(std::string(label)); }
    Frame(const Frame&) = delete;
    Frame& operator=(const Frame&) = delete;
    ~Frame() { ctx_->frames_.pop_back(); }

   private:
    ThreadCtx* ctx_;
  };

  [[nodiscard]] Frame enter(std::string_view label) { return Frame(*this, label); }

  std::uint64_t callstack_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& f : frames_) {
      for (unsigned char c : f) h = (h ^ c) * 0x100000001b3ULL;
      h = mix64(h);
    }
    return h;
  }

 private:
  friend class Machine;

  static Location scalar_loc(const VarId& v) { return {v.site, v.alloc_index, -1}; }
  static Location element_loc(const ArrayRef& a, std::int32_t i) {
    return {a.base.site, a.base.alloc_index, i};
  }
  static Action access(ActionKind kind, const VarId& v, const Location& loc) {
    Action act;
    act.kind = kind;
    act.var = v;
    act.loc = loc;
    return act;
  }

  ThreadId tid_;
  ArrayMode array_mode_;
  Action pending_;
  std::coroutine_handle<> resume_;
  Value result_ = 0;
  VarId alloc_result_;
  std::vector<std::string> frames_;
};

// ---------------------------------------------------------------------------
// Program definition

/// A deterministic modeled program: initial threads, declared variables, and
/// the array tracking mode. Bodies must terminate under every schedule.
class ProgramDef {
 public:
  struct Global {
    VarId var;
    std::string name;
    Value init = 0;
    std::int32_t size = 0;  // 0 for scalars
    bool sync = false;      // mutex or condition variable
  };

  explicit ProgramDef(std::string name = "program") : name_(std::move(name)) {}

  const std::string& name() const { return name_; }

  VarId global(std::string_view name, Value init = 0) { return declare(name, init, 0, false).base; }
  ArrayRef global_array(std::string_view name, std::int32_t size, Value init = 0) {
    return declare(name, init, size, false);
  }
  VarId mutex(std::string_view name) { return declare(name, 0, 0, true).base; }
  VarId condition(std::string_view name) { return declare(name, 0, 0, true).base; }
  /// Heap-allocation statement; each execution yields a fresh VarId.
  SiteId heap_site(std::string_view name) {
    sites_.emplace_back(name);
    heap_.push_back(static_cast<SiteId>(sites_.size() - 1));
    return heap_.back();
  }

  ThreadId add_thread(ThreadBody body) {
    threads_.push_back(std::move(body));
    max_threads_ = std::max(max_threads_, static_cast<int>(threads_.size()));
    return static_cast<ThreadId>(threads_.size() - 1);
  }

  void set_array_mode(ArrayMode m) { array_mode_ = m; }
  ArrayMode array_mode() const { return array_mode_; }

  /// Upper bound on threads ever alive, including spawned ones.
  void set_max_threads(int n) { max_threads_ = std::max(n, static_cast<int>(threads_.size())); }
  int max_threads() const { return max_threads_; }

  const std::vector<ThreadBody>& threads() const { return threads_; }
  const std::vector<Global>& globals() const { return globals_; }
  const std::vector<SiteId>& heap_sites() const { return heap_; }
  std::size_t site_count() const { return sites_.size(); }
  const std::string& site_name(SiteId s) const { return sites_.at(s); }

  std::optional<SiteId> find_site(std::string_view name) const {
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      if (sites_[i] == name) return static_cast<SiteId>(i);
    }
    return std::nullopt;
  }

  std::string describe(const VarId& v) const {
    std::string s = v.site == kThreadSite ? std::string("thread") : site_name(v.site);
    const bool heap = std::find(heap_.begin(), heap_.end(), v.site) != heap_.end();
    if (heap || v.site == kThreadSite) s += "#" + std::to_string(v.alloc_index);
    if (v.element >= 0) s += "[" + std::to_string(v.element) + "]";
    return s;
  }

 private:
  ArrayRef declare(std::string_view name, Value init, std::int32_t size, bool sync) {
    sites_.emplace_back(name);
    VarId v{static_cast<SiteId>(sites_.size() - 1), 0, -1, 0};
    globals_.push_back(Global{v, std::string(name), init, size, sync});
    return ArrayRef{v, size};
  }

  std::string name_;
  std::vector<ThreadBody> threads_;
  std::vector<Global> globals_;
  std::vector<std::string> sites_;
  std::vector<SiteId> heap_;
  ArrayMode array_mode_ = ArrayMode::PerElement;
  int max_threads_ = 0;
};

}  // namespace vbt

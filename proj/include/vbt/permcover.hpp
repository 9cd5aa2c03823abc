#pragma once

// Random permutations and t-subset ordering coverage.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "vbt/util.hpp"

namespace vbt {

class CoverageStall : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform permutation of the values 1..n.
inline std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 1);
  rng.shuffle(p);
  return p;
}

/// Number of uniform random permutations of n elements that cover every
/// ordering of every t-subset with probability at least 1 - epsilon.
inline std::uint64_t required_permutations(int n, int t, double epsilon) {
  if (n < 1 || t < 1 || t > n) throw std::invalid_argument("required_permutations: need n >= t >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("required_permutations: epsilon not in (0,1)");
  const double count = factorial(t + 1) * (std::log(static_cast<double>(n) * t) + std::log(1.0 / epsilon));
  return static_cast<std::uint64_t>(std::ceil(count));
}

/// Which orderings of which t-subsets have been seen. Either every t-subset of
/// n positions, or a fixed random sample of them.
class CoverageState {
 public:
  static CoverageState exhaustive(int n, int t) {
    CoverageState s(n, t);
    s.subsets_ = combinations(n, t);
    s.init();
    return s;
  }

  static CoverageState sampled(int n, int t, std::size_t count, Rng& rng) {
    CoverageState s(n, t);
    if (binomial(n, t) <= static_cast<double>(count)) return exhaustive(n, t);
    std::set<std::vector<int>> chosen;
    std::vector<int> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
    while (chosen.size() < count) {
      // partial Fisher-Yates for t distinct positions
      for (int i = 0; i < t; ++i) {
        const auto j = static_cast<std::size_t>(i) + rng.below(static_cast<std::uint64_t>(n - i));
        std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
      }
      std::vector<int> sub(pool.begin(), pool.begin() + t);
      std::sort(sub.begin(), sub.end());
      chosen.insert(std::move(sub));
    }
    s.subsets_.assign(chosen.begin(), chosen.end());
    s.init();
    return s;
  }

  int n() const { return n_; }
  int t() const { return t_; }
  std::size_t subset_count() const { return subsets_.size(); }
  std::uint64_t universe_size() const { return subsets_.size() * orders_; }
  std::uint64_t seen_count() const { return seen_count_; }
  bool complete() const { return seen_count_ == universe_size(); }

  bool seen(std::size_t subset, std::size_t order) const { return seen_[subset * orders_ + order]; }
  const std::vector<int>& subset(std::size_t i) const { return subsets_[i]; }

  /// Records the relative order that `perm` induces on every tracked subset.
  /// perm[i] is the rank of position i.
  void update(const std::vector<int>& perm) {
    if (static_cast<int>(perm.size()) != n_) throw std::invalid_argument("permutation size mismatch");
    std::vector<int> keys(static_cast<std::size_t>(t_));
    std::size_t w = 0;
    for (std::size_t r = 0; r < open_.size(); ++r) {
      const std::size_t s = open_[r];
      for (int i = 0; i < t_; ++i) {
        keys[static_cast<std::size_t>(i)] = perm[static_cast<std::size_t>(subsets_[s][static_cast<std::size_t>(i)])];
      }
      const std::size_t o = order_index(keys);
      if (!seen_[s * orders_ + o]) {
        seen_[s * orders_ + o] = true;
        ++seen_count_;
        ++per_subset_[s];
      }
      if (per_subset_[s] < orders_) open_[w++] = s;
    }
    open_.resize(w);
  }

 private:
  CoverageState(int n, int t) : n_(n), t_(t) {
    if (t < 1 || t > n) throw std::invalid_argument("coverage: need n >= t >= 1");
    orders_ = static_cast<std::size_t>(factorial(t));
  }

  void init() {
    seen_.assign(subsets_.size() * orders_, false);
    per_subset_.assign(subsets_.size(), 0);
    open_.resize(subsets_.size());
    std::iota(open_.begin(), open_.end(), std::size_t{0});
  }

  int n_;
  int t_;
  std::size_t orders_ = 1;
  std::vector<std::vector<int>> subsets_;
  std::vector<bool> seen_;
  std::vector<std::size_t> per_subset_;
  std::vector<std::size_t> open_;
  std::uint64_t seen_count_ = 0;
};

inline void update_coverage(CoverageState& state, const std::vector<int>& perm) { state.update(perm); }

/// Draws uniform permutations until the (possibly sampled) coverage universe
/// is complete and returns how many were needed.
inline std::uint64_t simulate_to_coverage(int n, int t, double epsilon, std::uint64_t seed,
                                          std::optional<std::size_t> subset_sample = std::nullopt) {
  Rng rng(seed);
  CoverageState state = subset_sample ? CoverageState::sampled(n, t, *subset_sample, rng)
                                      : CoverageState::exhaustive(n, t);
  const std::uint64_t cap = 100 * required_permutations(n, t, epsilon);
  std::uint64_t drawn = 0;
  while (!state.complete()) {
    if (drawn >= cap) {
      throw CoverageStall("coverage incomplete after " + std::to_string(drawn) + " permutations (" +
                          std::to_string(state.seen_count()) + "/" + std::to_string(state.universe_size()) +
                          " orderings seen)");
    }
    state.update(random_permutation(n, rng));
    ++drawn;
  }
  return drawn;
}

}  // namespace vbt

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <ctime>
#include <functional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "slimnas/archspace.hpp"
#include "slimnas/costmodel.hpp"
#include "slimnas/evaluator.hpp"
#include "slimnas/sampling.hpp"

namespace slimnas {

// All scalars of the evolutionary search. Defaults follow the reference
// setting: P=50, T=20, p=0.1, m=25, k=20, n=10.
struct EvolutionParams {
  int population_size = 50;   // P
  int epochs = 20;            // T
  double prob = 0.1;          // p, per-layer mutation/crossover probability
  int mutation_times = 25;    // m
  int crossover_times = 25;   // tied to m unless overridden
  int top_k = 20;             // parents pool size
  int top_n = 10;             // final selection size
  uint64_t seed = 0;
  int max_sample_retries = 10000;

  void validate() const {
    if (population_size < 1) throw ConfigError("evolution.population_size must be positive");
    if (epochs < 0) throw ConfigError("evolution.epochs must be >= 0");
    if (prob < 0.0 || prob > 1.0) throw ConfigError("evolution.prob must be in [0, 1]");
    if (mutation_times < 0 || crossover_times < 0)
      throw ConfigError("evolution mutation/crossover times must be >= 0");
    if (top_k < 1 || top_k > population_size) throw ConfigError("evolution.top_k must be in [1, P]");
    if (top_n < 1 || top_n > population_size) throw ConfigError("evolution.top_n must be in [1, P]");
    if (max_sample_retries < 1) throw ConfigError("evolution.max_sample_retries must be positive");
  }
};

enum class Origin { seed, random, mutation, crossover };

inline const char* to_string(Origin o) {
  switch (o) {
    case Origin::seed: return "seed";
    case Origin::random: return "random";
    case Origin::mutation: return "mutation";
    case Origin::crossover: return "crossover";
  }
  return "?";
}

struct Candidate {
  ArchConfig config;
  std::string key;  // canonical string, cached for ordering and dedup
  ResourceCost cost;
  Fitness fitness;
  Origin origin = Origin::random;
  int generation = 0;
};

// Total deterministic order: descending fitness, then ascending flops, then
// ascending params, then lexicographic canonical string.
inline bool precedes(const Candidate& a, const Candidate& b) {
  if (a.fitness.score != b.fitness.score) return a.fitness.score > b.fitness.score;
  if (a.cost.flops != b.cost.flops) return a.cost.flops < b.cost.flops;
  if (a.cost.params != b.cost.params) return a.cost.params < b.cost.params;
  return a.key < b.key;
}

// Sorted, deduplicated candidate list with a capacity. Insertion keeps the
// order invariant; duplicates (by canonical string) are rejected.
class Population {
 public:
  explicit Population(size_t capacity = SIZE_MAX) : capacity_(capacity) {}

  bool contains(const std::string& key) const { return keys_.count(key) != 0; }
  size_t size() const { return members_.size(); }
  const std::vector<Candidate>& members() const { return members_; }

  bool insert(Candidate c) {
    if (contains(c.key)) return false;
    keys_.insert(c.key);
    const auto pos = std::lower_bound(members_.begin(), members_.end(), c,
                                      [](const Candidate& x, const Candidate& y) { return precedes(x, y); });
    members_.insert(pos, std::move(c));
    return true;
  }

  // Elitist truncation to the capacity.
  void truncate() {
    while (members_.size() > capacity_) {
      keys_.erase(members_.back().key);
      members_.pop_back();
    }
  }

  std::vector<Candidate> top(size_t n) const {
    const size_t count = std::min(n, members_.size());
    return {members_.begin(), members_.begin() + count};
  }

 private:
  size_t capacity_;
  std::vector<Candidate> members_;
  std::set<std::string> keys_;
};

// ---------------------------------------------------------------------------
// Genetic operators
// ---------------------------------------------------------------------------

// Each layer independently resamples uniformly with probability p (possibly
// redrawing the parent's own value), else keeps the parent's factor. The
// whole draw retries until the offspring satisfies the constraints.
inline ArchConfig mutate(const ArchConfig& parent, double p, Rng& rng,
                         const HardwareConstraints& constraints, const BackboneSkeleton& skeleton,
                         int max_retries) {
  detail::ViolationTally tally;
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    std::vector<ScaleFactor> factors;
    factors.reserve(parent.size());
    for (size_t i = 0; i < parent.size(); ++i) {
      if (rng.uniform_double() < p)
        factors.emplace_back(rng.uniform_int(1, 4));
      else
        factors.push_back(parent.at(i));
    }
    ArchConfig child(std::move(factors));
    const ResourceCost cost = evaluate_cost(skeleton, child);
    if (satisfies(cost, constraints)) return child;
    tally.record(cost, constraints);
  }
  throw InfeasibleError("mutation of " + encode(parent) + " found no feasible offspring after " +
                        std::to_string(max_retries) + " tries; tightest constraint: " +
                        tally.tightest(constraints));
}

// Each layer takes parent1's factor with probability p, else parent2's;
// retried under constraints like mutate.
inline ArchConfig crossover(const ArchConfig& parent1, const ArchConfig& parent2, double p, Rng& rng,
                            const HardwareConstraints& constraints, const BackboneSkeleton& skeleton,
                            int max_retries) {
  if (parent1.size() != parent2.size()) throw ConfigError("crossover parents differ in length");
  detail::ViolationTally tally;
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    std::vector<ScaleFactor> factors;
    factors.reserve(parent1.size());
    for (size_t i = 0; i < parent1.size(); ++i)
      factors.push_back(rng.uniform_double() < p ? parent1.at(i) : parent2.at(i));
    ArchConfig child(std::move(factors));
    const ResourceCost cost = evaluate_cost(skeleton, child);
    if (satisfies(cost, constraints)) return child;
    tally.record(cost, constraints);
  }
  throw InfeasibleError("crossover of " + encode(parent1) + " x " + encode(parent2) +
                        " found no feasible offspring after " + std::to_string(max_retries) +
                        " tries; tightest constraint: " + tally.tightest(constraints));
}

// ---------------------------------------------------------------------------
// Search
// ---------------------------------------------------------------------------

// Candidate events stream out in a deterministic order; wall_ms is the
// evaluation's thread-CPU milliseconds (0 for the analytic surrogate), which
// keeps logs byte-identical across runs and across worker counts.
using CandidateSink = std::function<void(const Candidate&, int64_t wall_ms)>;

struct SearchResult {
  std::vector<Candidate> best;  // top-n, descending by the total order
};

namespace detail {

inline int64_t thread_cpu_ns() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<int64_t>(ts.tv_sec) * 1000000000 + ts.tv_nsec;
}

struct PendingCandidate {
  ArchConfig config;
  std::string key;
  ResourceCost cost;
  Origin origin = Origin::random;
  Fitness fitness;
  int64_t wall_ms = 0;
};

// Fitness evaluation of a pregenerated batch. RNG consumption is finished
// before dispatch, and results land by index, so worker count cannot change
// the trajectory.
inline void evaluate_pending(std::vector<PendingCandidate>& pending, Evaluator& evaluator, int workers) {
  const auto run_one = [&](PendingCandidate& p) {
    const int64_t t0 = thread_cpu_ns();
    p.fitness = evaluator.evaluate(p.config);
    p.wall_ms = (thread_cpu_ns() - t0) / 1000000;
  };
  if (workers <= 1 || pending.size() <= 1) {
    for (auto& p : pending) run_one(p);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  const size_t pool_size = std::min(static_cast<size_t>(workers), pending.size());
  pool.reserve(pool_size);
  for (size_t t = 0; t < pool_size; ++t)
    pool.emplace_back([&]() {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= pending.size()) return;
        run_one(pending[i]);
      }
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Evolutionary search: seed the population with the baseline, fill with
// constrained random samples, then iterate mutation/crossover of the running
// top-k with elitist truncation. Deterministic given the seed; the evaluator
// may be fanned out to `workers` threads without changing any output.
inline SearchResult run_search(const BackboneSkeleton& skeleton, const HardwareConstraints& constraints,
                               const EvolutionParams& params, Evaluator& evaluator,
                               const ArchConfig& baseline, const CandidateSink& sink = {},
                               int workers = 1) {
  params.validate();
  skeleton.validate();
  if (static_cast<int>(baseline.size()) != skeleton.searchable_count())
    throw ConfigError("baseline architecture does not match the skeleton");
  const ResourceCost baseline_cost = evaluate_cost(skeleton, baseline);
  if (!satisfies(baseline_cost, constraints))
    throw InfeasibleError("baseline architecture " + encode(baseline) + " violates the constraints");

  Rng rng(params.seed);
  Population population(static_cast<size_t>(params.population_size));
  Population running_top_k(static_cast<size_t>(params.top_k));

  const auto commit = [&](std::vector<detail::PendingCandidate>& pending, int generation) {
    detail::evaluate_pending(pending, evaluator, workers);
    for (auto& p : pending) {
      Candidate c{std::move(p.config), std::move(p.key), p.cost, p.fitness, p.origin, generation};
      if (!population.insert(c)) continue;
      if (sink) sink(c, p.wall_ms);
    }
  };

  // Baseline seeds the population.
  {
    std::vector<detail::PendingCandidate> pending;
    pending.push_back({baseline, encode(baseline), baseline_cost, Origin::seed, {}, 0});
    commit(pending, 0);
  }

  // Fill-up: constrained random samples until the population reaches P.
  // Duplicate draws are redrawn; a long duplicate streak means the feasible
  // set has fewer unique members than P, and fill-up stops early.
  const auto fill_up = [&](int generation) {
    std::vector<detail::PendingCandidate> pending;
    std::set<std::string> staged;
    int duplicate_streak = 0;
    while (population.size() + pending.size() < static_cast<size_t>(params.population_size)) {
      ArchConfig config = sample_random(skeleton, constraints, rng, params.max_sample_retries);
      std::string key = encode(config);
      if (population.contains(key) || staged.count(key) != 0) {
        if (++duplicate_streak >= params.max_sample_retries) break;
        continue;
      }
      duplicate_streak = 0;
      staged.insert(key);
      const ResourceCost cost = evaluate_cost(skeleton, config);
      pending.push_back({std::move(config), std::move(key), cost, Origin::random, {}, 0});
    }
    commit(pending, generation);
  };

  fill_up(0);

  for (int epoch = 1; epoch <= params.epochs; ++epoch) {
    fill_up(epoch);  // no-op after the first epoch's elitist truncation
    for (const Candidate& c : population.top(static_cast<size_t>(params.top_k))) running_top_k.insert(c);
    running_top_k.truncate();
    const auto& parents = running_top_k.members();

    std::vector<detail::PendingCandidate> offspring;
    offspring.reserve(static_cast<size_t>(params.mutation_times) + params.crossover_times);
    for (int j = 0; j < params.mutation_times; ++j) {
      const Candidate& parent = parents[rng.uniform_below(parents.size())];
      ArchConfig child = mutate(parent.config, params.prob, rng, constraints, skeleton,
                                params.max_sample_retries);
      offspring.push_back({child, encode(child), evaluate_cost(skeleton, child), Origin::mutation, {}, 0});
    }
    for (int j = 0; j < params.crossover_times; ++j) {
      const size_t i1 = rng.uniform_below(parents.size());
      size_t i2 = i1;
      if (parents.size() > 1)
        while (i2 == i1) i2 = rng.uniform_below(parents.size());
      ArchConfig child = crossover(parents[i1].config, parents[i2].config, params.prob, rng, constraints,
                                   skeleton, params.max_sample_retries);
      offspring.push_back({child, encode(child), evaluate_cost(skeleton, child), Origin::crossover, {}, 0});
    }
    commit(offspring, epoch);
    population.truncate();
  }

  SearchResult result;
  result.best = population.top(static_cast<size_t>(params.top_n));
  return result;
}

}  // namespace slimnas

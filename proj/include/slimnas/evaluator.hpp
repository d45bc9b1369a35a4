#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "slimnas/archspace.hpp"
#include "slimnas/dataset.hpp"
#include "slimnas/supernet.hpp"

namespace slimnas {

// Validation score in [0, 1]; ties are broken by the evolution module's
// total order, never here.
struct Fitness {
  double score = 0.0;

  friend bool operator==(const Fitness&, const Fitness&) = default;
};

// Top-1 accuracy of the config's inherited (sliced) sub-network on the full
// validation set. Pure: no weight mutation, chunking cannot change results
// because samples are independent.
inline Fitness evaluate_supernet(const SupernetWeights& weights, const BackboneSkeleton& skeleton,
                                 const ArchConfig& config, const LabeledSet& val) {
  const NetworkPlan plan = plan_network(skeleton, config);
  const int n = val.images.n;
  if (n == 0) throw ConfigError("validation set is empty");
  constexpr int kChunk = 64;
  const size_t plane = static_cast<size_t>(val.images.c) * val.images.h * val.images.w;
  int correct = 0;
  for (int start = 0; start < n; start += kChunk) {
    const int count = std::min(kChunk, n - start);
    Tensor4 batch(count, val.images.c, val.images.h, val.images.w);
    std::copy_n(val.images.data.begin() + static_cast<size_t>(start) * plane, plane * count,
                batch.data.begin());
    const Tensor2 logits = forward_net(weights, plan, batch);
    for (int i = 0; i < count; ++i) {
      int best = 0;
      for (int c = 1; c < logits.cols; ++c)
        if (logits.at(i, c) > logits.at(i, best)) best = c;  // ties keep the lowest class
      if (best == val.labels[static_cast<size_t>(start + i)]) ++correct;
    }
  }
  return Fitness{static_cast<double>(correct) / n};
}

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual Fitness evaluate(const ArchConfig& config) = 0;
  virtual std::string id() const = 0;
};

class SupernetEvaluator final : public Evaluator {
 public:
  SupernetEvaluator(const SupernetWeights& weights, const BackboneSkeleton& skeleton,
                    const LabeledSet& val)
      : weights_(weights), skeleton_(skeleton), val_(val) {}

  Fitness evaluate(const ArchConfig& config) override {
    return evaluate_supernet(weights_, skeleton_, config, val_);
  }

  std::string id() const override { return "supernet:" + hash_hex(weights_.skeleton_hash); }

 private:
  const SupernetWeights& weights_;
  const BackboneSkeleton& skeleton_;
  const LabeledSet& val_;
};

// Deterministic analytic stand-in: sigmoid of a seeded linear + pairwise form
// over the factor values, summed in a fixed order so every platform computes
// the same bits. The pairwise terms make greedy per-layer choices suboptimal
// under constraints, which keeps oracle tests non-trivial.
class SurrogateEvaluator final : public Evaluator {
 public:
  SurrogateEvaluator(int num_layers, uint64_t seed) : num_layers_(num_layers), seed_(seed) {
    Rng rng = Rng::derive(seed, 0x7375727267ull);
    linear_.resize(num_layers);
    for (auto& w : linear_) w = rng.uniform_double(-1.0, 1.0);
    pair_.resize(static_cast<size_t>(num_layers) * (num_layers - 1) / 2);
    for (auto& u : pair_) u = rng.uniform_double(-0.5, 0.5);
  }

  // All pairwise terms zero, all linear weights positive: the unconstrained
  // argmax is provably the all-1.0 config.
  static SurrogateEvaluator monotone(int num_layers, uint64_t seed) {
    SurrogateEvaluator e(num_layers, seed);
    Rng rng = Rng::derive(seed, 0x6d6f6e6full);
    for (auto& w : e.linear_) w = rng.uniform_double(0.1, 1.0);
    for (auto& u : e.pair_) u = 0.0;
    return e;
  }

  Fitness evaluate(const ArchConfig& config) override {
    if (static_cast<int>(config.size()) != num_layers_)
      throw ConfigError("surrogate built for " + std::to_string(num_layers_) + " layers, got config of " +
                        std::to_string(config.size()));
    double s = 0.0;
    for (int i = 0; i < num_layers_; ++i) s += linear_[i] * config.at(i).value();
    size_t p = 0;
    for (int i = 0; i < num_layers_; ++i)
      for (int j = i + 1; j < num_layers_; ++j) s += pair_[p++] * config.at(i).value() * config.at(j).value();
    return Fitness{1.0 / (1.0 + std::exp(-s))};
  }

  std::string id() const override { return "surrogate:" + std::to_string(seed_); }

 private:
  int num_layers_;
  uint64_t seed_;
  std::vector<double> linear_;
  std::vector<double> pair_;
};

// Memoizes by canonical architecture string. Map updates are serialized;
// results are interleaving-independent because the inner evaluator is pure.
class CachedEvaluator final : public Evaluator {
 public:
  explicit CachedEvaluator(Evaluator& inner) : inner_(inner) {}

  Fitness evaluate(const ArchConfig& config) override {
    const std::string key = encode(config);
    {
      std::lock_guard<std::mutex> lock(mu_);
      const auto it = cache_.find(key);
      if (it != cache_.end()) {
        ++hits_;
        return it->second;
      }
      ++misses_;
    }
    const Fitness fitness = inner_.evaluate(config);
    std::lock_guard<std::mutex> lock(mu_);
    cache_.emplace(key, fitness);
    return fitness;
  }

  std::string id() const override { return inner_.id(); }

  uint64_t hits() const { return hits_.load(); }
  uint64_t misses() const { return misses_.load(); }

 private:
  Evaluator& inner_;
  std::unordered_map<std::string, Fitness> cache_;
  std::mutex mu_;
  std::atomic<uint64_t> hits_{0};
  std::atomic<uint64_t> misses_{0};
};

}  // namespace slimnas

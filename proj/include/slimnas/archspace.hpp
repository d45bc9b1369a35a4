#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "slimnas/bignum.hpp"
#include "slimnas/errors.hpp"
#include "slimnas/rng.hpp"

namespace slimnas {

// One channel-width scaling factor, stored as integer quarters so that
// equality and hashing are exact. quarters 1..4 represent 0.25/0.5/0.75/1.0.
class ScaleFactor {
 public:
  explicit ScaleFactor(int quarters) : quarters_(quarters) {
    if (quarters < 1 || quarters > 4)
      throw ConfigError("scale factor quarters must be in 1..4, got " + std::to_string(quarters));
  }

  int quarters() const { return quarters_; }
  double value() const { return 0.25 * quarters_; }  // exact in binary
  char digit() const { return static_cast<char>('0' + quarters_); }

  friend bool operator==(ScaleFactor a, ScaleFactor b) { return a.quarters_ == b.quarters_; }
  friend auto operator<=>(ScaleFactor a, ScaleFactor b) { return a.quarters_ <=> b.quarters_; }

 private:
  int quarters_;
};

// The genome of the search: one factor per searchable layer, in skeleton
// order. Immutable once constructed.
class ArchConfig {
 public:
  ArchConfig() = default;
  explicit ArchConfig(std::vector<ScaleFactor> factors) : factors_(std::move(factors)) {}

  size_t size() const { return factors_.size(); }
  ScaleFactor at(size_t i) const { return factors_.at(i); }
  const std::vector<ScaleFactor>& factors() const { return factors_; }

  friend bool operator==(const ArchConfig& a, const ArchConfig& b) = default;

 private:
  std::vector<ScaleFactor> factors_;
};

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

enum class LayerKind { Conv3x3, Conv1x1, GlobalAvgPool, LinearHead };

inline bool is_conv(LayerKind k) { return k == LayerKind::Conv3x3 || k == LayerKind::Conv1x1; }

inline int kernel_size(LayerKind k) { return k == LayerKind::Conv3x3 ? 3 : 1; }

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv3x3: return "conv3x3";
    case LayerKind::Conv1x1: return "conv1x1";
    case LayerKind::GlobalAvgPool: return "global_avg_pool";
    case LayerKind::LinearHead: return "linear_head";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(std::string_view s) {
  if (s == "conv3x3") return LayerKind::Conv3x3;
  if (s == "conv1x1") return LayerKind::Conv1x1;
  if (s == "global_avg_pool") return LayerKind::GlobalAvgPool;
  if (s == "linear_head") return LayerKind::LinearHead;
  throw ConfigError("unknown layer kind '" + std::string(s) + "'");
}

struct LayerDescriptor {
  LayerKind kind = LayerKind::Conv3x3;
  int base_out_channels = 0;  // conv layers only
  int stride = 1;             // conv layers only, in {1, 2}
  bool searchable = false;    // conv layers only
  bool is_neck_output = false;

  friend bool operator==(const LayerDescriptor&, const LayerDescriptor&) = default;
};

// Ordered layer-descriptor list from which the cost model and the supernet
// are both built. Exactly one linear head (last), preceded by exactly one
// global average pool.
struct BackboneSkeleton {
  int input_height = 0;
  int input_width = 0;
  int input_channels = 0;
  std::vector<LayerDescriptor> layers;
  int num_classes = 0;

  int searchable_count() const {
    int n = 0;
    for (const auto& l : layers) n += l.searchable ? 1 : 0;
    return n;
  }

  int conv_count() const {
    int n = 0;
    for (const auto& l : layers) n += is_conv(l.kind) ? 1 : 0;
    return n;
  }

  void validate() const {
    if (input_height < 1 || input_width < 1 || input_channels < 1)
      throw ConfigError("skeleton input dimensions must be positive");
    if (num_classes < 2) throw ConfigError("skeleton num_classes must be >= 2");
    if (layers.size() < 2) throw ConfigError("skeleton needs at least pool + head layers");
    for (size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      const std::string where = "layer " + std::to_string(i);
      if (is_conv(l.kind)) {
        if (l.base_out_channels < 1) throw ConfigError(where + ": base_out_channels must be positive");
        if (l.stride != 1 && l.stride != 2) throw ConfigError(where + ": stride must be 1 or 2");
      } else {
        if (l.searchable) throw ConfigError(where + ": only conv layers can be searchable");
        if (l.kind == LayerKind::LinearHead && i + 1 != layers.size())
          throw ConfigError(where + ": linear_head must be the last layer");
        if (l.kind == LayerKind::GlobalAvgPool && i + 2 != layers.size())
          throw ConfigError(where + ": global_avg_pool must come immediately before linear_head");
      }
    }
    if (layers[layers.size() - 1].kind != LayerKind::LinearHead)
      throw ConfigError("skeleton must end with exactly one linear_head");
    if (layers[layers.size() - 2].kind != LayerKind::GlobalAvgPool)
      throw ConfigError("skeleton must have exactly one global_avg_pool before the head");
    for (size_t i = 0; i + 2 < layers.size(); ++i)
      if (!is_conv(layers[i].kind))
        throw ConfigError("layer " + std::to_string(i) + ": pool/head may appear only at the end");
    // Same-padding ceil division keeps spatial dims >= 1; compute anyway so a
    // future shape rule change cannot silently break the invariant.
    int h = input_height, w = input_width;
    for (const auto& l : layers)
      if (is_conv(l.kind)) {
        h = (h + l.stride - 1) / l.stride;
        w = (w + l.stride - 1) / l.stride;
      }
    if (h < 1 || w < 1) throw ConfigError("skeleton strides reduce spatial size below 1");
  }

  // Stable FNV-1a digest of the canonical form; embedded in weight files and
  // run logs to prevent cross-run mix-ups.
  uint64_t hash() const {
    std::string canon = "skel/v1;" + std::to_string(input_height) + ";" + std::to_string(input_width) +
                        ";" + std::to_string(input_channels) + ";" + std::to_string(num_classes);
    for (const auto& l : layers) {
      canon += ";" + std::string(to_string(l.kind));
      if (is_conv(l.kind))
        canon += "," + std::to_string(l.base_out_channels) + "," + std::to_string(l.stride) + "," +
                 (l.searchable ? "s" : "f");
      canon += l.is_neck_output ? ",n" : ",-";
    }
    return fnv1a64(canon);
  }

  friend bool operator==(const BackboneSkeleton&, const BackboneSkeleton&) = default;
};

inline std::string hash_hex(uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Exact |factors|^(searchable layers); arbitrary precision.
inline BigUint space_cardinality(const BackboneSkeleton& skeleton, int factor_count) {
  if (factor_count < 1) throw ConfigError("factor_count must be >= 1");
  return BigUint::pow(static_cast<uint64_t>(factor_count),
                      static_cast<uint64_t>(skeleton.searchable_count()));
}

// Actual out-channels per conv layer, in skeleton order. Searchable layers
// scale by their factor with round-half-up and a floor of one channel.
inline std::vector<int> resolve_channels(const BackboneSkeleton& skeleton, const ArchConfig& config) {
  if (static_cast<int>(config.size()) != skeleton.searchable_count())
    throw ConfigError("config has " + std::to_string(config.size()) + " factors but skeleton has " +
                      std::to_string(skeleton.searchable_count()) + " searchable layers");
  std::vector<int> channels;
  channels.reserve(skeleton.conv_count());
  size_t si = 0;
  for (const auto& l : skeleton.layers) {
    if (!is_conv(l.kind)) continue;
    if (l.searchable) {
      const int q = config.at(si++).quarters();
      // round-half-up of base*q/4 in exact integer arithmetic
      const int scaled = (l.base_out_channels * q + 2) / 4;
      channels.push_back(scaled < 1 ? 1 : scaled);
    } else {
      channels.push_back(l.base_out_channels);
    }
  }
  return channels;
}

// Canonical architecture string: one quarter digit per searchable layer.
inline std::string encode(const ArchConfig& config) {
  std::string s;
  s.reserve(config.size());
  for (const auto& f : config.factors()) s.push_back(f.digit());
  return s;
}

inline ArchConfig decode(const std::string& s, const BackboneSkeleton& skeleton) {
  const int want = skeleton.searchable_count();
  if (static_cast<int>(s.size()) != want)
    throw ParseError("architecture string '" + s + "' has length " + std::to_string(s.size()) +
                     ", skeleton has " + std::to_string(want) + " searchable layers");
  std::vector<ScaleFactor> factors;
  factors.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c < '1' || c > '4')
      throw ParseError("architecture string '" + s + "': invalid digit '" + std::string(1, c) +
                       "' at position " + std::to_string(i));
    factors.emplace_back(c - '0');
  }
  return ArchConfig(std::move(factors));
}

// All-same-factor config (quarters=4 gives the full-width baseline).
inline ArchConfig uniform_config(const BackboneSkeleton& skeleton, int quarters) {
  return ArchConfig(std::vector<ScaleFactor>(skeleton.searchable_count(), ScaleFactor(quarters)));
}

// Unconstrained uniform draw, one factor per searchable layer.
inline ArchConfig random_config(const BackboneSkeleton& skeleton, Rng& rng) {
  std::vector<ScaleFactor> factors;
  const int n = skeleton.searchable_count();
  factors.reserve(n);
  for (int i = 0; i < n; ++i) factors.emplace_back(rng.uniform_int(1, 4));
  return ArchConfig(std::move(factors));
}

}  // namespace slimnas

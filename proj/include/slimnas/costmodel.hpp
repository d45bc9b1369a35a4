#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include "slimnas/archspace.hpp"

namespace slimnas {

// Exact integer resource costs, additive across layers.
// Convention: 1 multiply-accumulate = 2 FLOPs; biases counted in params.
struct ResourceCost {
  uint64_t params = 0;
  uint64_t flops = 0;

  friend bool operator==(const ResourceCost&, const ResourceCost&) = default;
};

// An absent bound means unconstrained on that axis. Bounds are inclusive.
struct HardwareConstraints {
  std::optional<uint64_t> max_params;
  std::optional<uint64_t> max_flops;

  bool unconstrained() const { return !max_params && !max_flops; }
};

// Analytic parameter/FLOP count for one forward pass of (skeleton, config).
// Conv layers use same-padding semantics: H_out = ceil(H_in / stride), and
// FLOPs are counted at the output spatial size.
inline ResourceCost evaluate_cost(const BackboneSkeleton& skeleton, const ArchConfig& config) {
  const std::vector<int> channels = resolve_channels(skeleton, config);
  ResourceCost cost;
  uint64_t cin = static_cast<uint64_t>(skeleton.input_channels);
  uint64_t h = static_cast<uint64_t>(skeleton.input_height);
  uint64_t w = static_cast<uint64_t>(skeleton.input_width);
  size_t conv_i = 0;
  for (const auto& l : skeleton.layers) {
    switch (l.kind) {
      case LayerKind::Conv3x3:
      case LayerKind::Conv1x1: {
        const uint64_t k = static_cast<uint64_t>(kernel_size(l.kind));
        const uint64_t cout = static_cast<uint64_t>(channels[conv_i++]);
        const uint64_t stride = static_cast<uint64_t>(l.stride);
        h = (h + stride - 1) / stride;
        w = (w + stride - 1) / stride;
        cost.params += k * k * cin * cout + cout;
        cost.flops += 2 * k * k * cin * cout * h * w;
        cin = cout;
        break;
      }
      case LayerKind::GlobalAvgPool:
        cost.flops += cin * h * w;
        h = 1;
        w = 1;
        break;
      case LayerKind::LinearHead: {
        const uint64_t classes = static_cast<uint64_t>(skeleton.num_classes);
        cost.params += cin * classes + classes;
        cost.flops += 2 * cin * classes;
        break;
      }
    }
  }
  return cost;
}

inline bool satisfies(const ResourceCost& cost, const HardwareConstraints& constraints) {
  if (constraints.max_params && cost.params > *constraints.max_params) return false;
  if (constraints.max_flops && cost.flops > *constraints.max_flops) return false;
  return true;
}

// Display-only renderings for summaries; comparisons always use the integers.
inline std::string human_params(uint64_t params) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f KParams", static_cast<double>(params) / 1e3);
  return buf;
}

inline std::string human_flops(uint64_t flops) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f MFLOPs", static_cast<double>(flops) / 1e6);
  return buf;
}

}  // namespace slimnas

#pragma once

#include <functional>
#include <vector>

#include "slimnas/archspace.hpp"

namespace slimnas::testing {

// Small skeleton: unsearchable stem conv, `searchable` searchable conv3x3
// layers, pool, head. Input is single-channel `input` x `input`.
inline BackboneSkeleton toy_skeleton(int searchable, int input = 8, int base = 8) {
  BackboneSkeleton s;
  s.input_height = input;
  s.input_width = input;
  s.input_channels = 1;
  s.num_classes = 3;
  s.layers.push_back({LayerKind::Conv3x3, 4, 1, false, false});
  for (int i = 0; i < searchable; ++i) {
    const int stride = (i == 1) ? 2 : 1;
    s.layers.push_back({LayerKind::Conv3x3, base, stride, true, i % 3 == 2});
  }
  s.layers.push_back({LayerKind::GlobalAvgPool, 0, 1, false, false});
  s.layers.push_back({LayerKind::LinearHead, 0, 1, false, false});
  s.validate();
  return s;
}

// Eleven searchable conv layers with a common base width; neck-output taps at
// searchable positions 5, 7 and 11 (1-based).
inline BackboneSkeleton eleven_layer_skeleton(int base = 32) {
  BackboneSkeleton s;
  s.input_height = 16;
  s.input_width = 16;
  s.input_channels = 1;
  s.num_classes = 4;
  s.layers.push_back({LayerKind::Conv3x3, 8, 1, false, false});
  for (int i = 1; i <= 11; ++i) {
    const bool neck = (i == 5 || i == 7 || i == 11);
    const int stride = (i == 4 || i == 8) ? 2 : 1;
    s.layers.push_back({LayerKind::Conv3x3, base, stride, true, neck});
  }
  s.layers.push_back({LayerKind::GlobalAvgPool, 0, 1, false, false});
  s.layers.push_back({LayerKind::LinearHead, 0, 1, false, false});
  s.validate();
  return s;
}

// Visits every config of the skeleton's space in lexicographic quarter order.
inline void for_each_config(const BackboneSkeleton& skeleton,
                            const std::function<void(const ArchConfig&)>& fn) {
  const int n = skeleton.searchable_count();
  std::vector<int> quarters(n, 1);
  for (;;) {
    std::vector<ScaleFactor> factors;
    factors.reserve(n);
    for (int q : quarters) factors.emplace_back(q);
    fn(ArchConfig(std::move(factors)));
    int i = n - 1;
    while (i >= 0 && quarters[i] == 4) quarters[i--] = 1;
    if (i < 0) break;
    ++quarters[i];
  }
}

}  // namespace slimnas::testing

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "slimnas/container.hpp"
#include "slimnas/errors.hpp"
#include "slimnas/rng.hpp"
#include "slimnas/tensor.hpp"

namespace slimnas {

struct LabeledSet {
  enum class Split { train, val };

  Tensor4 images;  // [N, 1, H, W], pixels in [0, 1]
  std::vector<int> labels;
  Split split = Split::train;
};

struct DatasetSpec {
  uint64_t seed = 0;
  int num_classes = 4;
  int per_class = 100;
  int height = 32;
  int width = 32;
  double noise_amplitude = 0.2;

  uint64_t hash() const {
    uint64_t h = mix64(seed, 0x646174617365ull);
    h = mix64(h, static_cast<uint64_t>(num_classes));
    h = mix64(h, static_cast<uint64_t>(per_class));
    h = mix64(h, static_cast<uint64_t>(height) * 100003 + static_cast<uint64_t>(width));
    return h;
  }
};

namespace detail {

// Class templates: oriented stripes for even classes, blob lattices for odd,
// with frequency and angle stepping per class index. Contrast is deliberately
// low relative to the 0.2 noise so narrow sub-networks score measurably worse
// than wide ones and ranking experiments stay meaningful.
inline constexpr double kTemplateContrast = 0.25;

inline double class_template_pixel(int cls, int num_classes, int y, int x, int h, int w) {
  const double angle = std::numbers::pi * cls / num_classes;
  const double freq = 1.5 + 0.5 * cls;
  const double scale = static_cast<double>(h > w ? h : w);
  const double u = (x * std::cos(angle) + y * std::sin(angle)) / scale;
  if (cls % 2 == 0) return 0.5 + kTemplateContrast * std::sin(2.0 * std::numbers::pi * freq * u);
  const double v = (-x * std::sin(angle) + y * std::cos(angle)) / scale;
  return 0.5 + kTemplateContrast * std::sin(2.0 * std::numbers::pi * freq * u) *
                   std::sin(2.0 * std::numbers::pi * freq * v);
}

}  // namespace detail

// Deterministic class-conditional patterns plus seeded additive noise,
// stratified 80/20 into train/val. Generation order is fixed, so one seed
// yields bitwise-identical tensors everywhere.
inline std::pair<LabeledSet, LabeledSet> generate_dataset(const DatasetSpec& spec) {
  if (spec.num_classes < 2) throw ConfigError("dataset needs num_classes >= 2");
  if (spec.per_class < 2)
    throw ConfigError("dataset needs per_class >= 2 so every class appears in both splits");
  if (spec.height < 1 || spec.width < 1) throw ConfigError("dataset dimensions must be positive");

  int train_per_class = spec.per_class * 4 / 5;
  if (train_per_class < 1) train_per_class = 1;
  if (train_per_class == spec.per_class) train_per_class = spec.per_class - 1;
  const int val_per_class = spec.per_class - train_per_class;

  LabeledSet train, val;
  train.split = LabeledSet::Split::train;
  val.split = LabeledSet::Split::val;
  train.images = Tensor4(spec.num_classes * train_per_class, 1, spec.height, spec.width);
  val.images = Tensor4(spec.num_classes * val_per_class, 1, spec.height, spec.width);

  Rng rng(spec.seed);
  int train_i = 0, val_i = 0;
  for (int cls = 0; cls < spec.num_classes; ++cls) {
    for (int s = 0; s < spec.per_class; ++s) {
      const bool to_train = s < train_per_class;
      Tensor4& dst = to_train ? train.images : val.images;
      const int idx = to_train ? train_i++ : val_i++;
      for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
          double p = detail::class_template_pixel(cls, spec.num_classes, y, x, spec.height, spec.width);
          p += spec.noise_amplitude * rng.uniform_double(-1.0, 1.0);
          if (p < 0.0) p = 0.0;
          if (p > 1.0) p = 1.0;
          dst.at(idx, 0, y, x) = static_cast<float>(p);
        }
      (to_train ? train.labels : val.labels).push_back(cls);
    }
  }
  return {std::move(train), std::move(val)};
}

// Fixture pinning: both splits in one SNAS container, labels concatenated
// train-then-val.
inline void save_dataset(const std::string& path, const LabeledSet& train, const LabeledSet& val,
                         uint64_t content_hash) {
  Container c;
  c.content_hash = content_hash;
  for (const LabeledSet* set : {&train, &val}) {
    TensorBlob blob;
    blob.dims = {static_cast<uint32_t>(set->images.n), static_cast<uint32_t>(set->images.c),
                 static_cast<uint32_t>(set->images.h), static_cast<uint32_t>(set->images.w)};
    blob.data = set->images.data;
    c.tensors.push_back(std::move(blob));
    for (int l : set->labels) c.labels.push_back(l);
  }
  write_container_file(path, c);
}

inline std::pair<LabeledSet, LabeledSet> load_dataset(const std::string& path) {
  const Container c = read_container_file(path);
  if (c.tensors.size() != 2) throw IoError("dataset container must hold exactly two image tensors");
  LabeledSet sets[2];
  size_t label_pos = 0;
  for (int i = 0; i < 2; ++i) {
    const TensorBlob& blob = c.tensors[i];
    if (blob.dims.size() != 4) throw IoError("dataset image tensor must be rank 4");
    sets[i].images = Tensor4(static_cast<int>(blob.dims[0]), static_cast<int>(blob.dims[1]),
                             static_cast<int>(blob.dims[2]), static_cast<int>(blob.dims[3]));
    sets[i].images.data = blob.data;
    if (label_pos + blob.dims[0] > c.labels.size()) throw IoError("dataset labels block too short");
    for (uint32_t n = 0; n < blob.dims[0]; ++n)
      sets[i].labels.push_back(c.labels[label_pos++]);
  }
  if (label_pos != c.labels.size()) throw IoError("dataset labels block too long");
  sets[0].split = LabeledSet::Split::train;
  sets[1].split = LabeledSet::Split::val;
  return {std::move(sets[0]), std::move(sets[1])};
}

}  // namespace slimnas

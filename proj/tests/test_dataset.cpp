#include "slimnas/dataset.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <set>

#include "slimnas/container.hpp"

using namespace slimnas;

namespace {

// Nearest-template oracle: classify by L2 distance to the noise-free class
// template.
int nearest_template(const Tensor4& images, int idx, int num_classes) {
  int best_cls = -1;
  double best_d = 1e300;
  for (int cls = 0; cls < num_classes; ++cls) {
    double d = 0;
    for (int y = 0; y < images.h; ++y)
      for (int x = 0; x < images.w; ++x) {
        const double t = detail::class_template_pixel(cls, num_classes, y, x, images.h, images.w);
        const double diff = images.at(idx, 0, y, x) - t;
        d += diff * diff;
      }
    if (d < best_d) {
      best_d = d;
      best_cls = cls;
    }
  }
  return best_cls;
}

}  // namespace

TEST(Dataset, SameSeedIsBitwiseIdentical) {
  DatasetSpec spec;
  spec.seed = 42;
  spec.per_class = 10;
  spec.height = 12;
  spec.width = 12;
  auto [train_a, val_a] = generate_dataset(spec);
  auto [train_b, val_b] = generate_dataset(spec);
  EXPECT_EQ(train_a.images.data, train_b.images.data);
  EXPECT_EQ(val_a.images.data, val_b.images.data);
  EXPECT_EQ(train_a.labels, train_b.labels);

  spec.seed = 43;
  auto [train_c, val_c] = generate_dataset(spec);
  EXPECT_NE(train_a.images.data, train_c.images.data);
}

TEST(Dataset, SplitArithmeticAndStratification) {
  DatasetSpec spec;
  spec.seed = 7;
  spec.num_classes = 4;
  spec.per_class = 100;
  auto [train, val] = generate_dataset(spec);
  EXPECT_EQ(train.images.n, 320);
  EXPECT_EQ(val.images.n, 80);
  ASSERT_EQ(train.labels.size(), 320u);
  ASSERT_EQ(val.labels.size(), 80u);
  int train_counts[4] = {}, val_counts[4] = {};
  for (int l : train.labels) ++train_counts[l];
  for (int l : val.labels) ++val_counts[l];
  for (int c = 0; c < 4; ++c) {
    EXPECT_EQ(train_counts[c], 80);
    EXPECT_EQ(val_counts[c], 20);
  }
}

TEST(Dataset, EveryClassInBothSplitsEvenWhenTiny) {
  DatasetSpec spec;
  spec.seed = 1;
  spec.num_classes = 3;
  spec.per_class = 2;
  auto [train, val] = generate_dataset(spec);
  std::set<int> train_classes(train.labels.begin(), train.labels.end());
  std::set<int> val_classes(val.labels.begin(), val.labels.end());
  EXPECT_EQ(train_classes.size(), 3u);
  EXPECT_EQ(val_classes.size(), 3u);
  EXPECT_THROW(generate_dataset(DatasetSpec{1, 4, 1, 8, 8, 0.2}), ConfigError);
  EXPECT_THROW(generate_dataset(DatasetSpec{1, 1, 10, 8, 8, 0.2}), ConfigError);
}

TEST(Dataset, PixelsStayInUnitRange) {
  DatasetSpec spec;
  spec.seed = 11;
  spec.per_class = 20;
  spec.height = 16;
  spec.width = 16;
  auto [train, val] = generate_dataset(spec);
  for (float p : train.images.data) {
    EXPECT_GE(p, 0.0f);
    EXPECT_LE(p, 1.0f);
  }
  for (float p : val.images.data) {
    EXPECT_GE(p, 0.0f);
    EXPECT_LE(p, 1.0f);
  }
}

TEST(Dataset, NoiseFreeSamplesMatchTemplatesExactly) {
  DatasetSpec spec;
  spec.seed = 3;
  spec.num_classes = 4;
  spec.per_class = 10;
  spec.height = 16;
  spec.width = 16;
  spec.noise_amplitude = 0.0;
  auto [train, val] = generate_dataset(spec);
  int correct = 0;
  for (int i = 0; i < val.images.n; ++i)
    correct += nearest_template(val.images, i, spec.num_classes) == val.labels[i] ? 1 : 0;
  EXPECT_EQ(correct, val.images.n);
  for (int i = 0; i < train.images.n; ++i)
    correct += nearest_template(train.images, i, spec.num_classes) == train.labels[i] ? 1 : 0;
  EXPECT_EQ(correct, val.images.n + train.images.n);
}

TEST(Dataset, ContainerRoundTripIsBitExact) {
  DatasetSpec spec;
  spec.seed = 99;
  spec.per_class = 5;
  spec.height = 9;
  spec.width = 7;
  auto [train, val] = generate_dataset(spec);
  const std::string path = ::testing::TempDir() + "slimnas_dataset_rt.snas";
  save_dataset(path, train, val, spec.hash());
  auto [train2, val2] = load_dataset(path);
  EXPECT_EQ(train.images.data, train2.images.data);
  EXPECT_EQ(val.images.data, val2.images.data);
  EXPECT_EQ(train.labels, train2.labels);
  EXPECT_EQ(val.labels, val2.labels);
  std::remove(path.c_str());
}

TEST(Container, RejectsCorruptInput) {
  EXPECT_THROW(parse_container("XXXX"), IoError);
  Container c;
  c.tensors.push_back({{2, 2}, {1.f, 2.f, 3.f, 4.f}});
  std::string bytes = serialize_container(c);
  EXPECT_EQ(parse_container(bytes), c);
  bytes[4] = 9;  // version
  EXPECT_THROW(parse_container(bytes), IoError);
  bytes[4] = 1;
  bytes.pop_back();
  EXPECT_THROW(parse_container(bytes), IoError);
  bytes.push_back(0);
  bytes.push_back(0);
  EXPECT_THROW(parse_container(bytes), IoError);
}

/* Copyright 2026 The fsadv Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


#include <cmath>
#include <filesystem>
#include <map>
#include <string>

#include <gtest/gtest.h>

#include "fsadv/errors.hpp"
#include "fsadv/hub.hpp"
#include "fsadv/image_io.hpp"
#include "fsadv/model_zoo.hpp"
#include "test_support.hpp"

namespace fsadv {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

const ToyWorldSpec& world() {
  static const ToyWorldSpec w = ToyWorldSpec::make_default();
  return w;
}

std::shared_ptr<const ToyBundle> bundle(const std::string& id) {
  static std::map<std::string, std::shared_ptr<const ToyBundle>> cache;
  auto& slot = cache[id];
  if (!slot) slot = build_toy_bundle(world(), toy_preset(id));
  return slot;
}

TEST(ToyDatasetTest, DeterministicPerSeed) {
  auto a = generate_toy_dataset(world(), Split::kTest, 3);
  auto b = generate_toy_dataset(world(), Split::kTest, 3);
  auto c = generate_toy_dataset(world(), Split::kTest, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].image, b[i].image);
  EXPECT_NE(a[0].image, c[0].image);
}

TEST(ToyDatasetTest, BalancedLabelsAndUnitBox) {
  auto test = generate_toy_dataset(world(), Split::kTest, 1);
  ASSERT_EQ(test.size(), static_cast<std::size_t>(world().num_id_classes * world().samples_per_class));
  std::vector<int> counts(world().num_id_classes);
  for (const auto& s : test) {
    ASSERT_GE(s.class_index, 0);
    ++counts[s.class_index];
    EXPECT_EQ(s.label, world().class_names()[s.class_index]);
    EXPECT_GE(s.image.min(), 0.0);
    EXPECT_LE(s.image.max(), 1.0);
  }
  for (int c : counts) EXPECT_EQ(c, world().samples_per_class);
  for (const auto& s : generate_toy_dataset(world(), Split::kOod, 1)) EXPECT_EQ(s.class_index, -1);
}

TEST(ToyDatasetTest, SplitsDiffer) {
  auto train = generate_toy_dataset(world(), Split::kTrain, 1);
  auto test = generate_toy_dataset(world(), Split::kTest, 1);
  EXPECT_NE(train[0].image, test[0].image);
}

TEST(ToyDatasetTest, InvalidSpecIsConfigError) {
  ToyWorldSpec w = world();
  w.object_scale = 0.9;
  try {
    w.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("task.object_scale"), std::string::npos);
  }
}

TEST(ToyDatasetTest, ExportWritesTreeAndClassList) {
  ToyWorldSpec w = ToyWorldSpec::make_default(3, 16);
  w.samples_per_class = 2;
  TempDir dir;
  export_toy_dataset(w, 5, dir.path());
  std::string classes = testing::slurp(dir / "classes.txt");
  for (const auto& name : w.class_names()) EXPECT_NE(classes.find(name), std::string::npos);
  const std::string first = w.class_names()[0];
  EXPECT_TRUE(fs::exists(dir / ("test/" + first)));
  auto test = generate_toy_dataset(w, Split::kTest, 5);
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "test")) files += e.is_regular_file();
  EXPECT_EQ(files, static_cast<int>(test.size()));
  EXPECT_TRUE(fs::exists(dir / "ood"));
}

TEST(ToyBundleTest, PresetsAreDistinctAndAccurate) {
  auto a = bundle("toy-a"), b = bundle("toy-b"), c = bundle("toy-c");
  EXPECT_NE(a->info().feature_dim, b->info().feature_dim);
  EXPECT_NE(b->info().feature_dim, c->info().feature_dim);
  for (auto* m : {a.get(), b.get(), c.get()}) {
    EXPECT_TRUE(m->info().has_text_tower);
    EXPECT_TRUE(m->info().differentiable);
    EXPECT_GE(m->validation_accuracy(), 0.9);
  }
}

TEST(ToyBundleTest, ProjectedAndTextEmbeddingsAreUnitNorm) {
  auto m = bundle("toy-a");
  auto sample = generate_toy_dataset(world(), Split::kTest, 2)[0];
  Encoding enc = encode_image(*m, sample.image);
  double n = 0.0;
  for (double v : enc.projected) n += v * v;
  EXPECT_NEAR(n, 1.0, 1e-12);
  for (const auto& name : m->class_names()) {
    auto t = encode_text(*m, format_prompt(name));
    double tn = 0.0;
    for (double v : t) tn += v * v;
    EXPECT_NEAR(tn, 1.0, 1e-12);
  }
}

TEST(ToyBundleTest, PromptFormatting) {
  EXPECT_EQ(format_prompt("red_square"), "this is a photo of a red square");
}

TEST(ToyBundleTest, UnknownPromptIsLookupError) {
  try {
    bundle("toy-a")->text_embedding("this is a photo of a unicorn");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLookup);
  }
}

TEST(ToyBundleTest, WrongShapeIsRejected) {
  ImageTensor x(Shape{3, 8, 8}, 0.5);
  try {
    encode_image(*bundle("toy-a"), x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(ToyBundleTest, ParametricIdsParse) {
  ToyEncoderConfig c = toy_preset("toy:grid=2,seed=9,embed=16,var_gain=2");
  EXPECT_EQ(c.grid, 2);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.embed_dim, 16);
  EXPECT_DOUBLE_EQ(c.var_gain, 2.0);
  EXPECT_TRUE(is_toy_id("toy-b"));
  EXPECT_FALSE(is_toy_id("clip-vit"));
  EXPECT_THROW(toy_preset("toy:grid"), Error);
  EXPECT_THROW(toy_preset("toy:colour=1"), Error);
}

TEST(ToyBundleTest, AccuracyGateRaisesBuildError) {
  ToyEncoderConfig c = toy_preset("toy:grid=1,embed=2,seed=1");
  c.use_means = false;
  c.use_vars = false;
  try {
    build_toy_bundle(world(), c);
    FAIL() << "degenerate encoder passed the gate";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kBuild);
  }
}

// Central-difference check of the analytic vector-Jacobian product.
class BundleGradientTest : public ::testing::TestWithParam<std::string> {};

TEST_P(BundleGradientTest, MatchesFiniteDifferences) {
  auto m = bundle(GetParam());
  RandomStream rng(derive_seed(17, {std::hash<std::string>{}(GetParam())}));
  for (int trial = 0; trial < 10; ++trial) {
    ImageTensor x = testing::random_tensor(m->info().input_shape, rng, 0.1, 0.9);
    Tensor3 d = testing::random_tensor(m->info().input_shape, rng, -1.0, 1.0);
    auto probe = testing::random_probe(*m, rng);
    EXPECT_LT(testing::directional_error(*m, probe, x, d), 1e-5) << "trial " << trial;
  }
}

INSTANTIATE_TEST_SUITE_P(Presets, BundleGradientTest,
                         ::testing::Values("toy-a", "toy-b", "toy-c"));

TEST(MlpBundleTest, SerializationRoundTrip) {
  MlpWeights w = MlpWeights::random({3, 4, 4}, 8, 6, 5, {"cat", "dog"}, 3);
  std::string bytes = serialize_mlp(w);
  MlpWeights back = deserialize_mlp(bytes);
  EXPECT_EQ(back.w1, w.w1);
  EXPECT_EQ(back.proj, w.proj);
  EXPECT_EQ(back.class_names, w.class_names);
  EXPECT_EQ(serialize_mlp(back), bytes);
}

TEST(MlpBundleTest, CorruptBytesRejected) {
  std::string bytes = serialize_mlp(MlpWeights::random({1, 2, 2}, 3, 2, 2, {}, 1));
  EXPECT_THROW(deserialize_mlp(bytes.substr(0, bytes.size() - 3)), Error);
  bytes[0] = 'X';
  EXPECT_THROW(deserialize_mlp(bytes), Error);
}

TEST(MlpBundleTest, ForwardMatchesDefinition) {
  MlpWeights w = MlpWeights::random({1, 2, 2}, 3, 2, 2, {}, 4);
  MlpBundle m(w, "mlp");
  ImageTensor x(Shape{1, 2, 2}, std::vector<double>{0.1, 0.7, 0.3, 0.9});
  std::vector<double> h(3), f(2), p(2);
  for (int i = 0; i < 3; ++i) {
    double a = w.b1[i];
    for (int j = 0; j < 4; ++j) a += w.w1[i * 4 + j] * x[j];
    h[i] = std::tanh(a);
  }
  for (int i = 0; i < 2; ++i) {
    f[i] = w.b2[i];
    for (int j = 0; j < 3; ++j) f[i] += w.w2[i * 3 + j] * h[j];
  }
  for (int i = 0; i < 2; ++i) p[i] = w.proj[i * 2] * f[0] + w.proj[i * 2 + 1] * f[1];
  const double n = std::hypot(p[0], p[1]);
  Encoding enc = m.forward(x);
  EXPECT_NEAR(enc.features[1], f[1], 1e-14);
  EXPECT_NEAR(enc.projected[0], p[0] / n, 1e-14);
}

TEST(MlpBundleTest, GradientMatchesFiniteDifferences) {
  MlpBundle m(MlpWeights::random({3, 4, 4}, 16, 8, 6, {"a", "b"}, 5), "mlp");
  RandomStream rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    ImageTensor x = testing::random_tensor({3, 4, 4}, rng);
    Tensor3 d = testing::random_tensor({3, 4, 4}, rng, -1.0, 1.0);
    EXPECT_LT(testing::directional_error(m, testing::random_probe(m, rng), x, d), 1e-5);
  }
}

TEST(MlpBundleTest, PrototypeLookupIsTextTower) {
  MlpBundle with(MlpWeights::random({1, 2, 2}, 3, 2, 2, {"cat"}, 1), "m");
  EXPECT_TRUE(with.info().has_text_tower);
  EXPECT_EQ(with.text_embedding(format_prompt("cat")).size(), 2u);
  MlpBundle without(MlpWeights::random({1, 2, 2}, 3, 2, 2, {}, 1), "m");
  EXPECT_FALSE(without.info().has_text_tower);
  try {
    encode_text(without, "anything");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUnsupported);
  }
}

}  // namespace
}  // namespace fsadv

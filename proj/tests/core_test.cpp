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
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "fsadv/digest.hpp"
#include "fsadv/errors.hpp"
#include "fsadv/image_io.hpp"
#include "fsadv/rng.hpp"
#include "fsadv/tensor.hpp"
#include "test_support.hpp"

namespace fsadv {
namespace {

using testing::TempDir;

TEST(TensorTest, IndexingIsChannelMajor) {
  Tensor3 t(Shape{2, 3, 4});
  t.at(1, 2, 3) = 5.0;
  EXPECT_EQ(t[1 * 12 + 2 * 4 + 3], 5.0);
  EXPECT_EQ(t.channel(1)[11], 5.0);
}

TEST(TensorTest, ReductionsMatchDirectLoops) {
  RandomStream rng(3);
  Tensor3 t = testing::random_tensor({3, 5, 5}, rng, -1.0, 1.0);
  double l1 = 0.0, sum = 0.0, lo = 1e9, hi = -1e9;
  for (double v : t.data()) {
    l1 += std::abs(v);
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_NEAR(t.l1_norm(), l1, 1e-12);
  EXPECT_NEAR(t.mean(), sum / t.size(), 1e-12);
  EXPECT_EQ(t.min(), lo);
  EXPECT_EQ(t.max(), hi);
}

TEST(TensorTest, AxpyAndLinf) {
  Tensor3 a(Shape{1, 2, 2}, 1.0);
  Tensor3 b(Shape{1, 2, 2}, 2.0);
  a.axpy(0.5, b);
  EXPECT_EQ(a[3], 2.0);
  b[2] = -1.0;
  EXPECT_EQ(linf_distance(a, b), 3.0);
}

TEST(TensorTest, NonFiniteDetected) {
  Tensor3 t(Shape{1, 1, 2});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}

TEST(TensorTest, RejectsMismatchedData) {
  EXPECT_THROW(Tensor3(Shape{1, 2, 2}, std::vector<double>(3)), Error);
}

TEST(RngTest, DerivedSeedsDependOnWholePath) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 20; ++a)
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(derive_seed(7, {a, b}));
  EXPECT_EQ(seen.size(), 400u);
  EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {2, 1}));
  EXPECT_EQ(derive_seed(7, {1, 2}), derive_seed(7, {1, 2}));
}

TEST(RngTest, StreamIsReproducibleAndInRange) {
  RandomStream a(11), b(11);
  for (int i = 0; i < 1000; ++i) {
    double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    int k = a.uniform_int(-2, 3);
    b.uniform_int(-2, 3);
    EXPECT_GE(k, -2);
    EXPECT_LE(k, 3);
  }
}

TEST(RngTest, NormalMomentsAreStandard) {
  RandomStream rng(5);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(DigestTest, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(DigestTest, FileMatchesBytes) {
  TempDir dir;
  std::ofstream(dir / "f") << "hello";
  EXPECT_EQ(sha256_file(dir / "f"), sha256_hex("hello"));
  EXPECT_THROW(sha256_file(dir / "missing"), Error);
}

TEST(ImageIoTest, PngRoundTripQuantizes) {
  TempDir dir;
  RandomStream rng(9);
  ImageTensor img = testing::random_tensor({3, 7, 5}, rng);
  write_png(dir / "x.png", img);
  ImageTensor back = read_image(dir / "x.png");
  ASSERT_EQ(back.shape(), img.shape());
  EXPECT_LE(linf_distance(img, back), 0.5 / 255.0 + 1e-12);
}

TEST(ImageIoTest, TextChunksAndDeterministicBytes) {
  TempDir dir;
  Raster r(4, 3);
  r.set(1, 1, 10, 20, 30);
  write_png(dir / "a.png", r, {{"tau", "0.5"}});
  write_png(dir / "b.png", r, {{"tau", "0.5"}});
  EXPECT_EQ(testing::slurp(dir / "a.png"), testing::slurp(dir / "b.png"));
  EXPECT_EQ(read_png_text(dir / "a.png").at("tau"), "0.5");
  Raster back = read_png_raster(dir / "a.png");
  EXPECT_EQ(back.pixel(1, 1)[2], 30);
}

TEST(ImageIoTest, MissingFileIsNotFound) {
  try {
    read_image("/nonexistent/file.png");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNotFound);
  }
}

}  // namespace
}  // namespace fsadv

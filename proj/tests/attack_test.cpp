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
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fsadv/attack.hpp"
#include "fsadv/errors.hpp"
#include "fsadv/model_zoo.hpp"
#include "test_support.hpp"

namespace fsadv {
namespace {

const ToyWorldSpec& world() {
  static const ToyWorldSpec w = ToyWorldSpec::make_default();
  return w;
}

const ToyBundle& toy(int i) {
  static const std::shared_ptr<const ToyBundle> pool[3] = {
      build_toy_bundle(world(), toy_preset("toy-a")),
      build_toy_bundle(world(), toy_preset("toy-b")),
      build_toy_bundle(world(), toy_preset("toy-c"))};
  return *pool[i];
}

const ImageTensor& sample_image() {
  static const ImageTensor x = generate_toy_dataset(world(), Split::kTest, 7)[0].image;
  return x;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kIo;
}

TEST(BudgetTest, FractionsAndDecimals) {
  Budget b = Budget::parse("16/255");
  EXPECT_DOUBLE_EQ(b.value, 16.0 / 255.0);
  EXPECT_EQ(b.text, "16/255");
  EXPECT_DOUBLE_EQ(Budget::parse("0.25").value, 0.25);
  EXPECT_EQ(kind_of([] { Budget::parse("1/0"); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { Budget::parse("abc"); }), ErrorKind::kConfig);
}

TEST(AttackSpecTest, SectionRoundTrip) {
  AttackSpec s;
  s.objective = ObjectiveKind::kOod2IdTtafs;
  s.epsilon = Budget::parse("8/255");
  s.steps = 37;
  s.step_size = 0.002;
  s.momentum_mu = 0.5;
  s.ti = TiKernel::gaussian(5);
  s.lambda_afs = 0.3;
  s.seed = 99;
  s.random_start = true;
  s.ensemble_weights = {0.25, 0.75};
  AttackSpec back = AttackSpec::from_section(s.to_section());
  EXPECT_EQ(back.to_section(), s.to_section());
  EXPECT_EQ(back.epsilon.text, "8/255");
  EXPECT_EQ(*back.ti, *s.ti);
}

TEST(AttackSpecTest, DefaultsFollowObjective) {
  AttackSpec s;
  EXPECT_TRUE(s.uses_random_start());
  EXPECT_DOUBLE_EQ(s.effective_step_size(), s.epsilon.value / 20);
  s.objective = ObjectiveKind::kOod2IdTtafs;
  EXPECT_FALSE(s.uses_random_start());
}

TEST(AttackSpecTest, ValidationNamesKey) {
  AttackSpec s;
  s.steps = -1;
  try {
    s.validate(1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("attack.steps"), std::string::npos);
  }
  AttackSpec w;
  w.ensemble_weights = {0.5, 0.6};
  EXPECT_EQ(kind_of([&] { w.validate(2); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([&] { w.validate(3); }), ErrorKind::kConfig);
}

TEST(CosineTest, GradientMatchesFiniteDifferences) {
  RandomStream rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> u(7), v(7), d(7);
    for (int i = 0; i < 7; ++i) {
      u[i] = rng.normal();
      v[i] = rng.normal();
      d[i] = rng.normal();
    }
    CosineGrad g = cosine_with_grad(u, v);
    EXPECT_NEAR(g.value, cosine_similarity(u, v), 1e-15);
    const double h = 1e-6;
    std::vector<double> up = u, um = u;
    for (int i = 0; i < 7; ++i) {
      up[i] += h * d[i];
      um[i] -= h * d[i];
    }
    const double fd = (cosine_similarity(up, v) - cosine_similarity(um, v)) / (2 * h);
    EXPECT_NEAR(dot(g.d_u, d), fd, 1e-7);
  }
}

TEST(CosineTest, ZeroVectorStaysFinite) {
  std::vector<double> z(3, 0.0), v{1.0, 2.0, 3.0};
  CosineGrad g = cosine_with_grad(z, v);
  EXPECT_TRUE(std::isfinite(g.value));
  for (double x : g.d_u) EXPECT_TRUE(std::isfinite(x));
}

TEST(TiKernelTest, GaussianMatchesClosedForm) {
  for (int size : {1, 3, 5, 7}) {
    TiKernel k = TiKernel::gaussian(size);
    const double sigma = size / 3.0;
    double z = 0.0;
    for (int a = -size / 2; a <= size / 2; ++a)
      for (int b = -size / 2; b <= size / 2; ++b) z += std::exp(-(a * a + b * b) / (2 * sigma * sigma));
    EXPECT_NEAR(k.at(0, 0), std::exp(-2.0 * (size / 2) * (size / 2) / (2 * sigma * sigma)) / z, 1e-15);
    EXPECT_NEAR(k.at(size / 2, size / 2), 1.0 / z, 1e-15);
  }
  EXPECT_EQ(kind_of([] { TiKernel::gaussian(4); }), ErrorKind::kConfig);
}

// Scatter form of the same correlation: every input pixel spreads its value
// through the flipped kernel.
GradTensor scatter_smooth(const GradTensor& g, const TiKernel& k) {
  const Shape& s = g.shape();
  const int r = k.size / 2;
  GradTensor out(s);
  for (int c = 0; c < s.channels; ++c)
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x)
        for (int a = 0; a < k.size; ++a)
          for (int b = 0; b < k.size; ++b) {
            const int oy = y - a + r, ox = x - b + r;
            if (oy < 0 || oy >= s.height || ox < 0 || ox >= s.width) continue;
            out.at(c, oy, ox) += k.at(a, b) * g.at(c, y, x);
          }
  return out;
}

TEST(TiSmoothTest, MatchesScatterConvolution) {
  RandomStream rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const int size = 1 + 2 * rng.uniform_int(0, 3);
    TiKernel k = trial % 2 ? TiKernel::gaussian(size) : TiKernel::uniform(size);
    GradTensor g = testing::random_tensor({3, 9, 11}, rng, -1, 1);
    EXPECT_LE(linf_distance(ti_smooth(g, k), scatter_smooth(g, k)), 1e-12);
  }
}

TEST(TiSmoothTest, PreservesConstantsAwayFromBorder) {
  GradTensor g(Shape{1, 9, 9}, 2.0);
  GradTensor out = ti_smooth(g, TiKernel::gaussian(5));
  EXPECT_NEAR(out.at(0, 4, 4), 2.0, 1e-12);
  EXPECT_LT(out.at(0, 0, 0), 2.0);
}

TEST(MomentumTest, MatchesDefinition) {
  RandomStream rng(2);
  GradTensor prev = testing::random_tensor({2, 3, 3}, rng, -1, 1);
  GradTensor g = testing::random_tensor({2, 3, 3}, rng, -1, 1);
  double l1 = 0.0;
  for (double v : g.data()) l1 += std::abs(v);
  MomentumResult r = momentum_update(prev, g, 0.7);
  EXPECT_FALSE(r.stalled);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(r.accumulated[i], 0.7 * prev[i] + g[i] / l1, 1e-15);
  MomentumResult z = momentum_update(prev, GradTensor(g.shape()), 0.7);
  EXPECT_TRUE(z.stalled);
}

TEST(PgdStepTest, SignStepThenProjection) {
  RandomStream rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    AttackSpec spec;
    spec.epsilon = Budget::of(rng.uniform(0.01, 0.3));
    spec.step_size = rng.uniform(0.001, 0.5);
    ImageTensor x0 = testing::random_tensor({1, 4, 4}, rng);
    PerturbationState st = PerturbationState::start(x0);
    st.x_adv = testing::random_tensor({1, 4, 4}, rng);
    GradTensor g = testing::random_tensor({1, 4, 4}, rng, -1, 1);
    const Direction dir = trial % 2 ? Direction::kAscend : Direction::kDescend;
    PerturbationState next = pgd_step(st, g, spec, dir);
    for (std::size_t i = 0; i < x0.size(); ++i) {
      double sgn = (g[i] > 0) - (g[i] < 0);
      if (dir == Direction::kDescend) sgn = -sgn;
      double expect = st.x_adv[i] + sgn * *spec.step_size;
      expect = std::min(std::max(expect, x0[i] - spec.epsilon.value), x0[i] + spec.epsilon.value);
      expect = std::min(std::max(expect, 0.0), 1.0);
      EXPECT_DOUBLE_EQ(next.x_adv[i], expect);
    }
    EXPECT_EQ(next.iteration, 1);
  }
}

TEST(DiverseInputTest, AdjointSatisfiesDotProductIdentity) {
  RandomStream rng(31);
  DiversePolicy policy = DiversePolicy{}.scaled_to(32);
  policy.transform_prob = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    DiDraw draw = draw_di(policy, {3, 32, 32}, rng);
    ASSERT_TRUE(draw.applied);
    EXPECT_GE(draw.size, policy.min_size);
    EXPECT_LE(draw.size + draw.offset_y, 32);
    ImageTensor x = testing::random_tensor({3, 32, 32}, rng);
    GradTensor g = testing::random_tensor({3, 32, 32}, rng, -1, 1);
    ImageTensor ax = apply_di(x, draw);
    GradTensor atg = apply_di_adjoint(g, draw);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      lhs += ax[i] * g[i];
      rhs += x[i] * atg[i];
    }
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(DiverseInputTest, FullSizeDrawIsIdentity) {
  RandomStream rng(1);
  ImageTensor x = testing::random_tensor({3, 8, 8}, rng);
  DiDraw draw{true, 8, 0, 0};
  EXPECT_LE(linf_distance(apply_di(x, draw), x), 1e-15);
}

TEST(DiverseInputTest, ScalingKeepsRatio) {
  DiversePolicy p = DiversePolicy{}.scaled_to(32);
  EXPECT_LE(p.max_size, 32);
  EXPECT_LT(p.min_size, p.max_size);
  EXPECT_NEAR(p.min_size / 32.0, 170.0 / 224.0, 1.0 / 32);
}

TEST(EnsembleLossTest, WeightedSum) {
  std::vector<double> w{0.2, 0.8}, l{1.0, 3.0};
  EXPECT_DOUBLE_EQ(ensemble_loss(w, l), 2.6);
  AttackSpec s;
  auto u = s.weights_for(4);
  for (double x : u) EXPECT_DOUBLE_EQ(x, 0.25);
}

TEST(RunAttackTest, StaysInBallAndBox) {
  RandomStream rng(77);
  const EncoderBundle* members[] = {&toy(0)};
  for (int trial = 0; trial < 30; ++trial) {
    AttackSpec spec;
    spec.epsilon = Budget::of(rng.uniform(0.001, 0.2));
    spec.steps = rng.uniform_int(0, 6);
    spec.step_size = rng.uniform(0.001, 0.3);
    spec.di = trial % 3 ? DiversePolicy{}.scaled_to(32) : DiversePolicy::disabled();
    if (trial % 2) spec.ti = TiKernel::gaussian(3);
    spec.seed = trial;
    ImageTensor x0 = testing::random_tensor({3, 32, 32}, rng);
    AdvResult r = run_attack(members, x0, spec);
    EXPECT_LE(linf_distance(r.x_adv, x0), spec.epsilon.value + 1e-12);
    EXPECT_GE(r.x_adv.min(), 0.0);
    EXPECT_LE(r.x_adv.max(), 1.0);
    EXPECT_EQ(static_cast<int>(r.trace.size()), spec.steps);
  }
}

TEST(RunAttackTest, ZeroStepsReturnsInput) {
  const EncoderBundle* members[] = {&toy(0)};
  AttackSpec spec;
  spec.steps = 0;
  EXPECT_EQ(run_attack(members, sample_image(), spec).x_adv, sample_image());
}

TEST(RunAttackTest, DeterministicForSeed) {
  const EncoderBundle* members[] = {&toy(0), &toy(1)};
  AttackSpec spec;
  spec.di = DiversePolicy{}.scaled_to(32);
  spec.seed = 5;
  spec.steps = 5;
  AdvResult a = run_attack(members, sample_image(), spec);
  AdvResult b = run_attack(members, sample_image(), spec);
  EXPECT_EQ(a.x_adv, b.x_adv);
  spec.seed = 6;
  EXPECT_NE(run_attack(members, sample_image(), spec).x_adv, a.x_adv);
}

TEST(RunAttackTest, AwayFromStartLowersFeatureCosine) {
  const EncoderBundle* members[] = {&toy(0)};
  AttackSpec spec;
  spec.di = DiversePolicy{}.scaled_to(32);
  AdvResult r = run_attack(members, sample_image(), spec);
  const double after = afs_loss(toy(0), sample_image(), r.x_adv);
  EXPECT_LT(after, 0.5);
  EXPECT_NEAR(afs_loss(toy(0), sample_image(), sample_image()), 1.0, 1e-12);
}

TEST(RunAttackTest, TowardsTargetRaisesTargetCosine) {
  const EncoderBundle* members[] = {&toy(0)};
  AttackSpec spec;
  spec.objective = ObjectiveKind::kOod2IdTtafs;
  spec.steps = 100;
  spec.step_size = 1.0 / 255.0;
  spec.di = DiversePolicy::disabled();
  ImageTensor seed = make_distal_seed(world().image_shape(), 3);
  std::vector<std::vector<double>> target{toy(0).text_embedding(format_prompt(world().class_names()[2]))};
  AdvResult r = run_attack(members, seed, spec, target);
  const double before = dot(toy(0).forward(seed).projected, target[0]);
  const double after = dot(toy(0).forward(r.x_adv).projected, target[0]);
  EXPECT_GT(after, before);
  EXPECT_GT(after, 0.9);
}

TEST(RunAttackTest, TargetCountMustMatchMembers) {
  const EncoderBundle* members[] = {&toy(0), &toy(1)};
  AttackSpec spec;
  spec.objective = ObjectiveKind::kOod2IdTtafs;
  std::vector<std::vector<double>> one{toy(0).text_embedding(format_prompt(world().class_names()[0]))};
  EXPECT_EQ(kind_of([&] { run_attack(members, sample_image(), spec, one); }), ErrorKind::kConfig);
}

TEST(RunAttackTest, TraceCsvHasMemberColumns) {
  const EncoderBundle* members[] = {&toy(0), &toy(2)};
  AttackSpec spec;
  spec.di = DiversePolicy{}.scaled_to(32);
  spec.steps = 3;
  std::ostringstream out;
  write_trace_csv(out, run_attack(members, sample_image(), spec));
  std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "iteration,loss,member_0,member_1");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}

TEST(DistalSeedTest, ReproducibleAndInBox) {
  ImageTensor a = make_distal_seed({3, 16, 16}, 4);
  EXPECT_EQ(a, make_distal_seed({3, 16, 16}, 4));
  EXPECT_NE(a, make_distal_seed({3, 16, 16}, 5));
  EXPECT_GE(a.min(), 0.0);
  EXPECT_LE(a.max(), 1.0);
}

}  // namespace
}  // namespace fsadv

#include <gtest/gtest.h>

#include <cmath>

#include "rfgan/nets.hpp"
#include "rfgan/optim.hpp"
#include "rfgan/rng.hpp"

using namespace rfgan;
using namespace rfgan::nets;

namespace {

ModelOptions small_opts(int image_size = 32) {
  ModelOptions opt;
  opt.image_size = image_size;
  opt.enc_base = 8;
  opt.num_downsample = 2;
  opt.num_res_private = 1;
  opt.num_res_shared = 1;
  opt.disc_plan = {8, 2, 32};
  opt.seed = 77;
  return opt;
}

Tensor<float> random_image(Rng& rng, int s) {
  Tensor<float> t(std::vector<int>{3, s, s});
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

TEST(BuildModel, PatchGridMatchesArchspec) {
  auto arch = archspec::parse_arch("A,A,A,A,C");
  ModelOptions opt = small_opts(64);
  opt.num_downsample = 2;
  TranslationModel<float> m(arch, opt);
  EXPECT_EQ(m.grid_size(), archspec::output_grid_size(arch, 64));  // 4

  auto arch2 = archspec::parse_arch("B,B,C");
  TranslationModel<float> m2(arch2, small_opts(64));
  EXPECT_EQ(m2.grid_size(), 62);
  Rng rng(5);
  Tensor<float> im = random_image(rng, 64);
  EXPECT_EQ(m2.discriminate(im, Domain::real).logits->value.dim(1), 62);
}

TEST(BuildModel, DiscriminatorGridShapeForAllPaperArchsAt256) {
  // discriminator alone; tiny channel plan keeps the forward cheap
  for (const char* spec : {"A,A,A,A,C", "D,D,A,C", "A,A,A,C", "A,B,B,B,C", "A,B,B,C",
                           "A,A,C", "A,B,C", "B,B,B,C", "B,B,C"}) {
    auto arch = archspec::parse_arch(spec);
    ParamStore<float> ps;
    Rng rng(1);
    ModelOptions opt;
    Discriminator<float> d(ps, "d", arch, {2, 2, 8}, 3, rng, opt);
    Tensor<float> im(std::vector<int>{3, 256, 256});
    im.fill(0.1f);
    ad::Var<float> logits = d.forward(ad::constant(im));
    int expect = archspec::output_grid_size(arch, 256);
    EXPECT_EQ(logits->value.dim(0), 1) << spec;
    EXPECT_EQ(logits->value.dim(1), expect) << spec;
    EXPECT_EQ(logits->value.dim(2), expect) << spec;
  }
}

TEST(BuildModel, IdenticalSeedsGiveIdenticalParameters) {
  auto arch = archspec::parse_arch("A,B,C");
  TranslationModel<float> a(arch, small_opts());
  TranslationModel<float> b(arch, small_opts());
  ASSERT_EQ(a.all_params().size(), b.all_params().size());
  for (size_t i = 0; i < a.all_params().size(); ++i) {
    const auto& pa = a.all_params()[i]->value;
    const auto& pb = b.all_params()[i]->value;
    ASSERT_EQ(pa.numel(), pb.numel());
    for (int64_t j = 0; j < pa.numel(); ++j) ASSERT_EQ(pa[j], pb[j]);
  }
}

TEST(BuildModel, IncompatibleGeometryRejected) {
  auto arch = archspec::parse_arch("A,A,C");
  ModelOptions opt = small_opts(30);  // not divisible by 4
  try {
    TranslationModel<float> m(arch, opt);
    FAIL() << "expected IncompatibleGeometry";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Err::IncompatibleGeometry);
  }
  // discriminator would shrink an 8px input below 1x1
  try {
    ModelOptions o8 = small_opts(8);
    o8.num_downsample = 1;
    TranslationModel<float> m(archspec::parse_arch("A,A,A,A,C"), o8);
    FAIL() << "expected IncompatibleGeometry";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Err::IncompatibleGeometry);
  }
}

TEST(BuildModel, DiscriminatorParamCountMatchesArchspec) {
  for (const char* spec : {"A,A,A,A,C", "A,B,B,C", "B,B,C"}) {
    auto arch = archspec::parse_arch(spec);
    ParamStore<float> ps;
    Rng rng(3);
    ModelOptions opt;
    archspec::ChannelPlan plan{16, 2, 64};
    Discriminator<float> d(ps, "d", arch, plan, 3, rng, opt);
    int64_t n = 0;
    for (const auto& p : ps.all) n += p->value.numel();
    EXPECT_EQ(n, archspec::parameter_count(arch, plan, 3)) << spec;
  }
}

TEST(Discriminate, ZeroWeightGivesHalfScore) {
  auto arch = archspec::parse_arch("A,B,C");
  TranslationModel<float> m(arch, small_opts());
  for (auto& p : m.discriminator_params()) p->value.fill(0.0f);
  Rng rng(9);
  PatchMap<float> pm = m.discriminate(random_image(rng, 32), Domain::sim);
  for (int64_t i = 0; i < pm.logits->value.numel(); ++i)
    EXPECT_EQ(pm.logits->value[i], 0.0f);
  EXPECT_DOUBLE_EQ(pm.scalar, 0.5);
}

TEST(Discriminate, RejectsWrongShape) {
  auto arch = archspec::parse_arch("A,C");
  TranslationModel<float> m(arch, small_opts());
  Rng rng(2);
  try {
    m.discriminate(random_image(rng, 16), Domain::sim);
    FAIL() << "expected BadImageShape";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Err::BadImageShape);
  }
}

TEST(EmpiricalRf, MatchesAnalyticOnSpotChecks) {
  for (auto [spec, input] : {std::pair{"A,A,A,A,C", 128}, std::pair{"B,B,C", 64},
                             std::pair{"D,D,A,C", 128}}) {
    auto arch = archspec::parse_arch(spec);
    ParamStore<float> ps;
    Rng rng(4);
    ModelOptions opt;
    Discriminator<float> d(ps, "d", arch, {2, 2, 4}, 3, rng, opt);
    d.fill_positive(0.05f);
    EXPECT_EQ(empirical_receptive_field_grad(d, input), arch.receptive_field) << spec;
  }
}

TEST(Encode, LatentGridFollowsStride) {
  auto arch = archspec::parse_arch("A,B,C");
  ModelOptions opt = small_opts(64);
  opt.num_downsample = 2;  // total stride 4
  TranslationModel<float> m(arch, opt);
  Rng rng(6);
  LatentCode<float> code = m.encode(ad::constant(random_image(rng, 64)), Domain::sim);
  EXPECT_EQ(code.mean->value.dim(1), 16);
  EXPECT_EQ(code.mean->value.dim(2), 16);
  EXPECT_TRUE(code.mean->value.all_finite());
}

TEST(Encode, ZeroNoiseReturnsMeanExactly) {
  auto arch = archspec::parse_arch("A,C");
  TranslationModel<float> m(arch, small_opts());
  Rng rng(8);
  LatentCode<float> code = m.encode(ad::constant(random_image(rng, 32)), Domain::real);
  ad::Var<float> z = m.sample_latent(code, m.zero_latent_noise());
  for (int64_t i = 0; i < z->value.numel(); ++i)
    EXPECT_EQ(z->value[i], code.mean->value[i]);
}

TEST(SharedBlocks, SameStorageVisibleFromBothDomains) {
  auto arch = archspec::parse_arch("A,C");
  TranslationModel<float> m(arch, small_opts());
  Rng rng(10);
  Tensor<float> x = random_image(rng, 32);

  Tensor<float> real_before = m.encode(ad::constant(x), Domain::real).mean->value;

  // gradient step through the sim path only
  m.zero_all_grads();
  ad::Var<float> loss = ad::mean_all(m.encode(ad::constant(x), Domain::sim).mean);
  ad::backward(loss);
  bool any_shared_grad = false;
  for (auto& p : m.shared_encoder_params()) {
    for (int64_t i = 0; i < p->grad.numel(); ++i)
      if (p->grad[i] != 0.0f) any_shared_grad = true;
    for (int64_t i = 0; i < p->value.numel(); ++i) p->value[i] -= 0.5f * p->grad[i];
  }
  EXPECT_TRUE(any_shared_grad);

  Tensor<float> real_after = m.encode(ad::constant(x), Domain::real).mean->value;
  bool changed = false;
  for (int64_t i = 0; i < real_after.numel(); ++i)
    if (real_after[i] != real_before[i]) changed = true;
  EXPECT_TRUE(changed);
}

TEST(Translate, RangeAndShapePreserved) {
  auto arch = archspec::parse_arch("A,B,C");
  TranslationModel<float> m(arch, small_opts());
  Rng rng(11);
  Tensor<float> x = random_image(rng, 32);
  for (Tensor<float> out :
       {m.translate(x, Direction::sim2real), m.reconstruct(x, Domain::sim),
        m.cycle(x, Direction::real2sim)}) {
    ASSERT_TRUE(out.same_shape(x));
    for (int64_t i = 0; i < out.numel(); ++i) {
      EXPECT_LE(out[i], 1.0f);
      EXPECT_GE(out[i], -1.0f);
    }
  }
}

TEST(Translate, PassthroughIsExactIdentity) {
  auto arch = archspec::parse_arch("A,C");
  ModelOptions opt = small_opts();
  opt.passthrough = true;
  TranslationModel<float> m(arch, opt);
  Rng rng(12);
  Tensor<float> x = random_image(rng, 32);
  Tensor<float> cyc = m.cycle(x, Direction::sim2real);
  for (int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(cyc[i], x[i]);

  LossWeights w;
  auto losses = compute_losses(m, x, random_image(rng, 32), w, zero_noise(m));
  EXPECT_EQ(losses.breakdown.recon_sim, 0.0);
  EXPECT_EQ(losses.breakdown.recon_real, 0.0);
  EXPECT_EQ(losses.breakdown.cycle_sim, 0.0);
  EXPECT_EQ(losses.breakdown.cycle_real, 0.0);
  EXPECT_EQ(losses.breakdown.kl_sim, 0.0);
  EXPECT_EQ(losses.breakdown.kl_real, 0.0);
}

TEST(ComputeLosses, ZeroLogitDiscriminatorBce) {
  auto arch = archspec::parse_arch("A,B,C");
  ModelOptions opt = small_opts();
  opt.passthrough = true;
  TranslationModel<float> m(arch, opt);
  for (auto& p : m.discriminator_params()) p->value.fill(0.0f);
  Rng rng(13);
  auto losses =
      compute_losses(m, random_image(rng, 32), random_image(rng, 32), LossWeights{}, zero_noise(m));
  const double two_log2 = 2.0 * std::log(2.0);  // 2 * (-log 0.5)
  EXPECT_NEAR(losses.breakdown.gan_d_sim, two_log2, 1e-5);
  EXPECT_NEAR(losses.breakdown.gan_d_real, two_log2, 1e-5);
  EXPECT_NEAR(losses.breakdown.gan_g_sim, std::log(2.0), 1e-5);
  EXPECT_NEAR(losses.breakdown.gan_g_real, std::log(2.0), 1e-5);
}

TEST(ComputeLosses, DeterministicAndFiniteAtInit) {
  auto arch = archspec::parse_arch("A,A,C");
  TranslationModel<float> m(arch, small_opts());
  Rng rng(14);
  Tensor<float> xs = random_image(rng, 32), xr = random_image(rng, 32);
  Rng n1(100), n2(100);
  auto a = compute_losses(m, xs, xr, LossWeights{}, make_noise(m, n1));
  auto b = compute_losses(m, xs, xr, LossWeights{}, make_noise(m, n2));
  EXPECT_TRUE(a.breakdown.all_finite());
  EXPECT_EQ(a.breakdown.total_g, b.breakdown.total_g);
  EXPECT_EQ(a.breakdown.total_d, b.breakdown.total_d);
  EXPECT_EQ(a.breakdown.recon_sim, b.breakdown.recon_sim);
  EXPECT_EQ(a.breakdown.gan_d_real, b.breakdown.gan_d_real);
}

TEST(ComputeLosses, PhaseGradientIsolation) {
  auto arch = archspec::parse_arch("A,B,C");
  TranslationModel<float> m(arch, small_opts());
  Rng rng(15);
  Tensor<float> xs = random_image(rng, 32), xr = random_image(rng, 32);
  auto losses = compute_losses(m, xs, xr, LossWeights{}, zero_noise(m));

  m.zero_all_grads();
  ad::backward(losses.total_d);
  for (auto& p : m.generator_params())
    for (int64_t i = 0; i < p->grad.numel(); ++i)
      ASSERT_EQ(p->grad[i], 0.0f) << "d objective leaked into " << p->name;
  bool disc_touched = false;
  for (auto& p : m.discriminator_params())
    for (int64_t i = 0; i < p->grad.numel(); ++i)
      if (p->grad[i] != 0.0f) disc_touched = true;
  EXPECT_TRUE(disc_touched);

  m.zero_all_grads();
  ad::backward(losses.total_g);
  bool gen_touched = false;
  for (auto& p : m.generator_params())
    for (int64_t i = 0; i < p->grad.numel(); ++i)
      if (p->grad[i] != 0.0f) gen_touched = true;
  EXPECT_TRUE(gen_touched);
}

TEST(ComputeLosses, PerceptualRequiresExtractor) {
  auto arch = archspec::parse_arch("A,C");
  TranslationModel<float> m(arch, small_opts());
  Rng rng(16);
  try {
    compute_losses(m, random_image(rng, 32), random_image(rng, 32), LossWeights{},
                   zero_noise(m), true, static_cast<FeatureExtractor<float>*>(nullptr));
    FAIL() << "expected BackendUnavailable";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Err::BackendUnavailable);
  }
  auto fe = FeatureExtractor<float>::seeded(3, 8, 2, 99);
  auto losses = compute_losses(m, random_image(rng, 32), random_image(rng, 32), LossWeights{},
                               zero_noise(m), true, &fe);
  ASSERT_TRUE(losses.breakdown.perceptual.has_value());
  EXPECT_GE(*losses.breakdown.perceptual, 0.0);
}

}  // namespace

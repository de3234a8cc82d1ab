#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rfgan/archspec.hpp"
#include "rfgan/autodiff.hpp"
#include "rfgan/errors.hpp"
#include "rfgan/rng.hpp"
#include "rfgan/tensor.hpp"

namespace rfgan::nets {

enum class Domain { sim, real };
enum class Direction { sim2real, real2sim };

inline Domain source_domain(Direction d) { return d == Direction::sim2real ? Domain::sim : Domain::real; }
inline Domain target_domain(Direction d) { return d == Direction::sim2real ? Domain::real : Domain::sim; }

struct ModelOptions {
  int image_size = 64;
  int enc_base = 32;
  int enc_cap = 256;
  int num_downsample = 3;
  int num_res_private = 1;
  int num_res_shared = 2;
  archspec::ChannelPlan disc_plan{64, 2, 512};
  double leaky_slope = 0.2;
  double init_std = 0.02;
  double latent_noise = 1.0;
  bool passthrough = false;  // diagnostic: translation ops return the input
  uint64_t seed = 1;
};

template <typename T>
struct ParamStore {
  std::vector<ad::Var<T>> all;

  ad::Var<T> gaussian(std::vector<int> shape, const std::string& name, Rng& rng, double stddev) {
    Tensor<T> t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.normal() * stddev);
    return track(ad::parameter(std::move(t), name));
  }
  ad::Var<T> filled(std::vector<int> shape, const std::string& name, T v) {
    Tensor<T> t(std::move(shape));
    t.fill(v);
    return track(ad::parameter(std::move(t), name));
  }
  ad::Var<T> track(ad::Var<T> p) {
    all.push_back(p);
    return p;
  }
};

// ---- building blocks ----

template <typename T>
struct Conv2dLayer {
  ad::Var<T> w, b;
  int stride = 1, pad = 0;

  Conv2dLayer() = default;
  Conv2dLayer(ParamStore<T>& ps, const std::string& name, int cin, int cout, int k, int s,
              int p, Rng& rng, double init_std)
      : w(ps.gaussian({cout, cin, k, k}, name + ".w", rng, init_std)),
        b(ps.filled({cout}, name + ".b", T(0))),
        stride(s),
        pad(p) {}

  ad::Var<T> operator()(const ad::Var<T>& x) const { return ad::conv2d(x, w, b, stride, pad); }
};

template <typename T>
struct ConvT2dLayer {
  ad::Var<T> w, b;
  int stride = 1, pad = 0;

  ConvT2dLayer() = default;
  ConvT2dLayer(ParamStore<T>& ps, const std::string& name, int cin, int cout, int k, int s,
               int p, Rng& rng, double init_std)
      : w(ps.gaussian({cin, cout, k, k}, name + ".w", rng, init_std)),
        b(ps.filled({cout}, name + ".b", T(0))),
        stride(s),
        pad(p) {}

  ad::Var<T> operator()(const ad::Var<T>& x) const {
    return ad::conv_transpose2d(x, w, b, stride, pad);
  }
};

template <typename T>
struct InstanceNormLayer {
  ad::Var<T> gamma, beta;

  InstanceNormLayer() = default;
  InstanceNormLayer(ParamStore<T>& ps, const std::string& name, int c)
      : gamma(ps.filled({c}, name + ".gamma", T(1))), beta(ps.filled({c}, name + ".beta", T(0))) {}

  ad::Var<T> operator()(const ad::Var<T>& x) const { return ad::instance_norm(x, gamma, beta); }
};

template <typename T>
struct ResBlock {
  Conv2dLayer<T> c1, c2;
  InstanceNormLayer<T> n1, n2;

  ResBlock() = default;
  ResBlock(ParamStore<T>& ps, const std::string& name, int c, Rng& rng, double init_std)
      : c1(ps, name + ".c1", c, c, 3, 1, 1, rng, init_std),
        c2(ps, name + ".c2", c, c, 3, 1, 1, rng, init_std),
        n1(ps, name + ".n1", c),
        n2(ps, name + ".n2", c) {}

  ad::Var<T> operator()(const ad::Var<T>& x) const {
    return ad::add(x, n2(c2(ad::relu(n1(c1(x))))));
  }
};

// Patch discriminator assembled from a DiscriminatorArch; leaky ReLU between
// conv layers, no normalization, raw logits out of the final 1x1 layer.
template <typename T>
struct Discriminator {
  std::vector<Conv2dLayer<T>> layers;
  double leaky_slope = 0.2;

  Discriminator() = default;
  Discriminator(ParamStore<T>& ps, const std::string& name, const archspec::DiscriminatorArch& arch,
                const archspec::ChannelPlan& plan, int in_channels, Rng& rng,
                const ModelOptions& opt)
      : leaky_slope(opt.leaky_slope) {
    std::vector<int> widths = archspec::channel_widths(arch, plan);
    int cin = in_channels;
    for (size_t i = 0; i < arch.layers.size(); ++i) {
      const auto& l = arch.layers[i];
      layers.emplace_back(ps, name + ".l" + std::to_string(i), cin, widths[i], l.kernel,
                          l.stride, l.padding, rng, opt.init_std);
      cin = widths[i];
    }
  }

  ad::Var<T> forward(const ad::Var<T>& x) const {
    ad::Var<T> h = x;
    for (size_t i = 0; i < layers.size(); ++i) {
      h = layers[i](h);
      if (i + 1 < layers.size()) h = ad::leaky_relu(h, leaky_slope);
    }
    return h;
  }

  void fill_positive(T weight, T bias = T(0)) {
    for (auto& l : layers) {
      l.w->value.fill(weight);
      l.b->value.fill(bias);
    }
  }
};

template <typename T>
struct PatchMap {
  ad::Var<T> logits;  // {1,S,S}
  double scalar = 0.0;  // mean sigmoid of the grid

  int grid_size() const { return logits->value.dim(1); }
};

template <typename T>
struct LatentCode {
  ad::Var<T> mean;
};

struct LossWeights {
  double gan = 1.0;
  double recon = 10.0;
  double kl = 0.01;
  double cycle = 10.0;
  double perceptual = 1.0;
};

struct LossBreakdown {
  double recon_sim = 0, recon_real = 0;
  double kl_sim = 0, kl_real = 0;
  double gan_g_sim = 0, gan_g_real = 0;
  double gan_d_sim = 0, gan_d_real = 0;
  double cycle_sim = 0, cycle_real = 0;
  std::optional<double> perceptual;
  LossWeights weights;
  double total_g = 0, total_d = 0;

  bool all_finite() const {
    auto ok = [](double v) { return std::isfinite(v); };
    return ok(recon_sim) && ok(recon_real) && ok(kl_sim) && ok(kl_real) && ok(gan_g_sim) &&
           ok(gan_g_real) && ok(gan_d_sim) && ok(gan_d_real) && ok(cycle_sim) &&
           ok(cycle_real) && (!perceptual || ok(*perceptual)) && ok(total_g) && ok(total_d);
  }
};

// Fixed (non-trainable) conv feature stack; backs the perceptual loss and the
// neural edge adapter. Gradients flow through it to its input.
template <typename T>
struct FeatureExtractor {
  std::vector<Conv2dLayer<T>> layers;
  double leaky_slope = 0.2;
  int in_channels = 3, base = 8, depth = 2, stride = 2, final_channels = 0;
  uint64_t seed = 0;

  // final_channels == 0 keeps the widening ladder; a nonzero value appends a
  // 1-wide head of that many channels (the edge adapter uses 1)
  static FeatureExtractor seeded(int in_channels, int base, int depth, uint64_t seed,
                                 int stride = 2, int final_channels = 0) {
    FeatureExtractor fe;
    fe.in_channels = in_channels;
    fe.base = base;
    fe.depth = depth;
    fe.stride = stride;
    fe.final_channels = final_channels;
    fe.seed = seed;
    ParamStore<T> ps;
    Rng rng(seed);
    int cin = in_channels;
    int w = base;
    for (int i = 0; i < depth; ++i) {
      int cout = (i + 1 == depth && final_channels > 0) ? final_channels : w;
      fe.layers.emplace_back(ps, "feat.l" + std::to_string(i), cin, cout, 3, stride, 1, rng, 0.2);
      cin = cout;
      w *= 2;
    }
    for (auto& p : ps.all) {
      p->requires_grad = false;
      p->is_param = false;
    }
    return fe;
  }

  ad::Var<T> forward(const ad::Var<T>& x) const {
    ad::Var<T> h = x;
    for (size_t i = 0; i < layers.size(); ++i) {
      h = layers[i](h);
      if (i + 1 < layers.size()) h = ad::leaky_relu(h, leaky_slope);
    }
    return h;
  }

  std::vector<ad::Var<T>> tensors() {
    std::vector<ad::Var<T>> out;
    for (auto& l : layers) {
      out.push_back(l.w);
      out.push_back(l.b);
    }
    return out;
  }
};

template <typename T>
struct NoiseBundle {
  Tensor<T> enc_sim, enc_real, cyc_sim, cyc_real;
};

// XY-coupled VAE-GAN. The two domain encoders share their last residual
// blocks and the two generators share their first ones; both discriminators
// are built from the same DiscriminatorArch.
template <typename T>
class TranslationModel {
 public:
  TranslationModel(archspec::DiscriminatorArch arch, ModelOptions opt)
      : arch_(std::move(arch)), opt_(opt) {
    const int stride = 1 << opt_.num_downsample;
    if (opt_.image_size % stride != 0)
      fail(Err::IncompatibleGeometry,
           "image_size " + std::to_string(opt_.image_size) +
               " not divisible by encoder stride " + std::to_string(stride));
    try {
      grid_size_ = archspec::output_grid_size(arch_, opt_.image_size);
    } catch (const Error&) {
      fail(Err::IncompatibleGeometry,
           "discriminator " + arch_.name + " cannot consume " +
               std::to_string(opt_.image_size) + "px images");
    }

    Rng rng(opt_.seed);
    std::vector<int> widths = enc_widths();
    latent_channels_ = widths.back();

    for (Domain d : {Domain::sim, Domain::real}) {
      const std::string ename = d == Domain::sim ? "enc_sim" : "enc_real";
      EncoderPrivate& e = enc(d);
      e.head = Conv2dLayer<T>(params_, ename + ".head", 3, widths[0], 7, 1, 3, rng, opt_.init_std);
      e.head_norm = InstanceNormLayer<T>(params_, ename + ".head_norm", widths[0]);
      for (int i = 0; i < opt_.num_downsample; ++i) {
        e.down.emplace_back(params_, ename + ".down" + std::to_string(i), widths[i],
                            widths[i + 1], 4, 2, 1, rng, opt_.init_std);
        e.down_norm.emplace_back(params_, ename + ".down_norm" + std::to_string(i),
                                 widths[i + 1]);
      }
      for (int i = 0; i < opt_.num_res_private; ++i)
        e.res.emplace_back(params_, ename + ".res" + std::to_string(i), latent_channels_, rng,
                           opt_.init_std);
    }
    for (int i = 0; i < opt_.num_res_shared; ++i)
      shared_enc_.emplace_back(params_, "shared_enc.res" + std::to_string(i), latent_channels_,
                               rng, opt_.init_std);
    for (int i = 0; i < opt_.num_res_shared; ++i)
      shared_gen_.emplace_back(params_, "shared_gen.res" + std::to_string(i), latent_channels_,
                               rng, opt_.init_std);
    for (Domain d : {Domain::sim, Domain::real}) {
      const std::string gname = d == Domain::sim ? "gen_sim" : "gen_real";
      GeneratorPrivate& g = gen(d);
      for (int i = 0; i < opt_.num_res_private; ++i)
        g.res.emplace_back(params_, gname + ".res" + std::to_string(i), latent_channels_, rng,
                           opt_.init_std);
      for (int i = opt_.num_downsample; i >= 1; --i) {
        g.up.emplace_back(params_, gname + ".up" + std::to_string(opt_.num_downsample - i),
                          widths[i], widths[i - 1], 4, 2, 1, rng, opt_.init_std);
        g.up_norm.emplace_back(params_,
                               gname + ".up_norm" + std::to_string(opt_.num_downsample - i),
                               widths[i - 1]);
      }
      g.tail = Conv2dLayer<T>(params_, gname + ".tail", widths[0], 3, 7, 1, 3, rng,
                              opt_.init_std);
    }

    size_t before_disc = params_.all.size();
    disc_sim_ = Discriminator<T>(params_, "disc_sim", arch_, opt_.disc_plan, 3, rng, opt_);
    disc_real_ = Discriminator<T>(params_, "disc_real", arch_, opt_.disc_plan, 3, rng, opt_);
    for (size_t i = 0; i < params_.all.size(); ++i)
      (i < before_disc ? gen_params_ : disc_params_).push_back(params_.all[i]);
  }

  const archspec::DiscriminatorArch& arch() const { return arch_; }
  const ModelOptions& options() const { return opt_; }
  int grid_size() const { return grid_size_; }
  int latent_channels() const { return latent_channels_; }
  int latent_grid() const { return opt_.image_size >> opt_.num_downsample; }

  const std::vector<ad::Var<T>>& all_params() const { return params_.all; }
  const std::vector<ad::Var<T>>& generator_params() const { return gen_params_; }
  const std::vector<ad::Var<T>>& discriminator_params() const { return disc_params_; }
  std::vector<ad::Var<T>> shared_encoder_params() const { return collect(shared_enc_); }
  std::vector<ad::Var<T>> shared_generator_params() const { return collect(shared_gen_); }

  std::vector<ad::Var<T>> params_with_prefix(const std::string& prefix) const {
    std::vector<ad::Var<T>> out;
    for (const auto& p : params_.all)
      if (p->name.rfind(prefix, 0) == 0) out.push_back(p);
    return out;
  }

  void zero_all_grads() {
    for (auto& p : params_.all) {
      p->ensure_grad();
      p->grad.fill(T(0));
    }
  }

  void check_image(const Tensor<T>& im) const {
    if (im.rank() != 3 || im.dim(0) != 3 || im.dim(1) != opt_.image_size ||
        im.dim(2) != opt_.image_size)
      fail(Err::BadImageShape, "expected {3," + std::to_string(opt_.image_size) + "," +
                                   std::to_string(opt_.image_size) + "} image");
  }

  // ---- graph-building forwards ----

  LatentCode<T> encode(const ad::Var<T>& image, Domain d) {
    const EncoderPrivate& e = enc(d);
    ad::Var<T> h = ad::leaky_relu(e.head_norm(e.head(image)), opt_.leaky_slope);
    for (size_t i = 0; i < e.down.size(); ++i)
      h = ad::leaky_relu(e.down_norm[i](e.down[i](h)), opt_.leaky_slope);
    for (const auto& r : e.res) h = r(h);
    for (const auto& r : shared_enc_) h = r(h);
    return LatentCode<T>{h};
  }

  ad::Var<T> sample_latent(const LatentCode<T>& code, const Tensor<T>& noise) {
    return ad::add(code.mean, ad::constant(noise));
  }

  ad::Var<T> decode(const ad::Var<T>& z, Domain d) {
    const GeneratorPrivate& g = gen(d);
    ad::Var<T> h = z;
    for (const auto& r : shared_gen_) h = r(h);
    for (const auto& r : g.res) h = r(h);
    for (size_t i = 0; i < g.up.size(); ++i)
      h = ad::leaky_relu(g.up_norm[i](g.up[i](h)), opt_.leaky_slope);
    return ad::tanh_act(g.tail(h));
  }

  PatchMap<T> discriminate_var(const ad::Var<T>& image, Domain d) {
    ad::Var<T> logits = (d == Domain::sim ? disc_sim_ : disc_real_).forward(image);
    double s = 0.0;
    for (int64_t i = 0; i < logits->value.numel(); ++i)
      s += 1.0 / (1.0 + std::exp(-static_cast<double>(logits->value[i])));
    return PatchMap<T>{logits, s / static_cast<double>(logits->value.numel())};
  }

  Discriminator<T>& discriminator(Domain d) { return d == Domain::sim ? disc_sim_ : disc_real_; }

  // ---- tensor-level ops (evaluation path, zero latent noise) ----

  PatchMap<T> discriminate(const Tensor<T>& image, Domain d) {
    check_image(image);
    return discriminate_var(ad::constant(image), d);
  }

  Tensor<T> translate(const Tensor<T>& image, Direction dir) {
    check_image(image);
    if (opt_.passthrough) return image;
    LatentCode<T> code = encode(ad::constant(image), source_domain(dir));
    return decode(code.mean, target_domain(dir))->value;
  }

  Tensor<T> reconstruct(const Tensor<T>& image, Domain d) {
    check_image(image);
    if (opt_.passthrough) return image;
    LatentCode<T> code = encode(ad::constant(image), d);
    return decode(code.mean, d)->value;
  }

  Tensor<T> cycle(const Tensor<T>& image, Direction dir) {
    check_image(image);
    if (opt_.passthrough) return image;
    Tensor<T> there = translate(image, dir);
    Direction back = dir == Direction::sim2real ? Direction::real2sim : Direction::sim2real;
    return translate(there, back);
  }

  Tensor<T> zero_latent_noise() const {
    return Tensor<T>(std::vector<int>{latent_channels_, latent_grid(), latent_grid()});
  }

 private:
  struct EncoderPrivate {
    Conv2dLayer<T> head;
    InstanceNormLayer<T> head_norm;
    std::vector<Conv2dLayer<T>> down;
    std::vector<InstanceNormLayer<T>> down_norm;
    std::vector<ResBlock<T>> res;
  };
  struct GeneratorPrivate {
    std::vector<ResBlock<T>> res;
    std::vector<ConvT2dLayer<T>> up;
    std::vector<InstanceNormLayer<T>> up_norm;
    Conv2dLayer<T> tail;
  };

  std::vector<int> enc_widths() const {
    std::vector<int> w{opt_.enc_base};
    for (int i = 0; i < opt_.num_downsample; ++i)
      w.push_back(std::min(w.back() * 2, opt_.enc_cap));
    return w;
  }

  static std::vector<ad::Var<T>> collect(const std::vector<ResBlock<T>>& blocks) {
    std::vector<ad::Var<T>> out;
    for (const auto& b : blocks) {
      out.push_back(b.c1.w);
      out.push_back(b.c1.b);
      out.push_back(b.c2.w);
      out.push_back(b.c2.b);
      out.push_back(b.n1.gamma);
      out.push_back(b.n1.beta);
      out.push_back(b.n2.gamma);
      out.push_back(b.n2.beta);
    }
    return out;
  }

  EncoderPrivate& enc(Domain d) { return d == Domain::sim ? enc_sim_ : enc_real_; }
  const EncoderPrivate& enc(Domain d) const { return d == Domain::sim ? enc_sim_ : enc_real_; }
  GeneratorPrivate& gen(Domain d) { return d == Domain::sim ? gen_sim_ : gen_real_; }
  const GeneratorPrivate& gen(Domain d) const { return d == Domain::sim ? gen_sim_ : gen_real_; }

  archspec::DiscriminatorArch arch_;
  ModelOptions opt_;
  int grid_size_ = 0;
  int latent_channels_ = 0;
  ParamStore<T> params_;
  std::vector<ad::Var<T>> gen_params_, disc_params_;
  EncoderPrivate enc_sim_, enc_real_;
  GeneratorPrivate gen_sim_, gen_real_;
  std::vector<ResBlock<T>> shared_enc_, shared_gen_;
  Discriminator<T> disc_sim_, disc_real_;
};

template <typename T>
TranslationModel<T> build_model(const archspec::DiscriminatorArch& arch, const ModelOptions& opt) {
  return TranslationModel<T>(arch, opt);
}

template <typename T>
NoiseBundle<T> make_noise(const TranslationModel<T>& model, Rng& rng) {
  auto draw = [&](Tensor<T> t) {
    for (int64_t i = 0; i < t.numel(); ++i)
      t[i] = static_cast<T>(rng.normal() * model.options().latent_noise);
    return t;
  };
  Tensor<T> z = model.zero_latent_noise();
  NoiseBundle<T> nb;
  nb.enc_sim = draw(z);
  nb.enc_real = draw(z);
  nb.cyc_sim = draw(z);
  nb.cyc_real = draw(z);
  return nb;
}

template <typename T>
NoiseBundle<T> zero_noise(const TranslationModel<T>& model) {
  Tensor<T> z = model.zero_latent_noise();
  return NoiseBundle<T>{z, z, z, z};
}

template <typename T>
struct ComputedLosses {
  LossBreakdown breakdown;
  ad::Var<T> total_g, total_d;
  std::vector<std::pair<std::string, ad::Var<T>>> terms;  // unweighted scalars
  Tensor<T> translated_sim2real, translated_real2sim;  // values, for logging/snapshots

  ad::Var<T> term(const std::string& name) const {
    for (const auto& [k, v] : terms)
      if (k == name) return v;
    fail(Err::BadConfig, "unknown loss term " + name);
  }
};

// One training-step loss graph over a two-image batch (one per domain).
// The discriminator objective sees translations through detach(), so
// backward(total_d) touches only discriminator parameters and
// backward(total_g) is the only path into encoder/generator parameters.
template <typename T>
ComputedLosses<T> compute_losses(TranslationModel<T>& model, const Tensor<T>& x_sim,
                                 const Tensor<T>& x_real, const LossWeights& weights,
                                 const NoiseBundle<T>& noise, bool perceptual_enabled = false,
                                 FeatureExtractor<T>* perceptual_net = nullptr) {
  model.check_image(x_sim);
  model.check_image(x_real);
  ad::Var<T> xs = ad::constant(x_sim);
  ad::Var<T> xr = ad::constant(x_real);

  ad::Var<T> x_ss, x_rr, x_sr, x_rs, cyc_s, cyc_r;
  LatentCode<T> mu_s, mu_r;
  if (model.options().passthrough) {
    mu_s.mean = ad::constant(model.zero_latent_noise());
    mu_r.mean = ad::constant(model.zero_latent_noise());
    x_ss = xs;
    x_rr = xr;
    x_sr = xs;
    x_rs = xr;
    cyc_s = xs;
    cyc_r = xr;
  } else {
    mu_s = model.encode(xs, Domain::sim);
    mu_r = model.encode(xr, Domain::real);
    ad::Var<T> z_s = model.sample_latent(mu_s, noise.enc_sim);
    ad::Var<T> z_r = model.sample_latent(mu_r, noise.enc_real);
    x_ss = model.decode(z_s, Domain::sim);
    x_rr = model.decode(z_r, Domain::real);
    x_sr = model.decode(z_s, Domain::real);
    x_rs = model.decode(z_r, Domain::sim);
    LatentCode<T> mu_sr = model.encode(x_sr, Domain::real);
    LatentCode<T> mu_rs = model.encode(x_rs, Domain::sim);
    cyc_s = model.decode(model.sample_latent(mu_sr, noise.cyc_sim), Domain::sim);
    cyc_r = model.decode(model.sample_latent(mu_rs, noise.cyc_real), Domain::real);
  }

  ad::Var<T> recon_s = ad::l1_diff_mean(x_ss, xs);
  ad::Var<T> recon_r = ad::l1_diff_mean(x_rr, xr);
  ad::Var<T> kl_s = ad::half_mean_square(mu_s.mean);
  ad::Var<T> kl_r = ad::half_mean_square(mu_r.mean);
  ad::Var<T> cyc_loss_s = ad::l1_diff_mean(cyc_s, xs);
  ad::Var<T> cyc_loss_r = ad::l1_diff_mean(cyc_r, xr);

  // generator side: translated images judged as real
  ad::Var<T> gan_g_real = ad::bce_logits_mean(model.discriminate_var(x_sr, Domain::real).logits, 1.0);
  ad::Var<T> gan_g_sim = ad::bce_logits_mean(model.discriminate_var(x_rs, Domain::sim).logits, 1.0);

  // discriminator side: reals to 1, detached fakes to 0
  ad::Var<T> d_real_logits = model.discriminate_var(xr, Domain::real).logits;
  ad::Var<T> d_real_fake_logits =
      model.discriminate_var(ad::detach(x_sr), Domain::real).logits;
  ad::Var<T> d_sim_logits = model.discriminate_var(xs, Domain::sim).logits;
  ad::Var<T> d_sim_fake_logits = model.discriminate_var(ad::detach(x_rs), Domain::sim).logits;
  ad::Var<T> gan_d_real = ad::weighted_sum<T>(
      {ad::bce_logits_mean(d_real_logits, 1.0), ad::bce_logits_mean(d_real_fake_logits, 0.0)},
      {1.0, 1.0});
  ad::Var<T> gan_d_sim = ad::weighted_sum<T>(
      {ad::bce_logits_mean(d_sim_logits, 1.0), ad::bce_logits_mean(d_sim_fake_logits, 0.0)},
      {1.0, 1.0});

  ComputedLosses<T> out;
  std::vector<ad::Var<T>> terms = {gan_g_sim, gan_g_real, recon_s, recon_r,
                                   kl_s,      kl_r,       cyc_loss_s, cyc_loss_r};
  std::vector<double> ws = {weights.gan,   weights.gan,   weights.recon, weights.recon,
                            weights.kl,    weights.kl,    weights.cycle, weights.cycle};
  if (perceptual_enabled) {
    if (!perceptual_net)
      fail(Err::BackendUnavailable, "perceptual loss enabled but no feature extractor loaded");
    ad::Var<T> p1 = ad::mse_diff_mean(perceptual_net->forward(x_sr), perceptual_net->forward(xs));
    ad::Var<T> p2 = ad::mse_diff_mean(perceptual_net->forward(x_rs), perceptual_net->forward(xr));
    ad::Var<T> p = ad::weighted_sum<T>({p1, p2}, {1.0, 1.0});
    terms.push_back(p);
    ws.push_back(weights.perceptual);
    out.breakdown.perceptual = static_cast<double>(p->value[0]);
  }
  out.total_g = ad::weighted_sum<T>(terms, ws);
  out.total_d = ad::weighted_sum<T>({gan_d_sim, gan_d_real}, {weights.gan, weights.gan});
  out.terms = {{"recon_sim", recon_s},   {"recon_real", recon_r}, {"kl_sim", kl_s},
               {"kl_real", kl_r},        {"gan_g_sim", gan_g_sim}, {"gan_g_real", gan_g_real},
               {"gan_d_sim", gan_d_sim}, {"gan_d_real", gan_d_real}, {"cycle_sim", cyc_loss_s},
               {"cycle_real", cyc_loss_r}};
  if (perceptual_enabled) out.terms.emplace_back("perceptual", terms.back());

  LossBreakdown& b = out.breakdown;
  b.recon_sim = recon_s->value[0];
  b.recon_real = recon_r->value[0];
  b.kl_sim = kl_s->value[0];
  b.kl_real = kl_r->value[0];
  b.gan_g_sim = gan_g_sim->value[0];
  b.gan_g_real = gan_g_real->value[0];
  b.gan_d_sim = gan_d_sim->value[0];
  b.gan_d_real = gan_d_real->value[0];
  b.cycle_sim = cyc_loss_s->value[0];
  b.cycle_real = cyc_loss_r->value[0];
  b.weights = weights;
  b.total_g = out.total_g->value[0];
  b.total_d = out.total_d->value[0];
  if (!b.all_finite()) fail(Err::NonFiniteLoss, "non-finite loss value; aborting run");

  out.translated_sim2real = x_sr->value;
  out.translated_real2sim = x_rs->value;
  return out;
}

// Gradient-support receptive field of a built discriminator: backprop one
// interior logit to the input and take the bounding box of nonzero
// sensitivities. With strictly positive weights the support is exact.
template <typename T>
int empirical_receptive_field_grad(Discriminator<T>& disc, int input_size,
                                   T input_value = T(0.5)) {
  Tensor<T> x(std::vector<int>{3, input_size, input_size});
  x.fill(input_value);
  ad::Var<T> xin = ad::parameter(std::move(x), "probe_input");
  ad::Var<T> logits = disc.forward(xin);
  const int gs = logits->value.dim(1);
  ad::Var<T> unit = ad::pick(logits, 0, gs / 2, gs / 2);
  ad::backward(unit);

  int lo_y = input_size, hi_y = -1, lo_x = input_size, hi_x = -1;
  for (int y = 0; y < input_size; ++y)
    for (int xx = 0; xx < input_size; ++xx) {
      bool hit = false;
      for (int c = 0; c < 3; ++c)
        if (xin->grad.at3(c, y, xx) != T(0)) hit = true;
      if (hit) {
        lo_y = std::min(lo_y, y);
        hi_y = std::max(hi_y, y);
        lo_x = std::min(lo_x, xx);
        hi_x = std::max(hi_x, xx);
      }
    }
  if (hi_y < 0) fail(Err::DegenerateResponse, "all input sensitivities are zero");
  return std::max(hi_y - lo_y + 1, hi_x - lo_x + 1);
}

}  // namespace rfgan::nets

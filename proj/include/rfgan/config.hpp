#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "rfgan/data.hpp"
#include "rfgan/errors.hpp"
#include "rfgan/nets.hpp"

namespace rfgan::config {

struct DataConfig {
  std::string kind = "procedural";  // procedural | folders
  int count = 2000;
  uint64_t seed = 11;
  std::string sim_dir, real_dir;  // folders mode
};

struct EvalConfig {
  int count = 500;
  uint64_t seed = 1011;  // held-out procedural eval set
  std::string backend = "classical";
  double threshold = 0.5;
  double sigma = 1.0;
  int eval_size = 0;  // 0 -> training image_size
  std::string neural_adapter;
};

// Training defaults follow the studied recipe: ADAM with learning rate 1e-4
// and decay rates (0.5, 0.999), one image per domain per step.
struct TrainConfig {
  std::string name = "run";
  std::string arch = "A,A,A,A,C";
  int image_size = 64;
  int steps = 10000;
  double learning_rate = 1e-4;
  double decay0 = 0.5, decay1 = 0.999;
  nets::LossWeights weights;
  bool perceptual_enabled = false;
  std::string perceptual_adapter;  // checkpoint path, or "seeded:<N>"
  uint64_t seed = 1;
  int checkpoint_every = 2000;
  int threads = 2;
  std::string data_root = "data_cache";
  DataConfig data;
  EvalConfig eval;
  // model knobs (arch/image_size/seed land in ModelOptions at build time)
  int enc_base = 32;
  int enc_cap = 256;
  int num_downsample = 3;
  int num_res_private = 1;
  int num_res_shared = 2;
  archspec::ChannelPlan disc_plan{64, 2, 512};
  double latent_noise = 1.0;
  bool passthrough = false;

  nets::ModelOptions model_options() const {
    nets::ModelOptions o;
    o.image_size = image_size;
    o.enc_base = enc_base;
    o.enc_cap = enc_cap;
    o.num_downsample = num_downsample;
    o.num_res_private = num_res_private;
    o.num_res_shared = num_res_shared;
    o.disc_plan = disc_plan;
    o.latent_noise = latent_noise;
    o.passthrough = passthrough;
    o.seed = seed;
    return o;
  }

  void validate() const {
    if (learning_rate <= 0) fail(Err::BadConfig, "learning_rate must be > 0");
    if (decay0 < 0 || decay0 >= 1 || decay1 < 0 || decay1 >= 1)
      fail(Err::BadConfig, "decay_rates must lie in [0,1)");
    if (steps < 1) fail(Err::BadConfig, "steps must be >= 1");
    if (weights.gan < 0 || weights.recon < 0 || weights.kl < 0 || weights.cycle < 0 ||
        weights.perceptual < 0)
      fail(Err::BadConfig, "loss weights must be >= 0");
    if (data.kind != "procedural" && data.kind != "folders")
      fail(Err::BadConfig, "data.kind must be procedural or folders");
    if (eval.backend != "classical" && eval.backend != "neural")
      fail(Err::BadConfig, "eval.backend must be classical or neural");
    archspec::parse_arch(arch);
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{
      {"name", c.name},
      {"arch", c.arch},
      {"image_size", c.image_size},
      {"steps", c.steps},
      {"learning_rate", c.learning_rate},
      {"decay_rates", {c.decay0, c.decay1}},
      {"loss_weights",
       {{"gan", c.weights.gan},
        {"recon", c.weights.recon},
        {"kl", c.weights.kl},
        {"cycle", c.weights.cycle},
        {"perceptual", c.weights.perceptual}}},
      {"perceptual_enabled", c.perceptual_enabled},
      {"perceptual_adapter", c.perceptual_adapter},
      {"seed", c.seed},
      {"checkpoint_every", c.checkpoint_every},
      {"threads", c.threads},
      {"data_root", c.data_root},
      {"data",
       {{"kind", c.data.kind},
        {"count", c.data.count},
        {"seed", c.data.seed},
        {"sim_dir", c.data.sim_dir},
        {"real_dir", c.data.real_dir}}},
      {"eval",
       {{"count", c.eval.count},
        {"seed", c.eval.seed},
        {"backend", c.eval.backend},
        {"threshold", c.eval.threshold},
        {"sigma", c.eval.sigma},
        {"eval_size", c.eval.eval_size},
        {"neural_adapter", c.eval.neural_adapter}}},
      {"model",
       {{"enc_base", c.enc_base},
        {"enc_cap", c.enc_cap},
        {"num_downsample", c.num_downsample},
        {"num_res_private", c.num_res_private},
        {"num_res_shared", c.num_res_shared},
        {"disc_base", c.disc_plan.base_channels},
        {"disc_growth", c.disc_plan.growth},
        {"disc_cap", c.disc_plan.cap},
        {"latent_noise", c.latent_noise},
        {"passthrough", c.passthrough}}}};
}

inline TrainConfig from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.name = j.value("name", c.name);
  c.arch = j.value("arch", c.arch);
  c.image_size = j.value("image_size", c.image_size);
  c.steps = j.value("steps", c.steps);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  if (j.contains("decay_rates")) {
    c.decay0 = j["decay_rates"][0].get<double>();
    c.decay1 = j["decay_rates"][1].get<double>();
  }
  if (j.contains("loss_weights")) {
    const auto& w = j["loss_weights"];
    c.weights.gan = w.value("gan", c.weights.gan);
    c.weights.recon = w.value("recon", c.weights.recon);
    c.weights.kl = w.value("kl", c.weights.kl);
    c.weights.cycle = w.value("cycle", c.weights.cycle);
    c.weights.perceptual = w.value("perceptual", c.weights.perceptual);
  }
  c.perceptual_enabled = j.value("perceptual_enabled", c.perceptual_enabled);
  c.perceptual_adapter = j.value("perceptual_adapter", c.perceptual_adapter);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.threads = j.value("threads", c.threads);
  c.data_root = j.value("data_root", c.data_root);
  if (j.contains("data")) {
    const auto& d = j["data"];
    c.data.kind = d.value("kind", c.data.kind);
    c.data.count = d.value("count", c.data.count);
    c.data.seed = d.value("seed", c.data.seed);
    c.data.sim_dir = d.value("sim_dir", c.data.sim_dir);
    c.data.real_dir = d.value("real_dir", c.data.real_dir);
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    c.eval.count = e.value("count", c.eval.count);
    c.eval.seed = e.value("seed", c.eval.seed);
    c.eval.backend = e.value("backend", c.eval.backend);
    c.eval.threshold = e.value("threshold", c.eval.threshold);
    c.eval.sigma = e.value("sigma", c.eval.sigma);
    c.eval.eval_size = e.value("eval_size", c.eval.eval_size);
    c.eval.neural_adapter = e.value("neural_adapter", c.eval.neural_adapter);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    c.enc_base = m.value("enc_base", c.enc_base);
    c.enc_cap = m.value("enc_cap", c.enc_cap);
    c.num_downsample = m.value("num_downsample", c.num_downsample);
    c.num_res_private = m.value("num_res_private", c.num_res_private);
    c.num_res_shared = m.value("num_res_shared", c.num_res_shared);
    c.disc_plan.base_channels = m.value("disc_base", c.disc_plan.base_channels);
    c.disc_plan.growth = m.value("disc_growth", c.disc_plan.growth);
    c.disc_plan.cap = m.value("disc_cap", c.disc_plan.cap);
    c.latent_noise = m.value("latent_noise", c.latent_noise);
    c.passthrough = m.value("passthrough", c.passthrough);
  }
  c.validate();
  return c;
}

inline TrainConfig load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(Err::BadConfig, "cannot open config " + path);
  nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded()) fail(Err::BadConfig, "config " + path + " is not valid json");
  return from_json(j);
}

// canonical hash over the full serialized config (nlohmann orders keys)
inline std::string config_hash(const TrainConfig& c) {
  uint64_t h = data::fnv1a(to_json(c).dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rfgan::config

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfgan/errors.hpp"
#include "rfgan/nets.hpp"
#include "rfgan/tensor.hpp"

namespace rfgan::ckpt {

inline constexpr char kMagic[4] = {'R', 'F', 'G', 'C'};
inline constexpr uint32_t kVersion = 1;
inline constexpr const char* kCodeVersion = "rfgan 0.1.0";

// Versioned container: magic, version, json header (tensor table + model
// metadata), then raw little-endian float32 data.
struct Header {
  nlohmann::json meta;  // arch, channel_plan, loss_weights, step
  struct Entry {
    std::string name;
    std::vector<int> shape;
    int64_t offset = 0;  // bytes into the data section
  };
  std::vector<Entry> tensors;
};

inline void save_tensors(const std::string& path,
                         const std::vector<std::pair<std::string, const Tensor<float>*>>& tensors,
                         const nlohmann::json& meta) {
  nlohmann::json table = nlohmann::json::array();
  int64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    table.push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}});
    offset += t->numel() * static_cast<int64_t>(sizeof(float));
  }
  nlohmann::json header{{"format_version", kVersion}, {"meta", meta}, {"tensors", table}};
  std::string hs = header.dump();

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(Err::BadCheckpoint, "cannot open " + path + " for writing");
  f.write(kMagic, 4);
  uint32_t ver = kVersion;
  uint64_t hlen = hs.size();
  f.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
  f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& [name, t] : tensors)
    f.write(reinterpret_cast<const char*>(t->data()),
            t->numel() * static_cast<std::streamsize>(sizeof(float)));
  if (!f) fail(Err::BadCheckpoint, "short write to " + path);
}

inline Header read_header(std::ifstream& f, const std::string& path) {
  char magic[4];
  uint32_t ver = 0;
  uint64_t hlen = 0;
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(&ver), sizeof(ver));
  f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    fail(Err::BadCheckpoint, path + " is not a checkpoint container");
  if (ver != kVersion)
    fail(Err::BadCheckpoint, path + " has unsupported version " + std::to_string(ver));
  std::string hs(hlen, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!f) fail(Err::BadCheckpoint, "truncated header in " + path);
  Header h;
  nlohmann::json j = nlohmann::json::parse(hs, nullptr, false);
  if (j.is_discarded()) fail(Err::BadCheckpoint, "corrupt header json in " + path);
  h.meta = j["meta"];
  for (const auto& e : j["tensors"]) {
    Header::Entry entry;
    entry.name = e["name"].get<std::string>();
    entry.shape = e["shape"].get<std::vector<int>>();
    entry.offset = e["offset"].get<int64_t>();
    h.tensors.push_back(std::move(entry));
  }
  return h;
}

inline Header peek(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Err::BadCheckpoint, "cannot open " + path);
  return read_header(f, path);
}

inline void load_into(const std::string& path,
                      const std::vector<std::pair<std::string, Tensor<float>*>>& tensors,
                      nlohmann::json* meta_out = nullptr) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Err::BadCheckpoint, "cannot open " + path);
  Header h = read_header(f, path);
  if (meta_out) *meta_out = h.meta;
  std::streampos data_start = f.tellg();
  if (h.tensors.size() != tensors.size())
    fail(Err::BadCheckpoint, path + ": tensor count mismatch (" +
                                 std::to_string(h.tensors.size()) + " vs " +
                                 std::to_string(tensors.size()) + ")");
  for (size_t i = 0; i < tensors.size(); ++i) {
    const auto& [name, t] = tensors[i];
    const Header::Entry& e = h.tensors[i];
    if (e.name != name || e.shape != t->shape())
      fail(Err::BadCheckpoint, path + ": tensor " + e.name + " does not match model " + name);
    f.seekg(data_start + static_cast<std::streamoff>(e.offset));
    f.read(reinterpret_cast<char*>(t->data()),
           t->numel() * static_cast<std::streamsize>(sizeof(float)));
    if (!f) fail(Err::BadCheckpoint, "truncated data in " + path);
  }
}

// ---- model-level helpers ----

inline nlohmann::json model_meta(const nets::TranslationModel<float>& model,
                                 const nets::LossWeights& weights, int64_t step) {
  const nets::ModelOptions& o = model.options();
  return nlohmann::json{
      {"arch", model.arch().name},
      {"step", step},
      {"channel_plan",
       {{"base_channels", o.disc_plan.base_channels},
        {"growth", o.disc_plan.growth},
        {"cap", o.disc_plan.cap}}},
      {"loss_weights",
       {{"gan", weights.gan},
        {"recon", weights.recon},
        {"kl", weights.kl},
        {"cycle", weights.cycle},
        {"perceptual", weights.perceptual}}},
      {"model_options",
       {{"image_size", o.image_size},
        {"enc_base", o.enc_base},
        {"enc_cap", o.enc_cap},
        {"num_downsample", o.num_downsample},
        {"num_res_private", o.num_res_private},
        {"num_res_shared", o.num_res_shared},
        {"latent_noise", o.latent_noise},
        {"leaky_slope", o.leaky_slope},
        {"init_std", o.init_std},
        {"passthrough", o.passthrough}}}};
}

inline void save_model(const std::string& path, const nets::TranslationModel<float>& model,
                       const nets::LossWeights& weights, int64_t step) {
  std::vector<std::pair<std::string, const Tensor<float>*>> tensors;
  for (const auto& p : model.all_params()) tensors.emplace_back(p->name, &p->value);
  save_tensors(path, tensors, model_meta(model, weights, step));
}

inline nlohmann::json load_model(const std::string& path, nets::TranslationModel<float>& model) {
  std::vector<std::pair<std::string, Tensor<float>*>> tensors;
  for (const auto& p : model.all_params()) tensors.emplace_back(p->name, &p->value);
  nlohmann::json meta;
  load_into(path, tensors, &meta);
  if (meta["arch"].get<std::string>() != model.arch().name)
    fail(Err::BadCheckpoint, "checkpoint arch " + meta["arch"].get<std::string>() +
                                 " does not match model " + model.arch().name);
  return meta;
}

inline void save_feature_extractor(const std::string& path, nets::FeatureExtractor<float>& fe) {
  std::vector<std::pair<std::string, const Tensor<float>*>> tensors;
  int idx = 0;
  for (auto& l : fe.layers) {
    tensors.emplace_back("feat.l" + std::to_string(idx) + ".w", &l.w->value);
    tensors.emplace_back("feat.l" + std::to_string(idx) + ".b", &l.b->value);
    ++idx;
  }
  nlohmann::json meta{{"kind", "feature_extractor"}, {"in_channels", fe.in_channels},
                      {"base", fe.base},             {"depth", fe.depth},
                      {"stride", fe.stride},         {"final_channels", fe.final_channels},
                      {"seed", fe.seed}};
  save_tensors(path, tensors, meta);
}

inline nets::FeatureExtractor<float> load_feature_extractor(const std::string& path) {
  Header h = peek(path);
  if (!h.meta.contains("kind") || h.meta["kind"] != "feature_extractor")
    fail(Err::BadCheckpoint, path + " is not a feature-extractor container");
  nets::FeatureExtractor<float> fe = nets::FeatureExtractor<float>::seeded(
      h.meta["in_channels"].get<int>(), h.meta["base"].get<int>(), h.meta["depth"].get<int>(),
      h.meta.value("seed", uint64_t{0}), h.meta["stride"].get<int>(),
      h.meta["final_channels"].get<int>());
  std::vector<std::pair<std::string, Tensor<float>*>> tensors;
  int idx = 0;
  for (auto& l : fe.layers) {
    tensors.emplace_back("feat.l" + std::to_string(idx) + ".w", &l.w->value);
    tensors.emplace_back("feat.l" + std::to_string(idx) + ".b", &l.b->value);
    ++idx;
  }
  load_into(path, tensors);
  return fe;
}

inline void write_manifest(const std::string& path, const nlohmann::json& manifest) {
  std::ofstream f(path);
  if (!f) fail(Err::BadCheckpoint, "cannot write manifest " + path);
  f << manifest.dump(2) << "\n";
}

}  // namespace rfgan::ckpt

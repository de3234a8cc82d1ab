#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfgan/errors.hpp"
#include "rfgan/image.hpp"
#include "rfgan/rng.hpp"
#include "rfgan/tensor.hpp"

namespace rfgan::data {

enum class CouplerType { a_frame, straight };
enum class Style { flat, textured };
enum class Domain { sim, real };

inline const char* to_string(CouplerType t) { return t == CouplerType::a_frame ? "a_frame" : "straight"; }
inline const char* to_string(Style s) { return s == Style::flat ? "flat" : "textured"; }
inline const char* to_string(Domain d) { return d == Domain::sim ? "sim" : "real"; }

struct Vec2 {
  double x = 0, y = 0;
};

struct SunDisc {
  double x = 0, y = 0, r = 0;
};

// One trailer-like scene: a body rectangle with a coupler sticking out of
// its front edge, rotated as a unit. The coupler shape and the background
// style carry the two-domain mismatch.
struct ToySceneParams {
  CouplerType coupler_type = CouplerType::a_frame;
  Style style = Style::flat;
  double body_cx = 0, body_cy = 0, body_w = 0, body_h = 0;
  double coupler_len = 0, coupler_thickness = 0;
  double orientation_deg = 0;
  uint64_t palette_seed = 0;
  double bg_base = 0.85, body_gray = 0.2;
  std::optional<SunDisc> sun;
  int image_size = 64;
  // derived, image coordinates after rotation
  std::vector<Vec2> body_polygon;
  std::vector<Vec2> coupler_polygon;
};

struct CouplerAnnotation {
  int r0 = 0, c0 = 0, r1 = -1, c1 = -1;  // inclusive bbox of coupler pixels
  int64_t pixel_count = 0;
  float color[3] = {0, 0, 0};
};

struct RenderedScene {
  img::Image image;
  ToySceneParams params;
  CouplerAnnotation coupler;
};

namespace detail {

inline Vec2 rotate_about(Vec2 p, Vec2 c, double deg) {
  double rad = deg * 3.14159265358979323846 / 180.0;
  double ca = std::cos(rad), sa = std::sin(rad);
  return {c.x + (p.x - c.x) * ca - (p.y - c.y) * sa,
          c.y + (p.x - c.x) * sa + (p.y - c.y) * ca};
}

inline bool point_in_polygon(double x, double y, const std::vector<Vec2>& poly) {
  bool in = false;
  size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    if ((poly[i].y > y) != (poly[j].y > y)) {
      double xi = poly[j].x + (y - poly[j].y) / (poly[i].y - poly[j].y) * (poly[i].x - poly[j].x);
      if (x < xi) in = !in;
    }
  }
  return in;
}

// bilinear value noise on a coarse lattice; smooth enough that the classical
// edge extractor ignores it after blurring
inline float value_noise(int x, int y, int cell, uint64_t seed) {
  auto node = [&](int gx, int gy) {
    Rng r(seed ^ (0x9e3779b97f4a7c15ull * (static_cast<uint64_t>(gx) * 0x100000001b3ull +
                                           static_cast<uint64_t>(gy) + 0x632be59bd9b4e019ull)));
    return static_cast<float>(r.uniform(-1.0, 1.0));
  };
  int gx = x / cell, gy = y / cell;
  float fx = static_cast<float>(x % cell) / static_cast<float>(cell);
  float fy = static_cast<float>(y % cell) / static_cast<float>(cell);
  float v00 = node(gx, gy), v10 = node(gx + 1, gy);
  float v01 = node(gx, gy + 1), v11 = node(gx + 1, gy + 1);
  return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy;
}

inline void fill_polygon(img::Image& im, const std::vector<Vec2>& poly, const float color[3],
                         CouplerAnnotation* ann = nullptr) {
  const int s = im.dim(1);
  double min_x = 1e30, max_x = -1e30, min_y = 1e30, max_y = -1e30;
  for (const Vec2& v : poly) {
    min_x = std::min(min_x, v.x);
    max_x = std::max(max_x, v.x);
    min_y = std::min(min_y, v.y);
    max_y = std::max(max_y, v.y);
  }
  int x0 = std::max(0, static_cast<int>(std::floor(min_x)) - 1);
  int x1 = std::min(s - 1, static_cast<int>(std::ceil(max_x)) + 1);
  int y0 = std::max(0, static_cast<int>(std::floor(min_y)) - 1);
  int y1 = std::min(s - 1, static_cast<int>(std::ceil(max_y)) + 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (point_in_polygon(x + 0.5, y + 0.5, poly)) {
        for (int c = 0; c < 3; ++c) im.at3(c, y, x) = color[c];
        if (ann) {
          ann->r0 = std::min(ann->r0, y);
          ann->c0 = std::min(ann->c0, x);
          ann->r1 = std::max(ann->r1, y);
          ann->c1 = std::max(ann->c1, x);
          ++ann->pixel_count;
        }
      }
}

}  // namespace detail

// Builds the rotated body/coupler polygons from the scalar fields.
inline void derive_polygons(ToySceneParams& p) {
  Vec2 c{p.body_cx, p.body_cy};
  double hw = p.body_w / 2, hh = p.body_h / 2;
  std::vector<Vec2> body = {{c.x - hw, c.y - hh}, {c.x + hw, c.y - hh},
                            {c.x + hw, c.y + hh}, {c.x - hw, c.y + hh}};
  double fx = c.x + hw;
  std::vector<Vec2> coupler;
  if (p.coupler_type == CouplerType::a_frame) {
    coupler = {{fx, c.y - 0.4 * p.body_h}, {fx, c.y + 0.4 * p.body_h},
               {fx + p.coupler_len, c.y}};
  } else {
    double t = p.coupler_thickness / 2;
    coupler = {{fx, c.y - t}, {fx + p.coupler_len, c.y - t},
               {fx + p.coupler_len, c.y + t}, {fx, c.y + t}};
  }
  p.body_polygon.clear();
  p.coupler_polygon.clear();
  for (Vec2 v : body) p.body_polygon.push_back(detail::rotate_about(v, c, p.orientation_deg));
  for (Vec2 v : coupler)
    p.coupler_polygon.push_back(detail::rotate_about(v, c, p.orientation_deg));
}

// Deterministic rasterization, no anti-aliasing. Draw order: background,
// sun, body, coupler; the coupler is never occluded, so its annotation bbox
// equals the bbox of coupler-colored pixels.
inline RenderedScene render_toy_scene(const ToySceneParams& params) {
  const int s = params.image_size;
  if (s < 8) fail(Err::OutOfBoundsGeometry, "image_size too small");
  for (const auto* poly : {&params.body_polygon, &params.coupler_polygon}) {
    if (poly->empty()) fail(Err::OutOfBoundsGeometry, "polygons not derived");
    for (const Vec2& v : *poly)
      if (v.x < 0.5 || v.y < 0.5 || v.x > s - 1.5 || v.y > s - 1.5)
        fail(Err::OutOfBoundsGeometry, "geometry outside image bounds");
  }
  if ((params.coupler_type == CouplerType::a_frame && params.coupler_polygon.size() != 3) ||
      (params.coupler_type == CouplerType::straight && params.coupler_polygon.size() != 4))
    fail(Err::OutOfBoundsGeometry, "coupler polygon has the wrong vertex count");

  RenderedScene out;
  out.params = params;
  out.image = img::Image(std::vector<int>{3, s, s});

  const float bg = static_cast<float>(params.bg_base);
  if (params.style == Style::flat) {
    out.image.fill(bg);
  } else {
    const int cell = std::max(3, s / 8);
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        float v = std::clamp(bg + 0.07f * detail::value_noise(x, y, cell, params.palette_seed),
                             0.0f, 1.0f);
        for (int c = 0; c < 3; ++c) out.image.at3(c, y, x) = v;
      }
  }

  if (params.sun) {
    const SunDisc& sun = *params.sun;
    const float sun_color[3] = {0.98f, 0.95f, 0.85f};
    int x0 = std::max(0, static_cast<int>(sun.x - sun.r) - 1);
    int x1 = std::min(s - 1, static_cast<int>(sun.x + sun.r) + 1);
    int y0 = std::max(0, static_cast<int>(sun.y - sun.r) - 1);
    int y1 = std::min(s - 1, static_cast<int>(sun.y + sun.r) + 1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        double dx = x + 0.5 - sun.x, dy = y + 0.5 - sun.y;
        if (dx * dx + dy * dy <= sun.r * sun.r)
          for (int c = 0; c < 3; ++c) out.image.at3(c, y, x) = sun_color[c];
      }
  }

  const float body_color[3] = {static_cast<float>(params.body_gray),
                               static_cast<float>(params.body_gray),
                               static_cast<float>(params.body_gray)};
  detail::fill_polygon(out.image, params.body_polygon, body_color);

  const float g = static_cast<float>(params.body_gray * 0.9);
  const float coupler_color[3] = {std::min(1.0f, g + 0.12f), g, std::max(0.0f, g - 0.04f)};
  out.coupler.r0 = s;
  out.coupler.c0 = s;
  for (int c = 0; c < 3; ++c) out.coupler.color[c] = coupler_color[c];
  detail::fill_polygon(out.image, params.coupler_polygon, coupler_color, &out.coupler);
  if (out.coupler.pixel_count == 0)
    fail(Err::OutOfBoundsGeometry, "coupler rasterized to zero pixels");
  return out;
}

struct MismatchConfig {
  bool shape_mismatch = true;  // sim: a_frame only, real: straight only
  bool style_mismatch = true;  // sim: flat only, real: textured only
};

// Samples scene parameters from overlapping distributions; only the coupler
// shape and style are domain-determined. Draws come from a stream forked on
// (seed, index), so generation order does not matter.
inline ToySceneParams make_scene_params(Domain domain, uint64_t seed, uint64_t index,
                                        int image_size, const MismatchConfig& mc = {}) {
  Rng rng = Rng(seed).fork(index);
  const double f = image_size / 64.0;
  ToySceneParams p;
  p.image_size = image_size;
  if (mc.shape_mismatch)
    p.coupler_type = domain == Domain::sim ? CouplerType::a_frame : CouplerType::straight;
  else
    p.coupler_type = rng.bernoulli(0.5) ? CouplerType::a_frame : CouplerType::straight;
  if (mc.style_mismatch)
    p.style = domain == Domain::sim ? Style::flat : Style::textured;
  else
    p.style = rng.bernoulli(0.5) ? Style::flat : Style::textured;
  p.palette_seed = rng.next_u64();
  p.bg_base = p.style == Style::flat ? rng.uniform(0.78, 0.90) : rng.uniform(0.70, 0.84);
  p.body_gray = rng.uniform(0.12, 0.30);

  for (int attempt = 0; attempt < 1000; ++attempt) {
    p.body_w = rng.uniform(22.0, 30.0) * f;
    p.body_h = rng.uniform(12.0, 18.0) * f;
    p.coupler_len = rng.uniform(12.0, 20.0) * f;
    p.coupler_thickness = rng.uniform(3.0, 4.5) * f;
    p.body_cx = rng.uniform(0.30, 0.45) * image_size;
    p.body_cy = rng.uniform(0.40, 0.60) * image_size;
    p.orientation_deg = rng.uniform(-25.0, 25.0);
    derive_polygons(p);
    bool ok = true;
    for (const auto* poly : {&p.body_polygon, &p.coupler_polygon})
      for (const Vec2& v : *poly)
        if (v.x < 1.5 || v.y < 1.5 || v.x > image_size - 2.5 || v.y > image_size - 2.5)
          ok = false;
    if (ok) break;
  }
  if (rng.bernoulli(0.5)) {
    SunDisc sun;
    sun.r = rng.uniform(2.5, 4.5) * f;
    sun.x = rng.uniform(sun.r + 1.0, image_size - sun.r - 1.0);
    sun.y = rng.uniform(sun.r + 1.0, 0.28 * image_size);
    p.sun = sun;
  }
  return p;
}

struct DatasetManifest {
  Domain domain = Domain::sim;
  int count = 0;
  uint64_t seed = 0;
  int image_size = 0;
  nlohmann::json annotations = nlohmann::json::array();

  nlohmann::json to_json() const {
    return nlohmann::json{{"domain", to_string(domain)},
                          {"count", count},
                          {"seed", seed},
                          {"image_size", image_size},
                          {"annotations", annotations}};
  }
};

inline nlohmann::json annotation_json(const RenderedScene& scene, const std::string& file) {
  const ToySceneParams& p = scene.params;
  nlohmann::json poly = nlohmann::json::array();
  for (const Vec2& v : p.coupler_polygon) poly.push_back({v.x, v.y});
  nlohmann::json j{{"image", file},
                   {"coupler_type", to_string(p.coupler_type)},
                   {"style", to_string(p.style)},
                   {"body", {{"cx", p.body_cx}, {"cy", p.body_cy}, {"w", p.body_w}, {"h", p.body_h}}},
                   {"orientation_deg", p.orientation_deg},
                   {"palette_seed", p.palette_seed},
                   {"coupler_polygon", poly},
                   {"coupler_bbox", {scene.coupler.r0, scene.coupler.c0, scene.coupler.r1, scene.coupler.c1}},
                   {"coupler_pixels", scene.coupler.pixel_count},
                   {"coupler_color",
                    {scene.coupler.color[0], scene.coupler.color[1], scene.coupler.color[2]}}};
  if (p.sun)
    j["sun"] = {{"x", p.sun->x}, {"y", p.sun->y}, {"r", p.sun->r}};
  else
    j["sun"] = nullptr;
  return j;
}

struct GeneratedDataset {
  std::vector<RenderedScene> scenes;
  DatasetManifest manifest;
};

inline GeneratedDataset generate_domain(Domain domain, int count, uint64_t seed, int image_size,
                                        const MismatchConfig& mc = {}) {
  if (count < 1) fail(Err::BadConfig, "count must be >= 1");
  GeneratedDataset out;
  out.manifest.domain = domain;
  out.manifest.count = count;
  out.manifest.seed = seed;
  out.manifest.image_size = image_size;
  for (int i = 0; i < count; ++i) {
    ToySceneParams p = make_scene_params(domain, seed, static_cast<uint64_t>(i), image_size, mc);
    RenderedScene scene = render_toy_scene(p);
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%05d.png", to_string(domain), i);
    out.manifest.annotations.push_back(annotation_json(scene, name));
    out.scenes.push_back(std::move(scene));
  }
  return out;
}

inline void write_dataset(const std::string& dir, const GeneratedDataset& ds) {
  std::filesystem::create_directories(dir);
  for (size_t i = 0; i < ds.scenes.size(); ++i) {
    std::string file = ds.manifest.annotations[i]["image"].get<std::string>();
    img::write_png(dir + "/" + file, ds.scenes[i].image);
  }
  std::ofstream mf(dir + "/manifest.json");
  mf << ds.manifest.to_json().dump(2) << "\n";
}

inline uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t manifest_hash(const DatasetManifest& m) { return fnv1a(m.to_json().dump()); }

// ---- folder ingestion ----

struct FolderDataset {
  int image_size = 0;
  uint64_t seed = 0;
  std::vector<std::string> names;
  std::vector<img::Image> resized;  // shorter side == image_size, [0,1], uncropped
  int skipped = 0;

  size_t size() const { return resized.size(); }

  // center crop, [-1,1]
  Tensor<float> at_eval(size_t i) const {
    return img::to_pm1(img::preprocess_geom(resized[i], image_size));
  }

  // seeded random crop, [-1,1]
  Tensor<float> at_train(size_t i, uint64_t step, int domain_tag) const {
    const img::Image& im = resized[i];
    int ymax = im.dim(1) - image_size, xmax = im.dim(2) - image_size;
    Rng rng = Rng(seed).fork(0x9d5c00f5u + step * 2 + static_cast<uint64_t>(domain_tag));
    int y0 = ymax > 0 ? rng.uniform_int(0, ymax) : 0;
    int x0 = xmax > 0 ? rng.uniform_int(0, xmax) : 0;
    return img::to_pm1(img::preprocess_geom(im, image_size, y0, x0));
  }
};

inline FolderDataset load_image_folder(const std::string& path, int image_size, uint64_t seed) {
  namespace fs = std::filesystem;
  FolderDataset ds;
  ds.image_size = image_size;
  ds.seed = seed;
  if (!fs::is_directory(path)) fail(Err::EmptyFolder, "not a directory: " + path);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(path)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(c));
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp")
      files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  for (const std::string& f : files) {
    try {
      img::Image im = img::read_image(f);
      int h = im.dim(1), w = im.dim(2);
      img::Image r = im;
      if (std::min(h, w) != image_size) {
        if (h <= w) {
          int nw = std::max(image_size,
                            static_cast<int>(std::lround(static_cast<double>(w) * image_size / h)));
          r = img::resize(im, image_size, nw);
        } else {
          int nh = std::max(image_size,
                            static_cast<int>(std::lround(static_cast<double>(h) * image_size / w)));
          r = img::resize(im, nh, image_size);
        }
      }
      ds.resized.push_back(std::move(r));
      ds.names.push_back(fs::path(f).filename().string());
    } catch (const Error&) {
      // undecodable files are skipped with a count, not fatal
      ++ds.skipped;
    }
  }
  if (ds.resized.empty())
    fail(Err::EmptyFolder, "no decodable images in " + path +
                               (ds.skipped ? " (" + std::to_string(ds.skipped) + " skipped)" : ""));
  return ds;
}

struct TrainBatch {
  Tensor<float> sim, real;
  size_t sim_index = 0, real_index = 0;
};

namespace detail {

inline size_t epoch_pick(size_t n, uint64_t seed, int domain_tag, uint64_t step) {
  uint64_t epoch = step / n;
  uint64_t pos = step % n;
  std::vector<uint32_t> perm(n);
  for (size_t i = 0; i < n; ++i) perm[i] = static_cast<uint32_t>(i);
  Rng rng = Rng(seed).fork(0xe9c0'7a11ull + epoch * 2 + static_cast<uint64_t>(domain_tag));
  for (size_t i = n - 1; i > 0; --i) {
    size_t j = rng.next_u64() % (i + 1);
    std::swap(perm[i], perm[j]);
  }
  return perm[pos];
}

}  // namespace detail

// One image from each domain; the pairing is a deterministic function of
// (seed, step), with an independent shuffle per domain per epoch.
inline TrainBatch make_batch(const FolderDataset& sim, const FolderDataset& real, uint64_t seed,
                             uint64_t step) {
  if (sim.size() == 0 || real.size() == 0) fail(Err::DatasetUnavailable, "empty dataset stream");
  TrainBatch b;
  b.sim_index = detail::epoch_pick(sim.size(), seed, 0, step);
  b.real_index = detail::epoch_pick(real.size(), seed, 1, step);
  b.sim = sim.at_train(b.sim_index, step, 0);
  b.real = real.at_train(b.real_index, step, 1);
  return b;
}

}  // namespace rfgan::data

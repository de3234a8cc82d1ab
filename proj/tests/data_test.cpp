#include <gtest/gtest.h>
#include "rfgan/scd.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "rfgan/data.hpp"

using namespace rfgan;
using namespace rfgan::data;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("rfgan_data_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

TEST(RenderScene, DeterministicBytes) {
  ToySceneParams p = make_scene_params(Domain::real, 7, 3, 64);
  RenderedScene a = render_toy_scene(p);
  RenderedScene b = render_toy_scene(p);
  ASSERT_EQ(a.image.numel(), b.image.numel());
  for (int64_t i = 0; i < a.image.numel(); ++i) ASSERT_EQ(a.image[i], b.image[i]);

  TempDir tmp("det");
  img::write_png((tmp.path / "a.png").string(), a.image);
  img::write_png((tmp.path / "b.png").string(), b.image);
  EXPECT_EQ(slurp(tmp.path / "a.png"), slurp(tmp.path / "b.png"));
}

TEST(RenderScene, CouplerVertexCounts) {
  ToySceneParams pa = make_scene_params(Domain::sim, 11, 0, 64);
  EXPECT_EQ(pa.coupler_type, CouplerType::a_frame);
  EXPECT_EQ(pa.coupler_polygon.size(), 3u);
  ToySceneParams ps = make_scene_params(Domain::real, 11, 0, 64);
  EXPECT_EQ(ps.coupler_type, CouplerType::straight);
  EXPECT_EQ(ps.coupler_polygon.size(), 4u);
}

TEST(RenderScene, CouplerBboxMatchesColorScan) {
  for (uint64_t idx : {0, 1, 2, 3, 4}) {
    for (Domain d : {Domain::sim, Domain::real}) {
      RenderedScene s = render_toy_scene(make_scene_params(d, 23, idx, 64));
      ASSERT_GT(s.coupler.pixel_count, 0);
      int r0 = 64, c0 = 64, r1 = -1, c1 = -1;
      int64_t count = 0;
      for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
          bool match = true;
          for (int c = 0; c < 3; ++c)
            if (s.image.at3(c, y, x) != s.coupler.color[c]) match = false;
          if (match) {
            r0 = std::min(r0, y);
            c0 = std::min(c0, x);
            r1 = std::max(r1, y);
            c1 = std::max(c1, x);
            ++count;
          }
        }
      EXPECT_EQ(count, s.coupler.pixel_count);
      EXPECT_EQ(r0, s.coupler.r0);
      EXPECT_EQ(c0, s.coupler.c0);
      EXPECT_EQ(r1, s.coupler.r1);
      EXPECT_EQ(c1, s.coupler.c1);
    }
  }
}

TEST(RenderScene, OutOfBoundsRejected) {
  ToySceneParams p = make_scene_params(Domain::sim, 5, 0, 64);
  p.body_cx = 60;  // pushes the coupler outside
  derive_polygons(p);
  try {
    render_toy_scene(p);
    FAIL() << "expected OutOfBoundsGeometry";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Err::OutOfBoundsGeometry);
  }
}

TEST(GenerateDomain, DomainPurity) {
  GeneratedDataset sim = generate_domain(Domain::sim, 10, 7, 32);
  GeneratedDataset real = generate_domain(Domain::real, 10, 7, 32);
  ASSERT_EQ(sim.scenes.size(), 10u);
  for (const auto& s : sim.scenes) {
    EXPECT_EQ(s.params.coupler_type, CouplerType::a_frame);
    EXPECT_EQ(s.params.style, Style::flat);
  }
  for (const auto& s : real.scenes) {
    EXPECT_EQ(s.params.coupler_type, CouplerType::straight);
    EXPECT_EQ(s.params.style, Style::textured);
  }
}

TEST(GenerateDomain, RegenerationHashStable) {
  GeneratedDataset a = generate_domain(Domain::real, 16, 99, 32);
  GeneratedDataset b = generate_domain(Domain::real, 16, 99, 32);
  EXPECT_EQ(manifest_hash(a.manifest), manifest_hash(b.manifest));
  GeneratedDataset c = generate_domain(Domain::real, 16, 100, 32);
  EXPECT_NE(manifest_hash(a.manifest), manifest_hash(c.manifest));
}

TEST(LoadFolder, RoundTripAndErrors) {
  TempDir tmp("load");
  GeneratedDataset ds = generate_domain(Domain::sim, 6, 3, 32);
  write_dataset(tmp.path.string(), ds);
  // one junk file must be skipped with a count
  std::ofstream junk(tmp.path / "broken.png");
  junk << "not a png";
  junk.close();

  FolderDataset fd = load_image_folder(tmp.path.string(), 32, 1);
  EXPECT_EQ(fd.size(), 6u);
  EXPECT_EQ(fd.skipped, 1);
  Tensor<float> x = fd.at_eval(0);
  EXPECT_EQ(x.dim(1), 32);
  for (int64_t i = 0; i < x.numel(); ++i) {
    EXPECT_GE(x[i], -1.0f);
    EXPECT_LE(x[i], 1.0f);
  }

  try {
    load_image_folder((tmp.path / "missing").string(), 32, 1);
    FAIL() << "expected EmptyFolder";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Err::EmptyFolder);
  }
}

TEST(Preprocess, ShorterSideThenCrop) {
  // 1024x512 -> resize to 512x256 -> center crop 256
  img::Image wide(std::vector<int>{3, 512, 1024});
  for (int y = 0; y < 512; ++y)
    for (int x = 0; x < 1024; ++x)
      for (int c = 0; c < 3; ++c) wide.at3(c, y, x) = static_cast<float>(x) / 1024.0f;
  img::Image pre = img::preprocess_geom(wide, 256);
  EXPECT_EQ(pre.dim(1), 256);
  EXPECT_EQ(pre.dim(2), 256);
  // center crop keeps the middle band: mean close to 0.5
  double mean = 0;
  for (int64_t i = 0; i < pre.numel(); ++i) mean += pre[i];
  mean /= static_cast<double>(pre.numel());
  EXPECT_NEAR(mean, 0.5, 0.05);

  // idempotence at target size
  img::Image again = img::preprocess_geom(pre, 256);
  ASSERT_TRUE(again.same_shape(pre));
  for (int64_t i = 0; i < pre.numel(); ++i) ASSERT_EQ(again[i], pre[i]);
}

TEST(MakeBatch, DeterministicAndTwoImages) {
  TempDir tmp("batch");
  write_dataset((tmp.path / "sim").string(), generate_domain(Domain::sim, 5, 1, 32));
  write_dataset((tmp.path / "real").string(), generate_domain(Domain::real, 7, 2, 32));
  FolderDataset sim = load_image_folder((tmp.path / "sim").string(), 32, 10);
  FolderDataset real = load_image_folder((tmp.path / "real").string(), 32, 10);

  TrainBatch a = make_batch(sim, real, 42, 13);
  TrainBatch b = make_batch(sim, real, 42, 13);
  EXPECT_EQ(a.sim_index, b.sim_index);
  EXPECT_EQ(a.real_index, b.real_index);
  for (int64_t i = 0; i < a.sim.numel(); ++i) ASSERT_EQ(a.sim[i], b.sim[i]);
  for (int64_t i = 0; i < a.real.numel(); ++i) ASSERT_EQ(a.real[i], b.real[i]);
  EXPECT_EQ(a.sim.dim(0), 3);
  EXPECT_EQ(a.real.dim(0), 3);
}

TEST(MakeBatch, EveryImageOncePerEpoch) {
  TempDir tmp("epoch");
  write_dataset((tmp.path / "sim").string(), generate_domain(Domain::sim, 6, 1, 32));
  write_dataset((tmp.path / "real").string(), generate_domain(Domain::real, 4, 2, 32));
  FolderDataset sim = load_image_folder((tmp.path / "sim").string(), 32, 10);
  FolderDataset real = load_image_folder((tmp.path / "real").string(), 32, 10);

  for (uint64_t epoch = 0; epoch < 3; ++epoch) {
    std::set<size_t> seen;
    for (uint64_t pos = 0; pos < 6; ++pos)
      seen.insert(make_batch(sim, real, 7, epoch * 6 + pos).sim_index);
    EXPECT_EQ(seen.size(), 6u) << "epoch " << epoch;
  }
  // real domain cycles on its own length
  std::set<size_t> seen_real;
  for (uint64_t pos = 0; pos < 4; ++pos)
    seen_real.insert(make_batch(sim, real, 7, pos).real_index);
  EXPECT_EQ(seen_real.size(), 4u);
}

TEST(Texture, EdgePointsOnlyNearObjectBoundaries) {
  // the textured background must stay below the edge threshold after
  // smoothing; otherwise the metric would count style, not content
  for (uint64_t idx : {0, 1, 2, 5, 9}) {
    RenderedScene s = render_toy_scene(make_scene_params(Domain::real, 31, idx, 64));
    scd::EdgeMap em = scd::extract_edges_classical(s.image, 1.0);
    scd::PointSet pts = scd::edge_points(em, 0.5);
    ASSERT_FALSE(pts.empty());
    // non-background mask: anything that is not the (textured) gray backdrop
    auto is_object = [&](int y, int x) {
      float r = s.image.at3(0, y, x), g = s.image.at3(1, y, x), b = s.image.at3(2, y, x);
      return !(r == g && std::abs(g - b) < 1e-6f && r > 0.4f);
    };
    for (auto& [py, px] : pts.points) {
      bool near_object = false;
      for (int dy = -3; dy <= 3 && !near_object; ++dy)
        for (int dx = -3; dx <= 3 && !near_object; ++dx) {
          int y = py + dy, x = px + dx;
          if (y >= 0 && x >= 0 && y < 64 && x < 64 && is_object(y, x)) near_object = true;
        }
      EXPECT_TRUE(near_object) << "texture fired the edge detector at (" << py << "," << px
                               << ") scene " << idx;
    }
  }
}

}  // namespace

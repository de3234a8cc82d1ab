#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rfgan/errors.hpp"
#include "rfgan/image.hpp"
#include "rfgan/tensor.hpp"

namespace rfgan::scd {

struct EdgeMap {
  int width = 0;
  int height = 0;
  std::vector<float> strength;  // row-major h*w, values in [0,1]

  float at(int r, int c) const { return strength[static_cast<size_t>(r) * width + c]; }
  float& at(int r, int c) { return strength[static_cast<size_t>(r) * width + c]; }
};

struct PointSet {
  std::vector<std::pair<int, int>> points;  // (row, col)
  bool empty() const { return points.empty(); }
  size_t size() const { return points.size(); }
};

struct SCDRecord {
  std::string image_id;
  double scd = 0.0;
  std::string model_name;
  int receptive_field = 0;
};

enum class EdgeBackend { classical, neural };

// Neural extraction is adapter-loaded; the library only fixes the call shape.
using NeuralEdgeFn = std::function<EdgeMap(const img::Image&)>;

struct EdgeConfig {
  EdgeBackend backend = EdgeBackend::classical;
  double sigma = 1.0;       // Gaussian smoothing for the classical backend
  NeuralEdgeFn neural;      // required iff backend == neural
};

namespace detail {

inline std::vector<float> gaussian_kernel(double sigma) {
  int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> k(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<size_t>(i + radius)] = static_cast<float>(v);
    sum += v;
  }
  for (float& v : k) v = static_cast<float>(v / sum);
  return k;
}

// separable blur with replicated borders
inline std::vector<float> blur(const std::vector<float>& in, int h, int w, double sigma) {
  std::vector<float> k = gaussian_kernel(sigma);
  int radius = (static_cast<int>(k.size()) - 1) / 2;
  std::vector<float> tmp(in.size()), out(in.size());
  auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i)
        acc += k[static_cast<size_t>(i + radius)] *
               in[static_cast<size_t>(y) * w + clampi(x + i, 0, w - 1)];
      tmp[static_cast<size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i)
        acc += k[static_cast<size_t>(i + radius)] *
               tmp[static_cast<size_t>(clampi(y + i, 0, h - 1)) * w + x];
      out[static_cast<size_t>(y) * w + x] = acc;
    }
  return out;
}

}  // namespace detail

// Grayscale -> Gaussian smoothing -> central-difference gradient magnitude,
// normalized by the per-image maximum. A featureless image yields an all-zero
// map (rejected later by mhd, not here).
inline EdgeMap extract_edges_classical(const img::Image& image, double sigma) {
  img::check_rgb(image, "extract_edges");
  const int h = image.dim(1), w = image.dim(2);
  std::vector<float> gray(static_cast<size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      gray[static_cast<size_t>(y) * w + x] = 0.299f * image.at3(0, y, x) +
                                             0.587f * image.at3(1, y, x) +
                                             0.114f * image.at3(2, y, x);
  std::vector<float> smooth = detail::blur(gray, h, w, sigma);

  EdgeMap em;
  em.width = w;
  em.height = h;
  em.strength.assign(gray.size(), 0.0f);
  auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
  float maxmag = 0.0f;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float gx = 0.5f * (smooth[static_cast<size_t>(y) * w + clampi(x + 1, 0, w - 1)] -
                         smooth[static_cast<size_t>(y) * w + clampi(x - 1, 0, w - 1)]);
      float gy = 0.5f * (smooth[static_cast<size_t>(clampi(y + 1, 0, h - 1)) * w + x] -
                         smooth[static_cast<size_t>(clampi(y - 1, 0, h - 1)) * w + x]);
      float mag = std::sqrt(gx * gx + gy * gy);
      em.at(y, x) = mag;
      maxmag = std::max(maxmag, mag);
    }
  if (maxmag > 0.0f)
    for (float& v : em.strength) v /= maxmag;
  else
    std::fill(em.strength.begin(), em.strength.end(), 0.0f);
  return em;
}

inline EdgeMap extract_edges(const img::Image& image, const EdgeConfig& cfg) {
  if (cfg.backend == EdgeBackend::classical) return extract_edges_classical(image, cfg.sigma);
  if (!cfg.neural)
    fail(Err::BackendUnavailable, "neural edge backend requested but no adapter configured");
  EdgeMap em = cfg.neural(image);
  if (em.width != image.dim(2) || em.height != image.dim(1))
    fail(Err::BadImageShape, "neural edge adapter returned a map of the wrong size");
  for (float& v : em.strength) v = std::clamp(v, 0.0f, 1.0f);
  return em;
}

inline PointSet edge_points(const EdgeMap& em, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    fail(Err::BadThreshold, "edge threshold must lie in (0,1)");
  PointSet ps;
  for (int r = 0; r < em.height; ++r)
    for (int c = 0; c < em.width; ++c)
      if (em.at(r, c) >= threshold) ps.points.emplace_back(r, c);
  return ps;
}

namespace detail {

// Exact nearest-neighbor over integer coordinates: occupancy grid over the
// target set's bounding box, searched in expanding Chebyshev rings. Ring r
// cannot contain anything closer than r, which gives the stop rule.
class PointGrid {
 public:
  explicit PointGrid(const PointSet& b) {
    min_r_ = min_c_ = INT32_MAX;
    int max_r = INT32_MIN, max_c = INT32_MIN;
    for (auto& [r, c] : b.points) {
      min_r_ = std::min(min_r_, r);
      min_c_ = std::min(min_c_, c);
      max_r = std::max(max_r, r);
      max_c = std::max(max_c, c);
    }
    h_ = max_r - min_r_ + 1;
    w_ = max_c - min_c_ + 1;
    occ_.assign(static_cast<size_t>(h_) * w_, 0);
    for (auto& [r, c] : b.points)
      occ_[static_cast<size_t>(r - min_r_) * w_ + (c - min_c_)] = 1;
  }

  double nearest_dist(int qr, int qc) const {
    int64_t best2 = INT64_MAX;
    // largest useful ring: Chebyshev distance from query to the far corners
    int reach = std::max({std::abs(qr - min_r_), std::abs(qr - (min_r_ + h_ - 1)),
                          std::abs(qc - min_c_), std::abs(qc - (min_c_ + w_ - 1))});
    for (int ring = 0; ring <= reach; ++ring) {
      if (best2 != INT64_MAX &&
          static_cast<int64_t>(ring) * ring > best2)
        break;
      scan_ring(qr, qc, ring, best2);
    }
    return std::sqrt(static_cast<double>(best2));
  }

 private:
  void probe(int r, int c, int qr, int qc, int64_t& best2) const {
    int rr = r - min_r_, cc = c - min_c_;
    if (rr < 0 || cc < 0 || rr >= h_ || cc >= w_) return;
    if (!occ_[static_cast<size_t>(rr) * w_ + cc]) return;
    int64_t dr = r - qr, dc = c - qc;
    best2 = std::min(best2, dr * dr + dc * dc);
  }

  void scan_ring(int qr, int qc, int ring, int64_t& best2) const {
    if (ring == 0) {
      probe(qr, qc, qr, qc, best2);
      return;
    }
    for (int c = qc - ring; c <= qc + ring; ++c) {
      probe(qr - ring, c, qr, qc, best2);
      probe(qr + ring, c, qr, qc, best2);
    }
    for (int r = qr - ring + 1; r <= qr + ring - 1; ++r) {
      probe(r, qc - ring, qr, qc, best2);
      probe(r, qc + ring, qr, qc, best2);
    }
  }

  int min_r_, min_c_, h_, w_;
  std::vector<uint8_t> occ_;
};

}  // namespace detail

// mean over A of the Euclidean distance to the nearest point of B
inline double directed_mhd(const PointSet& a, const PointSet& b) {
  if (a.empty() || b.empty()) fail(Err::EmptyPointSet, "directed_mhd over empty point set");
  detail::PointGrid grid(b);
  double sum = 0.0;
  for (auto& [r, c] : a.points) sum += grid.nearest_dist(r, c);
  return sum / static_cast<double>(a.size());
}

inline double mhd(const PointSet& a, const PointSet& b) {
  return std::max(directed_mhd(a, b), directed_mhd(b, a));
}

struct ScdConfig {
  EdgeConfig edges;
  double threshold = 0.5;
  int eval_size = 256;
};

inline double scd_value(const img::Image& input, const img::Image& translated,
                        const ScdConfig& cfg, const std::string& image_id = "") {
  img::Image a = img::resize(input, cfg.eval_size, cfg.eval_size);
  img::Image b = img::resize(translated, cfg.eval_size, cfg.eval_size);
  PointSet pa = edge_points(extract_edges(a, cfg.edges), cfg.threshold);
  PointSet pb = edge_points(extract_edges(b, cfg.edges), cfg.threshold);
  if (pa.empty() || pb.empty())
    fail(Err::EmptyPointSet,
         "no edge points above threshold" + (image_id.empty() ? "" : " for " + image_id));
  return mhd(pa, pb);
}

struct ScdAggregate {
  std::map<std::string, double> per_model;
  std::map<std::string, int> per_model_count;
  std::map<int, double> per_rf;  // mean of the per-model means sharing an RF
};

inline ScdAggregate scd_aggregate(const std::vector<SCDRecord>& records) {
  if (records.empty()) fail(Err::EmptyRecordList, "scd_aggregate over empty record list");
  ScdAggregate agg;
  std::map<std::string, double> sums;
  std::map<std::string, int> model_rf;
  for (const SCDRecord& r : records) {
    sums[r.model_name] += r.scd;
    agg.per_model_count[r.model_name] += 1;
    auto it = model_rf.find(r.model_name);
    if (it == model_rf.end())
      model_rf[r.model_name] = r.receptive_field;
    else if (it->second != r.receptive_field)
      fail(Err::BadConfig, "model " + r.model_name + " appears with two receptive fields");
  }
  for (auto& [name, s] : sums) agg.per_model[name] = s / agg.per_model_count[name];
  std::map<int, std::pair<double, int>> rf_acc;
  for (auto& [name, mean] : agg.per_model) {
    auto& [s, n] = rf_acc[model_rf[name]];
    s += mean;
    n += 1;
  }
  for (auto& [rf, acc] : rf_acc) agg.per_rf[rf] = acc.first / acc.second;
  return agg;
}

}  // namespace rfgan::scd

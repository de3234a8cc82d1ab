#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <string>

#include "rfgan/errors.hpp"
#include "rfgan/tensor.hpp"

namespace rfgan::img {

// Images move through the library as {3,H,W} float tensors. Storage range
// is [0,1]; network-facing code converts to [-1,1] explicitly.
using Image = Tensor<float>;

inline void check_rgb(const Image& im, const char* where) {
  if (im.rank() != 3 || im.dim(0) != 3 || im.dim(1) < 1 || im.dim(2) < 1)
    fail(Err::BadImageShape, std::string(where) + ": expected {3,H,W} image");
}

inline Image from_mat(const cv::Mat& bgr) {
  Image out(std::vector<int>{3, bgr.rows, bgr.cols});
  for (int y = 0; y < bgr.rows; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      out.at3(0, y, x) = row[x][2] / 255.0f;
      out.at3(1, y, x) = row[x][1] / 255.0f;
      out.at3(2, y, x) = row[x][0] / 255.0f;
    }
  }
  return out;
}

inline cv::Mat to_mat(const Image& im) {
  check_rgb(im, "to_mat");
  cv::Mat bgr(im.dim(1), im.dim(2), CV_8UC3);
  auto q = [](float v) {
    return static_cast<uchar>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
  };
  for (int y = 0; y < bgr.rows; ++y) {
    cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      row[x][2] = q(im.at3(0, y, x));
      row[x][1] = q(im.at3(1, y, x));
      row[x][0] = q(im.at3(2, y, x));
    }
  }
  return bgr;
}

inline void write_png(const std::string& path, const Image& im) {
  if (!cv::imwrite(path, to_mat(im)))
    fail(Err::UndecodableImage, "failed to write " + path);
}

inline Image read_image(const std::string& path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) fail(Err::UndecodableImage, "cannot decode " + path);
  return from_mat(bgr);
}

// Area downscale / bilinear upscale, exact no-op when already at the size.
inline Image resize(const Image& im, int out_h, int out_w) {
  check_rgb(im, "resize");
  if (im.dim(1) == out_h && im.dim(2) == out_w) return im;
  cv::Mat src(im.dim(1), im.dim(2), CV_32FC3);
  for (int y = 0; y < im.dim(1); ++y) {
    cv::Vec3f* row = src.ptr<cv::Vec3f>(y);
    for (int x = 0; x < im.dim(2); ++x)
      row[x] = {im.at3(0, y, x), im.at3(1, y, x), im.at3(2, y, x)};
  }
  cv::Mat dst;
  int interp = (out_h < im.dim(1) || out_w < im.dim(2)) ? cv::INTER_AREA : cv::INTER_LINEAR;
  cv::resize(src, dst, cv::Size(out_w, out_h), 0, 0, interp);
  Image out(std::vector<int>{3, out_h, out_w});
  for (int y = 0; y < out_h; ++y) {
    const cv::Vec3f* row = dst.ptr<cv::Vec3f>(y);
    for (int x = 0; x < out_w; ++x)
      for (int c = 0; c < 3; ++c) out.at3(c, y, x) = row[x][c];
  }
  return out;
}

inline Image crop(const Image& im, int y0, int x0, int size) {
  check_rgb(im, "crop");
  Image out(std::vector<int>{3, size, size});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) out.at3(c, y, x) = im.at3(c, y0 + y, x0 + x);
  return out;
}

// resize shorter side to `size`, then crop the longer side
inline Image preprocess_geom(const Image& im, int size, int crop_y_off = -1,
                             int crop_x_off = -1) {
  check_rgb(im, "preprocess_geom");
  int h = im.dim(1), w = im.dim(2);
  Image r = im;
  if (std::min(h, w) != size) {
    if (h <= w) {
      int nw = static_cast<int>(std::lround(static_cast<double>(w) * size / h));
      r = resize(im, size, std::max(nw, size));
    } else {
      int nh = static_cast<int>(std::lround(static_cast<double>(h) * size / w));
      r = resize(im, std::max(nh, size), size);
    }
  }
  int ymax = r.dim(1) - size, xmax = r.dim(2) - size;
  int y0 = crop_y_off < 0 ? ymax / 2 : std::min(crop_y_off, ymax);
  int x0 = crop_x_off < 0 ? xmax / 2 : std::min(crop_x_off, xmax);
  if (y0 == 0 && x0 == 0 && r.dim(1) == size && r.dim(2) == size) return r;
  return crop(r, y0, x0, size);
}

inline Tensor<float> to_pm1(const Image& im) {
  Tensor<float> out = im;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = out[i] * 2.0f - 1.0f;
  return out;
}

inline Image from_pm1(const Tensor<float>& t) {
  Image out = t;
  for (int64_t i = 0; i < out.numel(); ++i)
    out[i] = std::clamp(t[i] * 0.5f + 0.5f, 0.0f, 1.0f);
  return out;
}

}  // namespace rfgan::img

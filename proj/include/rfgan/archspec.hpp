#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rfgan/errors.hpp"
#include "rfgan/tensor.hpp"

namespace rfgan::archspec {

// Layer vocabulary. Kernel/stride pairs are fixed: A=4/2, B=4/1, C=1/1, D=4/3.
// Kernel-4 layers use padding 1, the kernel-1 layer uses padding 0.
struct ConvLayerSpec {
  char code = 0;
  int kernel = 0;
  int stride = 0;
  int padding = 0;
  int out_channels = 0;  // filled when a ChannelPlan is applied
};

struct DiscriminatorArch {
  std::string name;  // canonical comma form, e.g. "A,A,A,A,C"
  std::vector<ConvLayerSpec> layers;
  int receptive_field = 0;
  int total_stride = 0;
};

struct ChannelPlan {
  int base_channels = 64;
  int growth = 2;  // applied after each stride>1 layer
  int cap = 512;
};

inline ConvLayerSpec layer_from_code(char c) {
  switch (c) {
    case 'A': return {'A', 4, 2, 1, 0};
    case 'B': return {'B', 4, 1, 1, 0};
    case 'C': return {'C', 1, 1, 0, 0};
    case 'D': return {'D', 4, 3, 1, 0};
    default: fail(Err::UnknownLayerCode, std::string("unknown layer code '") + c + "'");
  }
}

// RF cascade: rf = 1 + sum_i (k_i - 1) * prod_{j<i} s_j
inline int receptive_field_of(const std::vector<ConvLayerSpec>& layers) {
  int rf = 1;
  int jump = 1;
  for (const ConvLayerSpec& l : layers) {
    rf += (l.kernel - 1) * jump;
    jump *= l.stride;
  }
  return rf;
}

inline int total_stride_of(const std::vector<ConvLayerSpec>& layers) {
  int s = 1;
  for (const ConvLayerSpec& l : layers) s *= l.stride;
  return s;
}

// Accepts "A,A,C" and "A->A->C" (whitespace ignored). The last layer must
// be C: every model in the studied family ends in a 1x1 head.
inline DiscriminatorArch parse_arch(const std::string& spec) {
  std::vector<char> codes;
  size_t i = 0;
  while (i < spec.size()) {
    char c = spec[i];
    if (c == ' ' || c == '\t' || c == ',' || c == '-' || c == '>') {
      ++i;
      continue;
    }
    codes.push_back(c);
    ++i;
  }
  if (codes.empty()) fail(Err::EmptySpec, "empty architecture spec");

  DiscriminatorArch arch;
  for (char c : codes) arch.layers.push_back(layer_from_code(c));
  if (arch.layers.back().code != 'C')
    fail(Err::MissingFinalC, "architecture must end in a C (1x1) layer: " + spec);

  for (size_t k = 0; k < codes.size(); ++k) {
    if (k) arch.name += ',';
    arch.name += codes[k];
  }
  arch.receptive_field = receptive_field_of(arch.layers);
  arch.total_stride = total_stride_of(arch.layers);
  return arch;
}

inline int receptive_field(const DiscriminatorArch& arch) {
  return receptive_field_of(arch.layers);
}

inline int64_t floor_div(int64_t a, int64_t b) {
  int64_t q = a / b;
  if (a % b != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

// Side length of the patch-prediction map for a square input.
inline int output_grid_size(const DiscriminatorArch& arch, int input_size) {
  if (input_size < 1) fail(Err::NonPositiveIntermediateSize, "input_size must be >= 1");
  int64_t s = input_size;
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const ConvLayerSpec& l = arch.layers[i];
    s = floor_div(s + 2 * l.padding - l.kernel, l.stride) + 1;
    if (s < 1)
      fail(Err::NonPositiveIntermediateSize,
           "layer " + std::to_string(i) + " (" + l.code + ") of " + arch.name +
               " produces non-positive spatial size");
  }
  return static_cast<int>(s);
}

// All archs of 1..max_conv_layers conv layers over {A,B,D} plus the trailing
// C, filtered to rf in [rf_min, rf_max], sorted by (RF, depth, spec string).
inline std::vector<DiscriminatorArch> enumerate_archs(int max_conv_layers, int rf_min,
                                                      int rf_max) {
  if (rf_min > rf_max) fail(Err::BadRfRange, "rf_min > rf_max");
  static const char kVocab[] = {'A', 'B', 'D'};
  std::vector<DiscriminatorArch> out;
  std::string seq;
  std::function<void()> rec = [&]() {
    if (!seq.empty()) {
      std::string spec;
      for (char c : seq) {
        spec += c;
        spec += ',';
      }
      spec += 'C';
      DiscriminatorArch a = parse_arch(spec);
      if (a.receptive_field >= rf_min && a.receptive_field <= rf_max) out.push_back(a);
    }
    if (static_cast<int>(seq.size()) == max_conv_layers) return;
    for (char c : kVocab) {
      seq.push_back(c);
      rec();
      seq.pop_back();
    }
  };
  rec();
  std::sort(out.begin(), out.end(), [](const DiscriminatorArch& x, const DiscriminatorArch& y) {
    if (x.receptive_field != y.receptive_field) return x.receptive_field < y.receptive_field;
    if (x.layers.size() != y.layers.size()) return x.layers.size() < y.layers.size();
    return x.name < y.name;
  });
  return out;
}

// Per-layer output widths under a plan. Width starts at base and grows by
// `growth` after every stride>1 layer; the final C layer maps to 1 channel.
inline std::vector<int> channel_widths(const DiscriminatorArch& arch, const ChannelPlan& plan) {
  std::vector<int> widths;
  int w = plan.base_channels;
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    if (i + 1 == arch.layers.size()) {
      widths.push_back(1);
      break;
    }
    widths.push_back(w);
    if (arch.layers[i].stride > 1) w = std::min(w * plan.growth, plan.cap);
  }
  return widths;
}

inline int64_t parameter_count(const DiscriminatorArch& arch, const ChannelPlan& plan,
                               int in_channels) {
  std::vector<int> widths = channel_widths(arch, plan);
  int64_t total = 0;
  int64_t cin = in_channels;
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    int64_t cout = widths[i];
    int64_t k = arch.layers[i].kernel;
    total += k * k * cin * cout + cout;
    cin = cout;
  }
  return total;
}

// Measures the receptive field of an arbitrary patch-response function by
// finite-difference probing: perturb each input pixel and record which ones
// move a central output unit. Suited to small inputs; gradient-based
// measurement for built discriminators lives in nets.
template <typename T>
int empirical_receptive_field(
    const std::function<Tensor<T>(const Tensor<T>&)>& patch_response, int input_size,
    int channels = 3, T base_value = T(0.25), T delta = T(0.125)) {
  Tensor<T> x(std::vector<int>{channels, input_size, input_size});
  x.fill(base_value);
  Tensor<T> r0 = patch_response(x);
  if (r0.rank() != 3 || r0.dim(0) != 1)
    fail(Err::BadImageShape, "patch response must return a {1,S,S} grid");
  const int gs = r0.dim(1);
  const int uy = gs / 2;
  const int ux = gs / 2;
  const T base_out = r0.at3(0, uy, ux);

  int lo_y = input_size, hi_y = -1, lo_x = input_size, hi_x = -1;
  for (int y = 0; y < input_size; ++y) {
    for (int xx = 0; xx < input_size; ++xx) {
      Tensor<T> xp = x;
      for (int c = 0; c < channels; ++c) xp.at3(c, y, xx) += delta;
      Tensor<T> r = patch_response(xp);
      if (std::abs(static_cast<double>(r.at3(0, uy, ux) - base_out)) > 0.0) {
        lo_y = std::min(lo_y, y);
        hi_y = std::max(hi_y, y);
        lo_x = std::min(lo_x, xx);
        hi_x = std::max(hi_x, xx);
      }
    }
  }
  if (hi_y < 0) fail(Err::DegenerateResponse, "all input sensitivities are zero");
  return std::max(hi_y - lo_y + 1, hi_x - lo_x + 1);
}

}  // namespace rfgan::archspec

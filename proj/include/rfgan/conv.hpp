#pragma once

#include <Eigen/Core>

#include "rfgan/tensor.hpp"

namespace rfgan::conv {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapRM = Eigen::Map<const RowMat<T>>;

inline int conv_out_size(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }
inline int convt_out_size(int in, int k, int s, int p) { return (in - 1) * s - 2 * p + k; }

// Unfold (C,H,W) into a (C*K*K) x (Ho*Wo) matrix, zero-padding out-of-range
// taps. Row index is (c*K+ky)*K+kx, column index oy*Wo+ox.
template <typename T>
void im2col(const T* im, int C, int H, int W, int K, int s, int p, int Ho, int Wo, T* cols) {
  const int P = Ho * Wo;
  for (int c = 0; c < C; ++c) {
    const T* src = im + static_cast<int64_t>(c) * H * W;
    for (int ky = 0; ky < K; ++ky) {
      for (int kx = 0; kx < K; ++kx) {
        T* dst = cols + static_cast<int64_t>((c * K + ky) * K + kx) * P;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * s - p + ky;
          T* drow = dst + static_cast<int64_t>(oy) * Wo;
          if (iy < 0 || iy >= H) {
            for (int ox = 0; ox < Wo; ++ox) drow[ox] = T(0);
            continue;
          }
          const T* srow = src + static_cast<int64_t>(iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * s - p + kx;
            drow[ox] = (ix < 0 || ix >= W) ? T(0) : srow[ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into the (C,H,W) image.
template <typename T>
void col2im_acc(const T* cols, int C, int H, int W, int K, int s, int p, int Ho, int Wo, T* im) {
  const int P = Ho * Wo;
  for (int c = 0; c < C; ++c) {
    T* dst = im + static_cast<int64_t>(c) * H * W;
    for (int ky = 0; ky < K; ++ky) {
      for (int kx = 0; kx < K; ++kx) {
        const T* src = cols + static_cast<int64_t>((c * K + ky) * K + kx) * P;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * s - p + ky;
          if (iy < 0 || iy >= H) continue;
          const T* srow = src + static_cast<int64_t>(oy) * Wo;
          T* drow = dst + static_cast<int64_t>(iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * s - p + kx;
            if (ix >= 0 && ix < W) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

// y{Cout,Ho,Wo} = w{Cout,Cin,K,K} * x{Cin,H,W} + b ; returns the im2col
// buffer so backward can reuse it.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int s,
                         int p, Tensor<T>* cols_out) {
  const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Cout = w.dim(0), K = w.dim(2);
  const int Ho = conv_out_size(H, K, s, p), Wo = conv_out_size(W, K, s, p);
  const int R = Cin * K * K, P = Ho * Wo;

  Tensor<T> cols(std::vector<int>{R, P});
  im2col(x.data(), Cin, H, W, K, s, p, Ho, Wo, cols.data());

  Tensor<T> y(std::vector<int>{Cout, Ho, Wo});
  MapRM<T> Y(y.data(), Cout, P);
  CMapRM<T> Wm(w.data(), Cout, R);
  CMapRM<T> Cm(cols.data(), R, P);
  Y.noalias() = Wm * Cm;
  if (b.numel() == Cout)
    for (int c = 0; c < Cout; ++c) Y.row(c).array() += b[c];
  if (cols_out) *cols_out = std::move(cols);
  return y;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& cols,
                     const Tensor<T>& dy, int s, int p, Tensor<T>* dx, Tensor<T>* dw,
                     Tensor<T>* db) {
  const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Cout = w.dim(0), K = w.dim(2);
  const int Ho = dy.dim(1), Wo = dy.dim(2);
  const int R = Cin * K * K, P = Ho * Wo;
  CMapRM<T> dY(dy.data(), Cout, P);
  if (dw) {
    MapRM<T> dW(dw->data(), Cout, R);
    CMapRM<T> Cm(cols.data(), R, P);
    dW.noalias() += dY * Cm.transpose();
  }
  if (db) {
    for (int c = 0; c < Cout; ++c) (*db)[c] += dY.row(c).sum();
  }
  if (dx) {
    Tensor<T> dcols(std::vector<int>{R, P});
    MapRM<T> dC(dcols.data(), R, P);
    CMapRM<T> Wm(w.data(), Cout, R);
    dC.noalias() = Wm.transpose() * dY;
    col2im_acc(dcols.data(), Cin, H, W, K, s, p, Ho, Wo, dx->data());
  }
}

// Transposed convolution; w is {Cin,Cout,K,K}. Forward is the adjoint of a
// stride-s conv mapping the output back onto x's grid.
template <typename T>
Tensor<T> convt2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int s,
                          int p) {
  const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Cout = w.dim(1), K = w.dim(2);
  const int Ho = convt_out_size(H, K, s, p), Wo = convt_out_size(W, K, s, p);
  const int R = Cout * K * K, P = H * W;

  Tensor<T> cols(std::vector<int>{R, P});
  {
    MapRM<T> Cm(cols.data(), R, P);
    CMapRM<T> Wm(w.data(), Cin, R);
    CMapRM<T> X(x.data(), Cin, P);
    Cm.noalias() = Wm.transpose() * X;
  }
  Tensor<T> y(std::vector<int>{Cout, Ho, Wo});
  col2im_acc(cols.data(), Cout, Ho, Wo, K, s, p, H, W, y.data());
  if (b.numel() == Cout) {
    MapRM<T> Y(y.data(), Cout, Ho * Wo);
    for (int c = 0; c < Cout; ++c) Y.row(c).array() += b[c];
  }
  return y;
}

template <typename T>
void convt2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, int s, int p,
                      Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db) {
  const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Cout = w.dim(1), K = w.dim(2);
  const int Ho = dy.dim(1), Wo = dy.dim(2);
  const int R = Cout * K * K, P = H * W;

  Tensor<T> dcols(std::vector<int>{R, P});
  im2col(dy.data(), Cout, Ho, Wo, K, s, p, H, W, dcols.data());
  CMapRM<T> dC(dcols.data(), R, P);
  if (dx) {
    MapRM<T> dX(dx->data(), Cin, P);
    CMapRM<T> Wm(w.data(), Cin, R);
    dX.noalias() += Wm * dC;
  }
  if (dw) {
    MapRM<T> dW(dw->data(), Cin, R);
    CMapRM<T> X(x.data(), Cin, P);
    dW.noalias() += X * dC.transpose();
  }
  if (db) {
    CMapRM<T> dY(dy.data(), Cout, Ho * Wo);
    for (int c = 0; c < Cout; ++c) (*db)[c] += dY.row(c).sum();
  }
}

}  // namespace rfgan::conv

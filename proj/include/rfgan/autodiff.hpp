#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rfgan/conv.hpp"
#include "rfgan/errors.hpp"
#include "rfgan/tensor.hpp"

namespace rfgan::ad {

// Reverse-mode tape. A fresh graph is built per training step; only
// parameter nodes persist across steps.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  bool is_param = false;
  std::string name;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;

  void ensure_grad() {
    if (grad.numel() != value.numel()) grad = Tensor<T>(value.shape());
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> constant(Tensor<T> v) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(v);
  return n;
}

template <typename T>
Var<T> parameter(Tensor<T> v, std::string name) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(v);
  n->requires_grad = true;
  n->is_param = true;
  n->name = std::move(name);
  n->ensure_grad();
  return n;
}

template <typename T>
Var<T> detach(const Var<T>& a) {
  return constant(a->value);
}

namespace detail {

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backprop) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  for (const Var<T>& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return n;
}

}  // namespace detail

template <typename T>
void backward(const Var<T>& root) {
  // iterative topo sort over parents
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<T>* p = node->parents[idx++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  root->grad.fill(T(0));
  root->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backprop && n->requires_grad) n->backprop(*n);
  }
}

// ---- elementwise ----

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  Tensor<T> v = a->value;
  for (int64_t i = 0; i < v.numel(); ++i) v[i] += b->value[i];
  return detail::make_op<T>(std::move(v), {a, b}, [a, b](Node<T>& n) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) a->grad[i] += n.grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) b->grad[i] += n.grad[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, double s) {
  Tensor<T> v = a->value;
  for (int64_t i = 0; i < v.numel(); ++i) v[i] = static_cast<T>(v[i] * s);
  return detail::make_op<T>(std::move(v), {a}, [a, s](Node<T>& n) {
    a->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) a->grad[i] += static_cast<T>(n.grad[i] * s);
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, double slope) {
  Tensor<T> v = a->value;
  for (int64_t i = 0; i < v.numel(); ++i)
    if (v[i] < T(0)) v[i] = static_cast<T>(v[i] * slope);
  return detail::make_op<T>(std::move(v), {a}, [a, slope](Node<T>& n) {
    a->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i)
      a->grad[i] += a->value[i] > T(0) ? n.grad[i] : static_cast<T>(n.grad[i] * slope);
  });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return leaky_relu(a, 0.0);
}

template <typename T>
Var<T> tanh_act(const Var<T>& a) {
  Tensor<T> v = a->value;
  for (int64_t i = 0; i < v.numel(); ++i) v[i] = std::tanh(v[i]);
  auto out = detail::make_op<T>(std::move(v), {a}, nullptr);
  if (out->requires_grad) {
    Var<T> self = out;
    out->backprop = [a, self = self.get()](Node<T>& n) {
      a->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) {
        T y = self->value[i];
        a->grad[i] += n.grad[i] * (T(1) - y * y);
      }
    };
  }
  return out;
}

// ---- conv ----

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
  auto cols = std::make_shared<Tensor<T>>();
  Tensor<T> y = conv::conv2d_forward(x->value, w->value, b->value, stride, pad,
                                     x->requires_grad || w->requires_grad ? cols.get() : nullptr);
  return detail::make_op<T>(std::move(y), {x, w, b}, [x, w, b, cols, stride, pad](Node<T>& n) {
    Tensor<T>* dx = nullptr;
    Tensor<T>* dw = nullptr;
    Tensor<T>* db = nullptr;
    if (x->requires_grad) {
      x->ensure_grad();
      dx = &x->grad;
    }
    if (w->requires_grad) {
      w->ensure_grad();
      dw = &w->grad;
    }
    if (b->requires_grad) {
      b->ensure_grad();
      db = &b->grad;
    }
    conv::conv2d_backward(x->value, w->value, *cols, n.grad, stride, pad, dx, dw, db);
  });
}

template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
  Tensor<T> y = conv::convt2d_forward(x->value, w->value, b->value, stride, pad);
  return detail::make_op<T>(std::move(y), {x, w, b}, [x, w, b, stride, pad](Node<T>& n) {
    Tensor<T>* dx = nullptr;
    Tensor<T>* dw = nullptr;
    Tensor<T>* db = nullptr;
    if (x->requires_grad) {
      x->ensure_grad();
      dx = &x->grad;
    }
    if (w->requires_grad) {
      w->ensure_grad();
      dw = &w->grad;
    }
    if (b->requires_grad) {
      b->ensure_grad();
      db = &b->grad;
    }
    conv::convt2d_backward(x->value, w->value, n.grad, stride, pad, dx, dw, db);
  });
}

// ---- normalization ----

// Per-channel instance norm with affine parameters gamma/beta of shape {C}.
template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                     double eps = 1e-5) {
  const int C = x->value.dim(0);
  const int HW = x->value.dim(1) * x->value.dim(2);
  Tensor<T> y(x->value.shape());
  auto xhat = std::make_shared<Tensor<T>>(x->value.shape());
  auto invstd = std::make_shared<Tensor<T>>(std::vector<int>{C});
  for (int c = 0; c < C; ++c) {
    const T* xd = x->value.data() + static_cast<int64_t>(c) * HW;
    T* yd = y.data() + static_cast<int64_t>(c) * HW;
    T* xh = xhat->data() + static_cast<int64_t>(c) * HW;
    T mean = T(0);
    for (int i = 0; i < HW; ++i) mean += xd[i];
    mean /= static_cast<T>(HW);
    T var = T(0);
    for (int i = 0; i < HW; ++i) var += (xd[i] - mean) * (xd[i] - mean);
    var /= static_cast<T>(HW);
    T is = T(1) / std::sqrt(var + static_cast<T>(eps));
    (*invstd)[c] = is;
    for (int i = 0; i < HW; ++i) {
      xh[i] = (xd[i] - mean) * is;
      yd[i] = gamma->value[c] * xh[i] + beta->value[c];
    }
  }
  return detail::make_op<T>(
      std::move(y), {x, gamma, beta}, [x, gamma, beta, xhat, invstd, C, HW](Node<T>& n) {
        for (int c = 0; c < C; ++c) {
          const T* g = n.grad.data() + static_cast<int64_t>(c) * HW;
          const T* xh = xhat->data() + static_cast<int64_t>(c) * HW;
          T sum_g = T(0), sum_gx = T(0);
          for (int i = 0; i < HW; ++i) {
            sum_g += g[i];
            sum_gx += g[i] * xh[i];
          }
          if (gamma->requires_grad) {
            gamma->ensure_grad();
            gamma->grad[c] += sum_gx;
          }
          if (beta->requires_grad) {
            beta->ensure_grad();
            beta->grad[c] += sum_g;
          }
          if (x->requires_grad) {
            x->ensure_grad();
            T* dx = x->grad.data() + static_cast<int64_t>(c) * HW;
            const T k = gamma->value[c] * (*invstd)[c];
            const T mg = sum_g / static_cast<T>(HW);
            const T mgx = sum_gx / static_cast<T>(HW);
            for (int i = 0; i < HW; ++i) dx[i] += k * (g[i] - mg - xh[i] * mgx);
          }
        }
      });
}

// ---- reductions / losses (all return {1} scalars) ----

template <typename T>
Var<T> mean_all(const Var<T>& a) {
  const int64_t n = a->value.numel();
  T s = T(0);
  for (int64_t i = 0; i < n; ++i) s += a->value[i];
  return detail::make_op<T>(Tensor<T>::scalar(s / static_cast<T>(n)), {a}, [a, n](Node<T>& nd) {
    a->ensure_grad();
    const T g = nd.grad[0] / static_cast<T>(n);
    for (int64_t i = 0; i < n; ++i) a->grad[i] += g;
  });
}

template <typename T>
Var<T> l1_diff_mean(const Var<T>& a, const Var<T>& b) {
  const int64_t n = a->value.numel();
  T s = T(0);
  for (int64_t i = 0; i < n; ++i) s += std::abs(a->value[i] - b->value[i]);
  return detail::make_op<T>(Tensor<T>::scalar(s / static_cast<T>(n)), {a, b},
                            [a, b, n](Node<T>& nd) {
                              const T g = nd.grad[0] / static_cast<T>(n);
                              for (int64_t i = 0; i < n; ++i) {
                                T d = a->value[i] - b->value[i];
                                T sg = d > T(0) ? g : (d < T(0) ? -g : T(0));
                                if (a->requires_grad) {
                                  a->ensure_grad();
                                  a->grad[i] += sg;
                                }
                                if (b->requires_grad) {
                                  b->ensure_grad();
                                  b->grad[i] -= sg;
                                }
                              }
                            });
}

template <typename T>
Var<T> mse_diff_mean(const Var<T>& a, const Var<T>& b) {
  const int64_t n = a->value.numel();
  T s = T(0);
  for (int64_t i = 0; i < n; ++i) {
    T d = a->value[i] - b->value[i];
    s += d * d;
  }
  return detail::make_op<T>(Tensor<T>::scalar(s / static_cast<T>(n)), {a, b},
                            [a, b, n](Node<T>& nd) {
                              const T g = nd.grad[0] / static_cast<T>(n);
                              for (int64_t i = 0; i < n; ++i) {
                                T d = a->value[i] - b->value[i];
                                if (a->requires_grad) {
                                  a->ensure_grad();
                                  a->grad[i] += T(2) * g * d;
                                }
                                if (b->requires_grad) {
                                  b->ensure_grad();
                                  b->grad[i] -= T(2) * g * d;
                                }
                              }
                            });
}

// 0.5 * mean(a^2); the KL term for a unit-variance latent
template <typename T>
Var<T> half_mean_square(const Var<T>& a) {
  const int64_t n = a->value.numel();
  T s = T(0);
  for (int64_t i = 0; i < n; ++i) s += a->value[i] * a->value[i];
  return detail::make_op<T>(Tensor<T>::scalar(s / static_cast<T>(2 * n)), {a},
                            [a, n](Node<T>& nd) {
                              a->ensure_grad();
                              const T g = nd.grad[0] / static_cast<T>(n);
                              for (int64_t i = 0; i < n; ++i) a->grad[i] += g * a->value[i];
                            });
}

// mean over elements of BCE(sigmoid(x), target), numerically stable
template <typename T>
Var<T> bce_logits_mean(const Var<T>& x, double target) {
  const int64_t n = x->value.numel();
  const T t = static_cast<T>(target);
  T s = T(0);
  for (int64_t i = 0; i < n; ++i) {
    T v = x->value[i];
    s += std::max(v, T(0)) - v * t + std::log1p(std::exp(-std::abs(v)));
  }
  return detail::make_op<T>(Tensor<T>::scalar(s / static_cast<T>(n)), {x},
                            [x, t, n](Node<T>& nd) {
                              x->ensure_grad();
                              const T g = nd.grad[0] / static_cast<T>(n);
                              for (int64_t i = 0; i < n; ++i) {
                                T sig = T(1) / (T(1) + std::exp(-x->value[i]));
                                x->grad[i] += g * (sig - t);
                              }
                            });
}

template <typename T>
Var<T> weighted_sum(const std::vector<Var<T>>& terms, const std::vector<double>& weights) {
  T s = T(0);
  for (size_t i = 0; i < terms.size(); ++i)
    s += static_cast<T>(weights[i]) * terms[i]->value[0];
  std::vector<Var<T>> parents(terms.begin(), terms.end());
  std::vector<double> ws = weights;
  return detail::make_op<T>(Tensor<T>::scalar(s), std::move(parents),
                            [terms, ws](Node<T>& nd) {
                              for (size_t i = 0; i < terms.size(); ++i) {
                                if (!terms[i]->requires_grad) continue;
                                terms[i]->ensure_grad();
                                terms[i]->grad[0] += nd.grad[0] * static_cast<T>(ws[i]);
                              }
                            });
}

// one grid cell as a scalar; used for receptive-field probing
template <typename T>
Var<T> pick(const Var<T>& grid, int c, int y, int x) {
  const int H = grid->value.dim(1), W = grid->value.dim(2);
  Tensor<T> v = Tensor<T>::scalar(grid->value.at3(c, y, x));
  int64_t idx = (static_cast<int64_t>(c) * H + y) * W + x;
  return detail::make_op<T>(std::move(v), {grid}, [grid, idx](Node<T>& nd) {
    grid->ensure_grad();
    grid->grad[idx] += nd.grad[0];
  });
}

}  // namespace rfgan::ad

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "rfgan/autodiff.hpp"
#include "rfgan/optim.hpp"
#include "rfgan/rng.hpp"

using namespace rfgan;
using namespace rfgan::ad;

namespace {

Tensor<double> random_tensor(Rng& rng, std::vector<int> shape, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal() * scale;
  return t;
}

// central finite differences of a scalar-valued graph w.r.t. one leaf
void check_gradient(const std::function<Var<double>(const std::vector<Var<double>>&)>& f,
                    std::vector<Tensor<double>> leaf_values, double eps = 1e-5,
                    double tol = 1e-6) {
  std::vector<Var<double>> leaves;
  for (auto& v : leaf_values) leaves.push_back(parameter(v, "leaf"));
  Var<double> out = f(leaves);
  backward(out);

  for (size_t li = 0; li < leaves.size(); ++li) {
    for (int64_t i = 0; i < leaves[li]->value.numel(); ++i) {
      auto eval = [&](double delta) {
        std::vector<Var<double>> probe;
        for (size_t k = 0; k < leaf_values.size(); ++k) {
          Tensor<double> t = leaf_values[k];
          if (k == li) t[i] += delta;
          probe.push_back(constant(std::move(t)));
        }
        return f(probe)->value[0];
      };
      double fd = (eval(eps) - eval(-eps)) / (2.0 * eps);
      double an = leaves[li]->grad[i];
      double denom = std::max(std::abs(fd), std::abs(an));
      EXPECT_LT(std::abs(fd - an), tol * denom + 1e-9)
          << "leaf " << li << " index " << i << " analytic " << an << " fd " << fd;
    }
  }
}

TEST(Autodiff, AddScaleMean) {
  Rng rng(1);
  check_gradient(
      [](const std::vector<Var<double>>& v) {
        return mean_all(add(scale(v[0], 3.0), v[1]));
      },
      {random_tensor(rng, {2, 3, 3}), random_tensor(rng, {2, 3, 3})});
}

TEST(Autodiff, LeakyReluTanh) {
  Rng rng(2);
  check_gradient(
      [](const std::vector<Var<double>>& v) {
        return mean_all(tanh_act(leaky_relu(v[0], 0.2)));
      },
      {random_tensor(rng, {1, 4, 4})});
}

TEST(Autodiff, L1AndMseAndKl) {
  Rng rng(3);
  check_gradient(
      [](const std::vector<Var<double>>& v) { return l1_diff_mean(v[0], v[1]); },
      {random_tensor(rng, {2, 3, 3}), random_tensor(rng, {2, 3, 3})}, 1e-6, 1e-5);
  check_gradient(
      [](const std::vector<Var<double>>& v) { return mse_diff_mean(v[0], v[1]); },
      {random_tensor(rng, {2, 3, 3}), random_tensor(rng, {2, 3, 3})});
  check_gradient([](const std::vector<Var<double>>& v) { return half_mean_square(v[0]); },
                 {random_tensor(rng, {2, 4, 4})});
}

TEST(Autodiff, BceLogits) {
  Rng rng(4);
  for (double target : {0.0, 1.0}) {
    check_gradient(
        [target](const std::vector<Var<double>>& v) {
          return bce_logits_mean(v[0], target);
        },
        {random_tensor(rng, {1, 3, 3}, 2.0)});
  }
}

TEST(Autodiff, Conv2dGradients) {
  Rng rng(5);
  for (auto [cin, cout, k, s, p, hw] :
       {std::tuple{2, 3, 4, 2, 1, 6}, std::tuple{3, 2, 4, 1, 1, 5},
        std::tuple{2, 1, 1, 1, 0, 4}, std::tuple{1, 2, 4, 3, 1, 7}}) {
    check_gradient(
        [s = s, p = p](const std::vector<Var<double>>& v) {
          return mse_diff_mean(conv2d(v[0], v[1], v[2], s, p),
                               scale(conv2d(v[0], v[1], v[2], s, p), 0.0));
        },
        {random_tensor(rng, {cin, hw, hw}), random_tensor(rng, {cout, cin, k, k}, 0.5),
         random_tensor(rng, {cout}, 0.2)});
  }
}

TEST(Autodiff, ConvTranspose2dGradients) {
  Rng rng(6);
  for (auto [cin, cout, k, s, p, hw] :
       {std::tuple{2, 3, 4, 2, 1, 4}, std::tuple{3, 2, 4, 1, 1, 5}}) {
    check_gradient(
        [s = s, p = p](const std::vector<Var<double>>& v) {
          return half_mean_square(conv_transpose2d(v[0], v[1], v[2], s, p));
        },
        {random_tensor(rng, {cin, hw, hw}), random_tensor(rng, {cin, cout, k, k}, 0.5),
         random_tensor(rng, {cout}, 0.2)});
  }
}

TEST(Autodiff, ConvTransposeIsConvAdjoint) {
  // <conv(x), y> == <x, convT(y)> with shared weights and zero bias
  Rng rng(7);
  const int cin = 2, cout = 3, k = 4, s = 2, p = 1, hw = 6;
  Tensor<double> x = random_tensor(rng, {cin, hw, hw});
  Tensor<double> wt = random_tensor(rng, {cout, cin, k, k});
  Tensor<double> zero_b_out(std::vector<int>{cout});
  Tensor<double> zero_b_in(std::vector<int>{cin});

  Tensor<double> y =
      conv::conv2d_forward(x, wt, zero_b_out, s, p, static_cast<Tensor<double>*>(nullptr));
  Tensor<double> g = random_tensor(rng, y.shape());

  // the adjoint convT consumes cout channels and reads the same weight
  // buffer under the {Cin_t=cout, Cout_t=cin, K, K} layout
  Tensor<double> wadj(std::vector<int>{cout, cin, k, k});
  for (int64_t i = 0; i < wt.numel(); ++i) wadj[i] = wt[i];
  Tensor<double> xt = conv::convt2d_forward(g, wadj, zero_b_in, s, p);
  ASSERT_TRUE(xt.same_shape(x));

  double lhs = 0.0, rhs = 0.0;
  for (int64_t i = 0; i < y.numel(); ++i) lhs += y[i] * g[i];
  for (int64_t i = 0; i < x.numel(); ++i) rhs += x[i] * xt[i];
  EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(lhs)));
}

TEST(Autodiff, InstanceNormGradients) {
  Rng rng(8);
  check_gradient(
      [](const std::vector<Var<double>>& v) {
        return l1_diff_mean(instance_norm(v[0], v[1], v[2]), scale(v[0], 0.0));
      },
      {random_tensor(rng, {3, 4, 4}), random_tensor(rng, {3}, 0.5),
       random_tensor(rng, {3}, 0.5)},
      1e-5, 1e-4);
}

TEST(Autodiff, PickAndWeightedSum) {
  Rng rng(9);
  check_gradient(
      [](const std::vector<Var<double>>& v) {
        auto a = pick(v[0], 0, 1, 1);
        auto b = mean_all(v[0]);
        return weighted_sum<double>({a, b}, {2.5, -1.0});
      },
      {random_tensor(rng, {1, 3, 3})});
}

TEST(Autodiff, DetachBlocksGradient) {
  Rng rng(10);
  Var<double> x = parameter(random_tensor(rng, {1, 3, 3}), "x");
  Var<double> loss = mse_diff_mean(detach(x), scale(x, 0.0));
  backward(loss);
  for (int64_t i = 0; i < x->grad.numel(); ++i) EXPECT_EQ(x->grad[i], 0.0);
}

TEST(Autodiff, SharedNodeAccumulatesBothPaths) {
  // f(x) = mean(x) + 0.5*mean(x) must give 1.5/n per element
  Rng rng(11);
  Var<double> x = parameter(random_tensor(rng, {1, 2, 2}), "x");
  Var<double> m = mean_all(x);
  Var<double> loss = weighted_sum<double>({m, m}, {1.0, 0.5});
  backward(loss);
  for (int64_t i = 0; i < x->grad.numel(); ++i) EXPECT_NEAR(x->grad[i], 1.5 / 4.0, 1e-12);
}

TEST(Adam, ConvergesOnQuadratic) {
  // minimize (x-3)^2
  Var<double> x = parameter(Tensor<double>::scalar(0.0), "x");
  optim::Adam<double> opt({x}, 0.1, 0.5, 0.999);
  for (int step = 0; step < 1000; ++step) {
    opt.zero_grad();
    x->grad[0] = 2.0 * (x->value[0] - 3.0);
    opt.step();
  }
  EXPECT_NEAR(x->value[0], 3.0, 1e-4);
}

}  // namespace

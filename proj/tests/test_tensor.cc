// tests/test_tensor.cc

// Copyright 2026  The KWS Engine Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "kws/tensor.h"
#include "oracles.h"

namespace kws {
namespace {

using testing::naive_conv2d;
using testing::naive_depthwise;
using testing::random_dvec;
using testing::rel_err;

using DTensor = TensorT<double>;
using DTape = TapeT<double>;

TEST_SUITE("tensor") {

TEST_CASE("conv_out_dim follows the floor formula") {
  CHECK(conv_out_dim(5, 3, 1, 1) == 5);
  CHECK(conv_out_dim(5, 3, 2, 1) == 3);
  CHECK(conv_out_dim(100, 3, 2, 1) == 50);
  CHECK(conv_out_dim(7, 1, 1, 0) == 7);
  CHECK(conv_out_dim(4, 3, 2, 1) == 2);
}

TEST_CASE("conv2d on an all-ones 3x3 with same padding") {
  Tensor x = Tensor::full({1, 3, 3}, 1.0f);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0f);
  Tensor y = conv2d<float>(nullptr, x, w, 1, {1, 1});
  REQUIRE(y.shape() == Shape{1, 3, 3});
  const std::vector<float> expect = {4, 6, 4, 6, 9, 6, 4, 6, 4};
  for (int i = 0; i < 9; ++i) CHECK(y.data()[i] == doctest::Approx(expect[i]));
}

TEST_CASE("conv2d strided example with counted input") {
  std::vector<float> xv(25);
  std::iota(xv.begin(), xv.end(), 1.0f);
  Tensor x = Tensor::from_data({1, 5, 5}, xv);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0f);
  Tensor y = conv2d<float>(nullptr, x, w, 2, {1, 1});
  REQUIRE(y.shape() == Shape{1, 3, 3});
  const std::vector<float> expect = {16, 33, 28, 69, 117, 87, 76, 123, 88};
  for (int i = 0; i < 9; ++i) CHECK(y.data()[i] == expect[i]);
}

TEST_CASE("identity kernel reproduces the input") {
  Rng rng(3);
  Tensor x = Tensor::from_data({2, 4, 5}, testing::random_vec(rng, 40, -2, 2));
  std::vector<float> wv(2 * 2 * 9, 0.0f);
  // Kernel c<-c with a single 1 at the center.
  wv[(0 * 2 + 0) * 9 + 4] = 1.0f;
  wv[(1 * 2 + 1) * 9 + 4] = 1.0f;
  Tensor w = Tensor::from_data({2, 2, 3, 3}, wv);
  Tensor y = conv2d<float>(nullptr, x, w, 1, {1, 1});
  REQUIRE(y.shape() == x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d matches the naive loop oracle on random instances") {
  Rng rng(17);
  for (int it = 0; it < 40; ++it) {
    const int cin = rng.uniform_int(1, 4);
    const int cout = rng.uniform_int(1, 5);
    const int h = rng.uniform_int(1, 9);
    const int w = rng.uniform_int(1, 9);
    const bool pointwise = it % 4 == 0;
    const int kh = pointwise ? 1 : rng.uniform_int(1, std::min(3, h));
    const int kw = pointwise ? 1 : rng.uniform_int(1, std::min(3, w));
    const int stride = rng.uniform_int(1, 2);
    const int ph = pointwise ? 0 : rng.uniform_int(0, 1);
    const int pw = pointwise ? 0 : rng.uniform_int(0, 1);
    if (h + 2 * ph < kh || w + 2 * pw < kw) continue;

    const std::vector<double> xd = random_dvec(rng, cin * h * w, -1, 1);
    const std::vector<double> kd =
        random_dvec(rng, static_cast<int64_t>(cout) * cin * kh * kw, -1, 1);
    int oh = 0, ow = 0;
    const std::vector<double> want =
        naive_conv2d(xd, cin, h, w, kd, cout, kh, kw, stride, stride, ph, pw,
                     &oh, &ow);

    std::vector<float> xf(xd.begin(), xd.end());
    std::vector<float> kf(kd.begin(), kd.end());
    Tensor x = Tensor::from_data({cin, h, w}, xf);
    Tensor k = Tensor::from_data({cout, cin, kh, kw}, kf);
    Tensor y = conv2d<float>(nullptr, x, k, stride, {ph, pw});
    REQUIRE(y.shape() == Shape{cout, oh, ow});
    for (int64_t i = 0; i < y.numel(); ++i) {
      CHECK(std::fabs(y.data()[i] - want[static_cast<size_t>(i)]) < 1e-5);
    }
  }
}

TEST_CASE("depthwise_conv2d matches the naive loop oracle") {
  Rng rng(29);
  for (int it = 0; it < 30; ++it) {
    const int c = rng.uniform_int(1, 6);
    const int h = rng.uniform_int(3, 9);
    const int w = rng.uniform_int(3, 9);
    const int stride = rng.uniform_int(1, 2);
    const std::vector<double> xd = random_dvec(rng, c * h * w, -1, 1);
    const std::vector<double> kd = random_dvec(rng, c * 9, -1, 1);
    int oh = 0, ow = 0;
    const std::vector<double> want =
        naive_depthwise(xd, c, h, w, kd, 3, 3, stride, stride, 1, 1, &oh, &ow);

    std::vector<float> xf(xd.begin(), xd.end());
    std::vector<float> kf(kd.begin(), kd.end());
    Tensor x = Tensor::from_data({c, h, w}, xf);
    Tensor k = Tensor::from_data({c, 3, 3}, kf);
    Tensor y = depthwise_conv2d<float>(nullptr, x, k, stride, {1, 1});
    REQUIRE(y.shape() == Shape{c, oh, ow});
    for (int64_t i = 0; i < y.numel(); ++i) {
      CHECK(std::fabs(y.data()[i] - want[static_cast<size_t>(i)]) < 1e-5);
    }
  }
}

TEST_CASE("depthwise channels are isolated") {
  Rng rng(41);
  const int c = 4, h = 6, w = 6;
  std::vector<float> xv = testing::random_vec(rng, c * h * w, -1, 1);
  Tensor k = Tensor::from_data({c, 3, 3}, testing::random_vec(rng, c * 9, -1, 1));
  Tensor y0 = depthwise_conv2d<float>(nullptr, Tensor::from_data({c, h, w}, xv),
                                      k, 1, {1, 1});
  // Perturb only channel 2.
  std::vector<float> xv2 = xv;
  for (int i = 0; i < h * w; ++i) xv2[static_cast<size_t>(2 * h * w + i)] += 0.5f;
  Tensor y1 = depthwise_conv2d<float>(nullptr, Tensor::from_data({c, h, w}, xv2),
                                      k, 1, {1, 1});
  for (int ch = 0; ch < c; ++ch) {
    bool changed = false;
    for (int i = 0; i < h * w; ++i) {
      if (y0.data()[ch * h * w + i] != y1.data()[ch * h * w + i]) changed = true;
    }
    CHECK(changed == (ch == 2));
  }
}

TEST_CASE("batched conv equals per-example conv") {
  Rng rng(31);
  Tensor w = Tensor::from_data({3, 2, 3, 3},
                               testing::random_vec(rng, 54, -1, 1));
  std::vector<float> x0 = testing::random_vec(rng, 2 * 5 * 4, -1, 1);
  std::vector<float> x1 = testing::random_vec(rng, 2 * 5 * 4, -1, 1);
  std::vector<float> both = x0;
  both.insert(both.end(), x1.begin(), x1.end());
  Tensor batch = Tensor::from_data({2, 2, 5, 4}, both);
  Tensor yb = conv2d<float>(nullptr, batch, w, 1, {1, 1});
  Tensor y0 = conv2d<float>(nullptr, Tensor::from_data({2, 5, 4}, x0), w, 1,
                            {1, 1});
  Tensor y1 = conv2d<float>(nullptr, Tensor::from_data({2, 5, 4}, x1), w, 1,
                            {1, 1});
  REQUIRE(yb.shape() == Shape{2, 3, 5, 4});
  for (int64_t i = 0; i < y0.numel(); ++i) {
    CHECK(yb.data()[i] == y0.data()[i]);
    CHECK(yb.data()[y0.numel() + i] == y1.data()[i]);
  }
}

TEST_CASE("relu6 clamps and gates gradients on the open interval") {
  Tensor x = Tensor::from_data({1, 1, 6}, {-1.0f, 0.0f, 3.0f, 6.0f, 7.0f, 5.9f});
  x.set_requires_grad(true);
  Tape tape;
  Tensor y = relu6(&tape, x);
  const std::vector<float> expect = {0, 0, 3, 6, 6, 5.9f};
  for (int i = 0; i < 6; ++i) CHECK(y.data()[i] == expect[i]);
  Tensor loss = sum(&tape, y);
  tape.backward(loss);
  const std::vector<float> g = x.grad_vec();
  CHECK(g[0] == 0.0f);  // below
  CHECK(g[1] == 0.0f);  // at 0: outside the open interval
  CHECK(g[2] == 1.0f);
  CHECK(g[3] == 0.0f);  // at 6: outside the open interval
  CHECK(g[4] == 0.0f);  // above
  CHECK(g[5] == 1.0f);
}

TEST_CASE("global_avg_pool averages and spreads gradient evenly") {
  Tensor x = Tensor::from_data({2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
  x.set_requires_grad(true);
  Tape tape;
  Tensor y = global_avg_pool(&tape, x);
  REQUIRE(y.shape() == Shape{2, 1, 1});
  CHECK(y.data()[0] == doctest::Approx(2.5));
  CHECK(y.data()[1] == doctest::Approx(25.0));
  Tensor loss = sum(&tape, y);
  tape.backward(loss);
  for (int i = 0; i < 8; ++i) CHECK(x.grad_vec()[i] == doctest::Approx(0.25));
}

TEST_CASE("cross entropy of uniform logits is ln K") {
  Tensor logits = Tensor::zeros({2, 5});
  Tensor loss = softmax_cross_entropy<float>(nullptr, logits, {0, 3});
  CHECK(loss.item() == doctest::Approx(std::log(5.0)).epsilon(1e-6));
}

TEST_CASE("cross entropy gradient is (p - onehot) / N") {
  Tensor logits = Tensor::from_data({1, 3}, {1.0f, 2.0f, 0.5f});
  logits.set_requires_grad(true);
  Tape tape;
  Tensor loss = softmax_cross_entropy(&tape, logits, {1});
  tape.backward(loss);
  // Softmax of (1, 2, 0.5).
  double z = std::exp(1.0) + std::exp(2.0) + std::exp(0.5);
  const double p0 = std::exp(1.0) / z, p1 = std::exp(2.0) / z,
               p2 = std::exp(0.5) / z;
  CHECK(logits.grad_vec()[0] == doctest::Approx(p0).epsilon(1e-5));
  CHECK(logits.grad_vec()[1] == doctest::Approx(p1 - 1.0).epsilon(1e-5));
  CHECK(logits.grad_vec()[2] == doctest::Approx(p2).epsilon(1e-5));
}

TEST_CASE("cross entropy survives large logits via max subtraction") {
  Tensor logits = Tensor::from_data({1, 2}, {1000.0f, 998.0f});
  Tensor loss = softmax_cross_entropy<float>(nullptr, logits, {0});
  CHECK(std::isfinite(loss.item()));
  CHECK(loss.item() == doctest::Approx(std::log1p(std::exp(-2.0))).epsilon(1e-5));
}

TEST_CASE("cross entropy rejects out-of-range labels") {
  Tensor logits = Tensor::zeros({1, 3});
  CHECK_THROWS_AS(softmax_cross_entropy<float>(nullptr, logits, {3}),
                  ContractError);
  CHECK_THROWS_AS(softmax_cross_entropy<float>(nullptr, logits, {-1}),
                  ContractError);
}

TEST_CASE("softmax rows are normalized") {
  Tensor logits = Tensor::from_data({2, 3}, {1, 2, 3, -1, 0, 1});
  Tensor p = softmax(logits);
  for (int r = 0; r < 2; ++r) {
    float s = 0;
    for (int c = 0; c < 3; ++c) s += p.data()[r * 3 + c];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(p.data()[2] > p.data()[1]);
}

TEST_CASE("backward requires a scalar loss") {
  Tensor x = Tensor::from_data({2}, {1.0f, 2.0f});
  x.set_requires_grad(true);
  Tape tape;
  Tensor y = scale(&tape, x, 2.0f);
  CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("backward twice doubles leaf gradients exactly") {
  Rng rng(5);
  Tensor x = Tensor::from_data({1, 4, 4}, testing::random_vec(rng, 16, -1, 1));
  Tensor w = Tensor::from_data({2, 1, 3, 3}, testing::random_vec(rng, 18, -1, 1));
  x.set_requires_grad(true);
  w.set_requires_grad(true);
  Tape tape;
  Tensor y = conv2d(&tape, x, w, 1, {1, 1});
  Tensor loss = sum(&tape, relu6(&tape, y));
  tape.backward(loss);
  const std::vector<float> gx = x.grad_vec();
  const std::vector<float> gw = w.grad_vec();
  tape.backward(loss);
  for (size_t i = 0; i < gx.size(); ++i) CHECK(x.grad_vec()[i] == 2.0f * gx[i]);
  for (size_t i = 0; i < gw.size(); ++i) CHECK(w.grad_vec()[i] == 2.0f * gw[i]);
}

TEST_CASE("no tape or no grad-requiring input records nothing") {
  Tensor x = Tensor::from_data({1, 3, 3}, std::vector<float>(9, 1.0f));
  Tensor w = Tensor::full({1, 1, 1, 1}, 2.0f);
  // No tape: plain forward.
  Tensor y1 = conv2d<float>(nullptr, x, w, 1, {0, 0});
  CHECK(y1.data()[0] == 2.0f);
  // Tape but no requires_grad: nothing recorded, backward has no nodes.
  Tape tape;
  Tensor y2 = conv2d(&tape, x, w, 1, {0, 0});
  Tensor s = sum(&tape, y2);
  CHECK(s.item() == doctest::Approx(18.0f));
  CHECK_FALSE(x.grad_allocated());
  CHECK_FALSE(w.grad_allocated());
}

TEST_CASE("only grad-requiring inputs receive gradients") {
  Tensor x = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
  Tensor w = Tensor::full({1, 1, 1, 1}, 3.0f);
  w.set_requires_grad(true);
  Tape tape;
  Tensor y = conv2d(&tape, x, w, 1, {0, 0});
  tape.backward(sum(&tape, y));
  CHECK_FALSE(x.grad_allocated());
  REQUIRE(w.grad_allocated());
  CHECK(w.grad_vec()[0] == doctest::Approx(10.0f));
}

TEST_CASE("add and scale and reshape shape rules") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_data({2, 2}, {5, 6, 7, 8});
  Tensor c = add<float>(nullptr, a, b);
  for (int i = 0; i < 4; ++i) CHECK(c.data()[i] == a.data()[i] + b.data()[i]);
  Tensor bad = Tensor::zeros({3});
  CHECK_THROWS_AS(add<float>(nullptr, a, bad), ShapeError);
  Tensor r = reshape<float>(nullptr, a, {4});
  CHECK(r.shape() == Shape{4});
  CHECK_THROWS_AS(reshape<float>(nullptr, a, {5}), ShapeError);
  Tensor s = scale<float>(nullptr, a, -2.0f);
  CHECK(s.data()[3] == -8.0f);
}

TEST_CASE("finite differences validate every op in double") {
  Rng rng(101);
  for (int seed = 0; seed < 6; ++seed) {
    DTensor x = DTensor::from_data({2, 5, 4}, random_dvec(rng, 40, -1, 1));
    DTensor w = DTensor::from_data({3, 2, 3, 3}, random_dvec(rng, 54, -0.5, 0.5));
    DTensor dw = DTensor::from_data({3, 3, 3}, random_dvec(rng, 27, -0.5, 0.5));
    x.set_requires_grad(true);
    w.set_requires_grad(true);
    dw.set_requires_grad(true);

    auto loss_value = [&]() {
      DTape tape;
      DTensor h1 = conv2d(&tape, x, w, 1, Padding{1, 1});
      DTensor h2 = relu6(&tape, h1);
      DTensor h3 = depthwise_conv2d(&tape, h2, dw, 2, Padding{1, 1});
      DTensor h4 = global_avg_pool(&tape, h3);
      DTensor h5 = reshape(&tape, h4, Shape{1, 3});
      DTensor l1 = softmax_cross_entropy(&tape, h5, std::vector<int>{1});
      DTensor l2 = scale(&tape, sum(&tape, h3), 0.01);
      return add(&tape, l1, l2);
    };

    // Analytic gradients.
    {
      DTape tape;
      DTensor h1 = conv2d(&tape, x, w, 1, Padding{1, 1});
      DTensor h2 = relu6(&tape, h1);
      DTensor h3 = depthwise_conv2d(&tape, h2, dw, 2, Padding{1, 1});
      DTensor h4 = global_avg_pool(&tape, h3);
      DTensor h5 = reshape(&tape, h4, Shape{1, 3});
      DTensor l1 = softmax_cross_entropy(&tape, h5, std::vector<int>{1});
      DTensor l2 = scale(&tape, sum(&tape, h3), 0.01);
      x.zero_grad();
      w.zero_grad();
      dw.zero_grad();
      tape.backward(add(&tape, l1, l2));
    }

    auto check_some = [&](DTensor& t, int count) {
      for (int i = 0; i < count; ++i) {
        const int64_t idx = rng.uniform_int(0, static_cast<int>(t.numel()) - 1);
        double& coord = t.vec()[static_cast<size_t>(idx)];
        const double fd = testing::fd_derivative(
            [&]() { return loss_value().item(); }, coord, 1e-6);
        const double an = t.grad_vec()[static_cast<size_t>(idx)];
        if (std::fabs(fd) < 1e-12 && std::fabs(an) < 1e-12) continue;
        CHECK(rel_err(fd, an) < 1e-4);
      }
    };
    check_some(x, 6);
    check_some(w, 6);
    check_some(dw, 4);
  }
}

TEST_CASE("gemm matches the naive triple loop for every transpose pair") {
  Rng rng(7);
  for (int ta = 0; ta < 2; ++ta) {
    for (int tb = 0; tb < 2; ++tb) {
      const int m = 4, n = 5, k = 3;
      const std::vector<double> a = random_dvec(rng, m * k, -1, 1);
      const std::vector<double> b = random_dvec(rng, k * n, -1, 1);
      std::vector<double> c0 = random_dvec(rng, m * n, -1, 1);

      // op(A) row-major views: plain A is m x k; transposed storage is k x m.
      const int lda = ta ? m : k;
      const int ldb = tb ? k : n;
      std::vector<double> want = c0;
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int p = 0; p < k; ++p) {
            const double av = ta ? a[static_cast<size_t>(p) * lda + i]
                                 : a[static_cast<size_t>(i) * lda + p];
            const double bv = tb ? b[static_cast<size_t>(j) * ldb + p]
                                 : b[static_cast<size_t>(p) * ldb + j];
            acc += av * bv;
          }
          want[static_cast<size_t>(i) * n + j] =
              0.5 * acc + 2.0 * want[static_cast<size_t>(i) * n + j];
        }
      }
      std::vector<double> got = c0;
      gemm<double>(ta != 0, tb != 0, m, n, k, 0.5, a.data(), lda, b.data(),
                   ldb, 2.0, got.data(), n);
      for (int i = 0; i < m * n; ++i) {
        CHECK(rel_err(got[static_cast<size_t>(i)],
                      want[static_cast<size_t>(i)]) < 1e-12);
      }
    }
  }
}

TEST_CASE("scalar loss seeds with gradient one") {
  Tensor x = Tensor::from_data({3}, {1.0f, 2.0f, 3.0f});
  x.set_requires_grad(true);
  Tape tape;
  Tensor loss = sum(&tape, x);
  tape.backward(loss);
  for (int i = 0; i < 3; ++i) CHECK(x.grad_vec()[i] == 1.0f);
}

}  // TEST_SUITE

}  // namespace
}  // namespace kws

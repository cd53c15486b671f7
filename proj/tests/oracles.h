// tests/oracles.h

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

// Independent reference implementations the tests trust: convolution as bare
// loops, metrics as quadratic recounts, Adam as a scalar recurrence. They are
// deliberately naive so a bug in the optimized paths cannot hide in a shared
// helper.

#ifndef KWS_TESTS_ORACLES_H_
#define KWS_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "kws/common.h"

namespace kws {
namespace testing {

// Plain quadruple-loop 2-D convolution, zero padding, no bias. Input
// [cin, h, w], kernel [cout, cin, kh, kw], accumulation in double.
inline std::vector<double> naive_conv2d(const std::vector<double>& x, int cin,
                                        int h, int w,
                                        const std::vector<double>& k, int cout,
                                        int kh, int kw, int sh, int sw, int ph,
                                        int pw, int* oh_out, int* ow_out) {
  const int oh = (h + 2 * ph - kh) / sh + 1;
  const int ow = (w + 2 * pw - kw) / sw + 1;
  *oh_out = oh;
  *ow_out = ow;
  std::vector<double> y(static_cast<size_t>(cout) * oh * ow, 0.0);
  for (int oc = 0; oc < cout; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (int ic = 0; ic < cin; ++ic) {
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              const int iy = oy * sh + ky - ph;
              const int ix = ox * sw + kx - pw;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += x[(static_cast<size_t>(ic) * h + iy) * w + ix] *
                     k[((static_cast<size_t>(oc) * cin + ic) * kh + ky) * kw +
                       kx];
            }
          }
        }
        y[(static_cast<size_t>(oc) * oh + oy) * ow + ox] = acc;
      }
    }
  }
  return y;
}

// Depthwise variant: kernel [c, kh, kw], one filter per channel.
inline std::vector<double> naive_depthwise(const std::vector<double>& x, int c,
                                           int h, int w,
                                           const std::vector<double>& k, int kh,
                                           int kw, int sh, int sw, int ph,
                                           int pw, int* oh_out, int* ow_out) {
  const int oh = (h + 2 * ph - kh) / sh + 1;
  const int ow = (w + 2 * pw - kw) / sw + 1;
  *oh_out = oh;
  *ow_out = ow;
  std::vector<double> y(static_cast<size_t>(c) * oh * ow, 0.0);
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (int ky = 0; ky < kh; ++ky) {
          for (int kx = 0; kx < kw; ++kx) {
            const int iy = oy * sh + ky - ph;
            const int ix = ox * sw + kx - pw;
            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
            acc += x[(static_cast<size_t>(ch) * h + iy) * w + ix] *
                   k[(static_cast<size_t>(ch) * kh + ky) * kw + kx];
          }
        }
        y[(static_cast<size_t>(ch) * oh + oy) * ow + ox] = acc;
      }
    }
  }
  return y;
}

inline double rel_err(double a, double b) {
  const double scale = std::max({1e-30, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) / scale;
}

// Central finite difference d(loss)/d(coordinate) for a loss functional that
// reads the coordinate through the given mutable reference.
template <typename LossFn>
double fd_derivative(LossFn&& loss, double& coord, double eps) {
  const double saved = coord;
  coord = saved + eps;
  const double hi = loss();
  coord = saved - eps;
  const double lo = loss();
  coord = saved;
  return (hi - lo) / (2.0 * eps);
}

// Scalar Adam in double: the update a whole-tensor implementation must match
// coordinate by coordinate.
struct ScalarAdamRef {
  double m = 0.0, v = 0.0;
  int64_t t = 0;
  double step(double p, double g, double lr, double beta1 = 0.9,
              double beta2 = 0.999, double eps = 1e-8) {
    t += 1;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    const double mhat = m / (1.0 - std::pow(beta1, static_cast<double>(t)));
    const double vhat = v / (1.0 - std::pow(beta2, static_cast<double>(t)));
    return p - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

// Quadratic AUC recount: P(pos > neg) + 0.5 P(pos == neg).
inline double auc_brute(const std::vector<float>& pos,
                        const std::vector<float>& neg) {
  double acc = 0.0;
  for (float p : pos) {
    for (float n : neg) {
      if (p > n) {
        acc += 1.0;
      } else if (p == n) {
        acc += 0.5;
      }
    }
  }
  return acc / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// Direct recount of the error rates at one threshold.
inline void brute_rates(const std::vector<float>& pos,
                        const std::vector<float>& neg, float threshold,
                        double* far, double* frr) {
  int64_t fa = 0, fr = 0;
  for (float n : neg) {
    if (n >= threshold) ++fa;
  }
  for (float p : pos) {
    if (p < threshold) ++fr;
  }
  *far = static_cast<double>(fa) / static_cast<double>(neg.size());
  *frr = static_cast<double>(fr) / static_cast<double>(pos.size());
}

inline std::vector<float> random_vec(Rng& rng, int64_t n, double lo,
                                     double hi) {
  std::vector<float> v(static_cast<size_t>(n));
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

inline std::vector<double> random_dvec(Rng& rng, int64_t n, double lo,
                                       double hi) {
  std::vector<double> v(static_cast<size_t>(n));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace testing
}  // namespace kws

#endif  // KWS_TESTS_ORACLES_H_

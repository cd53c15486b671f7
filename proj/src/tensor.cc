// kws/tensor.cc

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

#include "kws/tensor.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kws {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) {
    KWS_CHECK(d >= 0, "negative dimension in shape " << shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream oss;
  oss << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) oss << "x";
    oss << shape[i];
  }
  oss << "]";
  return oss.str();
}

int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// --- TensorT ----------------------------------------------------------------

template <typename Real>
TensorT<Real> TensorT<Real>::zeros(Shape shape) {
  TensorT t;
  t.impl_ = std::make_shared<TensorImpl<Real>>();
  t.impl_->shape = std::move(shape);
  t.impl_->data.assign(static_cast<size_t>(shape_numel(t.impl_->shape)), Real(0));
  return t;
}

template <typename Real>
TensorT<Real> TensorT<Real>::full(Shape shape, Real value) {
  TensorT t = zeros(std::move(shape));
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

template <typename Real>
TensorT<Real> TensorT<Real>::from_data(Shape shape, std::vector<Real> data) {
  KWS_CHECK_SHAPE(shape_numel(shape) == static_cast<int64_t>(data.size()),
                  "data length " << data.size() << " does not match shape "
                                 << shape_str(shape));
  TensorT t;
  t.impl_ = std::make_shared<TensorImpl<Real>>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::move(data);
  return t;
}

template <typename Real>
TensorT<Real> TensorT<Real>::scalar(Real value) {
  return from_data({1}, {value});
}

template <typename Real>
Real TensorT<Real>::item() const {
  KWS_CHECK(defined() && numel() == 1,
            "item() requires a one-element tensor, got "
                << (defined() ? shape_str(shape()) : "undefined"));
  return impl_->data[0];
}

template <typename Real>
Real* TensorT<Real>::grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), Real(0));
  return impl_->grad.data();
}

template <typename Real>
void TensorT<Real>::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), Real(0));
}

template <typename Real>
TensorT<Real> TensorT<Real>::clone() const {
  TensorT t;
  t.impl_ = std::make_shared<TensorImpl<Real>>();
  t.impl_->shape = impl_->shape;
  t.impl_->data = impl_->data;
  return t;
}

// --- TapeT ------------------------------------------------------------------

template <typename Real>
void TapeT<Real>::record(TensorT<Real> output, std::function<void()> backward_fn) {
  nodes_.push_back(Node{output.impl(), std::move(backward_fn)});
}

template <typename Real>
void TapeT<Real>::backward(const TensorT<Real>& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ContractError("backward requires a scalar loss");
  // Intermediates start from zero each pass; leaves keep accumulating.
  for (auto& node : nodes_) {
    auto& g = node.output->grad;
    if (g.empty())
      g.assign(node.output->data.size(), Real(0));
    else
      std::fill(g.begin(), g.end(), Real(0));
  }
  auto li = loss.impl();
  if (li->grad.empty()) li->grad.assign(1, Real(0));
  li->grad[0] += Real(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward_fn();
}

template <typename Real>
void TapeT<Real>::clear() {
  nodes_.clear();
}

// --- GEMM -------------------------------------------------------------------

template <typename Real>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, Real alpha,
          const Real* a, int lda, const Real* b, int ldb, Real beta, Real* c,
          int ldc) {
  using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Stride = Eigen::OuterStride<>;
  using ConstMap = Eigen::Map<const Mat, Eigen::Unaligned, Stride>;
  using Map = Eigen::Map<Mat, Eigen::Unaligned, Stride>;

  Map C(c, m, n, Stride(ldc));
  ConstMap A(a, trans_a ? k : m, trans_a ? m : k, Stride(lda));
  ConstMap B(b, trans_b ? n : k, trans_b ? k : n, Stride(ldb));

  auto apply = [&](const auto& prod) {
    if (beta == Real(0))
      C.noalias() = alpha * prod;
    else if (beta == Real(1))
      C.noalias() += alpha * prod;
    else
      C = beta * C + alpha * prod;
  };
  if (!trans_a && !trans_b)
    apply(A * B);
  else if (trans_a && !trans_b)
    apply(A.transpose() * B);
  else if (!trans_a && trans_b)
    apply(A * B.transpose());
  else
    apply(A.transpose() * B.transpose());
}

// --- conv2d -----------------------------------------------------------------

namespace {

struct SpatialDims {
  bool batched;
  int n, c, h, w;
};

template <typename Real>
SpatialDims spatial_dims(const TensorT<Real>& x, const char* op) {
  KWS_CHECK(x.defined(), op << ": undefined input");
  KWS_CHECK_SHAPE(x.ndim() == 3 || x.ndim() == 4,
                  op << " input must be CxHxW or NxCxHxW, got "
                     << shape_str(x.shape()));
  if (x.ndim() == 4) return {true, x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
  return {false, 1, x.dim(0), x.dim(1), x.dim(2)};
}

template <typename Real>
bool want_grad(TapeT<Real>* tape, std::initializer_list<const TensorT<Real>*> ins) {
  if (tape == nullptr) return false;
  for (const auto* t : ins)
    if (t->requires_grad()) return true;
  return false;
}

template <typename Real>
void im2col(const Real* x, int cin, int h, int w, int kh, int kw, int stride,
            int ph, int pw, int ho, int wo, Real* col) {
  const int64_t plane = static_cast<int64_t>(ho) * wo;
  for (int c = 0; c < cin; ++c) {
    const Real* xc = x + static_cast<int64_t>(c) * h * w;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        Real* row = col + (static_cast<int64_t>(c * kh + ki) * kw + kj) * plane;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * stride - ph + ki;
          Real* dst = row + static_cast<int64_t>(oh) * wo;
          if (ih < 0 || ih >= h) {
            std::fill(dst, dst + wo, Real(0));
            continue;
          }
          const Real* xr = xc + static_cast<int64_t>(ih) * w;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * stride - pw + kj;
            dst[ow] = (iw >= 0 && iw < w) ? xr[iw] : Real(0);
          }
        }
      }
    }
  }
}

template <typename Real>
void col2im_add(const Real* col, int cin, int h, int w, int kh, int kw,
                int stride, int ph, int pw, int ho, int wo, Real* x) {
  const int64_t plane = static_cast<int64_t>(ho) * wo;
  for (int c = 0; c < cin; ++c) {
    Real* xc = x + static_cast<int64_t>(c) * h * w;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const Real* row = col + (static_cast<int64_t>(c * kh + ki) * kw + kj) * plane;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * stride - ph + ki;
          if (ih < 0 || ih >= h) continue;
          Real* xr = xc + static_cast<int64_t>(ih) * w;
          const Real* src = row + static_cast<int64_t>(oh) * wo;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * stride - pw + kj;
            if (iw >= 0 && iw < w) xr[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename Real>
TensorT<Real> conv2d(TapeT<Real>* tape, const TensorT<Real>& x,
                     const TensorT<Real>& weight, int stride, Padding pad) {
  const SpatialDims in = spatial_dims(x, "conv2d");
  KWS_CHECK(weight.defined(), "conv2d: undefined weight");
  KWS_CHECK_SHAPE(weight.ndim() == 4,
                  "conv2d weight must be C_out x C_in x kh x kw, got "
                      << shape_str(weight.shape()));
  const int cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  KWS_CHECK_SHAPE(weight.dim(1) == in.c,
                  "conv2d: input has " << in.c << " channels but weight expects "
                                       << weight.dim(1));
  KWS_CHECK(stride >= 1, "conv2d: stride must be >= 1, got " << stride);
  KWS_CHECK(pad.h >= 0 && pad.w >= 0, "conv2d: negative padding");
  KWS_CHECK_SHAPE(in.h + 2 * pad.h >= kh && in.w + 2 * pad.w >= kw,
                  "conv2d: " << kh << "x" << kw
                             << " kernel does not fit padded input "
                             << shape_str(x.shape()));

  const int ho = conv_out_dim(in.h, kh, stride, pad.h);
  const int wo = conv_out_dim(in.w, kw, stride, pad.w);
  Shape out_shape = in.batched ? Shape{in.n, cout, ho, wo} : Shape{cout, ho, wo};
  TensorT<Real> out = TensorT<Real>::zeros(std::move(out_shape));

  const int64_t x_step = static_cast<int64_t>(in.c) * in.h * in.w;
  const int64_t o_step = static_cast<int64_t>(cout) * ho * wo;
  const int cols = ho * wo;
  const int kdim = in.c * kh * kw;
  const bool pointwise =
      kh == 1 && kw == 1 && stride == 1 && pad.h == 0 && pad.w == 0;

  std::vector<Real> colbuf;
  if (!pointwise) colbuf.resize(static_cast<size_t>(kdim) * cols);
  for (int i = 0; i < in.n; ++i) {
    const Real* xi = x.data() + i * x_step;
    const Real* colp = xi;
    if (!pointwise) {
      im2col(xi, in.c, in.h, in.w, kh, kw, stride, pad.h, pad.w, ho, wo,
             colbuf.data());
      colp = colbuf.data();
    }
    gemm<Real>(false, false, cout, cols, kdim, Real(1), weight.data(), kdim,
               colp, cols, Real(0), out.data() + i * o_step, cols);
  }

  if (want_grad(tape, {&x, &weight})) {
    out.set_requires_grad(true);
    TensorT<Real> xh = x, wh = weight, oh = out;
    const SpatialDims dims = in;
    tape->record(out, [=]() mutable {
      const Real* gout = oh.grad_vec().data();
      const bool need_dx = xh.requires_grad();
      const bool need_dw = wh.requires_grad();
      // This pass's contribution builds up in fresh buffers and lands in the
      // leaf gradients with exactly one add per element, so replaying the
      // tape twice doubles leaf gradients exactly.
      std::vector<Real> dx_acc, dw_acc;
      if (need_dx) dx_acc.assign(xh.vec().size(), Real(0));
      if (need_dw) dw_acc.assign(wh.vec().size(), Real(0));
      std::vector<Real> col, dcol;
      if (!pointwise) {
        col.resize(static_cast<size_t>(kdim) * cols);
        if (need_dx) dcol.resize(static_cast<size_t>(kdim) * cols);
      }
      for (int i = 0; i < dims.n; ++i) {
        const Real* gi = gout + i * o_step;
        const Real* xi = xh.data() + i * x_step;
        if (pointwise) {
          if (need_dw)
            gemm<Real>(false, true, cout, kdim, cols, Real(1), gi, cols, xi,
                       cols, Real(1), dw_acc.data(), kdim);
          if (need_dx)
            gemm<Real>(true, false, kdim, cols, cout, Real(1), wh.data(), kdim,
                       gi, cols, Real(1), dx_acc.data() + i * x_step, cols);
          continue;
        }
        im2col(xi, dims.c, dims.h, dims.w, kh, kw, stride, pad.h, pad.w, ho,
               wo, col.data());
        if (need_dw)
          gemm<Real>(false, true, cout, kdim, cols, Real(1), gi, cols,
                     col.data(), cols, Real(1), dw_acc.data(), kdim);
        if (need_dx) {
          gemm<Real>(true, false, kdim, cols, cout, Real(1), wh.data(), kdim,
                     gi, cols, Real(0), dcol.data(), cols);
          col2im_add(dcol.data(), dims.c, dims.h, dims.w, kh, kw, stride,
                     pad.h, pad.w, ho, wo, dx_acc.data() + i * x_step);
        }
      }
      if (need_dx) {
        Real* dx = xh.grad();
        for (size_t j = 0; j < dx_acc.size(); ++j) dx[j] += dx_acc[j];
      }
      if (need_dw) {
        Real* dw = wh.grad();
        for (size_t j = 0; j < dw_acc.size(); ++j) dw[j] += dw_acc[j];
      }
    });
  }
  return out;
}

// --- depthwise_conv2d -------------------------------------------------------

template <typename Real>
TensorT<Real> depthwise_conv2d(TapeT<Real>* tape, const TensorT<Real>& x,
                               const TensorT<Real>& weight, int stride,
                               Padding pad) {
  const SpatialDims in = spatial_dims(x, "depthwise_conv2d");
  KWS_CHECK(weight.defined(), "depthwise_conv2d: undefined weight");
  KWS_CHECK_SHAPE(weight.ndim() == 3,
                  "depthwise_conv2d weight must be C x kh x kw, got "
                      << shape_str(weight.shape()));
  const int kh = weight.dim(1), kw = weight.dim(2);
  KWS_CHECK_SHAPE(weight.dim(0) == in.c,
                  "depthwise_conv2d: input has "
                      << in.c << " channels but weight has " << weight.dim(0));
  KWS_CHECK(stride >= 1, "depthwise_conv2d: stride must be >= 1");
  KWS_CHECK_SHAPE(in.h + 2 * pad.h >= kh && in.w + 2 * pad.w >= kw,
                  "depthwise_conv2d: kernel does not fit padded input");

  const int ho = conv_out_dim(in.h, kh, stride, pad.h);
  const int wo = conv_out_dim(in.w, kw, stride, pad.w);
  Shape out_shape = in.batched ? Shape{in.n, in.c, ho, wo} : Shape{in.c, ho, wo};
  TensorT<Real> out = TensorT<Real>::zeros(std::move(out_shape));

  const int64_t x_step = static_cast<int64_t>(in.c) * in.h * in.w;
  const int64_t o_step = static_cast<int64_t>(in.c) * ho * wo;
  for (int i = 0; i < in.n; ++i) {
    for (int c = 0; c < in.c; ++c) {
      const Real* xc = x.data() + i * x_step + static_cast<int64_t>(c) * in.h * in.w;
      const Real* kc = weight.data() + static_cast<int64_t>(c) * kh * kw;
      Real* oc = out.data() + i * o_step + static_cast<int64_t>(c) * ho * wo;
      for (int oh2 = 0; oh2 < ho; ++oh2) {
        for (int ow = 0; ow < wo; ++ow) {
          Real acc = 0;
          for (int ki = 0; ki < kh; ++ki) {
            const int ih = oh2 * stride - pad.h + ki;
            if (ih < 0 || ih >= in.h) continue;
            for (int kj = 0; kj < kw; ++kj) {
              const int iw = ow * stride - pad.w + kj;
              if (iw < 0 || iw >= in.w) continue;
              acc += xc[static_cast<int64_t>(ih) * in.w + iw] * kc[ki * kw + kj];
            }
          }
          oc[static_cast<int64_t>(oh2) * wo + ow] = acc;
        }
      }
    }
  }

  if (want_grad(tape, {&x, &weight})) {
    out.set_requires_grad(true);
    TensorT<Real> xh = x, wh = weight, ohandle = out;
    const SpatialDims dims = in;
    tape->record(out, [=]() mutable {
      const Real* gout = ohandle.grad_vec().data();
      const bool need_dx = xh.requires_grad();
      const bool need_dw = wh.requires_grad();
      // Staged like conv2d: one add per leaf element per pass keeps repeated
      // replays exactly additive.
      std::vector<Real> dx_acc, dw_acc;
      if (need_dx) dx_acc.assign(xh.vec().size(), Real(0));
      if (need_dw) dw_acc.assign(wh.vec().size(), Real(0));
      for (int i = 0; i < dims.n; ++i) {
        for (int c = 0; c < dims.c; ++c) {
          const Real* xc =
              xh.data() + i * x_step + static_cast<int64_t>(c) * dims.h * dims.w;
          const Real* kc = wh.data() + static_cast<int64_t>(c) * kh * kw;
          const Real* gc = gout + i * o_step + static_cast<int64_t>(c) * ho * wo;
          Real* dxc = need_dx ? dx_acc.data() + i * x_step +
                                    static_cast<int64_t>(c) * dims.h * dims.w
                              : nullptr;
          Real* dwc = need_dw ? dw_acc.data() + static_cast<int64_t>(c) * kh * kw
                              : nullptr;
          for (int oh2 = 0; oh2 < ho; ++oh2) {
            for (int ow = 0; ow < wo; ++ow) {
              const Real g = gc[static_cast<int64_t>(oh2) * wo + ow];
              if (g == Real(0)) continue;
              for (int ki = 0; ki < kh; ++ki) {
                const int ih = oh2 * stride - pad.h + ki;
                if (ih < 0 || ih >= dims.h) continue;
                for (int kj = 0; kj < kw; ++kj) {
                  const int iw = ow * stride - pad.w + kj;
                  if (iw < 0 || iw >= dims.w) continue;
                  const int64_t xi = static_cast<int64_t>(ih) * dims.w + iw;
                  if (need_dw) dwc[ki * kw + kj] += g * xc[xi];
                  if (need_dx) dxc[xi] += g * kc[ki * kw + kj];
                }
              }
            }
          }
        }
      }
      if (need_dx) {
        Real* dx = xh.grad();
        for (size_t j = 0; j < dx_acc.size(); ++j) dx[j] += dx_acc[j];
      }
      if (need_dw) {
        Real* dw = wh.grad();
        for (size_t j = 0; j < dw_acc.size(); ++j) dw[j] += dw_acc[j];
      }
    });
  }
  return out;
}

// --- elementwise / reduction ops --------------------------------------------

template <typename Real>
TensorT<Real> relu6(TapeT<Real>* tape, const TensorT<Real>& x) {
  KWS_CHECK(x.defined(), "relu6: undefined input");
  TensorT<Real> out = TensorT<Real>::zeros(x.shape());
  const Real* xp = x.data();
  Real* op = out.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i)
    op[i] = std::min(std::max(xp[i], Real(0)), Real(6));
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    TensorT<Real> xh = x, oh = out;
    tape->record(out, [=]() mutable {
      const Real* g = oh.grad_vec().data();
      const Real* xv = xh.data();
      Real* dx = xh.grad();
      for (int64_t i = 0; i < n; ++i)
        if (xv[i] > Real(0) && xv[i] < Real(6)) dx[i] += g[i];
    });
  }
  return out;
}

template <typename Real>
TensorT<Real> global_avg_pool(TapeT<Real>* tape, const TensorT<Real>& x) {
  const SpatialDims in = spatial_dims(x, "global_avg_pool");
  KWS_CHECK(in.h >= 1 && in.w >= 1, "global_avg_pool: empty spatial extent");
  Shape out_shape = in.batched ? Shape{in.n, in.c, 1, 1} : Shape{in.c, 1, 1};
  TensorT<Real> out = TensorT<Real>::zeros(std::move(out_shape));
  const int64_t plane = static_cast<int64_t>(in.h) * in.w;
  const Real inv = Real(1) / static_cast<Real>(plane);
  for (int i = 0; i < in.n; ++i) {
    for (int c = 0; c < in.c; ++c) {
      const Real* xc = x.data() + (static_cast<int64_t>(i) * in.c + c) * plane;
      Real acc = 0;
      for (int64_t j = 0; j < plane; ++j) acc += xc[j];
      out.data()[static_cast<int64_t>(i) * in.c + c] = acc * inv;
    }
  }
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    TensorT<Real> xh = x, oh = out;
    const SpatialDims dims = in;
    tape->record(out, [=]() mutable {
      const Real* g = oh.grad_vec().data();
      Real* dx = xh.grad();
      for (int i = 0; i < dims.n; ++i) {
        for (int c = 0; c < dims.c; ++c) {
          const Real gc = g[static_cast<int64_t>(i) * dims.c + c] * inv;
          Real* dxc = dx + (static_cast<int64_t>(i) * dims.c + c) * plane;
          for (int64_t j = 0; j < plane; ++j) dxc[j] += gc;
        }
      }
    });
  }
  return out;
}

template <typename Real>
TensorT<Real> softmax_cross_entropy(TapeT<Real>* tape,
                                    const TensorT<Real>& logits,
                                    const std::vector<int>& labels) {
  KWS_CHECK(logits.defined(), "softmax_cross_entropy: undefined logits");
  KWS_CHECK_SHAPE(logits.ndim() == 2, "softmax_cross_entropy expects N x K logits, got "
                                          << shape_str(logits.shape()));
  const int n = logits.dim(0), k = logits.dim(1);
  KWS_CHECK_SHAPE(static_cast<int>(labels.size()) == n,
                  "softmax_cross_entropy: " << labels.size() << " labels for "
                                            << n << " rows");
  for (int i = 0; i < n; ++i)
    KWS_CHECK(labels[i] >= 0 && labels[i] < k,
              "label index " << labels[i] << " out of range [0," << k << ")");

  auto probs = std::make_shared<std::vector<Real>>(static_cast<size_t>(n) * k);
  Real loss = 0;
  for (int i = 0; i < n; ++i) {
    const Real* row = logits.data() + static_cast<int64_t>(i) * k;
    Real* prow = probs->data() + static_cast<int64_t>(i) * k;
    Real m = row[0];
    for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
    Real z = 0;
    for (int j = 0; j < k; ++j) {
      prow[j] = std::exp(row[j] - m);
      z += prow[j];
    }
    const Real inv_z = Real(1) / z;
    for (int j = 0; j < k; ++j) prow[j] *= inv_z;
    loss -= (row[labels[i]] - m) - std::log(z);
  }
  loss /= static_cast<Real>(n);
  TensorT<Real> out = TensorT<Real>::scalar(loss);

  if (want_grad(tape, {&logits})) {
    out.set_requires_grad(true);
    TensorT<Real> lh = logits, oh = out;
    std::vector<int> lab = labels;
    tape->record(out, [=]() mutable {
      const Real gs = oh.grad_vec()[0] / static_cast<Real>(n);
      Real* dl = lh.grad();
      const Real* p = probs->data();
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j)
          dl[static_cast<int64_t>(i) * k + j] +=
              gs * (p[static_cast<int64_t>(i) * k + j] -
                    (j == lab[i] ? Real(1) : Real(0)));
      }
    });
  }
  return out;
}

template <typename Real>
TensorT<Real> softmax(const TensorT<Real>& logits) {
  KWS_CHECK(logits.defined() && logits.ndim() == 2,
            "softmax expects N x K logits");
  const int n = logits.dim(0), k = logits.dim(1);
  TensorT<Real> out = TensorT<Real>::zeros(logits.shape());
  for (int i = 0; i < n; ++i) {
    const Real* row = logits.data() + static_cast<int64_t>(i) * k;
    Real* orow = out.data() + static_cast<int64_t>(i) * k;
    Real m = row[0];
    for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
    Real z = 0;
    for (int j = 0; j < k; ++j) {
      orow[j] = std::exp(row[j] - m);
      z += orow[j];
    }
    const Real inv_z = Real(1) / z;
    for (int j = 0; j < k; ++j) orow[j] *= inv_z;
  }
  return out;
}

template <typename Real>
TensorT<Real> add(TapeT<Real>* tape, const TensorT<Real>& a,
                  const TensorT<Real>& b) {
  KWS_CHECK(a.defined() && b.defined(), "add: undefined input");
  KWS_CHECK_SHAPE(a.shape() == b.shape(), "add: shape " << shape_str(a.shape())
                                                        << " vs "
                                                        << shape_str(b.shape()));
  TensorT<Real> out = TensorT<Real>::zeros(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    TensorT<Real> ah = a, bh = b, oh = out;
    tape->record(out, [=]() mutable {
      const Real* g = oh.grad_vec().data();
      if (ah.requires_grad()) {
        Real* da = ah.grad();
        for (int64_t i = 0; i < n; ++i) da[i] += g[i];
      }
      if (bh.requires_grad()) {
        Real* db = bh.grad();
        for (int64_t i = 0; i < n; ++i) db[i] += g[i];
      }
    });
  }
  return out;
}

template <typename Real>
TensorT<Real> scale(TapeT<Real>* tape, const TensorT<Real>& x, Real factor) {
  KWS_CHECK(x.defined(), "scale: undefined input");
  TensorT<Real> out = TensorT<Real>::zeros(x.shape());
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * factor;
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    TensorT<Real> xh = x, oh = out;
    tape->record(out, [=]() mutable {
      const Real* g = oh.grad_vec().data();
      Real* dx = xh.grad();
      for (int64_t i = 0; i < n; ++i) dx[i] += factor * g[i];
    });
  }
  return out;
}

template <typename Real>
TensorT<Real> sum(TapeT<Real>* tape, const TensorT<Real>& x) {
  KWS_CHECK(x.defined(), "sum: undefined input");
  Real acc = 0;
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) acc += x.data()[i];
  TensorT<Real> out = TensorT<Real>::scalar(acc);
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    TensorT<Real> xh = x, oh = out;
    tape->record(out, [=]() mutable {
      const Real g = oh.grad_vec()[0];
      Real* dx = xh.grad();
      for (int64_t i = 0; i < n; ++i) dx[i] += g;
    });
  }
  return out;
}

template <typename Real>
TensorT<Real> reshape(TapeT<Real>* tape, const TensorT<Real>& x, Shape shape) {
  KWS_CHECK(x.defined(), "reshape: undefined input");
  KWS_CHECK_SHAPE(shape_numel(shape) == x.numel(),
                  "reshape: cannot view " << shape_str(x.shape()) << " as "
                                          << shape_str(shape));
  TensorT<Real> out = TensorT<Real>::from_data(std::move(shape), x.vec());
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    TensorT<Real> xh = x, oh = out;
    const int64_t n = x.numel();
    tape->record(out, [=]() mutable {
      const Real* g = oh.grad_vec().data();
      Real* dx = xh.grad();
      for (int64_t i = 0; i < n; ++i) dx[i] += g[i];
    });
  }
  return out;
}

// --- explicit instantiations ------------------------------------------------

template class TensorT<float>;
template class TensorT<double>;
template class TapeT<float>;
template class TapeT<double>;

#define KWS_INSTANTIATE_OPS(Real)                                              \
  template TensorT<Real> conv2d(TapeT<Real>*, const TensorT<Real>&,            \
                                const TensorT<Real>&, int, Padding);           \
  template TensorT<Real> depthwise_conv2d(TapeT<Real>*, const TensorT<Real>&,  \
                                          const TensorT<Real>&, int, Padding); \
  template TensorT<Real> relu6(TapeT<Real>*, const TensorT<Real>&);            \
  template TensorT<Real> global_avg_pool(TapeT<Real>*, const TensorT<Real>&);  \
  template TensorT<Real> softmax_cross_entropy(                                \
      TapeT<Real>*, const TensorT<Real>&, const std::vector<int>&);            \
  template TensorT<Real> softmax(const TensorT<Real>&);                        \
  template TensorT<Real> add(TapeT<Real>*, const TensorT<Real>&,               \
                             const TensorT<Real>&);                            \
  template TensorT<Real> scale(TapeT<Real>*, const TensorT<Real>&, Real);      \
  template TensorT<Real> sum(TapeT<Real>*, const TensorT<Real>&);              \
  template TensorT<Real> reshape(TapeT<Real>*, const TensorT<Real>&, Shape);   \
  template void gemm(bool, bool, int, int, int, Real, const Real*, int,        \
                     const Real*, int, Real, Real*, int);

KWS_INSTANTIATE_OPS(float)
KWS_INSTANTIATE_OPS(double)

#undef KWS_INSTANTIATE_OPS

}  // namespace kws

// kws/tensor.h

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

#ifndef KWS_TENSOR_H_
#define KWS_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "kws/common.h"

namespace kws {

// Dense row-major tensor with an optional gradient buffer, plus a tape for
// reverse-mode differentiation. Activations are N x C x H x W, convolution
// weights C_out x C_in x kh x kw, logits N x K. float is the training dtype;
// double exists for finite-difference checks.

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename Real>
struct TensorImpl {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // empty until first touched
  bool requires_grad = false;
};

template <typename Real>
class TensorT {
 public:
  TensorT() = default;

  static TensorT zeros(Shape shape);
  static TensorT full(Shape shape, Real value);
  static TensorT from_data(Shape shape, std::vector<Real> data);
  static TensorT scalar(Real value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }

  Real* data() { return impl_->data.data(); }
  const Real* data() const { return impl_->data.data(); }
  std::vector<Real>& vec() { return impl_->data; }
  const std::vector<Real>& vec() const { return impl_->data; }

  // Value of a one-element tensor.
  Real item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  TensorT& set_requires_grad(bool rg) {
    impl_->requires_grad = rg;
    return *this;
  }

  bool grad_allocated() const { return !impl_->grad.empty(); }
  // Gradient buffer, allocated (zero-filled) on first use. Accumulation into
  // this buffer is always additive; see zero_grad().
  Real* grad();
  const std::vector<Real>& grad_vec() const { return impl_->grad; }
  void zero_grad();

  // Deep copy of the values. The copy is a fresh leaf with no grad buffer.
  TensorT clone() const;

  // Handles compare/hash by identity, so a tensor can key a map of optimizer
  // state or visited-set.
  bool same_storage(const TensorT& other) const { return impl_ == other.impl_; }
  const std::shared_ptr<TensorImpl<Real>>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl<Real>> impl_;
};

using Tensor = TensorT<float>;

// Records one closure per differentiable op. backward() replays them in
// reverse recording order; replaying twice accumulates leaf gradients twice.
template <typename Real>
class TapeT {
 public:
  // `output` is the tensor the op produced; `backward_fn` reads its grad and
  // accumulates into the grads of the op inputs it captured.
  void record(TensorT<Real> output, std::function<void()> backward_fn);

  // Seeds d(loss)/d(loss) = 1 and replays the tape. Gradients of tensors
  // produced on this tape are reset first; leaf gradients accumulate across
  // calls.
  void backward(const TensorT<Real>& loss);

  // Frees every recorded closure and the intermediates they keep alive.
  void clear();

  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    std::shared_ptr<TensorImpl<Real>> output;
    std::function<void()> backward_fn;
  };
  std::vector<Node> nodes_;
};

using Tape = TapeT<float>;

struct Padding {
  int h = 0;
  int w = 0;
};

// --- Differentiable ops -----------------------------------------------------
//
// Every op accepts a nullable tape: with a tape and at least one
// grad-requiring input the op is recorded, otherwise it is a plain forward.
// Spatial inputs may be C x H x W (single example) or N x C x H x W; the
// output keeps the input's rank. Convolutions carry no bias.

// weight: C_out x C_in x kh x kw, symmetric zero padding.
template <typename Real>
TensorT<Real> conv2d(TapeT<Real>* tape, const TensorT<Real>& x,
                     const TensorT<Real>& weight, int stride, Padding pad);

// weight: C x kh x kw; output channel c depends only on input channel c.
template <typename Real>
TensorT<Real> depthwise_conv2d(TapeT<Real>* tape, const TensorT<Real>& x,
                               const TensorT<Real>& weight, int stride,
                               Padding pad);

// min(max(x, 0), 6); gradient 1 on (0, 6), 0 outside.
template <typename Real>
TensorT<Real> relu6(TapeT<Real>* tape, const TensorT<Real>& x);

// C x H x W -> C x 1 x 1 (or N-batched); gradient spreads 1/(H*W).
template <typename Real>
TensorT<Real> global_avg_pool(TapeT<Real>* tape, const TensorT<Real>& x);

// logits: N x K, labels: N class indices in [0, K). Mean negative
// log-likelihood with max-subtraction.
template <typename Real>
TensorT<Real> softmax_cross_entropy(TapeT<Real>* tape,
                                    const TensorT<Real>& logits,
                                    const std::vector<int>& labels);

// Row-wise softmax of N x K logits; forward only (inference scoring).
template <typename Real>
TensorT<Real> softmax(const TensorT<Real>& logits);

template <typename Real>
TensorT<Real> add(TapeT<Real>* tape, const TensorT<Real>& a,
                  const TensorT<Real>& b);

template <typename Real>
TensorT<Real> scale(TapeT<Real>* tape, const TensorT<Real>& x, Real factor);

template <typename Real>
TensorT<Real> sum(TapeT<Real>* tape, const TensorT<Real>& x);

// Copy-reshape to a shape with the same element count.
template <typename Real>
TensorT<Real> reshape(TapeT<Real>* tape, const TensorT<Real>& x, Shape shape);

// Output spatial size for one dimension: floor((in + 2*pad - k) / stride) + 1.
int conv_out_dim(int in, int k, int stride, int pad);

// Raw GEMM on row-major buffers: C = alpha * op(A) * op(B) + beta * C.
// Exposed for reuse by the normalization/attention kernels.
template <typename Real>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, Real alpha,
          const Real* a, int lda, const Real* b, int ldb, Real beta, Real* c,
          int ldc);

}  // namespace kws

#endif  // KWS_TENSOR_H_

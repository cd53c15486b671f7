// kws/model.h

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

#ifndef KWS_MODEL_H_
#define KWS_MODEL_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kws/common.h"
#include "kws/disnorm.h"
#include "kws/tensor.h"

namespace kws {

// One inverted bottleneck: pointwise expand (factor t) -> depthwise 3x3
// (stride s) -> pointwise project to n channels. Residual shortcut is active
// exactly when the block keeps resolution and width.
struct BlockSpec {
  int t = 6;   // expansion factor
  int n = 45;  // output channels
  int s = 1;   // stride, 1 or 2
  int m = 45;  // input channels (inferred when building the default stack)

  bool residual() const { return s == 1 && m == n; }
};

struct ModelConfig {
  std::vector<BlockSpec> blocks;
  int num_classes = 2;
  bool with_simam = false;
  float simam_lambda = 1e-4f;
  int num_branches = 1;
  int stem_channels = 45;
  int feature_channels = 1280;
};

// The published stack: stem conv 3x3 (1->45, stride 2), seven t=6 n=45
// bottlenecks with strides 1,2,2,2,1,2,1, a 1x1 conv to 1280 features,
// global average pooling, and a 1x1 classifier.
ModelConfig mn45_config(int num_classes, bool with_simam = false,
                        int num_branches = 1);

// Named intermediate activations captured during a forward pass.
template <typename Real>
struct ActivationTraceT {
  std::vector<std::pair<std::string, TensorT<Real>>> taps;
};
using ActivationTrace = ActivationTraceT<float>;

// Parameter-free attention: each neuron is scaled by sigmoid(1/e*) where the
// energy e* = 4*(var+lambda) / ((x-mean)^2 + 2*var + 2*lambda) uses the mean
// and population variance of its channel (all H*W positions, the neuron
// included). Shape-preserving; zero inputs stay zero.
template <typename Real>
TensorT<Real> simam(TapeT<Real>* tape, const TensorT<Real>& x, Real lambda);

template <typename Real>
class ModelT {
 public:
  ModelT(const ModelConfig& cfg, uint64_t init_seed);

  // x: 1xHxW or Nx1xHxW log-Mel features; returns N x num_classes logits.
  // `branch` routes every normalization layer; see BnMode for semantics.
  TensorT<Real> forward(TapeT<Real>* tape, const TensorT<Real>& x, int branch,
                        BnMode mode, ActivationTraceT<Real>* trace = nullptr);

  const ModelConfig& config() const { return cfg_; }
  int num_branches() const { return cfg_.num_branches; }

  // All trainable tensors: convolution weights plus every branch's
  // gamma/beta. Stable order.
  std::vector<TensorT<Real>> parameters();
  std::vector<TensorT<Real>> conv_weights();

  // Gamma/beta of one normalization branch across every layer, stable order.
  std::vector<TensorT<Real>> branch_affine_params(int branch);

  // Every persistent tensor (parameters and running statistics) under the
  // stable layer{i}.{role} naming scheme used by checkpoints.
  std::vector<std::pair<std::string, TensorT<Real>>> named_tensors();

  // Per normalization layer (name layer{i}.bn*.branch{k}) update counters.
  std::vector<std::pair<std::string, int64_t>> bn_update_counts() const;
  void set_bn_update_count(const std::string& name, int64_t count);

  // Convolution weight counts grouped as stem / one entry per bottleneck /
  // feature conv / classifier head.
  std::vector<int64_t> conv_param_counts() const;
  int64_t num_conv_params() const;

  void set_requires_grad_params(bool requires_grad);

  // Direct access for tests and checkpoint code.
  BranchSetT<Real>& stem_bn() { return stem_bn_; }
  BranchSetT<Real>& block_bn(int block, int which);  // which in {1,2,3}
  BranchSetT<Real>& feature_bn() { return feat_bn_; }

 private:
  struct Bottleneck {
    TensorT<Real> expand, dw, project;
    BranchSetT<Real> bn1, bn2, bn3;
    BlockSpec spec;
  };

  ModelConfig cfg_;
  TensorT<Real> stem_;
  BranchSetT<Real> stem_bn_;
  std::vector<Bottleneck> blocks_;
  TensorT<Real> feat_conv_;
  BranchSetT<Real> feat_bn_;
  TensorT<Real> head_;
};

using Model = ModelT<float>;

// Scoped guard that releases every parameter from the gradient tape (used
// while generating adversaries) and restores the previous flags on exit.
template <typename Real>
class ParamFreezeGuardT {
 public:
  explicit ParamFreezeGuardT(ModelT<Real>& model) : params_(model.parameters()) {
    for (auto& p : params_) {
      saved_.push_back(p.requires_grad());
      p.set_requires_grad(false);
    }
  }
  ~ParamFreezeGuardT() {
    for (size_t i = 0; i < params_.size(); ++i)
      params_[i].set_requires_grad(saved_[i]);
  }
  ParamFreezeGuardT(const ParamFreezeGuardT&) = delete;
  ParamFreezeGuardT& operator=(const ParamFreezeGuardT&) = delete;

 private:
  std::vector<TensorT<Real>> params_;
  std::vector<bool> saved_;
};
using ParamFreezeGuard = ParamFreezeGuardT<float>;

// Checkpoint container: magic "KWSC", version, config snapshot, named float32
// tensor table, per-branch update counters. A save/load roundtrip restores
// every tensor bit-exactly.
std::vector<uint8_t> encode_checkpoint(ModelT<float>& model);
ModelT<float> decode_checkpoint(const std::vector<uint8_t>& bytes);
void save_checkpoint(ModelT<float>& model, const std::string& path);
ModelT<float> load_checkpoint(const std::string& path);

}  // namespace kws

#endif  // KWS_MODEL_H_

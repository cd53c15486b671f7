// kws/disnorm.h

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

#ifndef KWS_DISNORM_H_
#define KWS_DISNORM_H_

#include <cstdint>
#include <string>
#include <vector>

#include "kws/common.h"
#include "kws/tensor.h"

namespace kws {

// Training strategies. kNone is the augmentation-only baseline (no adversary);
// the others add adversarial batches with increasingly fine-grained
// normalization branches.
enum class Strategy { kNone, kAT, kDAT, kFG_DAT, kDA_DAT };

const char* strategy_name(Strategy s);
Strategy parse_strategy(const std::string& name);  // ConfigError on unknown

// Provenance of a feature window. `id` is a dense index: for original data it
// is the datasource index (0 = clean), for adversarial data the branch index
// assigned by the plan that created it.
struct DatasourceTag {
  enum class Kind { kClean, kAugmented, kAdversarial };
  int id = 0;
  Kind kind = Kind::kClean;
  int source_index = 0;  // augmented: datasource index of the variant
  int parent_id = 0;     // adversarial: id of the datasource attacked
  int level_index = 0;   // adversarial: perturbation-level index
};

// Maps (strategy, datasource, level) to normalization-branch indices.
// Branch 0 is always the main branch and the only one eval reads.
struct BranchPlan {
  Strategy strategy = Strategy::kNone;
  int num_datasources = 1;
  int num_levels = 1;
  std::vector<DatasourceTag> branches;  // roster; branches[i].id == i

  int num_branches() const { return static_cast<int>(branches.size()); }

  // Branch that normalizes non-adversarial data of the given datasource.
  int original_branch(int datasource) const;
  // Branch that normalizes adversaries attacked from the given datasource at
  // the given perturbation level.
  int adversary_branch(int datasource, int level) const;
};

// Branch counts: kNone/kAT 1; kDAT 2; kFG_DAT 1 + num_levels;
// kDA_DAT 2 * num_datasources. Nonpositive counts are a contract error.
BranchPlan make_branch_plan(Strategy strategy, int num_datasources,
                            int num_levels);

enum class BnMode {
  kTrain,   // batch statistics; updates the branch's running statistics
  kAttack,  // batch statistics; running statistics untouched
  kEval,    // branch 0 running statistics and affine, tag ignored
};

// Per-channel batch normalization with K parallel {gamma, beta, running_mean,
// running_var} branches. A training forward with branch k touches only branch
// k's statistics; eval always reads branch 0. gamma/beta are tape
// participants, running statistics never are.
template <typename Real>
class BranchSetT {
 public:
  BranchSetT(int num_channels, int num_branches, Real momentum = Real(0.1),
             Real epsilon = Real(1e-5));

  // x: C x H x W or N x C x H x W; returns the same rank. branch >= K is a
  // routing error.
  TensorT<Real> forward(TapeT<Real>* tape, const TensorT<Real>& x, int branch,
                        BnMode mode);

  int num_channels() const { return channels_; }
  int num_branches() const { return static_cast<int>(gamma_.size()); }
  Real momentum() const { return momentum_; }
  Real epsilon() const { return epsilon_; }

  TensorT<Real>& gamma(int branch) { return gamma_[check_branch(branch)]; }
  TensorT<Real>& beta(int branch) { return beta_[check_branch(branch)]; }
  TensorT<Real>& running_mean(int branch) {
    return running_mean_[check_branch(branch)];
  }
  TensorT<Real>& running_var(int branch) {
    return running_var_[check_branch(branch)];
  }
  int64_t update_count(int branch) const {
    return update_count_[check_branch(branch)];
  }
  void set_update_count(int branch, int64_t count) {
    update_count_[check_branch(branch)] = count;
  }

  // gamma and beta of every branch, branch-major.
  std::vector<TensorT<Real>> trainable_params();

 private:
  size_t check_branch(int branch) const;

  int channels_;
  Real momentum_, epsilon_;
  std::vector<TensorT<Real>> gamma_, beta_, running_mean_, running_var_;
  std::vector<int64_t> update_count_;
};

using BranchSet = BranchSetT<float>;

}  // namespace kws

#endif  // KWS_DISNORM_H_

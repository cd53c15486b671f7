// kws/adversary.h

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

#ifndef KWS_ADVERSARY_H_
#define KWS_ADVERSARY_H_

#include <functional>
#include <vector>

#include "kws/disnorm.h"
#include "kws/model.h"
#include "kws/tensor.h"
#include "kws/window.h"

namespace kws {

// One iterative L-inf attack. `epsilon` is the ball radius; the per-step size
// is a separate knob (default epsilon/4) so several steps can both traverse
// and refine inside the ball.
struct AttackConfig {
  float epsilon = 0.1f;
  float step_size = 0.0f;  // <= 0 selects epsilon/4
  int steps = 8;
  DatasourceTag branch_tag;    // branch consuming (and generating) the adversary
  int parent_datasource = 0;   // datasource attacked; -1 = applies to every one
  int level_index = 0;

  float effective_step_size() const {
    return step_size > 0.0f ? step_size : epsilon / 4.0f;
  }
};

// Whether an adversary generates through the branch that will consume it or
// through the branch of the data it perturbs.
enum class GenerationBranch { kAdversarial, kParent };

GenerationBranch parse_generation_branch(const std::string& name);
const char* generation_branch_name(GenerationBranch g);

// Widest per-element interval [lo, hi] around x such that the float
// subtractions x - lo and hi - x both evaluate to at most eps. Projecting onto
// these bounds makes the ball invariant checkable element-exactly in float.
void ball_bounds(const float* x, int64_t n, float eps, float* lo, float* hi);

// Ascends an arbitrary scalar loss of the input: steps of
// x <- clamp(x + step * sgn(dL/dx)) with zero-initialized perturbation and
// sgn(0) = 0. loss_fn must record onto the given tape. Non-finite gradients
// raise NumericError.
using LossFn = std::function<Tensor(Tape*, const Tensor&)>;
Tensor pgd_attack(const Tensor& x, const LossFn& loss_fn,
                  const AttackConfig& cfg);

// Cross-entropy attack against the model. Forwards run through
// `generation_branch` with batch statistics that are never written back
// (BnMode::kAttack); parameters are frozen for the duration. x may be a batch.
Tensor pgd_attack(Model& model, const Tensor& x, const std::vector<int>& labels,
                  int generation_branch, const AttackConfig& cfg);

// Single-window convenience: returns the window retagged as
// adversarial(parent = input tag id, level = cfg.level_index).
FeatureWindow pgd_attack(Model& model, const FeatureWindow& window,
                         int generation_branch, const AttackConfig& cfg);

// One AttackConfig per adversarial forward a train step may owe:
// kNone -> none; kAT/kDAT/kDA_DAT -> one per datasource at a single epsilon;
// kFG_DAT -> one per perturbation level (each applying to every datasource).
// An empty level list, or several levels outside kFG_DAT, is a contract error.
std::vector<AttackConfig> make_attack_schedule(const BranchPlan& plan,
                                               const std::vector<float>& levels,
                                               int steps = 8,
                                               float step_size = 0.0f);

}  // namespace kws

#endif  // KWS_ADVERSARY_H_

// kws/trainer.h

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

#ifndef KWS_TRAINER_H_
#define KWS_TRAINER_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kws/adversary.h"
#include "kws/augment.h"
#include "kws/dataset.h"
#include "kws/model.h"

namespace kws {

struct AdamConfig {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Adam with per-parameter state and step counters, so disjoint parameter
// subsets (e.g. different normalization branches) keep independent bias
// correction. State is keyed by tensor storage identity.
class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  // One update over exactly `params`, consuming their current gradients.
  // A missing gradient buffer counts as all-zero. Non-finite gradients are a
  // numeric error.
  void step(const std::vector<Tensor>& params, float lr);

  int64_t step_count(const Tensor& param) const;
  const AdamConfig& config() const { return cfg_; }

 private:
  struct Slot {
    std::vector<float> m, v;
    int64_t t = 0;
  };
  AdamConfig cfg_;
  std::map<const void*, Slot> slots_;
};

// base_lr * 0.5 * (1 + cos(pi * step / total_steps)); step may equal
// total_steps (yielding 0).
float cosine_lr(int64_t step, int64_t total_steps, float base_lr);

struct TrainConfig {
  Strategy strategy = Strategy::kNone;
  int epochs = 15;
  float base_lr = 0.005f;
  int batch_size = 64;
  float adv_loss_weight = 1.0f;
  // One epsilon per fine-grained level; exactly one entry for the other
  // adversarial strategies. May be empty only for kNone.
  std::vector<float> attack_levels;
  int attack_steps = 8;
  float attack_step_size = 0.0f;  // <= 0: epsilon / 4
  GenerationBranch generation_branch = GenerationBranch::kAdversarial;
  uint64_t seed = 1;
  int window_frames = 100;
  // Audit switch: route every forward through branch 0 regardless of the
  // plan. A collapsed run must match the single-branch strategy bit for bit.
  bool collapse_routing = false;
  // Audit switch: after each step, verify by an extra backward pass that the
  // adversarial loss term alone reaches the shared convolution weights.
  bool audit_adversarial_grad = false;
  std::string checkpoint_dir;  // empty: keep no checkpoints
  std::string report_path;     // empty: write no report
};

struct TrainStepResult {
  float loss = 0.0f;       // combined objective for the step
  float orig_loss = 0.0f;  // original-branch term
  std::vector<float> adv_losses;       // unweighted, schedule order
  std::vector<int> touched_branches;   // sorted, unique
  bool audit_ran = false;
  bool adv_grad_nonzero = false;
};

class Trainer {
 public:
  Trainer(Model& model, const TrainConfig& cfg);

  // One optimizer step on a homogeneous batch (every window from the same
  // original datasource). Generates and folds in adversarial companions
  // according to the strategy, then updates exactly the touched parameters.
  TrainStepResult train_step(const std::vector<const FeatureWindow*>& batch,
                             float lr);
  TrainStepResult train_step(const std::vector<FeatureWindow>& batch,
                             float lr);

  const BranchPlan& plan() const { return plan_; }
  const std::vector<AttackConfig>& schedule() const { return schedule_; }
  AdamState& adam() { return adam_; }

 private:
  Model& model_;
  TrainConfig cfg_;
  BranchPlan plan_;
  std::vector<AttackConfig> schedule_;
  AdamState adam_;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double val_top1 = -1.0;  // -1: no validation data
  std::string checkpoint_path;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::string final_checkpoint;
  int64_t total_steps = 0;
  int64_t audit_steps = 0;              // steps where the gradient audit ran
  int64_t audit_nonzero_steps = 0;      // ... and found a nonzero gradient
};

// Full training run: expands every clean example into the three datasources
// each epoch, interleaves per-datasource batches round-robin, steps with a
// cosine learning-rate schedule, and checkpoints per epoch. Deterministic
// for a fixed config and seed.
TrainReport fit(Model& model, const std::vector<LoadedExample>& train,
                const std::vector<LoadedExample>& valid,
                const AugmentPlan& augment, const TrainConfig& cfg);

// Top-1 accuracy on one fitted window per example, branch 0, eval mode.
double quick_accuracy(Model& model, const std::vector<LoadedExample>& examples,
                      int window_frames, int batch_size = 64);

}  // namespace kws

#endif  // KWS_TRAINER_H_

// kws/adversary.cc

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

#include "kws/adversary.h"

#include <algorithm>
#include <cmath>

namespace kws {

GenerationBranch parse_generation_branch(const std::string& name) {
  if (name == "adversarial") return GenerationBranch::kAdversarial;
  if (name == "parent") return GenerationBranch::kParent;
  throw ConfigError("unknown generation_branch '" + name +
                    "' (expected adversarial|parent)");
}

const char* generation_branch_name(GenerationBranch g) {
  return g == GenerationBranch::kAdversarial ? "adversarial" : "parent";
}

void ball_bounds(const float* x, int64_t n, float eps, float* lo, float* hi) {
  KWS_CHECK(eps > 0.0f && std::isfinite(eps), "epsilon must be positive");
  for (int64_t i = 0; i < n; ++i) {
    float l = x[i] - eps;
    while (x[i] - l > eps) l = std::nextafterf(l, x[i]);
    float h = x[i] + eps;
    while (h - x[i] > eps) h = std::nextafterf(h, x[i]);
    lo[i] = l;
    hi[i] = h;
  }
}

namespace {

void check_attack_config(const AttackConfig& cfg) {
  KWS_CHECK(cfg.epsilon > 0.0f, "attack epsilon must be positive");
  KWS_CHECK(cfg.steps >= 1, "attack needs at least one step");
  KWS_CHECK(cfg.effective_step_size() > 0.0f, "attack step size must be positive");
}

void check_input_finite(const Tensor& x) {
  for (int64_t i = 0; i < x.numel(); ++i)
    if (!std::isfinite(x.data()[i]))
      throw ContractError("attack input contains non-finite values");
}

// One projected ascent pass over a prepared bound pair.
Tensor run_pgd(const Tensor& x0,
               const std::function<void(const Tensor&, std::vector<float>&)>&
                   grad_of,
               const AttackConfig& cfg) {
  const int64_t n = x0.numel();
  std::vector<float> lo(static_cast<size_t>(n)), hi(static_cast<size_t>(n));
  ball_bounds(x0.data(), n, cfg.epsilon, lo.data(), hi.data());

  const float step = cfg.effective_step_size();
  Tensor adv = x0.clone();
  std::vector<float> grad(static_cast<size_t>(n));
  for (int t = 0; t < cfg.steps; ++t) {
    grad_of(adv, grad);
    std::vector<float> next(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      const float g = grad[static_cast<size_t>(i)];
      if (!std::isfinite(g)) throw NumericError("non-finite attack gradient");
      float v = adv.data()[i];
      if (g > 0.0f)
        v += step;
      else if (g < 0.0f)
        v -= step;
      next[static_cast<size_t>(i)] = std::min(
          std::max(v, lo[static_cast<size_t>(i)]), hi[static_cast<size_t>(i)]);
    }
    adv = Tensor::from_data(x0.shape(), std::move(next));
  }
  for (int64_t i = 0; i < n; ++i)
    KWS_CHECK(adv.data()[i] >= lo[static_cast<size_t>(i)] &&
                  adv.data()[i] <= hi[static_cast<size_t>(i)],
              "projection left the epsilon ball");
  return adv;
}

}  // namespace

Tensor pgd_attack(const Tensor& x, const LossFn& loss_fn,
                  const AttackConfig& cfg) {
  check_attack_config(cfg);
  KWS_CHECK(x.defined(), "pgd_attack: undefined input");
  check_input_finite(x);
  return run_pgd(
      x,
      [&loss_fn](const Tensor& at, std::vector<float>& grad) {
        Tensor probe = at.clone();
        probe.set_requires_grad(true);
        Tape tape;
        Tensor loss = loss_fn(&tape, probe);
        tape.backward(loss);
        grad = probe.grad_vec();
      },
      cfg);
}

Tensor pgd_attack(Model& model, const Tensor& x, const std::vector<int>& labels,
                  int generation_branch, const AttackConfig& cfg) {
  check_attack_config(cfg);
  KWS_CHECK(x.defined(), "pgd_attack: undefined input");
  check_input_finite(x);
  ParamFreezeGuard freeze(model);
  return run_pgd(
      x,
      [&model, &labels, generation_branch](const Tensor& at,
                                           std::vector<float>& grad) {
        Tensor probe = at.clone();
        probe.set_requires_grad(true);
        Tape tape;
        Tensor logits =
            model.forward(&tape, probe, generation_branch, BnMode::kAttack);
        Tensor loss = softmax_cross_entropy(&tape, logits, labels);
        tape.backward(loss);
        grad = probe.grad_vec();
      },
      cfg);
}

FeatureWindow pgd_attack(Model& model, const FeatureWindow& window,
                         int generation_branch, const AttackConfig& cfg) {
  const FeatureMatrix& f = window.features;
  Tensor x = Tensor::from_data({1, f.frames, f.dim}, f.data);
  Tensor adv = pgd_attack(model, x, {window.label}, generation_branch, cfg);

  FeatureWindow out = window;
  out.features.data = adv.vec();
  out.tag.kind = DatasourceTag::Kind::kAdversarial;
  out.tag.id = cfg.branch_tag.id;
  out.tag.parent_id = window.tag.id;
  out.tag.level_index = cfg.level_index;
  return out;
}

std::vector<AttackConfig> make_attack_schedule(const BranchPlan& plan,
                                               const std::vector<float>& levels,
                                               int steps, float step_size) {
  std::vector<AttackConfig> out;
  if (plan.strategy == Strategy::kNone) return out;
  KWS_CHECK(!levels.empty(), "attack schedule needs at least one epsilon");
  for (float e : levels)
    KWS_CHECK(e > 0.0f, "attack epsilon must be positive, got " << e);

  if (plan.strategy == Strategy::kFG_DAT) {
    KWS_CHECK(static_cast<int>(levels.size()) == plan.num_levels,
              "fg_dat plan has " << plan.num_levels << " levels but "
                                 << levels.size() << " epsilons given");
    for (size_t l = 0; l < levels.size(); ++l) {
      AttackConfig cfg;
      cfg.epsilon = levels[l];
      cfg.step_size = step_size;
      cfg.steps = steps;
      cfg.branch_tag =
          plan.branches[static_cast<size_t>(
              plan.adversary_branch(0, static_cast<int>(l)))];
      cfg.parent_datasource = -1;
      cfg.level_index = static_cast<int>(l);
      out.push_back(cfg);
    }
    return out;
  }

  KWS_CHECK(levels.size() == 1,
            strategy_name(plan.strategy)
                << " uses a single epsilon, got " << levels.size());
  for (int d = 0; d < plan.num_datasources; ++d) {
    AttackConfig cfg;
    cfg.epsilon = levels[0];
    cfg.step_size = step_size;
    cfg.steps = steps;
    cfg.branch_tag =
        plan.branches[static_cast<size_t>(plan.adversary_branch(d, 0))];
    cfg.parent_datasource = d;
    cfg.level_index = 0;
    out.push_back(cfg);
  }
  return out;
}

}  // namespace kws

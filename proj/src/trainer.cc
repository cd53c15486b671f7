// kws/trainer.cc

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

#include "kws/trainer.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "json.hpp"

namespace kws {

void AdamState::step(const std::vector<Tensor>& params, float lr) {
  for (const Tensor& p : params) {
    KWS_CHECK(p.defined(), "AdamState: undefined parameter");
    const int64_t n = p.numel();
    Slot& slot = slots_[p.impl().get()];
    if (slot.t == 0) {
      slot.m.assign(static_cast<size_t>(n), 0.0f);
      slot.v.assign(static_cast<size_t>(n), 0.0f);
    }
    KWS_CHECK(static_cast<int64_t>(slot.m.size()) == n,
              "AdamState: parameter size changed");
    slot.t += 1;
    const double b1 = cfg_.beta1;
    const double b2 = cfg_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(slot.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(slot.t));
    const bool has_grad = const_cast<Tensor&>(p).grad_allocated();
    const std::vector<float>& g = p.grad_vec();
    float* w = const_cast<Tensor&>(p).data();
    for (int64_t i = 0; i < n; ++i) {
      const double gi = has_grad ? static_cast<double>(g[static_cast<size_t>(i)])
                                 : 0.0;
      if (!std::isfinite(gi)) {
        throw NumericError("AdamState: non-finite gradient");
      }
      const size_t si = static_cast<size_t>(i);
      const double m = b1 * slot.m[si] + (1.0 - b1) * gi;
      const double v = b2 * slot.v[si] + (1.0 - b2) * gi * gi;
      slot.m[si] = static_cast<float>(m);
      slot.v[si] = static_cast<float>(v);
      const double update =
          static_cast<double>(lr) * (m / bc1) /
          (std::sqrt(v / bc2) + static_cast<double>(cfg_.eps));
      w[si] = static_cast<float>(static_cast<double>(w[si]) - update);
    }
  }
}

int64_t AdamState::step_count(const Tensor& param) const {
  const auto it = slots_.find(param.impl().get());
  return it == slots_.end() ? 0 : it->second.t;
}

float cosine_lr(int64_t step, int64_t total_steps, float base_lr) {
  KWS_CHECK(total_steps >= 1, "cosine_lr: total_steps must be positive");
  KWS_CHECK(step >= 0 && step <= total_steps,
            "cosine_lr: step " << step << " outside [0, " << total_steps
                               << "]");
  const double phase = M_PI * static_cast<double>(step) /
                       static_cast<double>(total_steps);
  return static_cast<float>(static_cast<double>(base_lr) * 0.5 *
                            (1.0 + std::cos(phase)));
}

namespace {

int plan_levels(const TrainConfig& cfg) {
  if (cfg.strategy == Strategy::kFG_DAT) {
    return static_cast<int>(cfg.attack_levels.size());
  }
  return 1;
}

}  // namespace

Trainer::Trainer(Model& model, const TrainConfig& cfg)
    : model_(model),
      cfg_(cfg),
      plan_(make_branch_plan(cfg.strategy, kNumDatasources, plan_levels(cfg))),
      adam_() {
  KWS_CHECK(model_.num_branches() == plan_.num_branches(),
            "Trainer: model has " << model_.num_branches()
                                  << " branches but the "
                                  << strategy_name(plan_.strategy)
                                  << " plan needs " << plan_.num_branches());
  if (cfg_.strategy != Strategy::kNone) {
    schedule_ = make_attack_schedule(plan_, cfg_.attack_levels,
                                     cfg_.attack_steps, cfg_.attack_step_size);
  }
  KWS_CHECK(cfg_.adv_loss_weight >= 0.0f,
            "Trainer: negative adv_loss_weight");
}

TrainStepResult Trainer::train_step(const std::vector<FeatureWindow>& batch,
                                    float lr) {
  std::vector<const FeatureWindow*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& w : batch) ptrs.push_back(&w);
  return train_step(ptrs, lr);
}

TrainStepResult Trainer::train_step(
    const std::vector<const FeatureWindow*>& batch, float lr) {
  KWS_CHECK(!batch.empty(), "train_step: empty batch");
  const FeatureWindow& first = *batch.front();
  KWS_CHECK(first.tag.kind != DatasourceTag::Kind::kAdversarial,
            "train_step: batches carry original data; adversaries are "
            "generated inside the step");
  const int ds = first.tag.id;
  const int frames = first.features.frames;
  const int dim = first.features.dim;
  for (const FeatureWindow* w : batch) {
    KWS_CHECK(w->tag.id == ds && w->tag.kind == first.tag.kind,
              "train_step: mixed datasource tags in one batch");
    KWS_CHECK(w->features.frames == frames && w->features.dim == dim,
              "train_step: mixed feature shapes in one batch");
  }

  const int n = static_cast<int>(batch.size());
  std::vector<float> xdata(static_cast<size_t>(n) * frames * dim);
  std::vector<int> labels(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::copy(batch[static_cast<size_t>(i)]->features.data.begin(),
              batch[static_cast<size_t>(i)]->features.data.end(),
              xdata.begin() + static_cast<int64_t>(i) * frames * dim);
    labels[static_cast<size_t>(i)] = batch[static_cast<size_t>(i)]->label;
  }
  Tensor x = Tensor::from_data({n, 1, frames, dim}, std::move(xdata));

  const int orig_branch =
      cfg_.collapse_routing ? 0 : plan_.original_branch(ds);

  TrainStepResult result;
  std::set<int> touched{orig_branch};

  Tape tape;
  Tensor logits = model_.forward(&tape, x, orig_branch, BnMode::kTrain);
  Tensor orig_loss = softmax_cross_entropy(&tape, logits, labels);
  result.orig_loss = orig_loss.item();

  Tensor total = orig_loss;
  Tensor adv_total;  // weighted adversarial subtotal, for the audit pass

  const bool adversarial =
      cfg_.strategy != Strategy::kNone && cfg_.adv_loss_weight > 0.0f;
  if (adversarial) {
    for (const AttackConfig& acfg : schedule_) {
      if (acfg.parent_datasource != -1 && acfg.parent_datasource != ds) {
        continue;
      }
      const int adv_branch = cfg_.collapse_routing ? 0 : acfg.branch_tag.id;
      const int gen_branch =
          cfg_.generation_branch == GenerationBranch::kAdversarial
              ? adv_branch
              : orig_branch;
      Tensor adv_x = pgd_attack(model_, x, labels, gen_branch, acfg);
      Tensor adv_logits =
          model_.forward(&tape, adv_x, adv_branch, BnMode::kTrain);
      Tensor adv_loss = softmax_cross_entropy(&tape, adv_logits, labels);
      result.adv_losses.push_back(adv_loss.item());
      Tensor weighted = cfg_.adv_loss_weight == 1.0f
                            ? adv_loss
                            : scale(&tape, adv_loss, cfg_.adv_loss_weight);
      adv_total = adv_total.defined() ? add(&tape, adv_total, weighted)
                                      : weighted;
      touched.insert(adv_branch);
    }
  }
  if (adv_total.defined()) total = add(&tape, total, adv_total);
  result.loss = total.item();
  if (!std::isfinite(result.loss)) {
    throw NumericError("train_step: non-finite loss");
  }

  std::vector<Tensor> params = model_.conv_weights();
  for (int b : touched) {
    for (Tensor& t : model_.branch_affine_params(b)) params.push_back(t);
  }

  if (cfg_.audit_adversarial_grad && adv_total.defined()) {
    // Backward of the adversarial term alone: it must reach the shared
    // convolution weights, otherwise the strategy degenerates to plain
    // training plus noise.
    for (Tensor& p : params) p.zero_grad();
    tape.backward(adv_total);
    result.audit_ran = true;
    for (Tensor& w : model_.conv_weights()) {
      for (float g : w.grad_vec()) {
        if (g != 0.0f) {
          result.adv_grad_nonzero = true;
          break;
        }
      }
      if (result.adv_grad_nonzero) break;
    }
    for (Tensor& p : params) p.zero_grad();
  }

  tape.backward(total);
  adam_.step(params, lr);
  for (Tensor& p : params) p.zero_grad();

  result.touched_branches.assign(touched.begin(), touched.end());
  return result;
}

double quick_accuracy(Model& model, const std::vector<LoadedExample>& examples,
                      int window_frames, int batch_size) {
  if (examples.empty()) return -1.0;
  KWS_CHECK(batch_size >= 1, "quick_accuracy: batch_size must be positive");
  const int dim = kNumMelBins;
  int64_t correct = 0;
  std::vector<FeatureMatrix> feats(examples.size());
  parallel_for(static_cast<int64_t>(examples.size()), [&](int64_t i) {
    feats[static_cast<size_t>(i)] =
        fit_to_frames(logmel(examples[static_cast<size_t>(i)].clip),
                      window_frames);
  });
  for (size_t begin = 0; begin < examples.size();
       begin += static_cast<size_t>(batch_size)) {
    const size_t end =
        std::min(examples.size(), begin + static_cast<size_t>(batch_size));
    const int n = static_cast<int>(end - begin);
    std::vector<float> xdata(static_cast<size_t>(n) * window_frames * dim);
    for (int i = 0; i < n; ++i) {
      std::copy(feats[begin + static_cast<size_t>(i)].data.begin(),
                feats[begin + static_cast<size_t>(i)].data.end(),
                xdata.begin() + static_cast<int64_t>(i) * window_frames * dim);
    }
    Tensor x =
        Tensor::from_data({n, 1, window_frames, dim}, std::move(xdata));
    Tensor logits = model.forward(nullptr, x, 0, BnMode::kEval);
    const int classes = logits.dim(1);
    for (int i = 0; i < n; ++i) {
      const float* row = logits.data() + static_cast<int64_t>(i) * classes;
      int best = 0;
      for (int c = 1; c < classes; ++c) {
        if (row[c] > row[best]) best = c;
      }
      if (best == examples[begin + static_cast<size_t>(i)].label) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

TrainReport fit(Model& model, const std::vector<LoadedExample>& train,
                const std::vector<LoadedExample>& valid,
                const AugmentPlan& augment, const TrainConfig& cfg) {
  KWS_CHECK(!train.empty(), "fit: empty training set");
  KWS_CHECK(cfg.epochs >= 1, "fit: epochs must be positive");
  KWS_CHECK(cfg.batch_size >= 1, "fit: batch_size must be positive");

  Trainer trainer(model, cfg);
  DatasourceBuilder builder(augment, cfg.window_frames);

  const int64_t num_train = static_cast<int64_t>(train.size());
  const int64_t batches_per_ds =
      (num_train + cfg.batch_size - 1) / cfg.batch_size;
  const int64_t steps_per_epoch = batches_per_ds * kNumDatasources;
  const int64_t total_steps = steps_per_epoch * cfg.epochs;

  std::ofstream report_out;
  if (!cfg.report_path.empty()) {
    report_out.open(cfg.report_path);
    if (!report_out) throw IoError("cannot write report: " + cfg.report_path);
  }
  if (!cfg.checkpoint_dir.empty()) {
    std::filesystem::create_directories(cfg.checkpoint_dir);
  }

  TrainReport report;
  report.total_steps = total_steps;
  int64_t global_step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Expand every clean example into its three datasource variants. The
    // expansion is pure per example, so worker count cannot change it.
    std::vector<std::vector<FeatureWindow>> expanded(train.size());
    parallel_for(static_cast<int64_t>(train.size()), [&](int64_t i) {
      const LoadedExample& ex = train[static_cast<size_t>(i)];
      expanded[static_cast<size_t>(i)] = builder.expand(
          ex.clip, ex.label, ex.example_id, ex.utterance_id, epoch);
    });

    // Independent seeded visit order per datasource.
    std::vector<std::vector<int64_t>> order(kNumDatasources);
    for (int dsi = 0; dsi < kNumDatasources; ++dsi) {
      order[static_cast<size_t>(dsi)].resize(train.size());
      std::iota(order[static_cast<size_t>(dsi)].begin(),
                order[static_cast<size_t>(dsi)].end(), 0);
      Rng shuffle_rng(HashCombine(
          DeriveSeed(cfg.seed, static_cast<uint64_t>(epoch), 0x0bde5),
          static_cast<uint64_t>(dsi)));
      shuffle_rng.shuffle(order[static_cast<size_t>(dsi)]);
    }

    double loss_sum = 0.0;
    for (int64_t b = 0; b < batches_per_ds; ++b) {
      for (int dsi = 0; dsi < kNumDatasources; ++dsi) {
        const int64_t lo = b * cfg.batch_size;
        const int64_t hi = std::min<int64_t>(lo + cfg.batch_size, num_train);
        std::vector<const FeatureWindow*> batch;
        batch.reserve(static_cast<size_t>(hi - lo));
        for (int64_t i = lo; i < hi; ++i) {
          const int64_t ex = order[static_cast<size_t>(dsi)]
                                  [static_cast<size_t>(i)];
          batch.push_back(
              &expanded[static_cast<size_t>(ex)][static_cast<size_t>(dsi)]);
        }
        const float lr = cosine_lr(global_step, total_steps, cfg.base_lr);
        TrainStepResult step = trainer.train_step(batch, lr);
        loss_sum += step.loss;
        if (step.audit_ran) {
          report.audit_steps += 1;
          if (step.adv_grad_nonzero) report.audit_nonzero_steps += 1;
        }
        if (report_out.is_open()) {
          nlohmann::ordered_json line;
          line["epoch"] = epoch;
          line["step"] = global_step;
          line["datasource"] = dsi;
          line["lr"] = lr;
          line["loss"] = step.loss;
          line["orig_loss"] = step.orig_loss;
          line["strategy"] = strategy_name(cfg.strategy);
          report_out << line.dump() << "\n";
        }
        ++global_step;
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(steps_per_epoch);
    stats.val_top1 = quick_accuracy(model, valid, cfg.window_frames);
    if (!cfg.checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03d.kwsc", epoch);
      stats.checkpoint_path =
          (std::filesystem::path(cfg.checkpoint_dir) / name).string();
      save_checkpoint(model, stats.checkpoint_path);
    }
    if (report_out.is_open()) {
      nlohmann::ordered_json line;
      line["epoch"] = epoch;
      line["mean_loss"] = stats.mean_loss;
      line["val_top1"] = stats.val_top1;
      line["checkpoint"] = stats.checkpoint_path;
      report_out << line.dump() << "\n";
    }
    report.epochs.push_back(stats);
  }

  if (!cfg.checkpoint_dir.empty()) {
    report.final_checkpoint =
        (std::filesystem::path(cfg.checkpoint_dir) / "final.kwsc").string();
    save_checkpoint(model, report.final_checkpoint);
  }
  return report;
}

}  // namespace kws

// tests/test_trainer.cc

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
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "kws/trainer.h"
#include "oracles.h"
#include "synth.h"

namespace kws {
namespace {

namespace fs = std::filesystem;

ModelConfig tiny_config(int num_branches, int num_classes = 3) {
  ModelConfig cfg;
  cfg.num_classes = num_classes;
  cfg.num_branches = num_branches;
  cfg.stem_channels = 4;
  cfg.feature_channels = 6;
  cfg.blocks = {BlockSpec{2, 4, 2, 4}};
  return cfg;
}

FeatureWindow make_window(Rng* rng, int frames, int dim, int label,
                          const DatasourceTag& tag, int64_t example_id) {
  FeatureWindow w;
  w.features.frames = frames;
  w.features.dim = dim;
  w.features.data.resize(static_cast<size_t>(frames) * dim);
  for (auto& v : w.features.data) {
    v = static_cast<float>(rng->next_u01() * 6.0 - 3.0);
  }
  w.label = label;
  w.tag = tag;
  w.example_id = example_id;
  w.utterance_id = "u" + std::to_string(example_id);
  return w;
}

DatasourceTag original_tag(int datasource) {
  DatasourceTag tag;
  tag.id = datasource;
  tag.kind = datasource == 0 ? DatasourceTag::Kind::kClean
                             : DatasourceTag::Kind::kAugmented;
  tag.source_index = datasource;
  return tag;
}

std::vector<FeatureWindow> make_batch(Rng* rng, int n, int datasource,
                                      int num_classes) {
  std::vector<FeatureWindow> batch;
  for (int i = 0; i < n; ++i) {
    batch.push_back(make_window(rng, 12, 8, i % num_classes,
                                original_tag(datasource), i));
  }
  return batch;
}

std::vector<LoadedExample> synth_examples(int count, int samples) {
  const std::vector<std::string> words = {"yes", "no", "marvin"};
  std::vector<LoadedExample> out;
  for (int i = 0; i < count; ++i) {
    LoadedExample ex;
    const std::string word = words[static_cast<size_t>(i % 3)];
    ex.clip = testing::synth_word_clip(word, static_cast<uint64_t>(i), samples);
    ex.label = i % 3;
    ex.example_id = i;
    ex.utterance_id = word + "/" + std::to_string(i);
    out.push_back(ex);
  }
  return out;
}

AugmentPlan small_augment_plan(uint64_t seed) {
  AugmentPlan plan;
  plan.noise_corpus = {testing::synth_noise_clip(1, 16000)};
  plan.specaug.num_time_masks = 1;
  plan.specaug.max_time_width = 4;
  plan.specaug.num_freq_masks = 1;
  plan.specaug.max_freq_width = 4;
  plan.rng_seed = seed;
  return plan;
}

std::vector<std::vector<float>> snapshot(std::vector<Tensor> tensors) {
  std::vector<std::vector<float>> out;
  for (auto& t : tensors) out.push_back(t.vec());
  return out;
}

TEST_SUITE("trainer") {

TEST_CASE("adam matches a scalar reference") {
  // A two-element parameter stepped with hand-fed gradients must follow the
  // textbook update, coordinate by coordinate.
  AdamConfig cfg;
  AdamState adam(cfg);
  Tensor p = Tensor::from_data({2}, {1.0f, -2.0f});
  p.set_requires_grad(true);

  testing::ScalarAdamRef ref0, ref1;
  double p0 = 1.0, p1 = -2.0;

  Rng rng(17);
  for (int step = 0; step < 12; ++step) {
    const float g0 = static_cast<float>(rng.next_u01() * 2.0 - 1.0);
    const float g1 = static_cast<float>(rng.next_u01() * 2.0 - 1.0);
    p.zero_grad();
    p.grad()[0] += g0;
    p.grad()[1] += g1;
    const float lr = 0.05f;
    adam.step({p}, lr);
    p0 = ref0.step(p0, g0, lr, cfg.beta1, cfg.beta2, cfg.eps);
    p1 = ref1.step(p1, g1, lr, cfg.beta1, cfg.beta2, cfg.eps);
    CHECK(p.vec()[0] == doctest::Approx(p0).epsilon(1e-6));
    CHECK(p.vec()[1] == doctest::Approx(p1).epsilon(1e-6));
  }
  CHECK(adam.step_count(p) == 12);
}

TEST_CASE("adam treats a missing gradient as zero but advances time") {
  AdamState adam;
  Tensor p = Tensor::from_data({1}, {3.0f});
  Tensor q = Tensor::from_data({1}, {5.0f});
  q.zero_grad();
  q.grad()[0] += 1.0f;
  adam.step({p, q}, 0.1f);
  // p had no gradient buffer: value unchanged, but its clock advanced.
  CHECK(p.vec()[0] == 3.0f);
  CHECK(adam.step_count(p) == 1);
  CHECK(q.vec()[0] < 5.0f);

  // Disjoint subsets keep independent counters.
  adam.step({q}, 0.1f);
  CHECK(adam.step_count(p) == 1);
  CHECK(adam.step_count(q) == 2);
}

TEST_CASE("adam rejects non-finite gradients") {
  AdamState adam;
  Tensor p = Tensor::from_data({1}, {1.0f});
  p.zero_grad();
  p.grad()[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(adam.step({p}, 0.1f), NumericError);
}

TEST_CASE("cosine schedule endpoints and midpoint") {
  CHECK(cosine_lr(0, 100, 0.4f) == doctest::Approx(0.4f));
  CHECK(cosine_lr(50, 100, 0.4f) == doctest::Approx(0.2f));
  CHECK(cosine_lr(100, 100, 0.4f) == doctest::Approx(0.0f).scale(1.0));
  for (int64_t s = 0; s <= 40; ++s) {
    const float lr = cosine_lr(s, 40, 1.0f);
    CHECK(lr >= 0.0f);
    CHECK(lr <= 1.0f);
  }
  // Monotone nonincreasing.
  float prev = cosine_lr(0, 40, 1.0f);
  for (int64_t s = 1; s <= 40; ++s) {
    const float lr = cosine_lr(s, 40, 1.0f);
    CHECK(lr <= prev);
    prev = lr;
  }
  CHECK_THROWS_AS(cosine_lr(-1, 40, 1.0f), ContractError);
  CHECK_THROWS_AS(cosine_lr(41, 40, 1.0f), ContractError);
  CHECK_THROWS_AS(cosine_lr(0, 0, 1.0f), ContractError);
}

TEST_CASE("train_step touches the right branches per strategy") {
  Rng rng(31);

  // kNone: only branch 0 regardless of datasource.
  {
    Model model(tiny_config(1), 1);
    TrainConfig cfg;
    cfg.strategy = Strategy::kNone;
    Trainer trainer(model, cfg);
    const auto result = trainer.train_step(make_batch(&rng, 4, 2, 3), 0.01f);
    CHECK(result.touched_branches == std::vector<int>{0});
    CHECK(result.adv_losses.empty());
    CHECK(result.loss == result.orig_loss);
  }

  // kDAT: originals through 0, adversaries through 1.
  {
    Model model(tiny_config(2), 1);
    TrainConfig cfg;
    cfg.strategy = Strategy::kDAT;
    cfg.attack_levels = {0.3f};
    cfg.attack_steps = 2;
    Trainer trainer(model, cfg);
    const auto result = trainer.train_step(make_batch(&rng, 4, 0, 3), 0.01f);
    CHECK(result.touched_branches == std::vector<int>{0, 1});
    CHECK(result.adv_losses.size() == 1);
  }

  // kDA_DAT: datasource ds routes to ds and N + ds.
  {
    Model model(tiny_config(6), 1);
    TrainConfig cfg;
    cfg.strategy = Strategy::kDA_DAT;
    cfg.attack_levels = {0.3f};
    cfg.attack_steps = 2;
    Trainer trainer(model, cfg);
    const auto result = trainer.train_step(make_batch(&rng, 4, 2, 3), 0.01f);
    CHECK(result.touched_branches == std::vector<int>{2, 5});
  }

  // kFG_DAT: every level fires for any datasource.
  {
    Model model(tiny_config(3), 1);
    TrainConfig cfg;
    cfg.strategy = Strategy::kFG_DAT;
    cfg.attack_levels = {0.1f, 0.3f};
    cfg.attack_steps = 1;
    Trainer trainer(model, cfg);
    const auto result = trainer.train_step(make_batch(&rng, 4, 1, 3), 0.01f);
    CHECK(result.touched_branches == std::vector<int>{0, 1, 2});
    CHECK(result.adv_losses.size() == 2);
  }
}

TEST_CASE("train_step updates exactly the touched parameters") {
  Rng rng(32);
  Model model(tiny_config(6), 2);
  TrainConfig cfg;
  cfg.strategy = Strategy::kDA_DAT;
  cfg.attack_levels = {0.3f};
  cfg.attack_steps = 2;
  Trainer trainer(model, cfg);

  const auto before_conv = snapshot(model.conv_weights());
  std::vector<std::vector<std::vector<float>>> before_affine;
  for (int b = 0; b < 6; ++b) {
    before_affine.push_back(snapshot(model.branch_affine_params(b)));
  }

  trainer.train_step(make_batch(&rng, 4, 1, 3), 0.01f);

  // Conv weights always move.
  const auto after_conv = snapshot(model.conv_weights());
  bool conv_moved = false;
  for (size_t i = 0; i < after_conv.size(); ++i) {
    if (after_conv[i] != before_conv[i]) conv_moved = true;
  }
  CHECK(conv_moved);

  // Branches 1 and 4 moved; the other four are bitwise frozen.
  for (int b = 0; b < 6; ++b) {
    const bool moved =
        snapshot(model.branch_affine_params(b)) != before_affine[static_cast<size_t>(b)];
    CHECK(moved == (b == 1 || b == 4));
  }
}

TEST_CASE("train_step advances bn statistics of the touched branches only") {
  Rng rng(33);
  Model model(tiny_config(2), 3);
  TrainConfig cfg;
  cfg.strategy = Strategy::kDAT;
  cfg.attack_levels = {0.2f};
  cfg.attack_steps = 1;
  Trainer trainer(model, cfg);
  trainer.train_step(make_batch(&rng, 3, 1, 3), 0.01f);

  for (const auto& [name, count] : model.bn_update_counts()) {
    CHECK(count == 1);  // every layer, both branches: one train forward each
  }

  // A second step doubles the counters.
  trainer.train_step(make_batch(&rng, 3, 2, 3), 0.01f);
  for (const auto& [name, count] : model.bn_update_counts()) {
    CHECK(count == 2);
  }
}

TEST_CASE("mixed-datasource batches are contract errors") {
  Rng rng(34);
  Model model(tiny_config(1), 4);
  TrainConfig cfg;
  cfg.strategy = Strategy::kNone;
  Trainer trainer(model, cfg);
  auto batch = make_batch(&rng, 3, 0, 3);
  batch[1].tag = original_tag(1);
  CHECK_THROWS_AS(trainer.train_step(batch, 0.01f), ContractError);

  auto adv_in = make_batch(&rng, 2, 0, 3);
  adv_in[0].tag.kind = DatasourceTag::Kind::kAdversarial;
  CHECK_THROWS_AS(trainer.train_step(adv_in, 0.01f), ContractError);

  CHECK_THROWS_AS(trainer.train_step(std::vector<FeatureWindow>{}, 0.01f),
                  ContractError);
}

TEST_CASE("trainer construction validates the model against the plan") {
  Model model(tiny_config(2), 5);
  TrainConfig cfg;
  cfg.strategy = Strategy::kDA_DAT;  // needs 6 branches
  cfg.attack_levels = {0.3f};
  CHECK_THROWS_AS(Trainer(model, cfg), ContractError);

  TrainConfig none;
  none.strategy = Strategy::kNone;
  Model one(tiny_config(1), 5);
  Trainer ok(one, none);
  CHECK(ok.schedule().empty());
}

TEST_CASE("zero adversarial weight reproduces the baseline bitwise") {
  // A kDAT run with adv_loss_weight 0 must leave branch-0 state and conv
  // weights exactly where a kNone run leaves them: the adversarial term
  // contributes nothing to the update, only to branch-1 statistics.
  Rng rng_a(35), rng_b(35);
  Model base(tiny_config(1), 77);
  Model dat(tiny_config(2), 77);

  TrainConfig cfg_a;
  cfg_a.strategy = Strategy::kNone;
  Trainer trainer_a(base, cfg_a);

  TrainConfig cfg_b;
  cfg_b.strategy = Strategy::kDAT;
  cfg_b.attack_levels = {0.3f};
  cfg_b.attack_steps = 2;
  cfg_b.adv_loss_weight = 0.0f;
  Trainer trainer_b(dat, cfg_b);

  for (int step = 0; step < 3; ++step) {
    trainer_a.train_step(make_batch(&rng_a, 4, step % 3, 3), 0.02f);
    trainer_b.train_step(make_batch(&rng_b, 4, step % 3, 3), 0.02f);
  }

  const auto conv_a = snapshot(base.conv_weights());
  const auto conv_b = snapshot(dat.conv_weights());
  CHECK(conv_a == conv_b);
  CHECK(snapshot(base.branch_affine_params(0)) ==
        snapshot(dat.branch_affine_params(0)));
}

TEST_CASE("collapsed routing touches only branch 0") {
  Rng rng(36);
  Model model(tiny_config(6), 6);
  TrainConfig cfg;
  cfg.strategy = Strategy::kDA_DAT;
  cfg.attack_levels = {0.2f};
  cfg.attack_steps = 1;
  cfg.collapse_routing = true;
  Trainer trainer(model, cfg);
  const auto result = trainer.train_step(make_batch(&rng, 3, 2, 3), 0.01f);
  CHECK(result.touched_branches == std::vector<int>{0});
}

TEST_CASE("the gradient audit runs without changing the update") {
  Rng rng_a(37), rng_b(37);
  Model audited(tiny_config(2), 88);
  Model plain(tiny_config(2), 88);

  TrainConfig cfg;
  cfg.strategy = Strategy::kDAT;
  cfg.attack_levels = {0.3f};
  cfg.attack_steps = 2;

  TrainConfig cfg_audit = cfg;
  cfg_audit.audit_adversarial_grad = true;

  Trainer trainer_a(audited, cfg_audit);
  Trainer trainer_b(plain, cfg);

  for (int step = 0; step < 2; ++step) {
    const auto res_a = trainer_a.train_step(make_batch(&rng_a, 4, 0, 3), 0.02f);
    const auto res_b = trainer_b.train_step(make_batch(&rng_b, 4, 0, 3), 0.02f);
    CHECK(res_a.audit_ran);
    CHECK(res_a.adv_grad_nonzero);
    CHECK_FALSE(res_b.audit_ran);
    CHECK(res_a.loss == res_b.loss);
  }
  // Bit-identical trajectories with and without the audit.
  const auto na = snapshot(audited.parameters());
  const auto nb = snapshot(plain.parameters());
  CHECK(na == nb);
}

TEST_CASE("fit is deterministic end to end") {
  const auto train = synth_examples(9, 6400);
  const auto valid = synth_examples(3, 6400);
  const AugmentPlan augment = small_augment_plan(11);

  TrainConfig cfg;
  cfg.strategy = Strategy::kDAT;
  cfg.attack_levels = {0.3f};
  cfg.attack_steps = 1;
  cfg.epochs = 2;
  cfg.batch_size = 3;
  cfg.base_lr = 0.01f;
  cfg.seed = 5;
  cfg.window_frames = 40;

  const std::string dir_a = testing::fresh_temp_dir("fit_a");
  const std::string dir_b = testing::fresh_temp_dir("fit_b");

  TrainConfig cfg_a = cfg;
  cfg_a.checkpoint_dir = dir_a;
  cfg_a.report_path = dir_a + "/report.jsonl";
  Model model_a(tiny_config(2), 9);
  const TrainReport report_a = fit(model_a, train, valid, augment, cfg_a);

  TrainConfig cfg_b = cfg;
  cfg_b.checkpoint_dir = dir_b;
  cfg_b.report_path = dir_b + "/report.jsonl";
  Model model_b(tiny_config(2), 9);
  const TrainReport report_b = fit(model_b, train, valid, augment, cfg_b);

  // train: 9 examples -> 3 per-datasource batches of 3 -> 9 steps/epoch.
  CHECK(report_a.total_steps == 2 * 9);
  REQUIRE(report_a.epochs.size() == 2);
  CHECK(report_a.epochs[0].epoch == 0);
  CHECK(report_a.epochs[1].epoch == 1);
  CHECK(report_a.epochs[0].val_top1 >= 0.0);
  CHECK(report_a.epochs[0].mean_loss == report_b.epochs[0].mean_loss);

  const auto bytes_a = read_file_bytes(report_a.final_checkpoint);
  const auto bytes_b = read_file_bytes(report_b.final_checkpoint);
  CHECK(bytes_a == bytes_b);

  // Per-epoch checkpoints exist.
  CHECK(fs::exists(dir_a + "/epoch_000.kwsc"));
  CHECK(fs::exists(dir_a + "/epoch_001.kwsc"));
  CHECK(fs::exists(dir_a + "/final.kwsc"));

  // The report is line-delimited json with one summary line per epoch.
  std::ifstream report_file(cfg_a.report_path);
  REQUIRE(report_file.good());
  int lines = 0, epoch_lines = 0;
  std::string line;
  while (std::getline(report_file, line)) {
    if (line.empty()) continue;
    ++lines;
    if (line.find("\"val_top1\"") != std::string::npos) ++epoch_lines;
  }
  CHECK(lines >= 2 * 9 + 2);
  CHECK(epoch_lines == 2);

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("fit counts steps by ceil division per datasource") {
  const auto train = synth_examples(4, 4800);
  const AugmentPlan augment = small_augment_plan(12);

  TrainConfig cfg;
  cfg.strategy = Strategy::kNone;
  cfg.epochs = 1;
  cfg.batch_size = 3;  // ceil(4/3) = 2 batches per datasource
  cfg.window_frames = 30;
  cfg.seed = 2;
  Model model(tiny_config(1), 10);
  const TrainReport report = fit(model, train, {}, augment, cfg);
  CHECK(report.total_steps == 3 * 2);
  CHECK(report.epochs[0].val_top1 == -1.0);
  CHECK(report.audit_steps == 0);
}

TEST_CASE("fit audits adversarial gradients when asked") {
  const auto train = synth_examples(3, 4800);
  const AugmentPlan augment = small_augment_plan(13);

  TrainConfig cfg;
  cfg.strategy = Strategy::kDAT;
  cfg.attack_levels = {0.3f};
  cfg.attack_steps = 1;
  cfg.epochs = 1;
  cfg.batch_size = 3;
  cfg.window_frames = 30;
  cfg.seed = 3;
  cfg.audit_adversarial_grad = true;
  Model model(tiny_config(2), 11);
  const TrainReport report = fit(model, train, {}, augment, cfg);
  CHECK(report.total_steps == 3);
  CHECK(report.audit_steps == 3);
  CHECK(report.audit_nonzero_steps == 3);
}

TEST_CASE("quick_accuracy scores one window per example") {
  const auto examples = synth_examples(6, 4800);
  Model model(tiny_config(1), 12);
  const double acc = quick_accuracy(model, examples, 30);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  // An untrained 3-class model cannot be perfect on structured input and the
  // result is a multiple of 1/6.
  const double scaled = acc * 6.0;
  CHECK(scaled == doctest::Approx(std::round(scaled)).epsilon(1e-9));
  // No data: the no-validation sentinel, matching EpochStats::val_top1.
  CHECK(quick_accuracy(model, {}, 30) == -1.0);
}

TEST_CASE("non-finite training state raises numeric errors") {
  Rng rng(38);
  Model model(tiny_config(1), 13);
  TrainConfig cfg;
  cfg.strategy = Strategy::kNone;
  Trainer trainer(model, cfg);
  // An absurd learning rate explodes the parameters on the first step; the
  // second step then sees a non-finite loss or gradient.
  auto batch = make_batch(&rng, 4, 0, 3);
  trainer.train_step(batch, 1e30f);
  CHECK_THROWS_AS(
      [&] {
        for (int i = 0; i < 4; ++i) trainer.train_step(batch, 1e30f);
      }(),
      NumericError);
}

}  // TEST_SUITE

}  // namespace
}  // namespace kws

// kws/kws_main.cc

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
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "kws/adversary.h"
#include "kws/augment.h"
#include "kws/dataset.h"
#include "kws/evaluator.h"
#include "kws/model.h"
#include "kws/runconfig.h"
#include "kws/trainer.h"

namespace kws {
namespace {

RunConfig load_config_with_overrides(const std::string& path,
                                     const std::vector<std::string>& sets) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config: " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  for (const std::string& s : sets) apply_override(j, s);
  return run_config_from_json(j);
}

DatasetManifest resolve_manifest(const RunConfig& cfg) {
  if (!cfg.data.manifest_path.empty()) {
    DatasetManifest m = load_manifest(cfg.data.manifest_path);
    if (!cfg.data.keywords.empty()) {
      m = restrict_manifest(m, cfg.data.keywords, cfg.data.unknown_words,
                            cfg.data.max_train_clips);
    }
    return m;
  }
  if (cfg.data.dataset_dir.empty()) {
    throw ConfigError(
        "config key 'data': either manifest_path or dataset_dir is required");
  }
  DatasetManifest m = ingest_gsc(cfg.data.dataset_dir);
  if (!cfg.data.keywords.empty()) {
    m = restrict_manifest(m, cfg.data.keywords, cfg.data.unknown_words,
                          cfg.data.max_train_clips);
  }
  return m;
}

std::vector<AudioClip> resolve_noise(const RunConfig& cfg) {
  std::string dir = cfg.augment.noise_dir;
  if (dir.empty() && !cfg.data.dataset_dir.empty()) {
    const auto fallback =
        std::filesystem::path(cfg.data.dataset_dir) / "_background_noise_";
    if (std::filesystem::is_directory(fallback)) dir = fallback.string();
  }
  if (dir.empty()) return {};
  return load_noise_dir(dir);
}

int resolve_num_classes(const RunConfig& cfg, const DatasetManifest& m) {
  const int manifest_classes = static_cast<int>(m.class_names.size());
  if (cfg.model.num_classes == 0) return manifest_classes;
  if (cfg.model.num_classes != manifest_classes) {
    throw ConfigError("config key 'model.num_classes': manifest has " +
                      std::to_string(manifest_classes) + " classes");
  }
  return cfg.model.num_classes;
}

int run_train(const RunConfig& cfg) {
  const DatasetManifest manifest = resolve_manifest(cfg);
  const std::string root = cfg.data.dataset_dir;
  const std::vector<LoadedExample> train =
      load_split(manifest, "train", root);
  const std::vector<LoadedExample> valid =
      load_split(manifest, "valid", root);

  TrainConfig tcfg = to_train_config(cfg);
  const int levels = tcfg.strategy == Strategy::kFG_DAT
                         ? static_cast<int>(tcfg.attack_levels.size())
                         : 1;
  const BranchPlan plan =
      make_branch_plan(tcfg.strategy, kNumDatasources, levels);

  ModelConfig mcfg = mn45_config(resolve_num_classes(cfg, manifest),
                                 cfg.model.with_simam, plan.num_branches());
  mcfg.simam_lambda = cfg.model.simam_lambda;
  Model model(mcfg, cfg.seed);

  AugmentPlan plan_aug;
  plan_aug.snr_low_db = cfg.augment.snr_low_db;
  plan_aug.snr_high_db = cfg.augment.snr_high_db;
  plan_aug.noise_corpus = resolve_noise(cfg);
  plan_aug.specaug = cfg.augment.specaug;
  plan_aug.rng_seed = cfg.seed;

  const TrainReport report = fit(model, train, valid, plan_aug, tcfg);

  nlohmann::ordered_json out;
  out["strategy"] = strategy_name(tcfg.strategy);
  out["train_examples"] = train.size();
  out["valid_examples"] = valid.size();
  out["total_steps"] = report.total_steps;
  out["final_checkpoint"] = report.final_checkpoint;
  if (!report.epochs.empty()) {
    out["final_mean_loss"] = report.epochs.back().mean_loss;
    out["final_val_top1"] = report.epochs.back().val_top1;
  }
  if (report.audit_steps > 0) {
    out["audit_steps"] = report.audit_steps;
    out["audit_nonzero_steps"] = report.audit_nonzero_steps;
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_eval(const RunConfig& cfg, const std::string& checkpoint,
             const std::string& split, const std::string& scores_out,
             const std::string& det_out) {
  Model model = load_checkpoint(checkpoint);
  const DatasetManifest manifest = resolve_manifest(cfg);
  std::vector<LoadedExample> examples =
      load_split(manifest, split, cfg.data.dataset_dir);
  if (examples.empty()) throw FormatError("split '" + split + "' is empty");

  if (cfg.eval.test_snr_db >= 0.0f) {
    if (cfg.eval.test_noise_dir.empty()) {
      throw ConfigError(
          "config key 'eval.test_noise_dir': required when test_snr_db is "
          "set");
    }
    const std::vector<AudioClip> noise = load_noise_dir(cfg.eval.test_noise_dir);
    if (noise.empty()) {
      throw ConfigError("config key 'eval.test_noise_dir': no clips found");
    }
    for (size_t i = 0; i < examples.size(); ++i) {
      const AudioClip& src = noise[i % noise.size()];
      Rng rng(DeriveSeed(cfg.seed, 0, static_cast<uint64_t>(i)));
      const int offset =
          rng.uniform_int(0, static_cast<int>(src.samples.size()) - 1);
      AudioClip rotated;
      rotated.sample_rate = src.sample_rate;
      rotated.samples.resize(src.samples.size());
      for (size_t k = 0; k < src.samples.size(); ++k) {
        rotated.samples[k] =
            src.samples[(static_cast<size_t>(offset) + k) % src.samples.size()];
      }
      examples[i].clip =
          mix_noise(examples[i].clip, rotated, cfg.eval.test_snr_db);
    }
  }

  EvalOptions opts;
  opts.window_frames = cfg.eval.window_frames;
  opts.shift = cfg.eval.shift;
  opts.aggregation = parse_aggregation(cfg.eval.aggregation);
  const std::vector<ScoreRecord> records = score_examples(model, examples, opts);

  nlohmann::ordered_json out;
  out["checkpoint"] = checkpoint;
  out["split"] = split;
  out["examples"] = records.size();
  out["top1_accuracy"] = top1_accuracy(records);

  const int negative_class = static_cast<int>(manifest.class_names.size()) - 1;
  std::vector<float> pos, neg;
  split_detection_scores(records, negative_class, &pos, &neg);
  if (!pos.empty() && !neg.empty()) {
    const std::vector<DetPoint> curve = det_curve(pos, neg);
    const FrrAtFar f = frr_at_far(curve, 0.01);
    out["auc"] = auc(pos, neg);
    out["frr_at_far1pct"] = f.frr;
    out["far_target_reached"] = f.reached;
    if (!det_out.empty()) {
      write_det_csv(det_out, curve);
      out["det_csv"] = det_out;
    }
  }
  if (!scores_out.empty()) {
    write_scores_csv(scores_out, records);
    out["scores_csv"] = scores_out;
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_attack(const std::string& checkpoint, const std::string& input,
               int label, float epsilon, int steps, float step_size,
               int branch, int window_frames, const std::string& out_path) {
  Model model = load_checkpoint(checkpoint);

  FeatureMatrix features;
  if (input.size() > 4 &&
      input.compare(input.size() - 4, 4, ".wav") == 0) {
    features = fit_to_frames(logmel(read_wav(input)), window_frames);
  } else {
    features = read_kwsf(input);
  }

  AttackConfig acfg;
  acfg.epsilon = epsilon;
  acfg.steps = steps;
  acfg.step_size = step_size;
  acfg.branch_tag.id = branch;

  const int n = features.frames * features.dim;
  Tensor x = Tensor::from_data({1, features.frames, features.dim},
                               features.data);
  Tensor adv = pgd_attack(model, x, {label}, branch, acfg);

  float max_delta = 0.0f;
  bool ball_ok = true;
  for (int i = 0; i < n; ++i) {
    const float d = std::fabs(adv.data()[i] - x.data()[i]);
    max_delta = std::max(max_delta, d);
    if (d > epsilon) ball_ok = false;
  }

  auto loss_of = [&](const Tensor& t) {
    Tensor logits = model.forward(nullptr, t, branch, BnMode::kEval);
    return softmax_cross_entropy<float>(nullptr, logits, {label}).item();
  };
  const float loss_before = loss_of(x);
  const float loss_after = loss_of(adv);

  FeatureMatrix adv_features;
  adv_features.frames = features.frames;
  adv_features.dim = features.dim;
  adv_features.data = adv.vec();
  if (!out_path.empty()) write_kwsf(out_path, adv_features);

  nlohmann::ordered_json out;
  out["input"] = input;
  out["label"] = label;
  out["epsilon"] = epsilon;
  out["steps"] = steps;
  out["step_size"] = acfg.effective_step_size();
  out["branch"] = branch;
  out["max_abs_delta"] = max_delta;
  out["ball_ok"] = ball_ok;
  out["loss_before"] = loss_before;
  out["loss_after"] = loss_after;
  if (!out_path.empty()) out["adversarial_features"] = out_path;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_det(const std::string& scores_path, int negative_class,
            const std::vector<double>& far_targets,
            const std::string& out_path) {
  const std::vector<ScoreRecord> records = read_scores_csv(scores_path);
  if (records.empty()) throw FormatError("no score rows in " + scores_path);
  const int classes = static_cast<int>(records.front().scores.size());
  const int neg_class = negative_class >= 0 ? negative_class : classes - 1;

  std::vector<float> pos, neg;
  split_detection_scores(records, neg_class, &pos, &neg);
  const std::vector<DetPoint> curve = det_curve(pos, neg);
  if (!out_path.empty()) write_det_csv(out_path, curve);

  nlohmann::ordered_json out;
  out["scores"] = scores_path;
  out["negative_class"] = neg_class;
  out["positives"] = pos.size();
  out["negatives"] = neg.size();
  out["auc"] = auc(pos, neg);
  nlohmann::ordered_json targets = nlohmann::ordered_json::array();
  for (double t : far_targets) {
    const FrrAtFar f = frr_at_far(curve, t);
    targets.push_back({{"far_target", t},
                       {"frr", f.frr},
                       {"achieved_far", f.achieved_far},
                       {"reached", f.reached}});
  }
  out["frr_at_far"] = targets;
  if (!out_path.empty()) out["det_csv"] = out_path;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_ingest(const std::string& data_dir, const std::string& out_path,
               const std::string& rejects_out) {
  const DatasetManifest m = ingest_gsc(data_dir);
  save_manifest(out_path, m);
  if (!rejects_out.empty()) {
    std::ofstream out(rejects_out);
    if (!out) throw IoError("cannot write rejects: " + rejects_out);
    for (const std::string& r : m.rejects) out << r << "\n";
  }
  nlohmann::ordered_json out;
  out["manifest"] = out_path;
  out["classes"] = m.class_names.size();
  out["train"] = m.train.size();
  out["valid"] = m.valid.size();
  out["test"] = m.test.size();
  out["rejects"] = m.rejects.size();
  std::cout << out.dump(2) << "\n";
  return 0;
}

void selftest_check(bool ok, const std::string& name) {
  std::cout << (ok ? "ok" : "FAIL") << " - " << name << "\n";
  if (!ok) throw ContractError("selftest failed: " + name);
}

int run_selftest() {
  {
    Model model(mn45_config(12), 7);
    const std::vector<int64_t> counts = model.conv_param_counts();
    bool ok = counts.size() == 10 && counts[0] == 405 && counts[8] == 57600;
    for (int i = 1; i <= 7; ++i) ok = ok && counts[static_cast<size_t>(i)] == 26730;
    selftest_check(ok, "convolution parameter counts");
  }
  {
    Tensor x = Tensor::full({1, 2, 3, 3}, 1.25f);
    Tensor y = simam<float>(nullptr, x, 1e-4f);
    const float expect = 1.25f / (1.0f + std::exp(-0.5f));
    bool ok = true;
    for (float v : y.vec()) ok = ok && std::fabs(v - expect) < 1e-6f;
    selftest_check(ok, "attention weight on a constant channel");
  }
  {
    const BranchPlan da = make_branch_plan(Strategy::kDA_DAT, 3, 1);
    const BranchPlan fg = make_branch_plan(Strategy::kFG_DAT, 3, 2);
    selftest_check(da.num_branches() == 6 && fg.num_branches() == 3 &&
                       make_branch_plan(Strategy::kDAT, 3, 1).num_branches() == 2,
                   "branch plan sizes");
  }
  {
    ModelConfig mc = mn45_config(3);
    mc.blocks = {{2, 8, 1, 8}};
    mc.stem_channels = 8;
    mc.feature_channels = 16;
    Model model(mc, 11);
    Rng rng(5);
    std::vector<float> xdata(static_cast<size_t>(20) * 40);
    for (float& v : xdata) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    Tensor x = Tensor::from_data({1, 1, 20, 40}, xdata);
    AttackConfig acfg;
    acfg.epsilon = 0.05f;
    Tensor adv = pgd_attack(model, x, {1}, 0, acfg);
    bool ok = true;
    for (int64_t i = 0; i < x.numel(); ++i) {
      if (std::fabs(adv.data()[i] - x.data()[i]) > acfg.epsilon) ok = false;
    }
    selftest_check(ok, "attack stays inside the epsilon ball");

    std::vector<uint8_t> bytes = encode_checkpoint(model);
    Model restored = decode_checkpoint(bytes);
    selftest_check(encode_checkpoint(restored) == bytes,
                   "checkpoint roundtrip is bit-exact");
  }
  {
    Rng rng(17);
    std::vector<float> pos(40), neg(60);
    for (float& v : pos) v = static_cast<float>(rng.uniform(0.3, 1.0));
    for (float& v : neg) v = static_cast<float>(rng.uniform(0.0, 0.7));
    const double fast = auc(pos, neg);
    double slow = 0.0;
    for (float p : pos) {
      for (float n : neg) slow += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
    }
    slow /= static_cast<double>(pos.size() * neg.size());
    selftest_check(std::fabs(fast - slow) < 1e-12, "auc matches direct count");
  }
  std::cout << "selftest passed\n";
  return 0;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"MN7-45 keyword spotting engine"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, split = "test";
  std::string scores_out, det_out, input, out_path, data_dir, rejects_out;
  std::string scores_path;
  std::vector<std::string> sets;
  int label = 0, steps = 8, branch = 0, window_frames = 100;
  int negative_class = -1;
  float epsilon = 0.1f, step_size = 0.0f;
  std::vector<double> far_targets;

  CLI::App* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", config_path, "Run config JSON")->required();
  train->add_option("--set", sets, "Override config keys (key.path=value)");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a split");
  eval_cmd->add_option("--config", config_path, "Run config JSON")->required();
  eval_cmd->add_option("--checkpoint", checkpoint, "Model checkpoint")
      ->required();
  eval_cmd->add_option("--split", split, "train, valid, or test");
  eval_cmd->add_option("--scores-out", scores_out, "Write per-utterance CSV");
  eval_cmd->add_option("--det-out", det_out, "Write DET curve CSV");
  eval_cmd->add_option("--set", sets, "Override config keys");

  CLI::App* attack = app.add_subcommand("attack", "Attack one utterance");
  attack->add_option("--checkpoint", checkpoint, "Model checkpoint")
      ->required();
  attack->add_option("--input", input, "Input .wav or .kwsf")->required();
  attack->add_option("--label", label, "True label to attack")->required();
  attack->add_option("--epsilon", epsilon, "L-inf ball radius");
  attack->add_option("--steps", steps, "Attack iterations");
  attack->add_option("--step-size", step_size, "Step size (0: epsilon/4)");
  attack->add_option("--branch", branch, "Generation branch");
  attack->add_option("--window-frames", window_frames, "Window length");
  attack->add_option("--out", out_path, "Write adversarial features (.kwsf)");

  CLI::App* det = app.add_subcommand("det", "DET metrics from a scores CSV");
  det->add_option("--scores", scores_path, "Scores CSV")->required();
  det->add_option("--negative-class", negative_class,
                  "Unknown class index (default: last)");
  det->add_option("--far", far_targets, "FAR targets for FRR lookup");
  det->add_option("--out", out_path, "Write DET curve CSV");

  CLI::App* ingest = app.add_subcommand("ingest", "Scan a dataset directory");
  ingest->add_option("--data-dir", data_dir, "Dataset root")->required();
  ingest->add_option("--out", out_path, "Manifest output path")->required();
  ingest->add_option("--rejects-out", rejects_out, "Write reject list");

  app.add_subcommand("selftest", "Run built-in invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (app.got_subcommand("train")) {
    return run_train(load_config_with_overrides(config_path, sets));
  }
  if (app.got_subcommand("eval")) {
    return run_eval(load_config_with_overrides(config_path, sets), checkpoint,
                    split, scores_out, det_out);
  }
  if (app.got_subcommand("attack")) {
    return run_attack(checkpoint, input, label, epsilon, steps, step_size,
                      branch, window_frames, out_path);
  }
  if (app.got_subcommand("det")) {
    if (far_targets.empty()) far_targets.push_back(0.01);
    return run_det(scores_path, negative_class, far_targets, out_path);
  }
  if (app.got_subcommand("ingest")) {
    return run_ingest(data_dir, out_path, rejects_out);
  }
  if (app.got_subcommand("selftest")) {
    return run_selftest();
  }
  return 1;
}

}  // namespace
}  // namespace kws

int main(int argc, char** argv) {
  try {
    return kws::dispatch(argc, argv);
  } catch (const kws::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const kws::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const kws::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

// kws/runconfig.cc

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

#include "kws/runconfig.h"

#include <fstream>
#include <initializer_list>
#include <set>

namespace kws {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void config_error(const std::string& path,
                               const std::string& what) {
  throw ConfigError("config key '" + path + "': " + what);
}

void check_object(const json& j, const std::string& path,
                  std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_error(path, "expected an object");
  const std::set<std::string> allowed_set(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!allowed_set.count(item.key())) {
      config_error(path.empty() ? item.key() : path + "." + item.key(),
                   "unknown key");
    }
  }
}

template <typename T>
void get_field(const json& j, const std::string& path, const char* key,
               T* out) {
  if (!j.contains(key)) return;  // missing keys keep their defaults
  try {
    *out = j.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(path.empty() ? key : path + "." + std::string(key),
                 "wrong type");
  }
}

template <typename T>
void require_equal(const json& j, const std::string& path, const char* key,
                   T compiled) {
  if (!j.contains(key)) return;
  T value = compiled;
  get_field(j, path, key, &value);
  if (value != compiled) {
    std::ostringstream os;
    os << "this build compiles the frontend with " << key << " = " << compiled;
    config_error(path + "." + key, os.str());
  }
}

}  // namespace

ordered_json to_json(const RunConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["frontend"] = {{"sample_rate", cfg.frontend.sample_rate},
                   {"frame_length", cfg.frontend.frame_length},
                   {"frame_shift", cfg.frontend.frame_shift},
                   {"num_mel_bins", cfg.frontend.num_mel_bins},
                   {"mel_low_hz", cfg.frontend.mel_low_hz},
                   {"mel_high_hz", cfg.frontend.mel_high_hz}};
  j["model"] = {{"num_classes", cfg.model.num_classes},
                {"with_simam", cfg.model.with_simam},
                {"simam_lambda", cfg.model.simam_lambda}};
  j["augment"] = {{"snr_low_db", cfg.augment.snr_low_db},
                  {"snr_high_db", cfg.augment.snr_high_db},
                  {"noise_dir", cfg.augment.noise_dir},
                  {"specaug",
                   {{"num_time_masks", cfg.augment.specaug.num_time_masks},
                    {"max_time_width", cfg.augment.specaug.max_time_width},
                    {"num_freq_masks", cfg.augment.specaug.num_freq_masks},
                    {"max_freq_width", cfg.augment.specaug.max_freq_width}}}};
  j["train"] = {{"strategy", cfg.train.strategy},
                {"epochs", cfg.train.epochs},
                {"base_lr", cfg.train.base_lr},
                {"batch_size", cfg.train.batch_size},
                {"adv_loss_weight", cfg.train.adv_loss_weight},
                {"attack_levels", cfg.train.attack_levels},
                {"attack_steps", cfg.train.attack_steps},
                {"attack_step_size", cfg.train.attack_step_size},
                {"generation_branch", cfg.train.generation_branch},
                {"window_frames", cfg.train.window_frames},
                {"collapse_routing", cfg.train.collapse_routing},
                {"audit_adversarial_grad", cfg.train.audit_adversarial_grad},
                {"checkpoint_dir", cfg.train.checkpoint_dir},
                {"report_path", cfg.train.report_path}};
  j["eval"] = {{"window_frames", cfg.eval.window_frames},
               {"shift", cfg.eval.shift},
               {"aggregation", cfg.eval.aggregation},
               {"test_snr_db", cfg.eval.test_snr_db},
               {"test_noise_dir", cfg.eval.test_noise_dir}};
  j["data"] = {{"dataset_dir", cfg.data.dataset_dir},
               {"manifest_path", cfg.data.manifest_path},
               {"keywords", cfg.data.keywords},
               {"unknown_words", cfg.data.unknown_words},
               {"max_train_clips", cfg.data.max_train_clips}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  check_object(j, "",
               {"seed", "frontend", "model", "augment", "train", "eval",
                "data"});
  get_field(j, "", "seed", &cfg.seed);

  if (j.contains("frontend")) {
    const json& f = j.at("frontend");
    check_object(f, "frontend",
                 {"sample_rate", "frame_length", "frame_shift", "num_mel_bins",
                  "mel_low_hz", "mel_high_hz"});
    require_equal(f, "frontend", "sample_rate", kSampleRate);
    require_equal(f, "frontend", "frame_length", kFrameLength);
    require_equal(f, "frontend", "frame_shift", kFrameShift);
    require_equal(f, "frontend", "num_mel_bins", kNumMelBins);
    require_equal(f, "frontend", "mel_low_hz", kMelLowHz);
    require_equal(f, "frontend", "mel_high_hz", kMelHighHz);
  }

  if (j.contains("model")) {
    const json& m = j.at("model");
    check_object(m, "model", {"num_classes", "with_simam", "simam_lambda"});
    get_field(m, "model", "num_classes", &cfg.model.num_classes);
    get_field(m, "model", "with_simam", &cfg.model.with_simam);
    get_field(m, "model", "simam_lambda", &cfg.model.simam_lambda);
    if (cfg.model.num_classes < 0) {
      config_error("model.num_classes", "must be nonnegative");
    }
  }

  if (j.contains("augment")) {
    const json& a = j.at("augment");
    check_object(a, "augment",
                 {"snr_low_db", "snr_high_db", "noise_dir", "specaug"});
    get_field(a, "augment", "snr_low_db", &cfg.augment.snr_low_db);
    get_field(a, "augment", "snr_high_db", &cfg.augment.snr_high_db);
    get_field(a, "augment", "noise_dir", &cfg.augment.noise_dir);
    if (a.contains("specaug")) {
      const json& s = a.at("specaug");
      check_object(s, "augment.specaug",
                   {"num_time_masks", "max_time_width", "num_freq_masks",
                    "max_freq_width"});
      get_field(s, "augment.specaug", "num_time_masks",
                &cfg.augment.specaug.num_time_masks);
      get_field(s, "augment.specaug", "max_time_width",
                &cfg.augment.specaug.max_time_width);
      get_field(s, "augment.specaug", "num_freq_masks",
                &cfg.augment.specaug.num_freq_masks);
      get_field(s, "augment.specaug", "max_freq_width",
                &cfg.augment.specaug.max_freq_width);
    }
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    check_object(t, "train",
                 {"strategy", "epochs", "base_lr", "batch_size",
                  "adv_loss_weight", "attack_levels", "attack_steps",
                  "attack_step_size", "generation_branch", "window_frames",
                  "collapse_routing", "audit_adversarial_grad",
                  "checkpoint_dir", "report_path"});
    get_field(t, "train", "strategy", &cfg.train.strategy);
    get_field(t, "train", "epochs", &cfg.train.epochs);
    get_field(t, "train", "base_lr", &cfg.train.base_lr);
    get_field(t, "train", "batch_size", &cfg.train.batch_size);
    get_field(t, "train", "adv_loss_weight", &cfg.train.adv_loss_weight);
    get_field(t, "train", "attack_levels", &cfg.train.attack_levels);
    get_field(t, "train", "attack_steps", &cfg.train.attack_steps);
    get_field(t, "train", "attack_step_size", &cfg.train.attack_step_size);
    get_field(t, "train", "generation_branch", &cfg.train.generation_branch);
    get_field(t, "train", "window_frames", &cfg.train.window_frames);
    get_field(t, "train", "collapse_routing", &cfg.train.collapse_routing);
    get_field(t, "train", "audit_adversarial_grad",
              &cfg.train.audit_adversarial_grad);
    get_field(t, "train", "checkpoint_dir", &cfg.train.checkpoint_dir);
    get_field(t, "train", "report_path", &cfg.train.report_path);
    if (cfg.train.epochs < 1) config_error("train.epochs", "must be positive");
    if (cfg.train.batch_size < 1) {
      config_error("train.batch_size", "must be positive");
    }
    if (cfg.train.window_frames < 1) {
      config_error("train.window_frames", "must be positive");
    }
    try {
      (void)parse_strategy(cfg.train.strategy);
      (void)parse_generation_branch(cfg.train.generation_branch);
    } catch (const ConfigError& e) {
      config_error("train", e.what());
    }
  }

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_object(e, "eval",
                 {"window_frames", "shift", "aggregation", "test_snr_db",
                  "test_noise_dir"});
    get_field(e, "eval", "window_frames", &cfg.eval.window_frames);
    get_field(e, "eval", "shift", &cfg.eval.shift);
    get_field(e, "eval", "aggregation", &cfg.eval.aggregation);
    get_field(e, "eval", "test_snr_db", &cfg.eval.test_snr_db);
    get_field(e, "eval", "test_noise_dir", &cfg.eval.test_noise_dir);
    if (cfg.eval.window_frames < 1 || cfg.eval.shift < 1) {
      config_error("eval", "window_frames and shift must be positive");
    }
    try {
      (void)parse_aggregation(cfg.eval.aggregation);
    } catch (const ConfigError& e2) {
      config_error("eval.aggregation", e2.what());
    }
  }

  if (j.contains("data")) {
    const json& d = j.at("data");
    check_object(d, "data",
                 {"dataset_dir", "manifest_path", "keywords", "unknown_words",
                  "max_train_clips"});
    get_field(d, "data", "dataset_dir", &cfg.data.dataset_dir);
    get_field(d, "data", "manifest_path", &cfg.data.manifest_path);
    get_field(d, "data", "keywords", &cfg.data.keywords);
    get_field(d, "data", "unknown_words", &cfg.data.unknown_words);
    get_field(d, "data", "max_train_clips", &cfg.data.max_train_clips);
    if (cfg.data.max_train_clips < 0) {
      config_error("data.max_train_clips", "must be nonnegative");
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config: " + path);
  out << to_json(cfg).dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

void apply_override(ordered_json& j, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment +
                      "' is not of the form key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("override '" + assignment + "': empty key");

  ordered_json* node = &j;
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) {
      throw ConfigError("config key '" + path + "': no such section '" +
                        parts[i] + "'");
    }
    node = &(*node)[parts[i]];
  }
  if (!node->is_object() || !node->contains(parts.back())) {
    throw ConfigError("config key '" + path + "': unknown key");
  }
  ordered_json parsed = ordered_json::parse(value, nullptr,
                                            /*allow_exceptions=*/false);
  if (parsed.is_discarded()) parsed = value;  // plain strings need no quotes
  (*node)[parts.back()] = parsed;
}

TrainConfig to_train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.strategy = parse_strategy(cfg.train.strategy);
  t.epochs = cfg.train.epochs;
  t.base_lr = cfg.train.base_lr;
  t.batch_size = cfg.train.batch_size;
  t.adv_loss_weight = cfg.train.adv_loss_weight;
  t.attack_levels = cfg.train.attack_levels;
  t.attack_steps = cfg.train.attack_steps;
  t.attack_step_size = cfg.train.attack_step_size;
  t.generation_branch = parse_generation_branch(cfg.train.generation_branch);
  t.seed = cfg.seed;
  t.window_frames = cfg.train.window_frames;
  t.collapse_routing = cfg.train.collapse_routing;
  t.audit_adversarial_grad = cfg.train.audit_adversarial_grad;
  t.checkpoint_dir = cfg.train.checkpoint_dir;
  t.report_path = cfg.train.report_path;
  return t;
}

}  // namespace kws

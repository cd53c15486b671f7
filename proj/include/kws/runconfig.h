// kws/runconfig.h

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

#ifndef KWS_RUNCONFIG_H_
#define KWS_RUNCONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "kws/augment.h"
#include "kws/evaluator.h"
#include "kws/trainer.h"

namespace kws {

// Frontend constants are compiled in; the config restates them so a run file
// is self-describing, and loading rejects any value this build cannot honor.
struct FrontendConfig {
  int sample_rate = kSampleRate;
  int frame_length = kFrameLength;
  int frame_shift = kFrameShift;
  int num_mel_bins = kNumMelBins;
  double mel_low_hz = kMelLowHz;
  double mel_high_hz = kMelHighHz;
};

struct ModelSection {
  int num_classes = 0;  // 0: take the class count from the manifest
  bool with_simam = true;
  float simam_lambda = 1e-4f;
};

struct AugmentSection {
  float snr_low_db = 0.0f;
  float snr_high_db = 20.0f;
  std::string noise_dir;
  SpecAugmentConfig specaug;
};

struct TrainSection {
  std::string strategy = "none";
  int epochs = 15;
  float base_lr = 0.005f;
  int batch_size = 64;
  float adv_loss_weight = 1.0f;
  std::vector<float> attack_levels = {0.1f};
  int attack_steps = 8;
  float attack_step_size = 0.0f;
  std::string generation_branch = "adversarial";
  int window_frames = 100;
  bool collapse_routing = false;
  bool audit_adversarial_grad = false;
  std::string checkpoint_dir;
  std::string report_path;
};

struct EvalSection {
  int window_frames = 100;
  int shift = 10;
  std::string aggregation = "max";
  // >= 0: remix every test clip with noise at this fixed SNR before scoring.
  float test_snr_db = -1.0f;
  std::string test_noise_dir;
};

struct DataSection {
  std::string dataset_dir;
  std::string manifest_path;
  std::vector<std::string> keywords;
  std::vector<std::string> unknown_words;
  int max_train_clips = 0;
};

struct RunConfig {
  uint64_t seed = 1;
  FrontendConfig frontend;
  ModelSection model;
  AugmentSection augment;
  TrainSection train;
  EvalSection eval;
  DataSection data;
};

// Serialization is lossless: from_json(to_json(c)) reproduces c exactly, and
// to_json emits keys in a fixed order. Unknown keys, wrong types, and
// frontend constants that disagree with this build are config errors naming
// the offending key path.
nlohmann::ordered_json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& cfg);

// Applies one "dotted.path=value" override; the path must name an existing
// scalar or array leaf. Values parse as JSON, falling back to a string.
void apply_override(nlohmann::ordered_json& j, const std::string& assignment);

// The TrainConfig this run configures (strategy and branch names parsed).
TrainConfig to_train_config(const RunConfig& cfg);

}  // namespace kws

#endif  // KWS_RUNCONFIG_H_

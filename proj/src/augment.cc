// kws/augment.cc

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

#include "kws/augment.h"

#include <algorithm>
#include <cmath>
#include <utility>

namespace kws {

double rms(const std::vector<float>& samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (float s : samples) acc += static_cast<double>(s) * s;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

AudioClip mix_noise(const AudioClip& clean, const AudioClip& noise,
                    float snr_db) {
  KWS_CHECK(!clean.samples.empty(), "mix_noise: empty clean clip");
  KWS_CHECK(!noise.samples.empty(), "mix_noise: empty noise clip");
  KWS_CHECK(clean.sample_rate == noise.sample_rate,
            "mix_noise: sample rate mismatch " << clean.sample_rate << " vs "
                                               << noise.sample_rate);
  const size_t n = clean.samples.size();
  const size_t noise_len = noise.samples.size();

  // Tile shorter noise, crop longer noise, to the clip length.
  std::vector<float> segment(n);
  for (size_t i = 0; i < n; ++i) segment[i] = noise.samples[i % noise_len];

  const double rms_clean = rms(clean.samples);
  const double rms_noise = rms(segment);
  KWS_CHECK(rms_clean > 0.0, "mix_noise: zero-energy clean clip");
  KWS_CHECK(rms_noise > 0.0, "mix_noise: zero-energy noise segment");

  // 20*log10(rms_clean / (scale*rms_noise)) == snr_db.
  const double scale =
      rms_clean / (rms_noise * std::pow(10.0, static_cast<double>(snr_db) / 20.0));

  AudioClip out;
  out.sample_rate = clean.sample_rate;
  out.samples.resize(n);
  constexpr float kLo = -1.0f;
  constexpr float kHi = 1.0f - 1.0f / 32768.0f;
  for (size_t i = 0; i < n; ++i) {
    const float v = clean.samples[i] + static_cast<float>(scale) * segment[i];
    out.samples[i] = std::min(kHi, std::max(kLo, v));
  }
  return out;
}

FeatureMatrix spec_augment(const FeatureMatrix& features,
                           const SpecAugmentConfig& cfg, Rng& rng) {
  KWS_CHECK(cfg.num_time_masks >= 0 && cfg.num_freq_masks >= 0,
            "spec_augment: negative mask count");
  KWS_CHECK(cfg.max_time_width >= 0 && cfg.max_freq_width >= 0,
            "spec_augment: negative mask width");
  KWS_CHECK(cfg.max_time_width <= features.frames,
            "spec_augment: max_time_width " << cfg.max_time_width
                                            << " exceeds " << features.frames
                                            << " frames");
  KWS_CHECK(cfg.max_freq_width <= features.dim,
            "spec_augment: max_freq_width " << cfg.max_freq_width
                                            << " exceeds " << features.dim
                                            << " bins");
  FeatureMatrix out = features;
  for (int k = 0; k < cfg.num_time_masks; ++k) {
    const int width = rng.uniform_int(0, cfg.max_time_width);
    const int start = rng.uniform_int(0, features.frames - width);
    for (int t = start; t < start + width; ++t) {
      for (int f = 0; f < features.dim; ++f) out.at(t, f) = 0.0f;
    }
  }
  for (int k = 0; k < cfg.num_freq_masks; ++k) {
    const int width = rng.uniform_int(0, cfg.max_freq_width);
    const int start = rng.uniform_int(0, features.dim - width);
    for (int t = 0; t < features.frames; ++t) {
      for (int f = start; f < start + width; ++f) out.at(t, f) = 0.0f;
    }
  }
  return out;
}

DatasourceBuilder::DatasourceBuilder(AugmentPlan plan, int window_frames)
    : plan_(std::move(plan)), window_frames_(window_frames) {
  KWS_CHECK(window_frames_ >= 1,
            "DatasourceBuilder: window_frames must be positive, got "
                << window_frames_);
  if (plan_.noise_corpus.empty()) {
    throw ConfigError(
        "DatasourceBuilder: noise corpus is empty but the noise-mixed "
        "datasources require it");
  }
  for (size_t i = 0; i < plan_.noise_corpus.size(); ++i) {
    KWS_CHECK(!plan_.noise_corpus[i].samples.empty(),
              "DatasourceBuilder: noise clip " << i << " is empty");
  }
  if (!(plan_.snr_low_db <= plan_.snr_high_db)) {
    throw ConfigError("DatasourceBuilder: snr_low_db must not exceed "
                      "snr_high_db");
  }
}

std::vector<FeatureWindow> DatasourceBuilder::expand(
    const AudioClip& clean, int label, int64_t example_id,
    const std::string& utterance_id, int epoch) const {
  KWS_CHECK(!clean.samples.empty(), "DatasourceBuilder: empty clip for "
                                        << utterance_id);

  std::vector<FeatureWindow> out(3);

  // DS0: the clean clip itself.
  out[0].features = fit_to_frames(logmel(clean), window_frames_);
  out[0].tag.id = 0;
  out[0].tag.kind = DatasourceTag::Kind::kClean;
  out[0].tag.source_index = 0;

  // All randomness for this (example, epoch) flows from one derived seed, so
  // expansion order and worker count cannot change the result.
  const uint64_t derived =
      DeriveSeed(plan_.rng_seed, static_cast<uint64_t>(epoch),
                 static_cast<uint64_t>(example_id));
  Rng mix_rng(derived);
  const int noise_index =
      mix_rng.uniform_int(0, static_cast<int>(plan_.noise_corpus.size()) - 1);
  const AudioClip& noise = plan_.noise_corpus[static_cast<size_t>(noise_index)];
  const int offset =
      mix_rng.uniform_int(0, static_cast<int>(noise.samples.size()) - 1);
  const float snr_db = static_cast<float>(mix_rng.uniform(
      static_cast<double>(plan_.snr_low_db),
      static_cast<double>(plan_.snr_high_db)));

  AudioClip rotated;
  rotated.sample_rate = noise.sample_rate;
  rotated.samples.resize(noise.samples.size());
  for (size_t i = 0; i < noise.samples.size(); ++i) {
    rotated.samples[i] =
        noise.samples[(static_cast<size_t>(offset) + i) % noise.samples.size()];
  }

  // DS1: noise-mixed variant of the same clip.
  const AudioClip mixed = mix_noise(clean, rotated, snr_db);
  out[1].features = fit_to_frames(logmel(mixed), window_frames_);
  out[1].tag.id = 1;
  out[1].tag.kind = DatasourceTag::Kind::kAugmented;
  out[1].tag.source_index = 1;

  // DS2: SpecAugment on DS1's exact features, so the two datasources differ
  // only in the masked cells. The mask stream is salted so adding draws to
  // the mixing stream can never silently shift the masks.
  Rng mask_rng(SplitMix64(derived ^ 0x5eca7075u));
  out[2].features = spec_augment(out[1].features, plan_.specaug, mask_rng);
  out[2].tag.id = 2;
  out[2].tag.kind = DatasourceTag::Kind::kAugmented;
  out[2].tag.source_index = 2;

  for (auto& w : out) {
    w.label = label;
    w.example_id = example_id;
    w.utterance_id = utterance_id;
  }
  return out;
}

}  // namespace kws

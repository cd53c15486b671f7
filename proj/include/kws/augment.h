// kws/augment.h

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

#ifndef KWS_AUGMENT_H_
#define KWS_AUGMENT_H_

#include <cstdint>
#include <string>
#include <vector>

#include "kws/audio.h"
#include "kws/common.h"
#include "kws/features.h"
#include "kws/window.h"

namespace kws {

struct SpecAugmentConfig {
  int num_time_masks = 2;
  int max_time_width = 20;  // frames
  int num_freq_masks = 2;
  int max_freq_width = 7;  // Mel bins
};

// The three training datasources: DS0 clean, DS1 noise-mixed, DS2
// noise-mixed plus SpecAugment.
constexpr int kNumDatasources = 3;

struct AugmentPlan {
  float snr_low_db = 0.0f;
  float snr_high_db = 20.0f;
  std::vector<AudioClip> noise_corpus;
  SpecAugmentConfig specaug;
  uint64_t rng_seed = 0;
};

// Scales `noise` so that 20*log10(rms(clean)/rms(scaled noise)) == snr_db,
// then adds it to `clean`. Noise shorter than the clip is tiled, longer noise
// is cropped. The sum is clipped to the PCM16 range [-1, 1). Zero-energy
// clean or noise is a contract error.
AudioClip mix_noise(const AudioClip& clean, const AudioClip& noise,
                    float snr_db);

double rms(const std::vector<float>& samples);

// Zeroes num_time_masks random row stripes (width uniform in
// [0, max_time_width], start uniform over the fitting positions) and
// num_freq_masks column stripes, drawn in that order from `rng`.
FeatureMatrix spec_augment(const FeatureMatrix& features,
                           const SpecAugmentConfig& cfg, Rng& rng);

// Expands clean examples into the three tagged datasource variants. All
// randomness derives from (plan.rng_seed, epoch, example_id), so a stream is
// reproducible example by example regardless of worker count.
class DatasourceBuilder {
 public:
  DatasourceBuilder(AugmentPlan plan, int window_frames);

  // The three windows for one clean example in one epoch, datasource order
  // DS0, DS1, DS2. DS2 reuses DS1's mixed waveform, so the two differ only in
  // masked cells.
  std::vector<FeatureWindow> expand(const AudioClip& clean, int label,
                                    int64_t example_id,
                                    const std::string& utterance_id,
                                    int epoch) const;

  const AugmentPlan& plan() const { return plan_; }
  int window_frames() const { return window_frames_; }

 private:
  AugmentPlan plan_;
  int window_frames_;
};

}  // namespace kws

#endif  // KWS_AUGMENT_H_

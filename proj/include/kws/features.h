// kws/features.h

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

#ifndef KWS_FEATURES_H_
#define KWS_FEATURES_H_

#include <cstdint>
#include <string>
#include <vector>

#include "kws/audio.h"
#include "kws/common.h"

namespace kws {

// Frontend constants. The frame geometry (25 ms window, 10 ms shift, 40 Mel
// bins) is part of the model contract; the remaining values are fixed here so
// extracted features are reproducible across runs and machines.
constexpr int kFrameLength = 400;     // 25 ms at 16 kHz
constexpr int kFrameShift = 160;      // 10 ms at 16 kHz
constexpr int kFftSize = 512;
constexpr int kNumMelBins = 40;
constexpr double kMelLowHz = 20.0;
constexpr double kMelHighHz = 7600.0;
constexpr float kPreEmphasis = 0.97f;
constexpr double kLogFloor = 1e-10;

// Time-major T x dim log-Mel energies.
struct FeatureMatrix {
  int frames = 0;
  int dim = 0;
  std::vector<float> data;  // frames * dim, row-major

  float& at(int t, int f) { return data[static_cast<size_t>(t) * dim + f]; }
  float at(int t, int f) const { return data[static_cast<size_t>(t) * dim + f]; }
};

// mel = 2595 * log10(1 + f/700). Negative frequencies are a contract error.
double mel_scale(double f_hz);
double mel_to_hz(double mel);

// Lower/center/upper frequency (Hz) of each triangular filter, kNumMelBins+2
// points equally spaced on the Mel scale over [kMelLowHz, kMelHighHz].
std::vector<double> mel_filter_edges_hz();

// 40-dim log-Mel energies, one frame per kFrameShift samples:
// exactly ceil(num_samples / kFrameShift) frames. Each frame applies
// pre-emphasis, a Hann window over kFrameLength samples (the tail is
// reflect-padded), a kFftSize-point FFT power spectrum, the triangular Mel
// bank, then a natural log floored at kLogFloor.
FeatureMatrix logmel(const AudioClip& clip);

// Crop (keeping frame 0 onward) or right-pad with the log floor so the matrix
// has exactly `frames` rows. Trainer and evaluator share this policy.
FeatureMatrix fit_to_frames(const FeatureMatrix& features, int frames);

// Feature dump: header {magic "KWSF", version u32, T u32, F u32} then
// T*F little-endian float32 values.
std::vector<uint8_t> encode_kwsf(const FeatureMatrix& features);
FeatureMatrix decode_kwsf(const std::vector<uint8_t>& bytes);
void write_kwsf(const std::string& path, const FeatureMatrix& features);
FeatureMatrix read_kwsf(const std::string& path);

}  // namespace kws

#endif  // KWS_FEATURES_H_

// kws/audio.h

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

#ifndef KWS_AUDIO_H_
#define KWS_AUDIO_H_

#include <cstdint>
#include <string>
#include <vector>

#include "kws/common.h"

namespace kws {

// Mono PCM audio at the one sample rate the pipeline accepts. Values live in
// [-1, 1) because they come from int16 samples scaled by 1/32768.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 16000;
};

constexpr int kSampleRate = 16000;

// Parses a RIFF/WAVE container. Only PCM 16-bit mono 16 kHz is accepted;
// anything else raises FormatError rather than resampling or downmixing.
// Unknown chunks (LIST, fact, ...) are skipped.
AudioClip decode_wav(const std::vector<uint8_t>& bytes);
AudioClip read_wav(const std::string& path);

// Serializes to a minimal PCM16 mono WAV. Samples are clamped to [-1, 1)
// and rounded to the nearest int16.
std::vector<uint8_t> encode_wav(const AudioClip& clip);
void write_wav(const std::string& path, const AudioClip& clip);

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace kws

#endif  // KWS_AUDIO_H_

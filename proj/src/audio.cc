// kws/audio.cc

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

#include "kws/audio.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace kws {

namespace {

uint32_t read_u32le(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16le(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void push_u32le(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

void push_u16le(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
}

}  // namespace

AudioClip decode_wav(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("not a RIFF/WAVE file");

  bool have_fmt = false;
  uint16_t audio_format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data_ptr = nullptr;
  uint32_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const uint32_t chunk_len = read_u32le(bytes.data() + pos + 4);
    const size_t body = pos + 8;
    if (body + chunk_len > bytes.size())
      throw FormatError("truncated WAV chunk");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw FormatError("fmt chunk too short");
      const uint8_t* f = bytes.data() + body;
      audio_format = read_u16le(f);
      channels = read_u16le(f + 2);
      rate = read_u32le(f + 4);
      bits = read_u16le(f + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_ptr = bytes.data() + body;
      data_len = chunk_len;
    }
    // Chunks are word-aligned; odd sizes carry one pad byte.
    pos = body + chunk_len + (chunk_len & 1);
  }

  if (!have_fmt) throw FormatError("WAV has no fmt chunk");
  if (data_ptr == nullptr) throw FormatError("WAV has no data chunk");
  if (audio_format != 1) throw FormatError("WAV is not PCM");
  if (channels != 1) throw FormatError("WAV is not mono");
  if (bits != 16) throw FormatError("WAV is not 16-bit");
  if (rate != static_cast<uint32_t>(kSampleRate))
    throw FormatError("WAV sample rate is " + std::to_string(rate) +
                      ", expected 16000");
  if (data_len % 2 != 0) throw FormatError("odd PCM16 data length");

  AudioClip clip;
  clip.sample_rate = kSampleRate;
  const size_t n = data_len / 2;
  clip.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const int16_t s =
        static_cast<int16_t>(read_u16le(data_ptr + 2 * i));
    clip.samples[i] = static_cast<float>(s) / 32768.0f;
  }
  return clip;
}

AudioClip read_wav(const std::string& path) {
  return decode_wav(read_file_bytes(path));
}

std::vector<uint8_t> encode_wav(const AudioClip& clip) {
  KWS_CHECK(clip.sample_rate == kSampleRate,
            "encode_wav: sample rate must be 16000");
  const uint32_t n = static_cast<uint32_t>(clip.samples.size());
  const uint32_t data_len = 2 * n;
  std::vector<uint8_t> out;
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  push_u32le(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  push_u32le(out, 16);
  push_u16le(out, 1);  // PCM
  push_u16le(out, 1);  // mono
  push_u32le(out, kSampleRate);
  push_u32le(out, kSampleRate * 2);  // byte rate
  push_u16le(out, 2);                // block align
  push_u16le(out, 16);               // bits per sample
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  push_u32le(out, data_len);
  for (uint32_t i = 0; i < n; ++i) {
    float v = clip.samples[i] * 32768.0f;
    v = std::min(std::max(v, -32768.0f), 32767.0f);
    const int16_t s = static_cast<int16_t>(std::lrintf(v));
    push_u16le(out, static_cast<uint16_t>(s));
  }
  return out;
}

void write_wav(const std::string& path, const AudioClip& clip) {
  write_file_bytes(path, encode_wav(clip));
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path);
  return bytes;
}

void write_file_bytes(const std::string& path,
                      const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace kws

// tests/test_audio.cc

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

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "kws/audio.h"
#include "synth.h"

namespace kws {
namespace {

void push_u32(std::vector<uint8_t>* v, uint32_t x) {
  v->push_back(static_cast<uint8_t>(x & 0xff));
  v->push_back(static_cast<uint8_t>((x >> 8) & 0xff));
  v->push_back(static_cast<uint8_t>((x >> 16) & 0xff));
  v->push_back(static_cast<uint8_t>((x >> 24) & 0xff));
}

void push_u16(std::vector<uint8_t>* v, uint16_t x) {
  v->push_back(static_cast<uint8_t>(x & 0xff));
  v->push_back(static_cast<uint8_t>((x >> 8) & 0xff));
}

void push_tag(std::vector<uint8_t>* v, const char* tag) {
  for (int i = 0; i < 4; ++i) v->push_back(static_cast<uint8_t>(tag[i]));
}

struct WavSpec {
  uint16_t format = 1;
  uint16_t channels = 1;
  uint32_t rate = 16000;
  uint16_t bits = 16;
  bool with_list_chunk = false;
  bool odd_extra_chunk = false;
  int truncate_data_by = 0;
};

std::vector<uint8_t> build_wav(const std::vector<int16_t>& samples,
                               const WavSpec& spec = {}) {
  std::vector<uint8_t> body;
  push_tag(&body, "WAVE");
  if (spec.odd_extra_chunk) {
    // A 3-byte chunk: its size is odd, so a pad byte follows.
    push_tag(&body, "junk");
    push_u32(&body, 3);
    body.push_back('a');
    body.push_back('b');
    body.push_back('c');
    body.push_back(0);  // pad
  }
  push_tag(&body, "fmt ");
  push_u32(&body, 16);
  push_u16(&body, spec.format);
  push_u16(&body, spec.channels);
  push_u32(&body, spec.rate);
  push_u32(&body, spec.rate * spec.channels * spec.bits / 8);
  push_u16(&body, static_cast<uint16_t>(spec.channels * spec.bits / 8));
  push_u16(&body, spec.bits);
  if (spec.with_list_chunk) {
    push_tag(&body, "LIST");
    push_u32(&body, 4);
    push_tag(&body, "INFO");
  }
  push_tag(&body, "data");
  push_u32(&body, static_cast<uint32_t>(samples.size() * 2));
  for (int16_t s : samples) push_u16(&body, static_cast<uint16_t>(s));
  if (spec.truncate_data_by > 0) {
    body.resize(body.size() - static_cast<size_t>(spec.truncate_data_by));
  }

  std::vector<uint8_t> out;
  push_tag(&out, "RIFF");
  push_u32(&out, static_cast<uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

TEST_SUITE("audio") {

TEST_CASE("decode scales PCM16 by 1/32768") {
  const std::vector<int16_t> samples = {0, 16384, -16384, 32767, -32768};
  const AudioClip clip = decode_wav(build_wav(samples));
  REQUIRE(clip.samples.size() == 5);
  CHECK(clip.sample_rate == 16000);
  CHECK(clip.samples[0] == 0.0f);
  CHECK(clip.samples[1] == 0.5f);
  CHECK(clip.samples[2] == -0.5f);
  CHECK(clip.samples[3] == doctest::Approx(32767.0 / 32768.0));
  CHECK(clip.samples[4] == -1.0f);
}

TEST_CASE("encode then decode is the identity on PCM16 values") {
  Rng rng(11);
  AudioClip clip;
  clip.samples.resize(300);
  for (auto& s : clip.samples) {
    s = static_cast<float>(rng.uniform_int(-32768, 32767)) / 32768.0f;
  }
  const AudioClip back = decode_wav(encode_wav(clip));
  REQUIRE(back.samples.size() == clip.samples.size());
  for (size_t i = 0; i < clip.samples.size(); ++i) {
    CHECK(back.samples[i] == clip.samples[i]);
  }
}

TEST_CASE("unknown chunks are skipped") {
  const std::vector<int16_t> samples = {100, -100, 2000};
  WavSpec spec;
  spec.with_list_chunk = true;
  const AudioClip clip = decode_wav(build_wav(samples, spec));
  REQUIRE(clip.samples.size() == 3);
  CHECK(clip.samples[2] == doctest::Approx(2000.0 / 32768.0));
}

TEST_CASE("odd-sized chunks are padded to even offsets") {
  const std::vector<int16_t> samples = {42};
  WavSpec spec;
  spec.odd_extra_chunk = true;
  const AudioClip clip = decode_wav(build_wav(samples, spec));
  REQUIRE(clip.samples.size() == 1);
  CHECK(clip.samples[0] == doctest::Approx(42.0 / 32768.0));
}

TEST_CASE("unsupported formats are format errors") {
  const std::vector<int16_t> samples = {1, 2, 3};
  WavSpec stereo;
  stereo.channels = 2;
  CHECK_THROWS_AS(decode_wav(build_wav(samples, stereo)), FormatError);
  WavSpec low_rate;
  low_rate.rate = 8000;
  CHECK_THROWS_AS(decode_wav(build_wav(samples, low_rate)), FormatError);
  WavSpec eight_bit;
  eight_bit.bits = 8;
  CHECK_THROWS_AS(decode_wav(build_wav(samples, eight_bit)), FormatError);
  WavSpec alaw;
  alaw.format = 6;
  CHECK_THROWS_AS(decode_wav(build_wav(samples, alaw)), FormatError);
}

TEST_CASE("corrupt containers are format errors") {
  const std::vector<int16_t> samples = {1, 2, 3};
  std::vector<uint8_t> good = build_wav(samples);

  std::vector<uint8_t> bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_wav(bad_magic), FormatError);

  WavSpec truncated;
  truncated.truncate_data_by = 2;
  CHECK_THROWS_AS(decode_wav(build_wav(samples, truncated)), FormatError);

  std::vector<uint8_t> tiny(good.begin(), good.begin() + 10);
  CHECK_THROWS_AS(decode_wav(tiny), FormatError);
}

TEST_CASE("file roundtrip and io errors") {
  const std::string dir = testing::fresh_temp_dir("audio");
  AudioClip clip;
  clip.samples = {0.0f, 0.25f, -0.25f, 0.5f};
  const std::string path = dir + "/clip.wav";
  write_wav(path, clip);
  const AudioClip back = read_wav(path);
  REQUIRE(back.samples.size() == 4);
  CHECK(back.samples[1] == 0.25f);
  CHECK_THROWS_AS(read_wav(dir + "/missing.wav"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("encode clamps out-of-range floats") {
  AudioClip clip;
  clip.samples = {2.0f, -2.0f};
  const AudioClip back = decode_wav(encode_wav(clip));
  CHECK(back.samples[0] == doctest::Approx(32767.0 / 32768.0));
  CHECK(back.samples[1] == -1.0f);
}

}  // TEST_SUITE

}  // namespace
}  // namespace kws

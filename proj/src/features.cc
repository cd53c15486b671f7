// kws/features.cc

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

#include "kws/features.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

namespace kws {

namespace {

// Radix-2 iterative FFT, in place. n must be a power of two.
void fft_inplace(std::vector<double>& re, std::vector<double>& im) {
  const size_t n = re.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (size_t j = 0; j < len / 2; ++j) {
        const size_t a = i + j, b = i + j + len / 2;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

// Index into [0, n) with reflection at both edges (the edge sample itself is
// not repeated). A one-sample signal maps everything to that sample.
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

// Triangular Mel bank as a dense (kNumMelBins x num_fft_bins) weight matrix.
std::vector<double> build_mel_bank(int num_fft_bins) {
  const std::vector<double> edges = mel_filter_edges_hz();
  std::vector<double> bank(static_cast<size_t>(kNumMelBins) * num_fft_bins, 0.0);
  const double bin_hz = static_cast<double>(kSampleRate) / kFftSize;
  for (int m = 0; m < kNumMelBins; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < num_fft_bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > lo && f < center)
        w = (f - lo) / (center - lo);
      else if (f == center)
        w = 1.0;
      else if (f > center && f < hi)
        w = (hi - f) / (hi - center);
      bank[static_cast<size_t>(m) * num_fft_bins + k] = w;
    }
  }
  return bank;
}

}  // namespace

double mel_scale(double f_hz) {
  KWS_CHECK(f_hz >= 0.0, "mel_scale: negative frequency " << f_hz);
  return 2595.0 * std::log10(1.0 + f_hz / 700.0);
}

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> mel_filter_edges_hz() {
  const double mel_lo = mel_scale(kMelLowHz);
  const double mel_hi = mel_scale(kMelHighHz);
  std::vector<double> edges(kNumMelBins + 2);
  for (int i = 0; i < kNumMelBins + 2; ++i) {
    const double mel =
        mel_lo + (mel_hi - mel_lo) * i / static_cast<double>(kNumMelBins + 1);
    edges[static_cast<size_t>(i)] = mel_to_hz(mel);
  }
  return edges;
}

FeatureMatrix logmel(const AudioClip& clip) {
  KWS_CHECK(!clip.samples.empty(), "logmel: empty clip");
  KWS_CHECK(clip.sample_rate == kSampleRate,
            "logmel: sample rate must be 16000");

  const int n = static_cast<int>(clip.samples.size());
  const int num_frames = (n + kFrameShift - 1) / kFrameShift;
  const int num_fft_bins = kFftSize / 2 + 1;

  // Pre-emphasis over the whole clip; framing reflects off its tail.
  std::vector<float> emph(static_cast<size_t>(n));
  emph[0] = clip.samples[0];
  for (int i = 1; i < n; ++i)
    emph[static_cast<size_t>(i)] =
        clip.samples[static_cast<size_t>(i)] -
        kPreEmphasis * clip.samples[static_cast<size_t>(i - 1)];

  static const std::vector<double> hann = [] {
    std::vector<double> w(kFrameLength);
    for (int i = 0; i < kFrameLength; ++i)
      w[static_cast<size_t>(i)] =
          0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (kFrameLength - 1));
    return w;
  }();
  static const std::vector<double> bank = build_mel_bank(num_fft_bins);

  FeatureMatrix out;
  out.frames = num_frames;
  out.dim = kNumMelBins;
  out.data.resize(static_cast<size_t>(num_frames) * kNumMelBins);

  std::vector<double> re(kFftSize), im(kFftSize), power(num_fft_bins);
  for (int t = 0; t < num_frames; ++t) {
    const int start = t * kFrameShift;
    for (int i = 0; i < kFrameLength; ++i)
      re[static_cast<size_t>(i)] =
          hann[static_cast<size_t>(i)] *
          static_cast<double>(emph[static_cast<size_t>(reflect_index(start + i, n))]);
    std::fill(re.begin() + kFrameLength, re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    fft_inplace(re, im);
    for (int k = 0; k < num_fft_bins; ++k)
      power[static_cast<size_t>(k)] = re[static_cast<size_t>(k)] * re[static_cast<size_t>(k)] +
                                      im[static_cast<size_t>(k)] * im[static_cast<size_t>(k)];
    for (int m = 0; m < kNumMelBins; ++m) {
      double e = 0.0;
      const double* row = bank.data() + static_cast<size_t>(m) * num_fft_bins;
      for (int k = 0; k < num_fft_bins; ++k) e += row[k] * power[static_cast<size_t>(k)];
      out.at(t, m) = static_cast<float>(std::log(std::max(e, kLogFloor)));
    }
  }
  return out;
}

FeatureMatrix fit_to_frames(const FeatureMatrix& features, int frames) {
  KWS_CHECK(frames >= 1, "fit_to_frames: frames must be positive");
  KWS_CHECK(features.dim >= 1 && features.frames >= 1,
            "fit_to_frames: empty feature matrix");
  if (features.frames == frames) return features;
  FeatureMatrix out;
  out.frames = frames;
  out.dim = features.dim;
  out.data.assign(static_cast<size_t>(frames) * features.dim,
                  static_cast<float>(std::log(kLogFloor)));
  const int copy = std::min(frames, features.frames);
  std::copy(features.data.begin(),
            features.data.begin() + static_cast<size_t>(copy) * features.dim,
            out.data.begin());
  return out;
}

std::vector<uint8_t> encode_kwsf(const FeatureMatrix& features) {
  KWS_CHECK(features.frames >= 0 && features.dim >= 0 &&
                features.data.size() ==
                    static_cast<size_t>(features.frames) * features.dim,
            "encode_kwsf: inconsistent feature matrix");
  std::vector<uint8_t> out;
  out.reserve(16 + features.data.size() * 4);
  out.insert(out.end(), {'K', 'W', 'S', 'F'});
  auto push_u32 = [&out](uint32_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
  };
  push_u32(1);  // version
  push_u32(static_cast<uint32_t>(features.frames));
  push_u32(static_cast<uint32_t>(features.dim));
  for (float v : features.data) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    push_u32(bits);
  }
  return out;
}

FeatureMatrix decode_kwsf(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "KWSF", 4) != 0)
    throw FormatError("not a KWSF feature dump");
  auto u32_at = [&bytes](size_t off) {
    return static_cast<uint32_t>(bytes[off]) |
           (static_cast<uint32_t>(bytes[off + 1]) << 8) |
           (static_cast<uint32_t>(bytes[off + 2]) << 16) |
           (static_cast<uint32_t>(bytes[off + 3]) << 24);
  };
  const uint32_t version = u32_at(4);
  if (version != 1)
    throw FormatError("unsupported KWSF version " + std::to_string(version));
  const uint32_t t = u32_at(8), f = u32_at(12);
  const size_t need = 16 + static_cast<size_t>(t) * f * 4;
  if (bytes.size() != need) throw FormatError("KWSF payload size mismatch");
  FeatureMatrix out;
  out.frames = static_cast<int>(t);
  out.dim = static_cast<int>(f);
  out.data.resize(static_cast<size_t>(t) * f);
  for (size_t i = 0; i < out.data.size(); ++i) {
    const uint32_t bits = u32_at(16 + i * 4);
    std::memcpy(&out.data[i], &bits, 4);
  }
  return out;
}

void write_kwsf(const std::string& path, const FeatureMatrix& features) {
  write_file_bytes(path, encode_kwsf(features));
}

FeatureMatrix read_kwsf(const std::string& path) {
  return decode_kwsf(read_file_bytes(path));
}

}  // namespace kws

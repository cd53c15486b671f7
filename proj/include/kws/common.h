// kws/common.h

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

#ifndef KWS_COMMON_H_
#define KWS_COMMON_H_

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace kws {

// Error taxonomy. The CLI maps these onto its exit-code contract
// (config -> 1, data -> 2, numeric -> 3).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Tensor dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Byte-level container problems (bad magic, wrong codec, wrong version).
class FormatError : public Error {
 public:
  using Error::Error;
};

// File parsed but its contents are inconsistent (truncation, missing tensor).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Bad configuration value or unknown key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A datasource tag addressed a normalization branch that does not exist.
class RoutingError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

#define KWS_CHECK(cond, msg)                                        \
  do {                                                              \
    if (!(cond)) {                                                  \
      std::ostringstream kws_oss_;                                  \
      kws_oss_ << "check failed (" #cond "): " << msg;              \
      throw ::kws::ContractError(kws_oss_.str());                   \
    }                                                               \
  } while (false)

#define KWS_CHECK_SHAPE(cond, msg)                                  \
  do {                                                              \
    if (!(cond)) {                                                  \
      std::ostringstream kws_oss_;                                  \
      kws_oss_ << "shape mismatch (" #cond "): " << msg;            \
      throw ::kws::ShapeError(kws_oss_.str());                      \
    }                                                               \
  } while (false)

// splitmix64; used to derive independent per-example RNG streams from
// (global_seed, epoch, example_id) so parallel workers stay reproducible.
inline uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t HashCombine(uint64_t seed, uint64_t v) {
  return SplitMix64(seed ^ (0x9e3779b97f4a7c15ULL + v));
}

inline uint64_t DeriveSeed(uint64_t global_seed, uint64_t epoch, uint64_t example_id) {
  return HashCombine(HashCombine(global_seed, epoch), example_id);
}

// Deterministic PRNG (splitmix64 counter sequence) with explicit draw
// mappings, so generated values do not depend on standard-library
// distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_u01(); }

  // Uniform integer in [lo, hi], both inclusive.
  int uniform_int(int lo, int hi) {
    KWS_CHECK(lo <= hi, "uniform_int: empty range [" << lo << "," << hi << "]");
    const uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(
          uniform_int(0, static_cast<int>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

// Worker count for data-parallel loops, taken from KWS_NUM_WORKERS.
// Unset, empty, or invalid values fall back to 1 (fully serial).
inline int num_workers() {
  const char* env = std::getenv("KWS_NUM_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 1) return 1;
  if (n > 64) return 64;
  return static_cast<int>(n);
}

// Runs fn(i) for i in [0, n). With more than one worker the index range is
// split into contiguous chunks, one thread per chunk; fn must only write to
// per-index state so that the result is identical to the serial order.
template <typename Fn>
inline void parallel_for(int64_t n, Fn&& fn, int workers = num_workers()) {
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int64_t nthreads = std::min<int64_t>(workers, n);
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(nthreads));
  std::exception_ptr first_error;
  std::mutex error_mu;
  for (int64_t t = 0; t < nthreads; ++t) {
    const int64_t lo = n * t / nthreads;
    const int64_t hi = n * (t + 1) / nthreads;
    threads.emplace_back([&, lo, hi]() {
      try {
        for (int64_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace kws

#endif  // KWS_COMMON_H_

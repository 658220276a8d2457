// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace eras {

// Deterministic RNG with a portable bit stream. std::mt19937 itself is
// portable but the standard distributions are not, so scenes and weight
// inits would stop being byte-replayable across standard libraries.
// xoshiro256** seeded through splitmix64, with explicit uniform/normal
// transforms, keeps every draw reproducible from the seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : s_) word = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = -n % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Marsaglia polar method; consumes a variable number of draws but is
  // fully determined by the stream.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double mul = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * mul;
    have_spare_ = true;
    return u * mul;
  }

  // Stable child seed for (seed, stream_id); used to give every scene,
  // RIR and source its own stream so generation order never matters.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream_id) {
    std::uint64_t x = seed;
    std::uint64_t a = splitmix64(x);
    std::uint64_t y = stream_id + 0x632be59bd9b4e019ULL;
    std::uint64_t b = splitmix64(y);
    return a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  }

  std::string state_string() const {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%016llx:%016llx:%016llx:%016llx:%d",
                  static_cast<unsigned long long>(s_[0]),
                  static_cast<unsigned long long>(s_[1]),
                  static_cast<unsigned long long>(s_[2]),
                  static_cast<unsigned long long>(s_[3]),
                  have_spare_ ? 1 : 0);
    std::string out(buf);
    if (have_spare_) {
      char num[48];
      std::snprintf(num, sizeof(num), ":%a", spare_);
      out += num;
    }
    return out;
  }

  static Rng from_state_string(const std::string& s) {
    Rng r(0);
    unsigned long long a = 0, b = 0, c = 0, d = 0;
    int spare_flag = 0;
    int consumed = 0;
    int n = std::sscanf(s.c_str(), "%llx:%llx:%llx:%llx:%d%n", &a, &b, &c, &d,
                        &spare_flag, &consumed);
    if (n != 5) throw std::invalid_argument("bad rng state string");
    double spare = 0.0;
    if (spare_flag &&
        std::sscanf(s.c_str() + consumed, ":%la", &spare) != 1) {
      throw std::invalid_argument("bad rng spare value");
    }
    r.s_[0] = a;
    r.s_[1] = b;
    r.s_[2] = c;
    r.s_[3] = d;
    r.have_spare_ = spare_flag != 0;
    r.spare_ = spare;
    return r;
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace eras

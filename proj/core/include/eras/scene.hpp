// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "eras/rir.hpp"
#include "eras/waveform.hpp"

namespace eras {

inline constexpr int kNumSources = 2;
inline constexpr int kNumMics = 2;

// Ground-truth bundle for one two-speaker, two-channel scene.
// mixtures[m] equals the sum of images[.][m] by construction (plus the
// optional sensor noise when enabled).
struct MixtureScene {
  std::uint64_t seed = 0;
  int sample_rate = 0;
  std::vector<Waveform> dry;                          // [N]
  std::vector<std::vector<Rir>> rirs;                 // [N][M]
  std::vector<std::vector<Waveform>> images;          // [N][M]
  std::vector<std::vector<Waveform>> direct_path;     // [N][M]
  std::vector<std::vector<Waveform>> early;           // [N][M]
  std::vector<Waveform> noise;                        // [M], empty if disabled
  std::vector<Waveform> mixtures;                     // [M]

  std::size_t length() const { return mixtures.empty() ? 0 : mixtures[0].length(); }
};

// Everything needed to regenerate a scene bit-exactly.
struct SceneSpec {
  std::uint64_t seed = 0;
  int sample_rate = 8000;
  int duration = 16000;  // samples
  double rt60 = 0.2;
  int rir_length = 2048;
  double direct_to_reverb_db = 4.0;
  std::array<std::array<int, kNumMics>, kNumSources> delays{{{12, 12}, {18, 18}}};
  std::array<double, kNumSources> gains_db{0.0, 0.0};
  double early_window_ms = 50.0;
  // Sensor noise SNR in dB; +inf disables it (the default).
  double noise_snr_db = std::numeric_limits<double>::infinity();

  bool noise_enabled() const { return std::isfinite(noise_snr_db); }
};

// Band-limited modulated noise burst ("speech-like" test source).
// band 0 concentrates energy low in the spectrum, band 1 high.
Waveform make_speechlike_source(std::uint64_t rng_seed, int duration,
                                int sample_rate, int band, double gain_db);

// Renders images/direct/early/mixtures from dry sources and RIRs.
// Dry sources must share sample rate and length (N = 2, M = 2).
MixtureScene render_scene(const std::vector<Waveform>& dry,
                          const std::vector<std::vector<Rir>>& rirs,
                          double early_window_ms);

// Full deterministic scene synthesis from a spec.
MixtureScene make_scene(const SceneSpec& spec);

}  // namespace eras

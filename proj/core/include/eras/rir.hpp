// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <vector>

namespace eras {

// Synthetic room impulse response: a unit direct tap followed by an
// exponentially decaying Gaussian noise tail.
struct Rir {
  std::vector<double> taps;
  int delay_to_direct = 0;
  int sample_rate = 0;
};

struct RirParams {
  double rt60 = 0.2;          // seconds, -60 dB decay time of the tail
  int delay = 0;              // samples before the direct tap
  int length = 4096;          // total taps
  double direct_to_reverb_db = 4.0;  // direct tap energy over tail energy
};

// rt60 must lie in [0.05, 1.0] s. Same seed, same taps.
Rir synth_rir(const RirParams& params, std::uint64_t rng_seed, int sample_rate);

// Direct tap only (everything after the direct tap zeroed).
Rir direct_path_of(const Rir& rir);

// Direct tap plus reflections within early_window_ms after it.
Rir early_part_of(const Rir& rir, double early_window_ms);

}  // namespace eras

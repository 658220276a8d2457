// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "eras/rir.hpp"

#include <cmath>

#include "eras/common.hpp"
#include "eras/rng.hpp"

namespace eras {

Rir synth_rir(const RirParams& params, std::uint64_t rng_seed, int sample_rate) {
  require(params.rt60 >= 0.05 && params.rt60 <= 1.0, ErrorKind::config,
          "rt60 out of range [0.05, 1.0] s");
  require(params.delay >= 0, ErrorKind::config, "rir delay must be nonnegative");
  require(params.length > params.delay + 1, ErrorKind::config,
          "rir length must exceed the direct-tap delay");
  require(sample_rate > 0, ErrorKind::config, "rir sample rate must be positive");

  Rir rir;
  rir.delay_to_direct = params.delay;
  rir.sample_rate = sample_rate;
  rir.taps.assign(static_cast<std::size_t>(params.length), 0.0);

  // Amplitude envelope e^{-alpha t} decays 60 dB (factor 1e-3) at rt60.
  const double alpha = std::log(1000.0) / params.rt60;
  // Tail standard deviation chosen so total tail energy sits
  // direct_to_reverb_db below the unit direct tap:
  //   sum sigma^2 e^{-2 alpha n/fs} ~= sigma^2 fs/(2 alpha)
  const double tail_energy = std::pow(10.0, -params.direct_to_reverb_db / 10.0);
  const double sigma =
      std::sqrt(tail_energy * 2.0 * alpha / static_cast<double>(sample_rate));

  Rng rng(rng_seed);
  rir.taps[params.delay] = 1.0;
  for (int i = params.delay + 1; i < params.length; ++i) {
    const double t = static_cast<double>(i - params.delay) / sample_rate;
    rir.taps[i] = sigma * std::exp(-alpha * t) * rng.normal();
  }
  return rir;
}

Rir direct_path_of(const Rir& rir) {
  Rir out = rir;
  for (std::size_t i = static_cast<std::size_t>(rir.delay_to_direct) + 1;
       i < out.taps.size(); ++i) {
    out.taps[i] = 0.0;
  }
  return out;
}

Rir early_part_of(const Rir& rir, double early_window_ms) {
  Rir out = rir;
  const int early_samples =
      static_cast<int>(std::lround(early_window_ms * 1e-3 * rir.sample_rate));
  const std::size_t cut = static_cast<std::size_t>(rir.delay_to_direct + early_samples);
  for (std::size_t i = cut; i < out.taps.size(); ++i) out.taps[i] = 0.0;
  return out;
}

}  // namespace eras

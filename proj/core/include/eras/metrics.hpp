// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <string>
#include <vector>

#include "eras/relative_rir.hpp"
#include "eras/scene.hpp"
#include "eras/stft.hpp"
#include "eras/waveform.hpp"

namespace eras {

inline constexpr double kMetricCapDb = 60.0;

// Scale-invariant SNR in dB, capped at +-60 dB. The target component is
// alpha * ref with alpha = <est, ref> / ||ref||^2.
double si_snr(const std::vector<double>& ref, const std::vector<double>& est);
double si_snr(const Waveform& ref, const Waveform& est);

// Allowed-distortion SDR: the best least-squares FIR (default 512 taps) of
// ref explaining est defines the target; the ratio of its energy to the
// residual energy is returned in dB (capped at +-60).
double sdr_filtered(const Waveform& ref, const Waveform& est, int taps = 512);

struct EvalResult {
  std::array<double, kNumSources> si_snr_db{};
  std::array<double, kNumSources> sdr_db{};
  std::array<int, kNumSources> permutation{0, 1};  // est index per reference
  double mean_si_snr_db = 0.0;
  double mean_sdr_db = 0.0;
};

// FCP-aligned evaluation at the reference channel: the separated
// spectrograms are FCP-mapped onto the reference-channel mixture so that
// references and estimates are time-aligned, then scored under the best
// permutation by mean SI-SNR.
EvalResult aligned_eval(const std::array<Waveform, kNumSources>& refs,
                        const std::vector<Spectrogram>& ests,
                        const Waveform& mixture_ref,
                        const std::vector<Waveform>& all_mixtures,
                        const StftConfig& stft_cfg, const FcpConfig& fcp_cfg,
                        int sdr_taps = 512);

}  // namespace eras

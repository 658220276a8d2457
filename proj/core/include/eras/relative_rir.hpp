// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <vector>

#include "eras/stft.hpp"
#include "eras/waveform.hpp"

namespace eras {

// STFT-domain forward convolutive prediction filter configuration. The
// filter stacks k_past past frames, the current frame and k_future future
// frames per frequency, so K = k_past + 1 + k_future.
struct FcpConfig {
  int k_past = 19;
  int k_future = 1;
  double lambda_floor_coeff = 1e-4;
  // Tikhonov diagonal, relative: eps * trace(A)/K is added to A.
  double regularizer_eps = 1e-10;

  int num_taps() const { return k_past + 1 + k_future; }
  void validate() const;
};

struct WienerConfig {
  int filter_length = 512;
  int anticausal_taps = 0;
  double regularizer_eps = 1e-10;

  void validate() const;
};

// Per-bin weights 1/lambda with the floor term keeping them finite:
// lambda = mean_m |X^(m)|^2 + floor * max_{t,f} mean_m |X^(m)|^2.
struct LambdaWeights {
  int num_frames = 0;
  int num_bins = 0;
  std::vector<double> values;  // [T x F], strictly positive

  double at(int t, int f) const {
    return values[static_cast<std::size_t>(t) * num_bins + f];
  }
};

LambdaWeights compute_lambda(const std::vector<Spectrogram>& mixture_specs,
                             double floor_coeff);

struct FcpResult {
  Spectrogram mapped;
  // Row-major [F x K] filters, stacking order [t-K_past ... t ... t+K_future].
  std::vector<std::complex<double>> filters;
};

// Per-frequency weighted least squares: g_f minimizes
//   sum_t (1/lambda_{t,f}) |X_{t,f} - g_f^H s~_{t,f}|^2
// where s~ stacks frames of `est` and X is the target-channel mixture.
// The normal equations (A + eps I) g = b use A = sum_t s~ s~^H / lambda and
// b = sum_t s~ conj(X) / lambda; out-of-range stacked frames are zero.
// The mapped estimate is g_f^H s~_{t,f}.
FcpResult fcp_map(const Spectrogram& est, const Spectrogram& target_mix,
                  const LambdaWeights& lambda, const FcpConfig& cfg);

struct WienerResult {
  Waveform mapped;
  std::vector<double> filter;  // taps, index k maps to lag k - anticausal_taps
};

// Time-domain least squares: w minimizes sum_l |x_l - (w * est)_l|^2 over
// the input's support; mapped is w * est truncated to the input length.
WienerResult wiener_map(const Waveform& est, const Waveform& target_mix,
                        const WienerConfig& cfg);

enum class MappingMethod { fcp, wiener };

// Applies the chosen mapping to each source estimate independently.
std::vector<Spectrogram> map_sources_fcp(const std::vector<Spectrogram>& ests,
                                         const Spectrogram& target_mix,
                                         const LambdaWeights& lambda,
                                         const FcpConfig& cfg);
std::vector<Waveform> map_sources_wiener(const std::vector<Waveform>& ests,
                                         const Waveform& target_mix,
                                         const WienerConfig& cfg);

}  // namespace eras

// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "eras/metrics.hpp"

#include <cmath>

#include "eras/common.hpp"

namespace eras {

namespace {
double ratio_to_db_capped(double target_energy, double residual_energy) {
  // Caps keep degenerate fits out of the reports (documented footer).
  if (target_energy <= 0.0) return -kMetricCapDb;
  const double floor = target_energy * 1e-12;
  const double ratio = target_energy / std::max(residual_energy, floor);
  const double db = 10.0 * std::log10(ratio);
  return std::min(kMetricCapDb, std::max(-kMetricCapDb, db));
}
}  // namespace

double si_snr(const std::vector<double>& ref, const std::vector<double>& est) {
  require(ref.size() == est.size(), ErrorKind::data, "si_snr: length mismatch");
  const double ref_energy = energy(ref);
  require(ref_energy > 0.0, ErrorKind::data, "si_snr: zero reference");
  const double alpha = dot(est, ref) / ref_energy;
  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double t = alpha * ref[i];
    const double r = est[i] - t;
    target += t * t;
    residual += r * r;
  }
  return ratio_to_db_capped(target, residual);
}

double si_snr(const Waveform& ref, const Waveform& est) {
  return si_snr(ref.mono(), est.mono());
}

double sdr_filtered(const Waveform& ref, const Waveform& est, int taps) {
  require(taps >= 1, ErrorKind::config, "sdr_filtered: taps must be >= 1");
  require(ref.length() == est.length(), ErrorKind::data,
          "sdr_filtered: length mismatch");
  require(energy(ref.mono()) > 0.0, ErrorKind::data, "sdr_filtered: zero reference");
  WienerConfig cfg;
  cfg.filter_length = taps;
  const WienerResult fit = wiener_map(ref, est, cfg);
  const auto& proj = fit.mapped.mono();
  const auto& e = est.mono();
  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    target += proj[i] * proj[i];
    const double r = e[i] - proj[i];
    residual += r * r;
  }
  return ratio_to_db_capped(target, residual);
}

EvalResult aligned_eval(const std::array<Waveform, kNumSources>& refs,
                        const std::vector<Spectrogram>& ests,
                        const Waveform& mixture_ref,
                        const std::vector<Waveform>& all_mixtures,
                        const StftConfig& stft_cfg, const FcpConfig& fcp_cfg,
                        int sdr_taps) {
  require(ests.size() == kNumSources, ErrorKind::config,
          "aligned_eval expects N = 2 estimates");
  const int length = static_cast<int>(mixture_ref.length());

  std::vector<Spectrogram> mix_specs;
  for (const auto& m : all_mixtures) mix_specs.push_back(stft(m.mono(), stft_cfg));
  const LambdaWeights lambda = compute_lambda(mix_specs, fcp_cfg.lambda_floor_coeff);
  const Spectrogram target = stft(mixture_ref.mono(), stft_cfg);

  std::array<Waveform, kNumSources> aligned;
  for (int n = 0; n < kNumSources; ++n) {
    const FcpResult mapped = fcp_map(ests[n], target, lambda, fcp_cfg);
    aligned[n] = istft_waveform(mapped.mapped, stft_cfg, length,
                                mixture_ref.sample_rate);
  }

  // Best permutation by mean SI-SNR, brute force over both orderings.
  std::array<std::array<double, kNumSources>, kNumSources> snr{};
  for (int r = 0; r < kNumSources; ++r)
    for (int e = 0; e < kNumSources; ++e) snr[r][e] = si_snr(refs[r], aligned[e]);
  const double mean_identity = 0.5 * (snr[0][0] + snr[1][1]);
  const double mean_swapped = 0.5 * (snr[0][1] + snr[1][0]);

  EvalResult out;
  out.permutation = mean_swapped > mean_identity ? std::array<int, 2>{1, 0}
                                                 : std::array<int, 2>{0, 1};
  for (int r = 0; r < kNumSources; ++r) {
    const int e = out.permutation[r];
    out.si_snr_db[r] = snr[r][e];
    out.sdr_db[r] = sdr_filtered(refs[r], aligned[e], sdr_taps);
  }
  out.mean_si_snr_db = 0.5 * (out.si_snr_db[0] + out.si_snr_db[1]);
  out.mean_sdr_db = 0.5 * (out.sdr_db[0] + out.sdr_db[1]);
  return out;
}

}  // namespace eras

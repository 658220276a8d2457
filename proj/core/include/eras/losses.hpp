// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "eras/stft.hpp"

namespace eras {

inline constexpr double kMagFloor = 1e-8;

struct LossWeights {
  // Per-mic RAS weights. alpha[m != m_r] is the cross-channel weight
  // (normally 1); alpha[m_r] enables the same-channel term and must stay
  // below 1 (default 0 = disabled).
  std::array<double, 2> alpha{1.0, 0.0};  // {cross, same-channel}
  double beta = 0.3;                      // ISMS weight
  double gamma = 0.0;                     // ICC weight

  double alpha_cross() const { return alpha[0]; }
  double alpha_ref() const { return alpha[1]; }
  void validate() const;
};

// Per-direction loss components; totals are the documented weighted sum.
struct DirectionLoss {
  std::string direction;  // e.g. "L->R"
  double ras = 0.0;
  double isms = 0.0;
  double icc = 0.0;
  double ras_self = 0.0;  // same-channel RAS term (alpha_ref > 0 only)
  std::array<int, 2> icc_permutation{0, 1};
};

struct LossReport {
  double total = 0.0;
  std::vector<DirectionLoss> directions;
};

// Signal-level loss L: the L1 distance between real parts, imaginary parts
// and magnitudes of ref and est, normalized by the same combined L1 norm of
// the mixture (its RI parts plus magnitudes).
double signal_loss(const Spectrogram& ref, const Spectrogram& est,
                   const Spectrogram& norm_mix);

// Precomputed denominator so hot paths can reuse it.
double signal_loss_denominator(const Spectrogram& norm_mix);
double signal_loss_with_denominator(const Spectrogram& ref, const Spectrogram& est,
                                    double denominator);

// Mixture reconstruction loss: L(mix_target, sum_n mapped_n).
double ras_loss(const Spectrogram& mix_target, const std::vector<Spectrogram>& mapped,
                const Spectrogram& norm_mix);

// Intra-source magnitude scattering: per-frame variance over frequency of
// the sources' log-magnitudes, relative to the mixture's. Magnitudes are
// floored at mag_floor before the log.
double isms_loss(const std::vector<Spectrogram>& mapped, const Spectrogram& mix_at_m,
                 double mag_floor = kMagFloor);

// Inter-channel consistency with exhaustive N=2 permutation search.
// Returns the minimum loss and the argmin permutation (perm[i] is the
// cross-mapped index matched to self_mapped[i]). Gradient semantics (self
// branch constant) live in the training graph; this is the value.
std::pair<double, std::array<int, 2>> icc_loss(
    const std::vector<Spectrogram>& self_mapped,
    const std::vector<Spectrogram>& cross_mapped, const Spectrogram& norm_mix);

// One cross-channel direction m_r -> m of the combined loss.
struct DirectedTermInputs {
  std::string direction;
  const Spectrogram* mix_target = nullptr;             // X^(m)
  const std::vector<Spectrogram>* cross_mapped = nullptr;  // s^(m_r -> m)
  // Optional, needed when gamma > 0 (ICC) or alpha_ref > 0 (self RAS):
  const std::vector<Spectrogram>* self_mapped = nullptr;   // s^(m -> m)
  const Spectrogram* mix_ref = nullptr;                // X^(m_r), self RAS target
  const std::vector<Spectrogram>* self_mapped_ref = nullptr;  // s^(m_r -> m_r)
};

// Combined ERAS loss over a batch of directed terms:
//   total = sum_dir [ alpha_cross * ras + beta * isms + gamma * icc ]
//         + alpha_ref * same-channel ras terms (when enabled).
LossReport eras_loss(const std::vector<DirectedTermInputs>& terms,
                     const LossWeights& weights);

std::string loss_csv_header();
std::string loss_csv_row(int step, const DirectionLoss& d);

}  // namespace eras

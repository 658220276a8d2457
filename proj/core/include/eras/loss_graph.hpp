// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <optional>
#include <vector>

#include "eras/losses.hpp"
#include "eras/masknet.hpp"
#include "eras/relative_rir.hpp"
#include "eras/scene.hpp"
#include "eras/stft.hpp"
#include "eras/tape.hpp"

namespace eras {

// Differentiable counterparts of the eager ops in relative_rir.hpp and
// losses.hpp, built from tape primitives. The eager implementations stay
// the reference; unit tests pin both routes together.

// FCP on the tape: per frequency, the weighted normal equations are
// assembled with matmuls, embedded as a 2Kx2K real system and solved by
// the linear-solve primitive, so gradients flow through the solve via its
// adjoint. With detach_filters the filters are treated as constants and
// gradients only flow through the filter application.
SpecVar fcp_map_tape(ad::Tape& tape, const SpecVar& est,
                     const Spectrogram& target_mix, const LambdaWeights& lambda,
                     const FcpConfig& cfg, bool detach_filters);

ad::Var signal_loss_tape(ad::Tape& tape, const SpecVar& ref, const SpecVar& est,
                         double denominator);
ad::Var ras_loss_tape(ad::Tape& tape, const SpecVar& mix_target,
                      const std::array<SpecVar, kNumSources>& mapped,
                      double denominator);
ad::Var isms_loss_tape(ad::Tape& tape, const std::array<SpecVar, kNumSources>& mapped,
                       double denominator, double mag_floor = kMagFloor);
std::pair<ad::Var, std::array<int, 2>> icc_loss_tape(
    ad::Tape& tape, const std::array<SpecVar, kNumSources>& self_mapped,
    const std::array<SpecVar, kNumSources>& cross_mapped, double denominator);

// Precomputed per-scene constants for the training graph.
struct ScenePrep {
  std::array<Spectrogram, kNumMics> mix_spec;
  LambdaWeights lambda;
  std::array<double, kNumMics> loss_denominator;  // signal-loss normalizer
  std::array<double, kNumMics> isms_denominator;  // sum_t var_f log|X|
};

ScenePrep prepare_scene(const MixtureScene& scene, const StftConfig& stft_cfg);

struct SceneLossGraph {
  ad::Var total;
  LossReport report;
};

// Builds the full two-direction training loss for one scene:
//   for (m_r, m) in {(L,R), (R,L)}:
//     alpha_cross * RAS + beta * ISMS + gamma * ICC (+ alpha_ref * self RAS)
// Self-channel maps are built only when gamma or alpha_ref need them; the
// ICC pseudo-targets always enter behind stop_grad.
SceneLossGraph build_scene_loss(ad::Tape& tape, const std::vector<ad::Var>& params,
                                const MaskNetConfig& net_cfg, const ScenePrep& prep,
                                const LossWeights& weights, const FcpConfig& fcp_cfg,
                                bool detach_fcp_filters);

}  // namespace eras

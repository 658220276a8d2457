// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "eras/scene.hpp"
#include "eras/stft.hpp"
#include "eras/tape.hpp"

namespace eras {

// Toy per-frame mask MLP. Input features per frame: standardized
// log-magnitude (F) plus raw RI parts (2F) of the mixture frame. Output:
// one complex (RI) mask per source per bin, applied multiplicatively to
// the mixture spectrogram. Four output heads (re/im x source) keep the
// final layer free of column slicing.
struct MaskNetConfig {
  int num_bins = 129;
  std::array<int, 2> hidden{128, 128};
  double feature_mag_floor = 1e-4;

  int feature_dim() const { return 3 * num_bins; }
  void validate() const;
};

struct MaskNet {
  MaskNetConfig config;
  // W1, b1, W2, b2, then per head h in {s0_re, s0_im, s1_re, s1_im}: Wh, bh.
  std::vector<ad::Tensor> params;

  static MaskNet init(const MaskNetConfig& cfg, std::uint64_t seed);
  std::size_t num_params() const;
};

// [T x 3F] feature matrix for one mixture spectrogram.
ad::Tensor masknet_features(const Spectrogram& mix, const MaskNetConfig& cfg);

// Complex spectrogram on a tape, as paired real matrices.
struct SpecVar {
  ad::Var re, im;
};

// Forward pass on a tape: params may be tape params (training) or
// constants (inference). Returns one SpecVar per source.
std::array<SpecVar, kNumSources> masknet_forward(ad::Tape& tape,
                                                 const std::vector<ad::Var>& params,
                                                 const MaskNetConfig& cfg,
                                                 const Spectrogram& mix);

// Convenience helpers for moving spectrograms on/off tapes.
SpecVar spec_constant(ad::Tape& tape, const Spectrogram& s);
Spectrogram spec_from_tape(const ad::Tape& tape, const SpecVar& v,
                           const Spectrogram& like);

// Eager separation: runs the forward pass with constant params.
std::vector<Spectrogram> separate(const MaskNet& net, const Spectrogram& mix);

}  // namespace eras

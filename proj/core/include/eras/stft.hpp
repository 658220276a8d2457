// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "eras/waveform.hpp"

namespace eras {

enum class WindowKind { sqrt_hann };

struct StftConfig {
  int window_length = 256;  // 32 ms at 8 kHz
  int hop_length = 64;      // 8 ms at 8 kHz
  int fft_size = 256;
  WindowKind window_kind = WindowKind::sqrt_hann;

  int num_bins() const { return fft_size / 2 + 1; }
  void validate() const;
  bool operator==(const StftConfig&) const = default;
};

// Complex T x F spectrogram. original_length is carried so the inverse can
// truncate exactly.
struct Spectrogram {
  int num_frames = 0;
  int num_bins = 0;
  std::vector<std::complex<double>> bins;  // row-major [T x F]
  StftConfig config;
  int original_length = 0;

  std::complex<double>& at(int t, int f) { return bins[static_cast<std::size_t>(t) * num_bins + f]; }
  const std::complex<double>& at(int t, int f) const {
    return bins[static_cast<std::size_t>(t) * num_bins + f];
  }
  static Spectrogram zeros(int t, int f, const StftConfig& cfg, int original_length);
  bool same_shape(const Spectrogram& o) const {
    return num_frames == o.num_frames && num_bins == o.num_bins;
  }
};

// Periodic sqrt-Hann analysis window of the configured length.
std::vector<double> make_window(const StftConfig& cfg);

// Number of frames produced for a signal of the given length:
// the signal is reflect-padded by window/2 on both ends, then framed with
// the hop until every padded sample is covered (zero padding on the right
// for the final frame). T = ceil(length / hop) + 1.
int stft_num_frames(int length, const StftConfig& cfg);

Spectrogram stft(const std::vector<double>& samples, const StftConfig& cfg);
Spectrogram stft(const Waveform& w, const StftConfig& cfg);

// Weighted overlap-add inverse with the same window; exact reconstruction
// for spectrograms produced by stft(). `length` selects the number of
// output samples (usually Spectrogram::original_length).
std::vector<double> istft(const Spectrogram& spec, const StftConfig& cfg, int length);
Waveform istft_waveform(const Spectrogram& spec, const StftConfig& cfg, int length,
                        int sample_rate);

}  // namespace eras

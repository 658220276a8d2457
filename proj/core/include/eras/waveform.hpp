// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace eras {

// Multi-channel time-domain signal. All channels share one length and
// sample rate; samples are 64-bit floats throughout the library, WAV I/O
// converts at the boundary.
struct Waveform {
  std::vector<std::vector<double>> channels;
  int sample_rate = 0;

  Waveform() = default;
  Waveform(std::vector<double> mono, int rate)
      : channels{std::move(mono)}, sample_rate(rate) {}
  Waveform(std::vector<std::vector<double>> chans, int rate)
      : channels(std::move(chans)), sample_rate(rate) {}

  std::size_t num_channels() const { return channels.size(); }
  std::size_t length() const { return channels.empty() ? 0 : channels[0].size(); }
  const std::vector<double>& mono() const;

  // Throws if empty, ragged, or any sample is non-finite.
  void validate() const;
};

// Population standard deviation (mean removed) over all channels.
double waveform_std(const Waveform& w);

// Scales the waveform to unit standard deviation. Returns the scaled copy
// and the scale that was divided out so callers can undo it.
// Zero-variance input is an error ("degenerate input").
std::pair<Waveform, double> normalize_by_std(const Waveform& w);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double energy(const std::vector<double>& a);

}  // namespace eras

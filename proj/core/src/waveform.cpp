// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "eras/waveform.hpp"

#include <cmath>

#include "eras/common.hpp"

namespace eras {

const std::vector<double>& Waveform::mono() const {
  require(channels.size() == 1, ErrorKind::data,
          "expected a single-channel waveform");
  return channels[0];
}

void Waveform::validate() const {
  require(!channels.empty(), ErrorKind::data, "waveform has no channels");
  require(sample_rate > 0, ErrorKind::data, "waveform sample rate must be positive");
  const std::size_t len = channels[0].size();
  require(len > 0, ErrorKind::data, "waveform has zero length");
  for (const auto& ch : channels) {
    require(ch.size() == len, ErrorKind::data, "waveform channels have unequal length");
    require(all_finite(ch), ErrorKind::data, "waveform contains non-finite samples");
  }
}

double waveform_std(const Waveform& w) {
  w.validate();
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& ch : w.channels) {
    for (double x : ch) sum += x;
    n += ch.size();
  }
  const double mean = sum / static_cast<double>(n);
  double acc = 0.0;
  for (const auto& ch : w.channels) {
    for (double x : ch) acc += (x - mean) * (x - mean);
  }
  return std::sqrt(acc / static_cast<double>(n));
}

std::pair<Waveform, double> normalize_by_std(const Waveform& w) {
  const double sd = waveform_std(w);
  require(sd > 0.0, ErrorKind::data, "degenerate input: zero variance");
  Waveform out = w;
  const double inv = 1.0 / sd;
  for (auto& ch : out.channels) {
    for (double& x : ch) x *= inv;
  }
  return {std::move(out), sd};
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  const std::size_t n = a.size() < b.size() ? a.size() : b.size();
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double energy(const std::vector<double>& a) { return dot(a, a); }

}  // namespace eras

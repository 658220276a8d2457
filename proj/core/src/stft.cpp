// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "eras/stft.hpp"

#include <cmath>

#include "eras/common.hpp"
#include "eras/fft.hpp"

namespace eras {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;

// Reflect padding: [d c b | a b c d ... w x y z | y x w]
std::vector<double> reflect_pad(const std::vector<double>& x, int pad,
                                int right_extra) {
  const int n = static_cast<int>(x.size());
  std::vector<double> out(static_cast<std::size_t>(n + 2 * pad + right_extra), 0.0);
  for (int i = 0; i < pad; ++i) out[i] = x[pad - i];
  for (int i = 0; i < n; ++i) out[pad + i] = x[i];
  for (int i = 0; i < pad; ++i) {
    const int src = n - 2 - i;
    out[pad + n + i] = x[src >= 0 ? src : 0];
  }
  return out;
}
}  // namespace

void StftConfig::validate() const {
  require(window_length > 0 && hop_length > 0 && fft_size > 0, ErrorKind::config,
          "stft sizes must be positive");
  require(window_length % hop_length == 0, ErrorKind::config,
          "hop_length must divide window_length");
  require(hop_length <= window_length / 2, ErrorKind::config,
          "hop_length must be at most window_length/2 for sqrt-Hann overlap-add");
  require(fft_size >= window_length, ErrorKind::config,
          "fft_size must be at least window_length");
  require((fft_size & (fft_size - 1)) == 0, ErrorKind::config,
          "fft_size must be a power of two");
  require(window_length % 2 == 0, ErrorKind::config, "window_length must be even");
}

std::vector<double> make_window(const StftConfig& cfg) {
  std::vector<double> w(cfg.window_length);
  for (int n = 0; n < cfg.window_length; ++n) {
    const double hann =
        0.5 * (1.0 - std::cos(2.0 * kPi * n / static_cast<double>(cfg.window_length)));
    w[n] = std::sqrt(hann);
  }
  return w;
}

int stft_num_frames(int length, const StftConfig& cfg) {
  return (length + cfg.hop_length - 1) / cfg.hop_length + 1;
}

Spectrogram Spectrogram::zeros(int t, int f, const StftConfig& cfg, int original_length) {
  Spectrogram s;
  s.num_frames = t;
  s.num_bins = f;
  s.bins.assign(static_cast<std::size_t>(t) * f, {0.0, 0.0});
  s.config = cfg;
  s.original_length = original_length;
  return s;
}

Spectrogram stft(const std::vector<double>& samples, const StftConfig& cfg) {
  cfg.validate();
  const int len = static_cast<int>(samples.size());
  require(len >= cfg.window_length, ErrorKind::data, "input too short");
  require(all_finite(samples), ErrorKind::data, "stft input contains non-finite samples");

  const int W = cfg.window_length;
  const int H = cfg.hop_length;
  const int T = stft_num_frames(len, cfg);
  const int F = cfg.num_bins();
  const int padded_needed = (T - 1) * H + W;
  const int right_extra = padded_needed - (len + W);
  const std::vector<double> padded = reflect_pad(samples, W / 2, right_extra > 0 ? right_extra : 0);
  const std::vector<double> window = make_window(cfg);

  Spectrogram out = Spectrogram::zeros(T, F, cfg, len);
  std::vector<double> frame(static_cast<std::size_t>(cfg.fft_size), 0.0);
  for (int t = 0; t < T; ++t) {
    const int start = t * H;
    for (int n = 0; n < W; ++n) frame[n] = padded[start + n] * window[n];
    for (int n = W; n < cfg.fft_size; ++n) frame[n] = 0.0;
    const auto spec = rfft(frame, static_cast<std::size_t>(cfg.fft_size));
    for (int f = 0; f < F; ++f) out.at(t, f) = spec[f];
  }
  return out;
}

Spectrogram stft(const Waveform& w, const StftConfig& cfg) {
  return stft(w.mono(), cfg);
}

std::vector<double> istft(const Spectrogram& spec, const StftConfig& cfg, int length) {
  cfg.validate();
  require(spec.num_bins == cfg.num_bins(), ErrorKind::config,
          "spectrogram bin count does not match stft config");
  require(length > 0, ErrorKind::config, "istft length must be positive");
  const int W = cfg.window_length;
  const int H = cfg.hop_length;
  const int T = spec.num_frames;
  const int max_len = (T - 1) * H + W / 2;
  require(length <= max_len, ErrorKind::config,
          "istft length exceeds representable frames");

  const std::vector<double> window = make_window(cfg);
  const int padded_len = (T - 1) * H + W;
  std::vector<double> num(static_cast<std::size_t>(padded_len), 0.0);
  std::vector<double> den(static_cast<std::size_t>(padded_len), 0.0);

  std::vector<std::complex<double>> half(static_cast<std::size_t>(spec.num_bins));
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < spec.num_bins; ++f) half[f] = spec.at(t, f);
    const auto frame = irfft(half, static_cast<std::size_t>(cfg.fft_size));
    const int start = t * H;
    for (int n = 0; n < W; ++n) {
      num[start + n] += frame[n] * window[n];
      den[start + n] += window[n] * window[n];
    }
  }

  std::vector<double> out(static_cast<std::size_t>(length), 0.0);
  const int offset = W / 2;
  for (int i = 0; i < length; ++i) {
    const double d = den[offset + i];
    require(d > 0.0, ErrorKind::numerical, "istft window coverage gap");
    out[i] = num[offset + i] / d;
  }
  return out;
}

Waveform istft_waveform(const Spectrogram& spec, const StftConfig& cfg, int length,
                        int sample_rate) {
  return Waveform(istft(spec, cfg, length), sample_rate);
}

}  // namespace eras

// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "eras/scene.hpp"

#include <algorithm>
#include <cmath>

#include "eras/common.hpp"
#include "eras/fft.hpp"
#include "eras/rng.hpp"
#include "eras/stft.hpp"

namespace eras {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;

std::vector<double> convolve_truncated(const std::vector<double>& rir,
                                       const std::vector<double>& x) {
  auto full = fft_convolve(rir, x);
  full.resize(x.size());
  return full;
}

// Frame-level syllabic on/off envelope with raised-cosine ramps.
std::vector<double> syllable_envelope(Rng& rng, int frames) {
  std::vector<double> env(static_cast<std::size_t>(frames), 0.02);
  int t = 0;
  bool on = rng.uniform() < 0.85;  // usually start mid-burst
  while (t < frames) {
    int span = on ? 15 + static_cast<int>(rng.below(21))   // 120..280 ms
                  : 5 + static_cast<int>(rng.below(16));   // 40..160 ms
    if (t + span > frames) span = frames - t;
    if (on) {
      for (int i = 0; i < span; ++i) {
        double ramp = 1.0;
        const int r = 3;
        if (i < r) ramp = 0.5 * (1.0 - std::cos(kPi * (i + 1) / (r + 1)));
        if (span - 1 - i < r)
          ramp = std::min(ramp, 0.5 * (1.0 - std::cos(kPi * (span - i) / (r + 1))));
        env[t + i] = std::max(0.02, ramp);
      }
    }
    t += span;
    on = !on;
  }
  return env;
}
}  // namespace

Waveform make_speechlike_source(std::uint64_t rng_seed, int duration,
                                int sample_rate, int band, double gain_db) {
  require(duration >= 1024, ErrorKind::config, "source duration too short");
  require(band == 0 || band == 1, ErrorKind::config, "band must be 0 or 1");
  Rng rng(rng_seed);

  StftConfig cfg;  // synthesis grid: 32 ms / 8 ms at 8 kHz
  const int F = cfg.num_bins();
  const int T = stft_num_frames(duration, cfg);

  // Smooth random spectral envelope concentrated low (band 0) or high (band 1).
  const double centroid = band == 0 ? rng.uniform(0.10, 0.32) * (F - 1)
                                    : rng.uniform(0.55, 0.85) * (F - 1);
  const double width = rng.uniform(0.05, 0.12) * F;
  const double vibrato_hz = rng.uniform(1.5, 4.0);
  const double vibrato_phase = rng.uniform(0.0, 2.0 * kPi);
  const double vibrato_depth = rng.uniform(0.5, 2.5);

  const auto tenv = syllable_envelope(rng, T);

  Spectrogram spec = Spectrogram::zeros(T, F, cfg, duration);
  const double frame_dt = static_cast<double>(cfg.hop_length) / sample_rate;
  for (int t = 0; t < T; ++t) {
    const double c =
        centroid + vibrato_depth * std::sin(2.0 * kPi * vibrato_hz * t * frame_dt +
                                            vibrato_phase);
    for (int f = 0; f < F; ++f) {
      double env = std::exp(-0.5 * (f - c) * (f - c) / (width * width)) + 0.03;
      if (f == 0 || f == F - 1) env *= 0.1;  // keep DC/Nyquist small
      const double re = rng.normal();
      const double im = rng.normal();
      const double a = tenv[t] * env * 0.7071067811865476;
      spec.at(t, f) = {a * re, a * im};
    }
  }

  auto samples = istft(spec, cfg, duration);
  // Scale to a fixed RMS so scenes mix at comparable levels.
  double e = 0.0;
  for (double v : samples) e += v * v;
  const double rms = std::sqrt(e / duration);
  const double target = 0.05 * std::pow(10.0, gain_db / 20.0);
  const double s = rms > 0.0 ? target / rms : 0.0;
  for (double& v : samples) v *= s;
  return Waveform(std::move(samples), sample_rate);
}

MixtureScene render_scene(const std::vector<Waveform>& dry,
                          const std::vector<std::vector<Rir>>& rirs,
                          double early_window_ms) {
  require(dry.size() == kNumSources, ErrorKind::config,
          "render_scene expects exactly 2 dry sources");
  require(rirs.size() == kNumSources, ErrorKind::config, "rirs must be N x M");
  const int rate = dry[0].sample_rate;
  const std::size_t len = dry[0].length();
  for (const auto& d : dry) {
    d.validate();
    require(d.num_channels() == 1, ErrorKind::config, "dry sources must be mono");
    require(d.sample_rate == rate, ErrorKind::data, "mismatched sample rates");
    require(d.length() == len, ErrorKind::data,
            "dry sources must be trimmed/padded to equal length");
  }
  for (const auto& row : rirs) {
    require(row.size() == kNumMics, ErrorKind::config, "rirs must be N x M");
    for (const auto& r : row)
      require(r.sample_rate == rate, ErrorKind::data, "mismatched sample rates");
  }

  MixtureScene scene;
  scene.sample_rate = rate;
  scene.dry = dry;
  scene.rirs = rirs;
  scene.images.assign(kNumSources, std::vector<Waveform>(kNumMics));
  scene.direct_path.assign(kNumSources, std::vector<Waveform>(kNumMics));
  scene.early.assign(kNumSources, std::vector<Waveform>(kNumMics));
  for (int n = 0; n < kNumSources; ++n) {
    for (int m = 0; m < kNumMics; ++m) {
      const Rir& rir = rirs[n][m];
      scene.images[n][m] = Waveform(convolve_truncated(rir.taps, dry[n].mono()), rate);
      scene.direct_path[n][m] =
          Waveform(convolve_truncated(direct_path_of(rir).taps, dry[n].mono()), rate);
      scene.early[n][m] = Waveform(
          convolve_truncated(early_part_of(rir, early_window_ms).taps, dry[n].mono()),
          rate);
    }
  }
  scene.mixtures.assign(kNumMics, Waveform());
  for (int m = 0; m < kNumMics; ++m) {
    std::vector<double> mix(len, 0.0);
    for (int n = 0; n < kNumSources; ++n) {
      const auto& img = scene.images[n][m].mono();
      for (std::size_t i = 0; i < len; ++i) mix[i] += img[i];
    }
    scene.mixtures[m] = Waveform(std::move(mix), rate);
  }
  return scene;
}

MixtureScene make_scene(const SceneSpec& spec) {
  require(spec.duration > 0, ErrorKind::config, "scene duration must be positive");

  // Which output index carries the low band is itself randomized so nothing
  // downstream can rely on a fixed source order.
  Rng assign_rng(Rng::derive(spec.seed, 50));
  const int low_idx = assign_rng.uniform() < 0.5 ? 0 : 1;

  std::vector<Waveform> dry(kNumSources);
  for (int n = 0; n < kNumSources; ++n) {
    const int band = n == low_idx ? 0 : 1;
    dry[n] = make_speechlike_source(Rng::derive(spec.seed, 100 + n), spec.duration,
                                    spec.sample_rate, band, spec.gains_db[n]);
  }

  std::vector<std::vector<Rir>> rirs(kNumSources, std::vector<Rir>(kNumMics));
  for (int n = 0; n < kNumSources; ++n) {
    for (int m = 0; m < kNumMics; ++m) {
      RirParams rp;
      rp.rt60 = spec.rt60;
      rp.delay = spec.delays[n][m];
      rp.length = spec.rir_length;
      rp.direct_to_reverb_db = spec.direct_to_reverb_db;
      rirs[n][m] = synth_rir(rp, Rng::derive(spec.seed, 200 + 2 * n + m),
                             spec.sample_rate);
    }
  }

  MixtureScene scene = render_scene(dry, rirs, spec.early_window_ms);
  scene.seed = spec.seed;

  if (spec.noise_enabled()) {
    scene.noise.assign(kNumMics, Waveform());
    for (int m = 0; m < kNumMics; ++m) {
      Rng nrng(Rng::derive(spec.seed, 300 + m));
      auto& mix = scene.mixtures[m].channels[0];
      double e = 0.0;
      for (double v : mix) e += v * v;
      const double sigma = std::sqrt((e / mix.size()) *
                                     std::pow(10.0, -spec.noise_snr_db / 10.0));
      std::vector<double> noise(mix.size());
      for (std::size_t i = 0; i < mix.size(); ++i) {
        noise[i] = sigma * nrng.normal();
        mix[i] += noise[i];
      }
      scene.noise[m] = Waveform(std::move(noise), spec.sample_rate);
    }
  }
  return scene;
}

}  // namespace eras

// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "eras/masknet.hpp"

#include <cmath>

#include "eras/common.hpp"
#include "eras/rng.hpp"

namespace eras {

using ad::Shape;
using ad::Tensor;
using ad::Var;

void MaskNetConfig::validate() const {
  require(num_bins > 1, ErrorKind::config, "masknet: num_bins must exceed 1");
  require(hidden[0] > 0 && hidden[1] > 0, ErrorKind::config,
          "masknet: hidden sizes must be positive");
  require(feature_mag_floor > 0.0, ErrorKind::config,
          "masknet: feature mag floor must be positive");
}

MaskNet MaskNet::init(const MaskNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  MaskNet net;
  net.config = cfg;
  Rng rng(Rng::derive(seed, 7));
  auto uniform_init = [&](Shape s, int fan_in) {
    Tensor t(s);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.v) v = rng.uniform(-bound, bound);
    return t;
  };
  const int in = cfg.feature_dim();
  const int h1 = cfg.hidden[0];
  const int h2 = cfg.hidden[1];
  const int F = cfg.num_bins;
  net.params.push_back(uniform_init(Shape::mat(in, h1), in));
  net.params.push_back(uniform_init(Shape::vec(h1), in));
  net.params.push_back(uniform_init(Shape::mat(h1, h2), h1));
  net.params.push_back(uniform_init(Shape::vec(h2), h1));
  for (int head = 0; head < 2 * kNumSources; ++head) {
    net.params.push_back(uniform_init(Shape::mat(h2, F), h2));
    net.params.push_back(uniform_init(Shape::vec(F), h2));
  }
  return net;
}

std::size_t MaskNet::num_params() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.v.size();
  return n;
}

ad::Tensor masknet_features(const Spectrogram& mix, const MaskNetConfig& cfg) {
  require(mix.num_bins == cfg.num_bins, ErrorKind::config,
          "masknet: spectrogram bin count does not match configured F");
  const int T = mix.num_frames;
  const int F = mix.num_bins;
  Tensor feat(Shape::mat(T, 3 * F));
  // log-magnitudes standardized over the utterance
  double mean = 0.0;
  std::vector<double> logmag(static_cast<std::size_t>(T) * F);
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) {
      const double m = std::max(std::abs(mix.at(t, f)), cfg.feature_mag_floor);
      logmag[static_cast<std::size_t>(t) * F + f] = std::log(m);
      mean += logmag[static_cast<std::size_t>(t) * F + f];
    }
  }
  mean /= static_cast<double>(logmag.size());
  double var = 0.0;
  for (double v : logmag) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(logmag.size()));
  const double inv_sd = sd > 1e-12 ? 1.0 / sd : 1.0;
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) {
      feat.at(t, f) = (logmag[static_cast<std::size_t>(t) * F + f] - mean) * inv_sd;
      feat.at(t, F + f) = mix.at(t, f).real();
      feat.at(t, 2 * F + f) = mix.at(t, f).imag();
    }
  }
  return feat;
}

SpecVar spec_constant(ad::Tape& tape, const Spectrogram& s) {
  const int T = s.num_frames, F = s.num_bins;
  Tensor re(Shape::mat(T, F)), im(Shape::mat(T, F));
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) {
      re.at(t, f) = s.at(t, f).real();
      im.at(t, f) = s.at(t, f).imag();
    }
  }
  return SpecVar{tape.constant(std::move(re)), tape.constant(std::move(im))};
}

Spectrogram spec_from_tape(const ad::Tape& tape, const SpecVar& v,
                           const Spectrogram& like) {
  const Tensor& re = tape.value(v.re);
  const Tensor& im = tape.value(v.im);
  Spectrogram out = Spectrogram::zeros(like.num_frames, like.num_bins, like.config,
                                       like.original_length);
  for (int t = 0; t < out.num_frames; ++t)
    for (int f = 0; f < out.num_bins; ++f)
      out.at(t, f) = {re.at(t, f), im.at(t, f)};
  return out;
}

std::array<SpecVar, kNumSources> masknet_forward(ad::Tape& tape,
                                                 const std::vector<ad::Var>& params,
                                                 const MaskNetConfig& cfg,
                                                 const Spectrogram& mix) {
  require(params.size() == 4 + 4 * kNumSources, ErrorKind::config,
          "masknet: unexpected parameter count");
  const SpecVar mixv = spec_constant(tape, mix);
  const Var feat = tape.constant(masknet_features(mix, cfg));

  Var h1 = tape.tanh(tape.add_rowvec(tape.matmul(feat, params[0]), params[1]));
  Var h2 = tape.tanh(tape.add_rowvec(tape.matmul(h1, params[2]), params[3]));

  std::array<SpecVar, kNumSources> out;
  for (int n = 0; n < kNumSources; ++n) {
    const Var mask_re =
        tape.add_rowvec(tape.matmul(h2, params[4 + 4 * n]), params[5 + 4 * n]);
    const Var mask_im =
        tape.add_rowvec(tape.matmul(h2, params[6 + 4 * n]), params[7 + 4 * n]);
    const auto est = tape.cmul(mask_re, mask_im, mixv.re, mixv.im);
    out[n] = SpecVar{est[0], est[1]};
  }
  return out;
}

std::vector<Spectrogram> separate(const MaskNet& net, const Spectrogram& mix) {
  ad::Tape tape;
  std::vector<Var> params;
  params.reserve(net.params.size());
  for (const auto& p : net.params) params.push_back(tape.constant(p));
  const auto ests = masknet_forward(tape, params, net.config, mix);
  std::vector<Spectrogram> out;
  out.reserve(kNumSources);
  for (const auto& e : ests) out.push_back(spec_from_tape(tape, e, mix));
  return out;
}

}  // namespace eras

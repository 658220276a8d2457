// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "eras/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "eras/common.hpp"

namespace eras {

namespace {

double checked_abs(const std::complex<double>& z) { return std::abs(z); }

void check_shapes(const Spectrogram& a, const Spectrogram& b, const char* what) {
  require(a.same_shape(b), ErrorKind::data,
          std::string(what) + ": spectrogram shapes differ");
}

Spectrogram sum_spectrograms(const std::vector<Spectrogram>& specs) {
  Spectrogram out = specs.front();
  for (std::size_t i = 1; i < specs.size(); ++i) {
    check_shapes(out, specs[i], "sum of mapped sources");
    for (std::size_t k = 0; k < out.bins.size(); ++k) out.bins[k] += specs[i].bins[k];
  }
  return out;
}

// Per-frame population variance over frequency of floored log-magnitudes,
// summed over frames.
double log_mag_variance_sum(const Spectrogram& s, double mag_floor) {
  const int T = s.num_frames;
  const int F = s.num_bins;
  double total = 0.0;
  for (int t = 0; t < T; ++t) {
    double mean = 0.0;
    for (int f = 0; f < F; ++f) {
      const double m = std::max(checked_abs(s.at(t, f)), mag_floor);
      mean += std::log(m);
    }
    mean /= F;
    double var = 0.0;
    for (int f = 0; f < F; ++f) {
      const double m = std::max(checked_abs(s.at(t, f)), mag_floor);
      const double d = std::log(m) - mean;
      var += d * d;
    }
    total += var / F;
  }
  return total;
}

}  // namespace

void LossWeights::validate() const {
  require(alpha[0] >= 0.0 && alpha[1] >= 0.0, ErrorKind::config,
          "loss weights alpha must be nonnegative");
  require(alpha[1] == 0.0 || alpha[1] < 1.0, ErrorKind::config,
          "reference-channel alpha must stay below 1");
  require(beta >= 0.0 && gamma >= 0.0, ErrorKind::config,
          "beta and gamma must be nonnegative");
}

double signal_loss_denominator(const Spectrogram& norm_mix) {
  double den = 0.0;
  for (const auto& z : norm_mix.bins)
    den += std::abs(z.real()) + std::abs(z.imag()) + checked_abs(z);
  return den;
}

double signal_loss_with_denominator(const Spectrogram& ref, const Spectrogram& est,
                                    double denominator) {
  check_shapes(ref, est, "signal_loss");
  require(denominator > 0.0, ErrorKind::data, "signal_loss: zero-norm mixture");
  double num = 0.0;
  for (std::size_t k = 0; k < ref.bins.size(); ++k) {
    const auto& r = ref.bins[k];
    const auto& e = est.bins[k];
    num += std::abs(r.real() - e.real()) + std::abs(r.imag() - e.imag()) +
           std::abs(checked_abs(r) - checked_abs(e));
  }
  return num / denominator;
}

double signal_loss(const Spectrogram& ref, const Spectrogram& est,
                   const Spectrogram& norm_mix) {
  return signal_loss_with_denominator(ref, est, signal_loss_denominator(norm_mix));
}

double ras_loss(const Spectrogram& mix_target, const std::vector<Spectrogram>& mapped,
                const Spectrogram& norm_mix) {
  require(!mapped.empty(), ErrorKind::config, "ras_loss needs mapped sources");
  const Spectrogram sum = sum_spectrograms(mapped);
  return signal_loss(mix_target, sum, norm_mix);
}

double isms_loss(const std::vector<Spectrogram>& mapped, const Spectrogram& mix_at_m,
                 double mag_floor) {
  require(!mapped.empty(), ErrorKind::config, "isms_loss needs >= 1 source");
  require(mag_floor > 0.0, ErrorKind::config, "isms mag floor must be positive");
  for (const auto& s : mapped) check_shapes(s, mix_at_m, "isms_loss");
  double num = 0.0;
  for (const auto& s : mapped) num += log_mag_variance_sum(s, mag_floor);
  num /= static_cast<double>(mapped.size());
  const double den = log_mag_variance_sum(mix_at_m, mag_floor);
  require(den > 0.0, ErrorKind::data, "degenerate ISMS denominator");
  return num / den;
}

std::pair<double, std::array<int, 2>> icc_loss(
    const std::vector<Spectrogram>& self_mapped,
    const std::vector<Spectrogram>& cross_mapped, const Spectrogram& norm_mix) {
  require(self_mapped.size() == 2 && cross_mapped.size() == 2, ErrorKind::config,
          "icc_loss is defined for N = 2");
  const double den = signal_loss_denominator(norm_mix);
  const auto pair_loss = [&](int a, int b) {
    return 0.5 * (signal_loss_with_denominator(self_mapped[0], cross_mapped[a], den) +
                  signal_loss_with_denominator(self_mapped[1], cross_mapped[b], den));
  };
  const double identity = pair_loss(0, 1);
  const double swapped = pair_loss(1, 0);
  if (swapped < identity) return {swapped, {1, 0}};
  return {identity, {0, 1}};
}

LossReport eras_loss(const std::vector<DirectedTermInputs>& terms,
                     const LossWeights& weights) {
  weights.validate();
  require(!terms.empty(), ErrorKind::config, "eras_loss needs >= 1 direction");
  LossReport report;
  for (const auto& term : terms) {
    require(term.mix_target != nullptr && term.cross_mapped != nullptr,
            ErrorKind::config, "eras_loss: direction missing inputs");
    DirectionLoss dl;
    dl.direction = term.direction;
    dl.ras = ras_loss(*term.mix_target, *term.cross_mapped, *term.mix_target);
    if (weights.beta > 0.0) dl.isms = isms_loss(*term.cross_mapped, *term.mix_target);
    if (weights.gamma > 0.0) {
      require(term.self_mapped != nullptr, ErrorKind::config,
              "eras_loss: ICC needs self-mapped sources");
      auto [val, perm] = icc_loss(*term.self_mapped, *term.cross_mapped,
                                  *term.mix_target);
      dl.icc = val;
      dl.icc_permutation = perm;
    }
    if (weights.alpha_ref() > 0.0) {
      require(term.self_mapped_ref != nullptr && term.mix_ref != nullptr,
              ErrorKind::config, "eras_loss: alpha_ref needs reference-channel maps");
      dl.ras_self = ras_loss(*term.mix_ref, *term.self_mapped_ref, *term.mix_ref);
    }
    report.total += weights.alpha_cross() * dl.ras + weights.beta * dl.isms +
                    weights.gamma * dl.icc + weights.alpha_ref() * dl.ras_self;
    report.directions.push_back(std::move(dl));
  }
  require(std::isfinite(report.total), ErrorKind::numerical,
          "eras_loss produced a non-finite total");
  return report;
}

std::string loss_csv_header() { return "step,direction,ras,isms,icc,total"; }

std::string loss_csv_row(int step, const DirectionLoss& d) {
  char buf[256];
  const double total = d.ras + d.isms + d.icc + d.ras_self;
  std::snprintf(buf, sizeof(buf), "%d,%s,%.12g,%.12g,%.12g,%.12g", step,
                d.direction.c_str(), d.ras, d.isms, d.icc, total);
  return buf;
}

}  // namespace eras

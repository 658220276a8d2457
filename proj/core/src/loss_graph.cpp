// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "eras/loss_graph.hpp"

#include <cmath>

#include "eras/common.hpp"

namespace eras {

using ad::Shape;
using ad::Tensor;
using ad::Var;

SpecVar fcp_map_tape(ad::Tape& tape, const SpecVar& est,
                     const Spectrogram& target_mix, const LambdaWeights& lambda,
                     const FcpConfig& cfg, bool detach_filters) {
  cfg.validate();
  const int T = target_mix.num_frames;
  const int F = target_mix.num_bins;
  const int K = cfg.num_taps();
  require(tape.value(est.re).shape == Shape::mat(T, F), ErrorKind::data,
          "fcp_map_tape: estimate shape mismatch");
  require(lambda.num_frames == T && lambda.num_bins == F, ErrorKind::data,
          "fcp_map_tape: lambda shape mismatch");

  const Var identity_2k = tape.constant([&] {
    Tensor eye(Shape::mat(2 * K, 2 * K));
    for (int i = 0; i < 2 * K; ++i) eye.at(i, i) = 1.0;
    return eye;
  }());

  std::vector<Var> mapped_re_cols, mapped_im_cols;
  mapped_re_cols.reserve(F);
  mapped_im_cols.reserve(F);
  Tensor zero_col(Shape::vec(T));

  for (int f = 0; f < F; ++f) {
    const Var cr = tape.col(est.re, f);
    const Var ci = tape.col(est.im, f);

    // Quick silence check on the eager value: an identically zero column
    // has singular normal equations and maps to zero, as in the eager path.
    double col_energy = 0.0;
    for (int t = 0; t < T; ++t)
      col_energy += tape.value(cr).at(t) * tape.value(cr).at(t) +
                    tape.value(ci).at(t) * tape.value(ci).at(t);
    if (col_energy <= 0.0) {
      mapped_re_cols.push_back(tape.constant(zero_col));
      mapped_im_cols.push_back(tape.constant(zero_col));
      continue;
    }

    const Var u_re = tape.stack_shifted(cr, cfg.k_past, cfg.k_future);  // [T x K]
    const Var u_im = tape.stack_shifted(ci, cfg.k_past, cfg.k_future);

    Tensor w(Shape::vec(T));
    Tensor wxr(Shape::vec(T)), wxi(Shape::vec(T));
    for (int t = 0; t < T; ++t) {
      const double wv = 1.0 / lambda.at(t, f);
      w.at(t) = wv;
      wxr.at(t) = wv * target_mix.at(t, f).real();
      wxi.at(t) = wv * target_mix.at(t, f).imag();
    }
    const Var w_const = tape.constant(std::move(w));
    const Var wxr_const = tape.constant(std::move(wxr));
    const Var wxi_const = tape.constant(std::move(wxi));

    const Var uw_re = tape.rows_scale(u_re, w_const);
    const Var uw_im = tape.rows_scale(u_im, w_const);

    // A = sum_t s~ s~^H / lambda, split into real and imaginary parts.
    const Var a_re = tape.add(tape.matmul(uw_re, u_re, true, false),
                              tape.matmul(uw_im, u_im, true, false));
    const Var a_im = tape.sub(tape.matmul(uw_im, u_re, true, false),
                              tape.matmul(uw_re, u_im, true, false));
    // b = sum_t s~ conj(X) / lambda.
    const Var b_re = tape.add(tape.matmul(u_re, wxr_const, true, false),
                              tape.matmul(u_im, wxi_const, true, false));
    const Var b_im = tape.sub(tape.matmul(u_im, wxr_const, true, false),
                              tape.matmul(u_re, wxi_const, true, false));

    Var a_emb = tape.complex_embed(a_re, a_im);
    const Var ridge =
        tape.scalar_mul(tape.trace(a_emb), cfg.regularizer_eps / (2.0 * K));
    a_emb = tape.add(a_emb, tape.scale_by(ridge, identity_2k));
    const Var b_emb = tape.concat_vec(b_re, b_im);

    Var g_emb = tape.linear_solve(a_emb, b_emb);
    if (detach_filters) g_emb = tape.stop_grad(g_emb);
    const Var g_re = tape.slice_vec(g_emb, 0, K);
    const Var g_im = tape.slice_vec(g_emb, K, 2 * K);

    // mapped = g^H s~: re = Ure g_re + Uim g_im, im = Uim g_re - Ure g_im.
    mapped_re_cols.push_back(
        tape.add(tape.matmul(u_re, g_re), tape.matmul(u_im, g_im)));
    mapped_im_cols.push_back(
        tape.sub(tape.matmul(u_im, g_re), tape.matmul(u_re, g_im)));
  }
  return SpecVar{tape.stack_cols(mapped_re_cols), tape.stack_cols(mapped_im_cols)};
}

Var signal_loss_tape(ad::Tape& tape, const SpecVar& ref, const SpecVar& est,
                     double denominator) {
  require(denominator > 0.0, ErrorKind::data, "signal_loss: zero-norm mixture");
  const Var ref_mag = tape.complex_abs(ref.re, ref.im, 0.0);
  const Var est_mag = tape.complex_abs(est.re, est.im, 0.0);
  const Var num = tape.add_n({tape.l1_distance(ref.re, est.re),
                              tape.l1_distance(ref.im, est.im),
                              tape.l1_distance(ref_mag, est_mag)});
  return tape.scalar_mul(num, 1.0 / denominator);
}

Var ras_loss_tape(ad::Tape& tape, const SpecVar& mix_target,
                  const std::array<SpecVar, kNumSources>& mapped,
                  double denominator) {
  const SpecVar sum{tape.add(mapped[0].re, mapped[1].re),
                    tape.add(mapped[0].im, mapped[1].im)};
  return signal_loss_tape(tape, mix_target, sum, denominator);
}

Var isms_loss_tape(ad::Tape& tape, const std::array<SpecVar, kNumSources>& mapped,
                   double denominator, double mag_floor) {
  require(denominator > 0.0, ErrorKind::data, "degenerate ISMS denominator");
  std::vector<Var> sums;
  sums.reserve(kNumSources);
  for (const auto& m : mapped) {
    const Var logmag = tape.log(tape.complex_abs(m.re, m.im, mag_floor));
    sums.push_back(tape.sum(tape.variance_axis1(logmag)));
  }
  const Var num = tape.add_n(sums);
  return tape.scalar_mul(num, 1.0 / (denominator * kNumSources));
}

std::pair<Var, std::array<int, 2>> icc_loss_tape(
    ad::Tape& tape, const std::array<SpecVar, kNumSources>& self_mapped,
    const std::array<SpecVar, kNumSources>& cross_mapped, double denominator) {
  std::array<SpecVar, kNumSources> targets;
  for (int n = 0; n < kNumSources; ++n) {
    targets[n] = SpecVar{tape.stop_grad(self_mapped[n].re),
                         tape.stop_grad(self_mapped[n].im)};
  }
  auto pair_loss = [&](int a, int b) {
    const Var l0 = signal_loss_tape(tape, targets[0], cross_mapped[a], denominator);
    const Var l1 = signal_loss_tape(tape, targets[1], cross_mapped[b], denominator);
    return tape.scalar_mul(tape.add(l0, l1), 1.0 / kNumSources);
  };
  const Var identity = pair_loss(0, 1);
  const Var swapped = pair_loss(1, 0);
  if (tape.value(swapped).scalar_value() < tape.value(identity).scalar_value())
    return {swapped, {1, 0}};
  return {identity, {0, 1}};
}

ScenePrep prepare_scene(const MixtureScene& scene, const StftConfig& stft_cfg) {
  require(scene.mixtures.size() == kNumMics, ErrorKind::data,
          "prepare_scene expects a two-mic scene");
  ScenePrep prep;
  std::vector<Spectrogram> specs;
  for (int m = 0; m < kNumMics; ++m) {
    const auto normalized = normalize_by_std(scene.mixtures[m]);
    prep.mix_spec[m] = stft(normalized.first.mono(), stft_cfg);
    specs.push_back(prep.mix_spec[m]);
  }
  prep.lambda = compute_lambda(specs, FcpConfig{}.lambda_floor_coeff);
  for (int m = 0; m < kNumMics; ++m) {
    prep.loss_denominator[m] = signal_loss_denominator(prep.mix_spec[m]);
    // ISMS denominator: per-frame log-magnitude variance of the mixture.
    const Spectrogram& x = prep.mix_spec[m];
    double total = 0.0;
    for (int t = 0; t < x.num_frames; ++t) {
      double mean = 0.0;
      for (int f = 0; f < x.num_bins; ++f)
        mean += std::log(std::max(std::abs(x.at(t, f)), kMagFloor));
      mean /= x.num_bins;
      double var = 0.0;
      for (int f = 0; f < x.num_bins; ++f) {
        const double d = std::log(std::max(std::abs(x.at(t, f)), kMagFloor)) - mean;
        var += d * d;
      }
      total += var / x.num_bins;
    }
    prep.isms_denominator[m] = total;
  }
  return prep;
}

SceneLossGraph build_scene_loss(ad::Tape& tape, const std::vector<ad::Var>& params,
                                const MaskNetConfig& net_cfg, const ScenePrep& prep,
                                const LossWeights& weights, const FcpConfig& fcp_cfg,
                                bool detach_fcp_filters) {
  weights.validate();
  const bool need_self = weights.gamma > 0.0 || weights.alpha_ref() > 0.0;

  // Separate both channels (the batch holds both channels of each scene).
  std::array<std::array<SpecVar, kNumSources>, kNumMics> ests;
  for (int m = 0; m < kNumMics; ++m)
    ests[m] = masknet_forward(tape, params, net_cfg, prep.mix_spec[m]);

  // Self-channel maps m -> m. With alpha_ref = 0 they only serve as ICC
  // pseudo-targets, so the whole branch can run on detached estimates.
  std::array<std::array<SpecVar, kNumSources>, kNumMics> self_mapped;
  if (need_self) {
    for (int m = 0; m < kNumMics; ++m) {
      for (int n = 0; n < kNumSources; ++n) {
        SpecVar src = ests[m][n];
        if (weights.alpha_ref() == 0.0) {
          src = SpecVar{tape.stop_grad(src.re), tape.stop_grad(src.im)};
        }
        self_mapped[m][n] = fcp_map_tape(tape, src, prep.mix_spec[m], prep.lambda,
                                         fcp_cfg, detach_fcp_filters);
      }
    }
  }

  SceneLossGraph out;
  std::vector<Var> total_terms;
  for (int mr = 0; mr < kNumMics; ++mr) {
    const int m = 1 - mr;
    DirectionLoss dl;
    dl.direction = (mr == 0) ? "L->R" : "R->L";

    const SpecVar mix_m = spec_constant(tape, prep.mix_spec[m]);
    std::array<SpecVar, kNumSources> cross;
    for (int n = 0; n < kNumSources; ++n)
      cross[n] = fcp_map_tape(tape, ests[mr][n], prep.mix_spec[m], prep.lambda,
                              fcp_cfg, detach_fcp_filters);

    const Var ras = ras_loss_tape(tape, mix_m, cross, prep.loss_denominator[m]);
    dl.ras = tape.value(ras).scalar_value();
    total_terms.push_back(tape.scalar_mul(ras, weights.alpha_cross()));

    if (weights.beta > 0.0) {
      const Var isms = isms_loss_tape(tape, cross, prep.isms_denominator[m]);
      dl.isms = tape.value(isms).scalar_value();
      total_terms.push_back(tape.scalar_mul(isms, weights.beta));
    }
    if (weights.gamma > 0.0) {
      auto [icc, perm] = icc_loss_tape(tape, self_mapped[m], cross,
                                       prep.loss_denominator[m]);
      dl.icc = tape.value(icc).scalar_value();
      dl.icc_permutation = perm;
      total_terms.push_back(tape.scalar_mul(icc, weights.gamma));
    }
    if (weights.alpha_ref() > 0.0) {
      const SpecVar mix_r = spec_constant(tape, prep.mix_spec[mr]);
      const Var ras_self = ras_loss_tape(tape, mix_r, self_mapped[mr],
                                         prep.loss_denominator[mr]);
      dl.ras_self = tape.value(ras_self).scalar_value();
      total_terms.push_back(tape.scalar_mul(ras_self, weights.alpha_ref()));
    }
    out.report.directions.push_back(std::move(dl));
  }
  out.total = tape.add_n(total_terms);
  out.report.total = tape.value(out.total).scalar_value();
  require(std::isfinite(out.report.total), ErrorKind::numerical,
          "training loss is non-finite");
  return out;
}

}  // namespace eras

#include <doctest.h>

#include <cmath>

#include "eras/common.hpp"
#include "eras/loss_graph.hpp"
#include "eras/masknet.hpp"
#include "test_util.hpp"

using namespace eras;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

MaskNetConfig tiny_cfg() {
  MaskNetConfig cfg;
  cfg.num_bins = 9;
  cfg.hidden = {6, 6};
  return cfg;
}

StftConfig tiny_stft() {
  StftConfig cfg;
  cfg.window_length = 16;
  cfg.hop_length = 4;
  cfg.fft_size = 16;
  return cfg;
}

// Tiny two-channel "scene": random mixtures only, enough for the loss graph.
ScenePrep tiny_prep(std::uint64_t seed) {
  Rng rng(seed);
  MixtureScene scene;
  scene.sample_rate = 8000;
  scene.mixtures.emplace_back(testutil::random_signal(rng, 76, 0.3), 8000);
  scene.mixtures.emplace_back(testutil::random_signal(rng, 76, 0.3), 8000);
  return prepare_scene(scene, tiny_stft());
}

// Rebuilds masknet parameter Vars from one flat vector so grad_check can
// differentiate the whole net at once. Matrices are stored column-major.
std::vector<Var> params_from_flat(Tape& t, Var flat, const MaskNetConfig& cfg) {
  std::vector<Var> out;
  int ofs = 0;
  auto take_mat = [&](int rows, int cols) {
    std::vector<Var> col_vars;
    for (int c = 0; c < cols; ++c) {
      col_vars.push_back(t.slice_vec(flat, ofs, ofs + rows));
      ofs += rows;
    }
    out.push_back(t.stack_cols(col_vars));
  };
  auto take_vec = [&](int n) {
    out.push_back(t.slice_vec(flat, ofs, ofs + n));
    ofs += n;
  };
  const int in = cfg.feature_dim(), h1 = cfg.hidden[0], h2 = cfg.hidden[1];
  take_mat(in, h1);
  take_vec(h1);
  take_mat(h1, h2);
  take_vec(h2);
  for (int head = 0; head < 4; ++head) {
    take_mat(h2, cfg.num_bins);
    take_vec(cfg.num_bins);
  }
  return out;
}

Tensor flatten_net(const MaskNet& net) {
  std::size_t total = 0;
  for (const auto& p : net.params) total += p.v.size();
  Tensor flat(Shape::vec(static_cast<int>(total)));
  std::size_t ofs = 0;
  for (const auto& p : net.params) {
    // matrices go out column-major to match params_from_flat
    if (p.shape.rank == 2) {
      const int rows = p.shape.dim[0], cols = p.shape.dim[1];
      for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) flat.v[ofs++] = p.at(r, c);
    } else {
      for (double v : p.v) flat.v[ofs++] = v;
    }
  }
  return flat;
}

}  // namespace

TEST_CASE("identity-mask bias construction returns the mixture") {
  const MaskNetConfig cfg = tiny_cfg();
  MaskNet net = MaskNet::init(cfg, 1);
  for (auto& p : net.params)
    for (double& v : p.v) v = 0.0;
  // real-mask head biases = 1 -> mask = 1 + 0i for both sources
  net.params[5].v.assign(net.params[5].v.size(), 1.0);   // source 0 re bias
  net.params[9].v.assign(net.params[9].v.size(), 1.0);   // source 1 re bias

  Rng rng(2);
  const Spectrogram mix = testutil::random_spectrogram(rng, 12, cfg.num_bins);
  const auto ests = separate(net, mix);
  for (const auto& est : ests) {
    double err = 0.0;
    for (std::size_t i = 0; i < mix.bins.size(); ++i)
      err += std::norm(est.bins[i] - mix.bins[i]);
    CHECK(std::sqrt(err) < 1e-12);
  }
}

TEST_CASE("zero mixture separates to zero outputs") {
  const MaskNetConfig cfg = tiny_cfg();
  const MaskNet net = MaskNet::init(cfg, 3);
  Spectrogram mix = Spectrogram::zeros(10, cfg.num_bins, tiny_stft(), 40);
  const auto ests = separate(net, mix);
  for (const auto& est : ests)
    for (const auto& z : est.bins) CHECK(std::abs(z) == 0.0);
}

TEST_CASE("separate rejects a mismatched bin count") {
  const MaskNetConfig cfg = tiny_cfg();
  const MaskNet net = MaskNet::init(cfg, 4);
  Rng rng(5);
  const Spectrogram mix = testutil::random_spectrogram(rng, 8, cfg.num_bins + 2);
  CHECK_THROWS_AS(separate(net, mix), Error);
}

TEST_CASE("fcp on tape matches the eager implementation") {
  Rng rng(6);
  const int T = 24, F = 9;
  const Spectrogram est = testutil::random_spectrogram(rng, T, F);
  const Spectrogram target = testutil::random_spectrogram(rng, T, F);
  const LambdaWeights lambda = compute_lambda({target}, 1e-4);
  FcpConfig cfg;
  cfg.k_past = 1;
  cfg.k_future = 1;
  const FcpResult eager = fcp_map(est, target, lambda, cfg);

  Tape tape;
  const SpecVar est_var = spec_constant(tape, est);
  const SpecVar mapped = fcp_map_tape(tape, est_var, target, lambda, cfg, false);
  const Spectrogram tape_spec = spec_from_tape(tape, mapped, est);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < eager.mapped.bins.size(); ++i) {
    num += std::norm(tape_spec.bins[i] - eager.mapped.bins[i]);
    den += std::norm(eager.mapped.bins[i]);
  }
  CHECK(std::sqrt(num / den) < 1e-9);
}

TEST_CASE("loss values on tape equal the eager losses") {
  Rng rng(7);
  const int T = 15, F = 9;
  const Spectrogram mix = testutil::random_spectrogram(rng, T, F);
  const Spectrogram a = testutil::random_spectrogram(rng, T, F);
  const Spectrogram b = testutil::random_spectrogram(rng, T, F);
  const double denom = signal_loss_denominator(mix);

  Tape t;
  const SpecVar mv = spec_constant(t, mix);
  const SpecVar av = spec_constant(t, a);
  const SpecVar bv = spec_constant(t, b);

  CHECK(t.value(signal_loss_tape(t, mv, av, denom)).scalar_value() ==
        doctest::Approx(signal_loss(mix, a, mix)).epsilon(1e-12));
  CHECK(t.value(ras_loss_tape(t, mv, {av, bv}, denom)).scalar_value() ==
        doctest::Approx(ras_loss(mix, {a, b}, mix)).epsilon(1e-12));

  double isms_den = 0.0;
  {
    // denominator identical to prepare_scene's
    for (int tt = 0; tt < T; ++tt) {
      double mean = 0.0;
      for (int f = 0; f < F; ++f)
        mean += std::log(std::max(std::abs(mix.at(tt, f)), kMagFloor));
      mean /= F;
      double var = 0.0;
      for (int f = 0; f < F; ++f) {
        const double d = std::log(std::max(std::abs(mix.at(tt, f)), kMagFloor)) - mean;
        var += d * d;
      }
      isms_den += var / F;
    }
  }
  CHECK(t.value(isms_loss_tape(t, {av, bv}, isms_den)).scalar_value() ==
        doctest::Approx(isms_loss({a, b}, mix)).epsilon(1e-12));

  const auto [icc_var, perm] = icc_loss_tape(t, {av, bv}, {bv, av}, denom);
  const auto [icc_eager, perm_eager] = icc_loss({a, b}, {b, a}, mix);
  CHECK(t.value(icc_var).scalar_value() == doctest::Approx(icc_eager).epsilon(1e-12));
  CHECK(perm == perm_eager);
}

TEST_CASE("ICC pseudo-targets carry no gradient") {
  Rng rng(8);
  const int T = 12, F = 9;
  const Spectrogram mix = testutil::random_spectrogram(rng, T, F);
  const double denom = signal_loss_denominator(mix);
  const Tensor base_re = [&] {
    Tensor x(Shape::mat(T, F));
    for (double& v : x.v) v = rng.normal();
    return x;
  }();
  const Tensor base_im = [&] {
    Tensor x(Shape::mat(T, F));
    for (double& v : x.v) v = rng.normal();
    return x;
  }();

  auto grads_with = [&](bool live_self) {
    Tape t;
    Var p_re = t.param(base_re);
    Var p_im = t.param(base_im);
    // self branch derives from the SAME params (scaled), cross too
    SpecVar self{t.scalar_mul(p_re, 0.9), t.scalar_mul(p_im, 0.9)};
    if (!live_self) {
      self = SpecVar{t.constant(t.value(self.re)), t.constant(t.value(self.im))};
    }
    SpecVar self2{t.scalar_mul(p_re, -0.4), t.scalar_mul(p_im, 0.7)};
    if (!live_self) {
      self2 = SpecVar{t.constant(t.value(self2.re)), t.constant(t.value(self2.im))};
    }
    SpecVar cross{t.scalar_mul(p_re, 1.1), t.scalar_mul(p_im, 0.8)};
    SpecVar cross2{t.scalar_mul(p_re, 0.3), t.scalar_mul(p_im, -0.6)};
    auto [loss, perm] = icc_loss_tape(t, {self, self2}, {cross, cross2}, denom);
    (void)perm;
    t.backward(loss);
    return std::make_pair(t.grad(p_re), t.grad(p_im));
  };
  const auto live = grads_with(true);
  const auto frozen = grads_with(false);
  for (std::size_t i = 0; i < live.first.v.size(); ++i) {
    CHECK(live.first.v[i] == frozen.first.v[i]);
    CHECK(live.second.v[i] == frozen.second.v[i]);
  }
}

TEST_CASE("self-mapping branches are skipped when gamma is zero") {
  const MaskNetConfig net_cfg = tiny_cfg();
  const MaskNet net = MaskNet::init(net_cfg, 11);
  const ScenePrep prep = tiny_prep(12);
  FcpConfig fcp_cfg;
  fcp_cfg.k_past = 1;
  fcp_cfg.k_future = 0;

  auto solve_count = [&](double gamma) {
    Tape tape;
    std::vector<Var> params;
    for (const auto& p : net.params) params.push_back(tape.param(p));
    LossWeights w;
    w.beta = 0.3;
    w.gamma = gamma;
    build_scene_loss(tape, params, net_cfg, prep, w, fcp_cfg, false);
    return tape.count_ops(ad::OpKind::linear_solve);
  };
  const std::size_t without_icc = solve_count(0.0);
  const std::size_t with_icc = solve_count(0.1);
  CHECK(with_icc == 2 * without_icc);
}

TEST_CASE("end-to-end ERAS gradient matches finite differences (tiny config)") {
  const MaskNetConfig net_cfg = tiny_cfg();
  const StftConfig stft_cfg = tiny_stft();
  (void)stft_cfg;
  const MaskNet net = MaskNet::init(net_cfg, 21);
  const ScenePrep prep = tiny_prep(22);
  FcpConfig fcp_cfg;
  fcp_cfg.k_past = 1;
  fcp_cfg.k_future = 0;  // K = 2
  LossWeights weights;
  weights.beta = 0.3;
  weights.gamma = 0.1;

  // Frozen ICC pseudo-targets from the base parameters: the training
  // objective treats them as constants, so the finite-difference oracle
  // must too.
  std::array<std::array<Spectrogram, kNumSources>, kNumMics> frozen_targets;
  for (int m = 0; m < kNumMics; ++m) {
    const auto ests = separate(net, prep.mix_spec[m]);
    for (int n = 0; n < kNumSources; ++n) {
      frozen_targets[m][n] =
          fcp_map(ests[n], prep.mix_spec[m], prep.lambda, fcp_cfg).mapped;
    }
  }

  for (const bool detach : {false, true}) {
    auto loss_fn = [&](Tape& t, Var flat) {
      const auto params = params_from_flat(t, flat, net_cfg);
      std::vector<Var> terms;
      for (int mr = 0; mr < kNumMics; ++mr) {
        const int m = 1 - mr;
        const auto ests = masknet_forward(t, params, net_cfg, prep.mix_spec[mr]);
        std::array<SpecVar, kNumSources> cross;
        for (int n = 0; n < kNumSources; ++n)
          cross[n] = fcp_map_tape(t, ests[n], prep.mix_spec[m], prep.lambda,
                                  fcp_cfg, detach);
        const SpecVar mix_m = spec_constant(t, prep.mix_spec[m]);
        terms.push_back(ras_loss_tape(t, mix_m, cross, prep.loss_denominator[m]));
        terms.push_back(t.scalar_mul(
            isms_loss_tape(t, cross, prep.isms_denominator[m]), weights.beta));
        std::array<SpecVar, kNumSources> targets{
            spec_constant(t, frozen_targets[m][0]),
            spec_constant(t, frozen_targets[m][1])};
        auto [icc, perm] =
            icc_loss_tape(t, targets, cross, prep.loss_denominator[m]);
        (void)perm;
        terms.push_back(t.scalar_mul(icc, weights.gamma));
      }
      return t.add_n(terms);
    };
    const double err = ad::grad_check(loss_fn, flatten_net(net), 1e-5);
    CAPTURE(detach);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("ISMS gradient w.r.t. mapped RI parts matches finite differences") {
  Rng rng(31);
  const int T = 8, F = 9;
  const Spectrogram mix = testutil::random_spectrogram(rng, T, F);
  double isms_den = 0.0;
  for (int tt = 0; tt < T; ++tt) {
    double mean = 0.0;
    for (int f = 0; f < F; ++f)
      mean += std::log(std::max(std::abs(mix.at(tt, f)), kMagFloor));
    mean /= F;
    double var = 0.0;
    for (int f = 0; f < F; ++f) {
      const double d = std::log(std::max(std::abs(mix.at(tt, f)), kMagFloor)) - mean;
      var += d * d;
    }
    isms_den += var / F;
  }
  Tensor x(Shape::vec(4 * T * F));
  for (double& v : x.v) v = rng.normal() + (rng.uniform() < 0.5 ? 0.7 : -0.7);
  const double err = ad::grad_check(
      [&](Tape& t, Var v) {
        auto take_mat = [&](int ofs) {
          std::vector<Var> cols;
          for (int f = 0; f < F; ++f)
            cols.push_back(t.slice_vec(v, ofs + f * T, ofs + (f + 1) * T));
          return t.stack_cols(cols);
        };
        SpecVar a{take_mat(0), take_mat(T * F)};
        SpecVar b{take_mat(2 * T * F), take_mat(3 * T * F)};
        return isms_loss_tape(t, {a, b}, isms_den);
      },
      x, 1e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("gradient w.r.t. separator outputs matches finite differences") {
  // differentiate the full directed loss w.r.t. the RI parts of the
  // estimates at the reference channel (self branch held at the other
  // channel, so no stop-gradient interaction)
  const ScenePrep prep = tiny_prep(33);
  FcpConfig fcp_cfg;
  fcp_cfg.k_past = 1;
  fcp_cfg.k_future = 0;
  const int T = prep.mix_spec[0].num_frames;
  const int F = prep.mix_spec[0].num_bins;
  Rng rng(34);
  Tensor x(Shape::vec(4 * T * F));
  for (double& v : x.v) v = 0.5 * rng.normal();

  // fixed pseudo-targets at channel R from an unrelated random draw
  Rng rng2(35);
  const Spectrogram t0 = testutil::random_spectrogram(rng2, T, F, 0.4);
  const Spectrogram t1 = testutil::random_spectrogram(rng2, T, F, 0.4);

  const double err = ad::grad_check(
      [&](Tape& t, Var v) {
        auto take_mat = [&](int ofs) {
          std::vector<Var> cols;
          for (int f = 0; f < F; ++f)
            cols.push_back(t.slice_vec(v, ofs + f * T, ofs + (f + 1) * T));
          return t.stack_cols(cols);
        };
        std::array<SpecVar, kNumSources> ests{
            SpecVar{take_mat(0), take_mat(T * F)},
            SpecVar{take_mat(2 * T * F), take_mat(3 * T * F)}};
        std::array<SpecVar, kNumSources> cross;
        for (int n = 0; n < kNumSources; ++n)
          cross[n] = fcp_map_tape(t, ests[n], prep.mix_spec[1], prep.lambda,
                                  fcp_cfg, false);
        const SpecVar mix_r = spec_constant(t, prep.mix_spec[1]);
        Var total = ras_loss_tape(t, mix_r, cross, prep.loss_denominator[1]);
        total = t.add(total, t.scalar_mul(isms_loss_tape(t, cross,
                                                         prep.isms_denominator[1]),
                                          0.3));
        std::array<SpecVar, kNumSources> targets{spec_constant(t, t0),
                                                 spec_constant(t, t1)};
        auto [icc, perm] = icc_loss_tape(t, targets, cross, prep.loss_denominator[1]);
        (void)perm;
        return t.add(total, t.scalar_mul(icc, 0.1));
      },
      x, 1e-5);
  CHECK(err < 1e-4);
}

#include <doctest.h>

#include <cmath>
#include <complex>

#include "eras/common.hpp"
#include "eras/relative_rir.hpp"
#include "test_util.hpp"

using namespace eras;
using testutil::cd;

namespace {

// weighted residual of a candidate filter at one frequency
double weighted_residual(const std::vector<std::vector<cd>>& stacked,
                         const std::vector<double>& weights,
                         const std::vector<cd>& targets, const std::vector<cd>& g) {
  double acc = 0.0;
  for (std::size_t t = 0; t < stacked.size(); ++t) {
    cd pred(0.0, 0.0);
    for (std::size_t k = 0; k < g.size(); ++k)
      pred += std::conj(g[k]) * stacked[t][k];
    acc += weights[t] * std::norm(targets[t] - pred);
  }
  return acc;
}

std::vector<std::vector<cd>> stack_frames(const Spectrogram& est, int f, int k_past,
                                          int k_future) {
  const int K = k_past + 1 + k_future;
  std::vector<std::vector<cd>> out(est.num_frames, std::vector<cd>(K, {0, 0}));
  for (int t = 0; t < est.num_frames; ++t)
    for (int k = 0; k < K; ++k) {
      const int src = t - k_past + k;
      if (src >= 0 && src < est.num_frames) out[t][k] = est.at(src, f);
    }
  return out;
}

}  // namespace

TEST_CASE("compute_lambda on constant fields") {
  Rng rng(1);
  SUBCASE("single mic, |X|^2 = 4 everywhere") {
    Spectrogram x = testutil::random_spectrogram(rng, 6, 5, 0.0);
    for (auto& z : x.bins) z = {2.0, 0.0};
    const LambdaWeights lw = compute_lambda({x}, 1e-4);
    for (double v : lw.values) CHECK(v == doctest::Approx(4.0 + 1e-4 * 4.0).epsilon(1e-14));
  }
  SUBCASE("single dominant bin sets the floor") {
    Spectrogram x = testutil::random_spectrogram(rng, 4, 4, 0.0);
    for (auto& z : x.bins) z = {0.0, 0.0};
    x.at(2, 1) = {3.0, 0.0};  // power 9
    const LambdaWeights lw = compute_lambda({x}, 1e-4);
    CHECK(lw.at(0, 0) == doctest::Approx(9e-4).epsilon(1e-12));
    CHECK(lw.at(2, 1) == doctest::Approx(9.0 + 9e-4).epsilon(1e-12));
  }
  SUBCASE("two mics average their powers") {
    Spectrogram a = testutil::random_spectrogram(rng, 3, 3);
    Spectrogram b = testutil::random_spectrogram(rng, 3, 3);
    const LambdaWeights lw = compute_lambda({a, b}, 1e-4);
    double max_mean = 0.0;
    for (int t = 0; t < 3; ++t)
      for (int f = 0; f < 3; ++f)
        max_mean = std::max(max_mean,
                            0.5 * (std::norm(a.at(t, f)) + std::norm(b.at(t, f))));
    for (int t = 0; t < 3; ++t)
      for (int f = 0; f < 3; ++f) {
        const double mean = 0.5 * (std::norm(a.at(t, f)) + std::norm(b.at(t, f)));
        CHECK(lw.at(t, f) == doctest::Approx(mean + 1e-4 * max_mean).epsilon(1e-12));
      }
  }
  SUBCASE("all-zero mixtures are degenerate") {
    Spectrogram x = testutil::random_spectrogram(rng, 4, 4, 0.0);
    for (auto& z : x.bins) z = {0.0, 0.0};
    CHECK_THROWS_WITH_AS(compute_lambda({x}, 1e-4),
                         doctest::Contains("degenerate"), Error);
  }
}

TEST_CASE("fcp self-prediction with one tap is the identity") {
  Rng rng(2);
  const Spectrogram mix = testutil::random_spectrogram(rng, 40, 9);
  const LambdaWeights lw = compute_lambda({mix}, 1e-4);
  FcpConfig cfg;
  cfg.k_past = 0;
  cfg.k_future = 0;
  const FcpResult res = fcp_map(mix, mix, lw, cfg);
  for (int f = 0; f < mix.num_bins; ++f) {
    CHECK(std::abs(res.filters[f] - cd(1.0, 0.0)) < 1e-9);
  }
  double err = 0.0, den = 0.0;
  for (std::size_t i = 0; i < mix.bins.size(); ++i) {
    err += std::norm(res.mapped.bins[i] - mix.bins[i]);
    den += std::norm(mix.bins[i]);
  }
  CHECK(std::sqrt(err / den) < 1e-9);
}

TEST_CASE("fcp recovers a one-frame delay inside the filter span") {
  Rng rng(3);
  const int T = 50, F = 7;
  Spectrogram target = testutil::random_spectrogram(rng, T, F);
  Spectrogram est = target;
  // est is the target delayed... i.e. target leads est by one frame:
  // target_t = est_{t+?}. We need target in the span of est's past frames:
  // set est_t = target_{t-1} is wrong direction; delay EST by -? Use
  // est_t = target_{t+1} so that target_t = est_{t-1} (one past frame).
  for (int t = 0; t < T; ++t)
    for (int f = 0; f < F; ++f)
      est.at(t, f) = (t + 1 < T) ? target.at(t + 1, f) : cd(0.0, 0.0);
  const LambdaWeights lw = compute_lambda({target}, 1e-4);
  FcpConfig cfg;
  cfg.k_past = 1;
  cfg.k_future = 0;
  const FcpResult res = fcp_map(est, target, lw, cfg);
  // ignore the last frame (target content fell off the end of est)
  double err = 0.0, den = 0.0;
  for (int t = 1; t < T - 1; ++t)
    for (int f = 0; f < F; ++f) {
      err += std::norm(res.mapped.at(t, f) - target.at(t, f));
      den += std::norm(target.at(t, f));
    }
  CHECK(std::sqrt(err / den) < 1e-8);
  // verify against the normal-equation oracle too
  for (int f = 0; f < F; ++f) {
    const auto stacked = stack_frames(est, f, cfg.k_past, cfg.k_future);
    std::vector<double> w(T);
    std::vector<cd> y(T);
    for (int t = 0; t < T; ++t) {
      w[t] = 1.0 / lw.at(t, f);
      y[t] = target.at(t, f);
    }
    const auto g_oracle = testutil::qr_weighted_ls(stacked, w, y);
    for (int k = 0; k < cfg.num_taps(); ++k) {
      CHECK(std::abs(res.filters[f * cfg.num_taps() + k] - g_oracle[k]) < 1e-6);
    }
  }
}

TEST_CASE("fcp matches the dense QR oracle and is locally optimal") {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const int T = 30 + static_cast<int>(rng.below(40));
    const int F = 5;
    const Spectrogram est = testutil::random_spectrogram(rng, T, F);
    const Spectrogram target = testutil::random_spectrogram(rng, T, F);
    const LambdaWeights lw = compute_lambda({target}, 1e-4);
    FcpConfig cfg;
    cfg.k_past = 1;
    cfg.k_future = 1;
    cfg.regularizer_eps = 0.0;  // compare against the unregularized oracle
    const FcpResult res = fcp_map(est, target, lw, cfg);
    const int K = cfg.num_taps();
    for (int f = 0; f < F; ++f) {
      const auto stacked = stack_frames(est, f, cfg.k_past, cfg.k_future);
      std::vector<double> w(T);
      std::vector<cd> y(T);
      for (int t = 0; t < T; ++t) {
        w[t] = 1.0 / lw.at(t, f);
        y[t] = target.at(t, f);
      }
      const auto g_oracle = testutil::qr_weighted_ls(stacked, w, y);
      std::vector<cd> g(K);
      double gnorm = 0.0, gerr = 0.0;
      for (int k = 0; k < K; ++k) {
        g[k] = res.filters[f * K + k];
        gnorm += std::norm(g_oracle[k]);
        gerr += std::norm(g[k] - g_oracle[k]);
      }
      CHECK(std::sqrt(gerr / (gnorm > 0 ? gnorm : 1.0)) < 1e-8);

      // no single-tap perturbation lowers the weighted residual
      const double base = weighted_residual(stacked, w, y, g);
      for (int k = 0; k < K; ++k) {
        for (double dre : {1e-4, -1e-4}) {
          auto gp = g;
          gp[k] += cd(dre, 0.0);
          CHECK(weighted_residual(stacked, w, y, gp) >= base - 1e-12);
          auto gq = g;
          gq[k] += cd(0.0, dre);
          CHECK(weighted_residual(stacked, w, y, gq) >= base - 1e-12);
        }
      }
    }
  }
}

TEST_CASE("fcp rejects non-finite input") {
  Rng rng(5);
  Spectrogram est = testutil::random_spectrogram(rng, 10, 4);
  const Spectrogram target = testutil::random_spectrogram(rng, 10, 4);
  const LambdaWeights lw = compute_lambda({target}, 1e-4);
  est.at(3, 2) = {std::nan(""), 0.0};
  CHECK_THROWS_WITH_AS(fcp_map(est, target, lw, FcpConfig{}),
                       doctest::Contains("non-finite"), Error);
}

TEST_CASE("fcp of a zero estimate maps to zero without crashing") {
  Rng rng(6);
  Spectrogram est = testutil::random_spectrogram(rng, 12, 4, 0.0);
  for (auto& z : est.bins) z = {0.0, 0.0};
  const Spectrogram target = testutil::random_spectrogram(rng, 12, 4);
  const LambdaWeights lw = compute_lambda({target}, 1e-4);
  const FcpResult res = fcp_map(est, target, lw, FcpConfig{});
  for (const auto& z : res.mapped.bins) CHECK(std::abs(z) == 0.0);
}

TEST_CASE("wiener identity fit") {
  Rng rng(7);
  const Waveform x(testutil::random_signal(rng, 2000), 8000);
  WienerConfig cfg;
  cfg.filter_length = 1;
  const WienerResult res = wiener_map(x, x, cfg);
  CHECK(res.filter[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(testutil::rel_l2_error(x.mono(), res.mapped.mono()) < 1e-10);
}

TEST_CASE("wiener recovers a scaled delay inside the filter span") {
  Rng rng(8);
  auto target = testutil::random_signal(rng, 3000);
  std::vector<double> est(target.size(), 0.0);
  // est = 0.5 * target delayed by 3 -> target = 2 * est advanced by 3;
  // mapping est -> target needs taps at lag -?? est_l = 0.5 target_{l-3}
  // so target_l = 2 est_{l+3}: anticausal. Use est as the delayed copy and
  // fit target = w * est with w covering lag -3 via anticausal taps? The
  // spec case is the other direction: est = target delayed; mapping est to
  // target requires anticausal taps, while mapping target to est is causal.
  // Here we follow the spec: est = 0.5 x delayed 3, filter_length >= 4 and
  // the target is the *un*delayed x... that needs anticausal support, so
  // the causal case swaps roles: target_mix = delayed copy.
  for (std::size_t i = 3; i < est.size(); ++i) est[i] = 0.5 * target[i - 3];
  WienerConfig cfg;
  cfg.filter_length = 8;
  // causal direction: explain est (delayed) from target
  const WienerResult causal = wiener_map(Waveform(target, 8000),
                                         Waveform(est, 8000), cfg);
  CHECK(causal.filter[3] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(testutil::rel_l2_error(est, causal.mapped.mono()) < 1e-9);

  // anticausal direction: explain target from est with negative lags
  WienerConfig anti;
  anti.filter_length = 8;
  anti.anticausal_taps = 4;
  const WienerResult res = wiener_map(Waveform(est, 8000), Waveform(target, 8000),
                                      anti);
  // ignores the trailing samples that fell off est
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i + 3 < target.size(); ++i) {
    const double d = res.mapped.mono()[i] - target[i];
    num += d * d;
    den += target[i] * target[i];
  }
  CHECK(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("wiener single tap equals the scalar projection") {
  Rng rng(9);
  const auto est = testutil::random_signal(rng, 1500);
  const auto target = testutil::random_signal(rng, 1500);
  WienerConfig cfg;
  cfg.filter_length = 1;
  cfg.regularizer_eps = 0.0;
  const WienerResult res = wiener_map(Waveform(est, 8000), Waveform(target, 8000), cfg);
  const double expected = dot(est, target) / dot(est, est);
  CHECK(res.filter[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("wiener matches the dense QR oracle on random instances") {
  Rng rng(10);
  for (int trial = 0; trial < 3; ++trial) {
    const int L = 400;
    const int taps = 16;
    const auto est = testutil::random_signal(rng, L);
    const auto target = testutil::random_signal(rng, L);
    WienerConfig cfg;
    cfg.filter_length = taps;
    cfg.anticausal_taps = trial;  // exercise the anticausal indexing too
    cfg.regularizer_eps = 0.0;
    const WienerResult res =
        wiener_map(Waveform(est, 8000), Waveform(target, 8000), cfg);
    const auto oracle = testutil::qr_real_ls_filter(est, target, taps,
                                                    cfg.anticausal_taps);
    double num = 0.0, den = 0.0;
    for (int k = 0; k < taps; ++k) {
      num += (res.filter[k] - oracle[k]) * (res.filter[k] - oracle[k]);
      den += oracle[k] * oracle[k];
    }
    CHECK(std::sqrt(num / den) < 1e-8);
  }
}

TEST_CASE("wiener shift covariance") {
  Rng rng(11);
  const int L = 2000;
  const auto est = testutil::random_signal(rng, L);
  const auto target = testutil::random_signal(rng, L);
  WienerConfig cfg;
  cfg.filter_length = 8;
  const WienerResult base = wiener_map(Waveform(est, 8000), Waveform(target, 8000), cfg);
  const int d = 3;
  std::vector<double> delayed(L, 0.0);
  for (int i = d; i < L; ++i) delayed[i] = est[i - d];
  WienerConfig cfg2;
  cfg2.filter_length = 8 + d;
  const WienerResult shifted =
      wiener_map(Waveform(delayed, 8000), Waveform(target, 8000), cfg2);
  auto residual = [&](const WienerResult& r) {
    double acc = 0.0;
    for (int i = 0; i < L; ++i) {
      const double dlt = target[i] - r.mapped.mono()[i];
      acc += dlt * dlt;
    }
    return acc;
  };
  // The delayed estimate with extra taps spans a superset: its optimum is
  // at most slightly worse due to the lost boundary samples.
  CHECK(residual(shifted) <= residual(base) + 1e-9 * energy(target));
}

TEST_CASE("wiener rejects zero estimates") {
  std::vector<double> zeros(1000, 0.0), x(1000, 0.0);
  x[3] = 1.0;
  CHECK_THROWS_WITH_AS(
      wiener_map(Waveform(zeros, 8000), Waveform(x, 8000), WienerConfig{}),
      doctest::Contains("silence"), Error);
}

TEST_CASE("map_sources applies per source and commutes with permutation") {
  Rng rng(12);
  const Spectrogram target = testutil::random_spectrogram(rng, 20, 5);
  const LambdaWeights lw = compute_lambda({target}, 1e-4);
  std::vector<Spectrogram> ests{testutil::random_spectrogram(rng, 20, 5),
                                testutil::random_spectrogram(rng, 20, 5)};
  FcpConfig cfg;
  cfg.k_past = 1;
  cfg.k_future = 0;
  const auto mapped = map_sources_fcp(ests, target, lw, cfg);
  std::vector<Spectrogram> swapped_in{ests[1], ests[0]};
  const auto swapped = map_sources_fcp(swapped_in, target, lw, cfg);
  for (std::size_t i = 0; i < mapped[0].bins.size(); ++i) {
    CHECK(mapped[0].bins[i] == swapped[1].bins[i]);
    CHECK(mapped[1].bins[i] == swapped[0].bins[i]);
  }
}

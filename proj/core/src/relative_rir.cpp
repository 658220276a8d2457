// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "eras/relative_rir.hpp"

#include <algorithm>
#include <cmath>

#include "eras/common.hpp"
#include "eras/linalg.hpp"

namespace eras {

using linalg::cd;

void FcpConfig::validate() const {
  require(k_past >= 0 && k_future >= 0, ErrorKind::config,
          "fcp taps must be nonnegative");
  require(num_taps() >= 1, ErrorKind::config, "fcp needs at least one tap");
  require(lambda_floor_coeff > 0.0, ErrorKind::config,
          "lambda floor must be positive");
  require(regularizer_eps >= 0.0, ErrorKind::config,
          "regularizer must be nonnegative");
}

void WienerConfig::validate() const {
  require(filter_length >= 1, ErrorKind::config, "wiener filter needs >= 1 tap");
  require(anticausal_taps >= 0 && anticausal_taps < filter_length, ErrorKind::config,
          "anticausal taps must lie inside the filter");
  require(regularizer_eps >= 0.0, ErrorKind::config,
          "regularizer must be nonnegative");
}

LambdaWeights compute_lambda(const std::vector<Spectrogram>& mixture_specs,
                             double floor_coeff) {
  require(!mixture_specs.empty(), ErrorKind::config, "compute_lambda needs >= 1 mic");
  require(floor_coeff > 0.0, ErrorKind::config, "lambda floor must be positive");
  const int T = mixture_specs[0].num_frames;
  const int F = mixture_specs[0].num_bins;
  for (const auto& s : mixture_specs)
    require(s.num_frames == T && s.num_bins == F, ErrorKind::data,
            "mixture spectrograms must share one shape");

  LambdaWeights lw;
  lw.num_frames = T;
  lw.num_bins = F;
  lw.values.assign(static_cast<std::size_t>(T) * F, 0.0);
  const double inv_m = 1.0 / static_cast<double>(mixture_specs.size());
  double max_mean = 0.0;
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) {
      double mean = 0.0;
      for (const auto& s : mixture_specs) mean += std::norm(s.at(t, f));
      mean *= inv_m;
      lw.values[static_cast<std::size_t>(t) * F + f] = mean;
      if (mean > max_mean) max_mean = mean;
    }
  }
  require(max_mean > 0.0, ErrorKind::data, "degenerate lambda: all-zero mixtures");
  const double floor = floor_coeff * max_mean;
  for (auto& v : lw.values) v += floor;
  return lw;
}

FcpResult fcp_map(const Spectrogram& est, const Spectrogram& target_mix,
                  const LambdaWeights& lambda, const FcpConfig& cfg) {
  cfg.validate();
  require(est.same_shape(target_mix), ErrorKind::data,
          "fcp_map: est and target shapes differ");
  require(lambda.num_frames == est.num_frames && lambda.num_bins == est.num_bins,
          ErrorKind::data, "fcp_map: lambda shape differs");
  const int T = est.num_frames;
  const int F = est.num_bins;
  const int K = cfg.num_taps();

  for (const auto& v : est.bins)
    require(std::isfinite(v.real()) && std::isfinite(v.imag()), ErrorKind::data,
            "fcp_map: non-finite estimate");
  for (const auto& v : target_mix.bins)
    require(std::isfinite(v.real()) && std::isfinite(v.imag()), ErrorKind::data,
            "fcp_map: non-finite target");

  FcpResult out;
  out.mapped = Spectrogram::zeros(T, F, est.config, est.original_length);
  out.filters.assign(static_cast<std::size_t>(F) * K, cd(0.0, 0.0));

  std::vector<cd> stacked(static_cast<std::size_t>(T) * K);
  std::vector<cd> a(static_cast<std::size_t>(K) * K);
  std::vector<cd> b(static_cast<std::size_t>(K));
  std::vector<cd> g;

  for (int f = 0; f < F; ++f) {
    // Stacked frame vectors s~_t = [est_{t-k_past}, ..., est_t, ..., est_{t+k_future}].
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < K; ++k) {
        const int src = t - cfg.k_past + k;
        stacked[static_cast<std::size_t>(t) * K + k] =
            (src >= 0 && src < T) ? est.at(src, f) : cd(0.0, 0.0);
      }
    }
    std::fill(a.begin(), a.end(), cd(0.0, 0.0));
    std::fill(b.begin(), b.end(), cd(0.0, 0.0));
    for (int t = 0; t < T; ++t) {
      const double w = 1.0 / lambda.at(t, f);
      const cd* u = &stacked[static_cast<std::size_t>(t) * K];
      const cd xw = std::conj(target_mix.at(t, f)) * w;
      for (int p = 0; p < K; ++p) {
        const cd upw = u[p] * w;
        b[p] += u[p] * xw;
        for (int q = 0; q <= p; ++q) a[p * K + q] += upw * std::conj(u[q]);
      }
    }
    for (int p = 0; p < K; ++p)
      for (int q = p + 1; q < K; ++q) a[p * K + q] = std::conj(a[q * K + p]);

    double trace = 0.0;
    for (int p = 0; p < K; ++p) trace += a[p * K + p].real();
    if (trace <= 0.0) {
      // silent estimate at this frequency: filter and mapped output stay zero
      continue;
    }
    const double ridge = cfg.regularizer_eps * trace / K;
    for (int p = 0; p < K; ++p) a[p * K + p] += ridge;

    if (!linalg::cholesky_solve_hermitian(a, K, b, g)) {
      linalg::pinv_solve_hermitian(a, K, b, g);
    }
    for (int k = 0; k < K; ++k) out.filters[static_cast<std::size_t>(f) * K + k] = g[k];

    for (int t = 0; t < T; ++t) {
      const cd* u = &stacked[static_cast<std::size_t>(t) * K];
      cd acc(0.0, 0.0);
      for (int k = 0; k < K; ++k) acc += std::conj(g[k]) * u[k];
      out.mapped.at(t, f) = acc;
    }
  }
  return out;
}

namespace {

// A[i][j] = sum over valid l of est[l - s_i] est[l - s_j] where s_k is the
// lag of tap k and l runs over [0, L). Computed from lag correlations with
// head/tail corrections so assembly is O(K L + K^2) instead of O(K^2 L).
std::vector<double> wiener_normal_matrix(const std::vector<double>& est, int taps,
                                         int anticausal) {
  const int L = static_cast<int>(est.size());
  std::vector<double> a(static_cast<std::size_t>(taps) * taps, 0.0);
  // For each lag d we need sums
  //   C_d(lo, hi) = sum_{u=lo}^{hi} est[u] est[u+d]
  // with lo in [0, taps) and hi in (L-1-d-taps, L-1-d]; precompute the full
  // sum plus short head/tail prefix corrections.
  std::vector<double> full(static_cast<std::size_t>(taps), 0.0);
  std::vector<std::vector<double>> head(static_cast<std::size_t>(taps)),
      tail(static_cast<std::size_t>(taps));
  for (int d = 0; d < taps; ++d) {
    const int top = L - 1 - d;
    double c = 0.0;
    for (int u = 0; u <= top; ++u) c += est[u] * est[u + d];
    full[d] = c;
    auto& h = head[d];
    h.assign(static_cast<std::size_t>(taps) + 1, 0.0);
    for (int v = 0; v < taps; ++v) {
      const double term = (v <= top) ? est[v] * est[v + d] : 0.0;
      h[v + 1] = h[v] + term;
    }
    auto& tl = tail[d];
    tl.assign(static_cast<std::size_t>(taps) + 1, 0.0);
    for (int v = 0; v < taps; ++v) {
      const int u = top - v;
      const double term = (u >= 0) ? est[u] * est[u + d] : 0.0;
      tl[v + 1] = tl[v] + term;
    }
  }
  for (int i = 0; i < taps; ++i) {
    for (int j = 0; j <= i; ++j) {
      const int si = i - anticausal;
      const int sj = j - anticausal;
      const int d = si - sj;
      // u = l - si with l in [max(0, si, sj), min(L-1, L-1+si, L-1+sj)];
      // si >= sj, so l in [max(0, si), L-1+min(sj, 0)] when that is nonempty.
      const int l_lo = std::max(0, si);
      const int l_hi = L - 1 + std::min(sj, 0);
      double v = 0.0;
      if (l_lo <= l_hi) {
        const int u_lo = l_lo - si;  // 0 or -si (>0 when si<0)
        const int u_hi = l_hi - si;  // <= L-1-d
        const int top = L - 1 - d;
        // full range is [0, top]; subtract missing head [0, u_lo) and
        // missing tail (u_hi, top].
        v = full[d];
        if (u_lo > 0) v -= head[d][std::min(u_lo, taps)];
        const int tail_count = top - u_hi;
        if (tail_count > 0) v -= tail[d][std::min(tail_count, taps)];
      }
      a[static_cast<std::size_t>(i) * taps + j] = v;
      a[static_cast<std::size_t>(j) * taps + i] = v;
    }
  }
  return a;
}

}  // namespace

WienerResult wiener_map(const Waveform& est, const Waveform& target_mix,
                        const WienerConfig& cfg) {
  cfg.validate();
  est.validate();
  target_mix.validate();
  require(est.num_channels() == 1 && target_mix.num_channels() == 1,
          ErrorKind::data, "wiener_map expects mono signals");
  require(est.sample_rate == target_mix.sample_rate, ErrorKind::data,
          "wiener_map: sample rates differ");
  require(est.length() == target_mix.length(), ErrorKind::data,
          "wiener_map: lengths differ");
  const auto& e = est.mono();
  const auto& x = target_mix.mono();
  const int L = static_cast<int>(e.size());
  const int taps = std::min(cfg.filter_length, L);
  require(energy(e) > 0.0, ErrorKind::data,
          "cannot filter silence to a nonzero target");

  std::vector<double> a = wiener_normal_matrix(e, taps, cfg.anticausal_taps);
  std::vector<double> b(static_cast<std::size_t>(taps), 0.0);
  for (int i = 0; i < taps; ++i) {
    const int si = i - cfg.anticausal_taps;
    const int l_lo = std::max(0, si);
    const int l_hi = L - 1 + std::min(si, 0);
    double s = 0.0;
    for (int l = l_lo; l <= l_hi; ++l) s += x[l] * e[l - si];
    b[i] = s;
  }

  double trace = 0.0;
  for (int i = 0; i < taps; ++i) trace += a[static_cast<std::size_t>(i) * taps + i];
  const double ridge = cfg.regularizer_eps * trace / taps;
  for (int i = 0; i < taps; ++i) a[static_cast<std::size_t>(i) * taps + i] += ridge;

  std::vector<double> w;
  if (!linalg::cholesky_solve_spd(a, taps, b, w)) {
    linalg::pinv_solve_symmetric(a, taps, b, w);
  }

  std::vector<double> mapped(static_cast<std::size_t>(L), 0.0);
  for (int i = 0; i < taps; ++i) {
    const int si = i - cfg.anticausal_taps;
    const double wi = w[i];
    if (wi == 0.0) continue;
    const int l_lo = std::max(0, si);
    const int l_hi = L - 1 + std::min(si, 0);
    for (int l = l_lo; l <= l_hi; ++l) mapped[l] += wi * e[l - si];
  }

  WienerResult out;
  out.mapped = Waveform(std::move(mapped), est.sample_rate);
  out.filter = std::move(w);
  return out;
}

std::vector<Spectrogram> map_sources_fcp(const std::vector<Spectrogram>& ests,
                                         const Spectrogram& target_mix,
                                         const LambdaWeights& lambda,
                                         const FcpConfig& cfg) {
  std::vector<Spectrogram> out;
  out.reserve(ests.size());
  for (const auto& est : ests)
    out.push_back(fcp_map(est, target_mix, lambda, cfg).mapped);
  return out;
}

std::vector<Waveform> map_sources_wiener(const std::vector<Waveform>& ests,
                                         const Waveform& target_mix,
                                         const WienerConfig& cfg) {
  std::vector<Waveform> out;
  out.reserve(ests.size());
  for (const auto& est : ests) out.push_back(wiener_map(est, target_mix, cfg).mapped);
  return out;
}

}  // namespace eras

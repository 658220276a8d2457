// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "eras/tables.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "eras/common.hpp"
#include "eras/losses.hpp"
#include "eras/metrics.hpp"
#include "eras/rng.hpp"

namespace eras {

bool OracleTable::columns_strictly_increasing() const {
  for (int method = 0; method < 2; ++method) {
    for (int r = 1; r < kRows; ++r) {
      if (!(mean_si_snr_db[r][method] > mean_si_snr_db[r - 1][method])) return false;
    }
  }
  return true;
}

double OracleTable::gap_row0_to_row1(int method) const {
  return mean_si_snr_db[1][method] - mean_si_snr_db[0][method];
}

bool OracleTable::fcp_mixture_below_wiener() const {
  return mean_si_snr_db[0][1] < mean_si_snr_db[0][0];
}

std::string OracleTable::to_csv() const {
  std::string out = "filtering_input,wiener_si_snr_db,fcp_si_snr_db\n";
  char buf[160];
  for (int r = 0; r < kRows; ++r) {
    std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f\n", row_names[r].c_str(),
                  mean_si_snr_db[r][0], mean_si_snr_db[r][1]);
    out += buf;
  }
  return out;
}

std::string OracleTable::to_text() const {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-22s %10s %10s\n", "Filtering input", "Wiener",
                "FCP");
  out += buf;
  for (int r = 0; r < kRows; ++r) {
    std::snprintf(buf, sizeof(buf), "%-22s %10.2f %10.2f\n", row_names[r].c_str(),
                  mean_si_snr_db[r][0], mean_si_snr_db[r][1]);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "(mean SI-SNR dB over %d scenes, caps +-60 dB)\n",
                num_scenes);
  out += buf;
  return out;
}

namespace {

// Mean SI-SNR of reconstructing the mixture at channel m from the given
// row inputs at channel m_r, both directions averaged.
struct SceneRowResults {
  std::array<std::array<double, 2>, OracleTable::kRows> si_snr{};
};

SceneRowResults oracle_rows_for_scene(const MixtureScene& scene,
                                      const OracleTableConfig& cfg) {
  SceneRowResults res;
  std::array<std::array<double, 2>, OracleTable::kRows> acc{};
  std::array<std::array<int, 2>, OracleTable::kRows> cnt{};

  std::vector<Spectrogram> mix_specs;
  if (cfg.run_fcp) {
    for (int m = 0; m < kNumMics; ++m)
      mix_specs.push_back(stft(scene.mixtures[m].mono(), cfg.stft));
  }
  const LambdaWeights lambda =
      cfg.run_fcp ? compute_lambda(mix_specs, cfg.fcp.lambda_floor_coeff)
                  : LambdaWeights{};

  for (int mr = 0; mr < kNumMics; ++mr) {
    const int m = 1 - mr;
    // Row inputs at the reference channel.
    std::array<std::vector<const Waveform*>, OracleTable::kRows> rows;
    rows[0] = {&scene.mixtures[mr]};
    for (int n = 0; n < kNumSources; ++n) {
      rows[1].push_back(&scene.images[n][mr]);
      rows[2].push_back(&scene.early[n][mr]);
      rows[3].push_back(&scene.dry[n]);
    }
    const auto& target = scene.mixtures[m];
    const int length = static_cast<int>(target.length());

    for (int r = 0; r < OracleTable::kRows; ++r) {
      if (cfg.run_wiener) {
        std::vector<double> sum(target.length(), 0.0);
        for (const Waveform* w : rows[r]) {
          const auto mapped = wiener_map(*w, target, cfg.wiener).mapped.mono();
          for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += mapped[i];
        }
        acc[r][0] += si_snr(target.mono(), sum);
        cnt[r][0]++;
      }
      if (cfg.run_fcp) {
        Spectrogram sum_spec;
        bool first = true;
        for (const Waveform* w : rows[r]) {
          const Spectrogram est = stft(w->mono(), cfg.stft);
          const FcpResult mapped = fcp_map(est, mix_specs[m], lambda, cfg.fcp);
          if (first) {
            sum_spec = mapped.mapped;
            first = false;
          } else {
            for (std::size_t i = 0; i < sum_spec.bins.size(); ++i)
              sum_spec.bins[i] += mapped.mapped.bins[i];
          }
        }
        const auto recon = istft(sum_spec, cfg.stft, length);
        acc[r][1] += si_snr(target.mono(), recon);
        cnt[r][1]++;
      }
    }
  }
  for (int r = 0; r < OracleTable::kRows; ++r)
    for (int method = 0; method < 2; ++method)
      res.si_snr[r][method] = cnt[r][method] ? acc[r][method] / cnt[r][method] : 0.0;
  return res;
}

}  // namespace

OracleTable oracle_table(const std::vector<MixtureScene>& scenes,
                         const OracleTableConfig& cfg) {
  require(!scenes.empty(), ErrorKind::data, "oracle_table: empty scene set");
  std::vector<SceneRowResults> per_scene(scenes.size());
  parallel_for(scenes.size(), cfg.threads, [&](std::size_t i) {
    per_scene[i] = oracle_rows_for_scene(scenes[i], cfg);
  });
  OracleTable table;
  table.num_scenes = static_cast<int>(scenes.size());
  for (const auto& s : per_scene)
    for (int r = 0; r < OracleTable::kRows; ++r)
      for (int method = 0; method < 2; ++method)
        table.mean_si_snr_db[r][method] += s.si_snr[r][method];
  for (int r = 0; r < OracleTable::kRows; ++r)
    for (int method = 0; method < 2; ++method)
      table.mean_si_snr_db[r][method] /= static_cast<double>(scenes.size());
  return table;
}

std::string IsmsTable::to_csv() const {
  std::string out = "signals,isms\n";
  char buf[120];
  for (int r = 0; r < kRows; ++r) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f\n", row_names[r].c_str(), mean_value[r]);
    out += buf;
  }
  return out;
}

std::string IsmsTable::to_text() const {
  std::string out;
  char buf[120];
  for (int r = 0; r < kRows; ++r) {
    std::snprintf(buf, sizeof(buf), "%-18s %8.2f\n", row_names[r].c_str(),
                  mean_value[r]);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "(mean ISMS over %d scenes)\n", num_scenes);
  out += buf;
  return out;
}

void frequency_permute(Spectrogram& a, Spectrogram& b, std::uint64_t seed) {
  require(a.same_shape(b), ErrorKind::data, "frequency_permute: shape mismatch");
  Rng rng(seed);
  std::vector<int> bins(a.num_bins);
  std::iota(bins.begin(), bins.end(), 0);
  // Fisher-Yates, then swap content on the first half of the shuffle.
  for (int i = a.num_bins - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(bins[i], bins[j]);
  }
  const int half = a.num_bins / 2;
  for (int k = 0; k < half; ++k) {
    const int f = bins[k];
    for (int t = 0; t < a.num_frames; ++t) std::swap(a.at(t, f), b.at(t, f));
  }
}

IsmsTable isms_table(const std::vector<MixtureScene>& scenes,
                     const IsmsTableConfig& cfg) {
  require(!scenes.empty(), ErrorKind::data, "isms_table: empty scene set");
  std::vector<std::array<double, IsmsTable::kRows>> per_scene(scenes.size());
  parallel_for(scenes.size(), cfg.threads, [&](std::size_t i) {
    const MixtureScene& scene = scenes[i];
    const int m = 0;  // evaluated at the left channel
    const Spectrogram mix = stft(scene.mixtures[m].mono(), cfg.stft);
    const Spectrogram zero = Spectrogram::zeros(mix.num_frames, mix.num_bins,
                                                mix.config, mix.original_length);
    Spectrogram img0 = stft(scene.images[0][m].mono(), cfg.stft);
    Spectrogram img1 = stft(scene.images[1][m].mono(), cfg.stft);

    auto& row = per_scene[i];
    row[0] = isms_loss({mix, mix}, mix);
    row[1] = isms_loss({mix, zero}, mix);
    row[2] = isms_loss({zero, zero}, mix);
    row[3] = isms_loss({img0, img1}, mix);
    frequency_permute(img0, img1, Rng::derive(cfg.permutation_seed, scene.seed));
    row[4] = isms_loss({img0, img1}, mix);
  });
  IsmsTable table;
  table.num_scenes = static_cast<int>(scenes.size());
  for (const auto& row : per_scene)
    for (int r = 0; r < IsmsTable::kRows; ++r) table.mean_value[r] += row[r];
  for (int r = 0; r < IsmsTable::kRows; ++r)
    table.mean_value[r] /= static_cast<double>(scenes.size());
  return table;
}

}  // namespace eras

// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "eras/relative_rir.hpp"
#include "eras/scene.hpp"

namespace eras {

// Mixture-reconstruction table: SI-SNR of predicting the mixture at one
// channel from signals at the other, per filtering input and method.
// Rows are ordered mixture -> source images -> direct+early -> dry.
struct OracleTable {
  static constexpr int kRows = 4;
  std::array<std::string, kRows> row_names{"mixture", "source_images",
                                           "direct_early", "dry"};
  // [row][method]; method 0 = wiener, 1 = fcp
  std::array<std::array<double, 2>, kRows> mean_si_snr_db{};
  int num_scenes = 0;

  bool columns_strictly_increasing() const;
  double gap_row0_to_row1(int method) const;
  bool fcp_mixture_below_wiener() const;
  std::string to_csv() const;
  std::string to_text() const;
};

struct OracleTableConfig {
  StftConfig stft;
  FcpConfig fcp;       // paper-style taps by default
  WienerConfig wiener;
  bool run_wiener = true;
  bool run_fcp = true;
  int threads = 0;
};

OracleTable oracle_table(const std::vector<MixtureScene>& scenes,
                         const OracleTableConfig& cfg);

// Oracle ISMS table: degenerate rows plus source images and their
// frequency-permuted counterpart.
struct IsmsTable {
  static constexpr int kRows = 5;
  std::array<std::string, kRows> row_names{"mixture_mixture", "mixture_zero",
                                           "zero_zero", "source_images",
                                           "freq_permuted"};
  std::array<double, kRows> mean_value{};
  int num_scenes = 0;

  std::string to_csv() const;
  std::string to_text() const;
};

struct IsmsTableConfig {
  StftConfig stft;
  std::uint64_t permutation_seed = 17;
  int threads = 0;
};

IsmsTable isms_table(const std::vector<MixtureScene>& scenes,
                     const IsmsTableConfig& cfg);

// Swaps the two spectrograms' content on a seeded random half of the
// frequency bins (the frequency-permutation probe).
void frequency_permute(Spectrogram& a, Spectrogram& b, std::uint64_t seed);

}  // namespace eras

// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eras/loss_graph.hpp"
#include "eras/masknet.hpp"
#include "eras/metrics.hpp"
#include "eras/rng.hpp"
#include "eras/scene.hpp"

namespace eras {

struct DatasetConfig {
  int train_scenes = 64;
  int val_scenes = 16;
  int duration = 16000;  // samples (2 s at 8 kHz)
  int sample_rate = 8000;
  double rt60_lo = 0.12;
  double rt60_hi = 0.25;
  int rir_length = 2048;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SceneDataset {
  std::vector<MixtureScene> train;
  std::vector<MixtureScene> val;
  int sample_rate = 8000;
};

SceneDataset make_toy_dataset(const DatasetConfig& cfg, int threads = 0);
SceneSpec draw_scene_spec(Rng& rng, const DatasetConfig& cfg, std::uint64_t scene_seed);

struct TrainStage {
  double beta = 0.3;
  double gamma = 0.0;
  int epochs = 5;
};

struct TrainConfig {
  StftConfig stft;
  // Training-time FCP taps; desk-scale default is shorter than the paper
  // grid to keep epochs fast, the mapping contract is identical.
  FcpConfig fcp{4, 1, 1e-4, 1e-10};
  FcpConfig eval_fcp{4, 1, 1e-4, 1e-10};
  bool detach_fcp_filters = false;
  MaskNetConfig net;
  double alpha_ref = 0.0;
  TrainStage stage1{0.3, 0.0, 5};
  TrainStage stage2{0.0, 0.1, 5};
  bool stage2_enabled = true;
  int warmup_steps = 20;  // stage-2 lr warmup, 0 -> lr
  double lr = 1e-3;
  int lr_halving_patience = 2;  // epochs without val-loss improvement
  double grad_clip_l2 = 1.0;
  int batch_scenes = 2;
  double success_si_snr_db = 3.0;  // desk-scale success bar
  int probation_epochs = 5;
  std::uint64_t seed = 1;
  int threads = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;      // 1-based, cumulative across stages
  int stage = 1;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_si_snr_db = 0.0;
};

enum class RunStatus { success, failure };

struct RunRecord {
  std::vector<EpochRecord> epochs;
  RunStatus status = RunStatus::failure;
  double final_val_si_snr_db = 0.0;
  double best_val_si_snr_db = 0.0;
  int best_epoch = 0;
};

struct AdamState {
  std::vector<double> m, v;
  std::int64_t t = 0;
};

// Full trainer state; checkpoints serialize exactly this.
struct TrainerState {
  MaskNet net;
  AdamState adam;
  int epoch = 0;  // completed epochs
  int stage = 1;
  double lr = 1e-3;
  double best_val_loss = 0.0;
  bool has_best_val_loss = false;
  int epochs_since_improvement = 0;
  std::int64_t step = 0;        // optimizer steps taken
  std::int64_t stage2_step0 = 0;  // step count at the stage-2 switch
  std::string rng_state;

  static TrainerState fresh(const TrainConfig& cfg);
};

std::string checkpoint_to_json(const TrainerState& state, const TrainConfig& cfg);
TrainerState checkpoint_from_json(const std::string& text, TrainConfig& cfg_out);
void save_checkpoint(const std::string& path, const TrainerState& state,
                     const TrainConfig& cfg);
TrainerState load_checkpoint(const std::string& path, TrainConfig& cfg_out);

// One optimizer step over a batch of scenes: mean per-scene gradients,
// global L2 clipping, Adam update. Returns the mean loss report.
LossReport train_step(TrainerState& state, const TrainConfig& cfg,
                      const std::vector<const MixtureScene*>& batch,
                      const LossWeights& weights, double lr_now);

// Mean validation SI-SNR (dB) under the FCP-aligned protocol, and the
// validation loss under the given weights.
double validation_si_snr(const MaskNet& net, const std::vector<MixtureScene>& val,
                         const TrainConfig& cfg);
double validation_loss(const MaskNet& net, const std::vector<MixtureScene>& val,
                       const TrainConfig& cfg, const LossWeights& weights);

struct TrainCallbacks {
  // Called after every epoch; return value ignored.
  std::function<void(const EpochRecord&)> on_epoch;
  // Called per step with the loss report (for CSV traces).
  std::function<void(std::int64_t step, const LossReport&)> on_step;
};

// Runs `epochs` epochs of one stage, appending to record.
void run_stage(TrainerState& state, const TrainConfig& cfg, const SceneDataset& data,
               const TrainStage& stage, int stage_index, RunRecord& record,
               const TrainCallbacks& callbacks = {});

// Stage 1 then (optionally) stage 2 with lr warmup from the stage-1
// checkpoint. Classification against the desk-scale success criterion
// happens at probation_epochs.
RunRecord run_two_stage(TrainerState& state, const TrainConfig& cfg,
                        const SceneDataset& data,
                        const TrainCallbacks& callbacks = {});

struct SweepCell {
  double beta = 0.0;
  double alpha_ref = 0.0;
  int successes = 0;
  int failures = 0;
  std::vector<double> final_si_snr_db;  // per seed
};

struct SweepReport {
  std::vector<std::uint64_t> seeds;
  std::vector<SweepCell> cells;
};

// Trains stage-1 style runs (beta, gamma=0) for every (beta, seed) pair and
// classifies them with the scaled success criterion.
SweepReport stability_sweep(const std::vector<double>& betas,
                            const std::vector<std::uint64_t>& seeds,
                            const SceneDataset& data, double alpha_ref,
                            TrainConfig cfg);

}  // namespace eras

// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "eras/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "eras/common.hpp"

namespace eras {

using nlohmann::json;

void DatasetConfig::validate() const {
  require(train_scenes >= 1 && val_scenes >= 1, ErrorKind::config,
          "dataset needs train and validation scenes");
  require(duration >= 4096, ErrorKind::config, "dataset scenes are too short");
  require(rt60_lo >= 0.05 && rt60_hi <= 1.0 && rt60_lo <= rt60_hi,
          ErrorKind::config, "rt60 range must lie in [0.05, 1.0]");
  require(sample_rate > 0, ErrorKind::config, "sample rate must be positive");
}

void TrainConfig::validate() const {
  stft.validate();
  fcp.validate();
  eval_fcp.validate();
  net.validate();
  require(net.num_bins == stft.num_bins(), ErrorKind::config,
          "masknet F must match the stft bin count");
  require(stage1.beta >= 0.0 && stage1.gamma >= 0.0 && stage2.beta >= 0.0 &&
              stage2.gamma >= 0.0,
          ErrorKind::config, "stage weights must be nonnegative");
  require(stage1.epochs >= 1, ErrorKind::config, "stage 1 needs >= 1 epoch");
  require(!stage2_enabled || stage2.epochs >= 1, ErrorKind::config,
          "stage 2 needs >= 1 epoch when enabled");
  require(warmup_steps >= 0, ErrorKind::config, "warmup steps must be >= 0");
  require(lr > 0.0, ErrorKind::config, "learning rate must be positive");
  require(lr_halving_patience >= 1, ErrorKind::config, "patience must be >= 1");
  require(grad_clip_l2 > 0.0, ErrorKind::config, "grad clip must be positive");
  require(batch_scenes >= 1, ErrorKind::config, "batch must hold >= 1 scene");
  require(probation_epochs >= 1, ErrorKind::config, "probation must be >= 1 epoch");
  require(alpha_ref >= 0.0 && alpha_ref < 1.0, ErrorKind::config,
          "alpha_ref must lie in [0, 1)");
}

SceneSpec draw_scene_spec(Rng& rng, const DatasetConfig& cfg,
                          std::uint64_t scene_seed) {
  SceneSpec spec;
  spec.seed = scene_seed;
  spec.sample_rate = cfg.sample_rate;
  spec.duration = cfg.duration;
  spec.rir_length = cfg.rir_length;
  spec.rt60 = rng.uniform(cfg.rt60_lo, cfg.rt60_hi);
  for (int n = 0; n < kNumSources; ++n) {
    const int base = 8 + static_cast<int>(rng.below(12));
    const int delta = static_cast<int>(rng.below(7)) - 3;  // +-3 samples spacing
    spec.delays[n][0] = base;
    spec.delays[n][1] = std::max(0, base + delta);
    spec.gains_db[n] = rng.uniform(-2.0, 2.0);
  }
  return spec;
}

SceneDataset make_toy_dataset(const DatasetConfig& cfg, int threads) {
  cfg.validate();
  SceneDataset data;
  data.sample_rate = cfg.sample_rate;
  Rng rng(Rng::derive(cfg.seed, 11));
  std::vector<SceneSpec> specs;
  const int total = cfg.train_scenes + cfg.val_scenes;
  specs.reserve(total);
  for (int i = 0; i < total; ++i)
    specs.push_back(draw_scene_spec(rng, cfg, Rng::derive(cfg.seed, 1000 + i)));
  std::vector<MixtureScene> scenes(total);
  parallel_for(static_cast<std::size_t>(total), threads,
               [&](std::size_t i) { scenes[i] = make_scene(specs[i]); });
  data.train.assign(scenes.begin(), scenes.begin() + cfg.train_scenes);
  data.val.assign(scenes.begin() + cfg.train_scenes, scenes.end());
  return data;
}

namespace {

std::vector<ad::Shape> param_shapes(const MaskNetConfig& cfg) {
  const int in = cfg.feature_dim();
  const int h1 = cfg.hidden[0];
  const int h2 = cfg.hidden[1];
  const int F = cfg.num_bins;
  std::vector<ad::Shape> shapes{ad::Shape::mat(in, h1), ad::Shape::vec(h1),
                                ad::Shape::mat(h1, h2), ad::Shape::vec(h2)};
  for (int head = 0; head < 2 * kNumSources; ++head) {
    shapes.push_back(ad::Shape::mat(h2, F));
    shapes.push_back(ad::Shape::vec(F));
  }
  return shapes;
}

std::vector<double> flatten_params(const std::vector<ad::Tensor>& params) {
  std::vector<double> flat;
  std::size_t n = 0;
  for (const auto& p : params) n += p.v.size();
  flat.reserve(n);
  for (const auto& p : params) flat.insert(flat.end(), p.v.begin(), p.v.end());
  return flat;
}

std::vector<ad::Tensor> unflatten_params(const std::vector<double>& flat,
                                         const MaskNetConfig& cfg) {
  std::vector<ad::Tensor> params;
  std::size_t ofs = 0;
  for (const auto& shape : param_shapes(cfg)) {
    ad::Tensor t(shape);
    require(ofs + t.v.size() <= flat.size(), ErrorKind::data,
            "checkpoint parameter vector is too short");
    std::copy(flat.begin() + ofs, flat.begin() + ofs + t.v.size(), t.v.begin());
    ofs += t.v.size();
    params.push_back(std::move(t));
  }
  require(ofs == flat.size(), ErrorKind::data,
          "checkpoint parameter vector has trailing data");
  return params;
}

json stft_to_json(const StftConfig& s) {
  return json{{"window_length", s.window_length},
              {"hop_length", s.hop_length},
              {"fft_size", s.fft_size}};
}
StftConfig stft_from_json(const json& j) {
  StftConfig s;
  s.window_length = j.at("window_length").get<int>();
  s.hop_length = j.at("hop_length").get<int>();
  s.fft_size = j.at("fft_size").get<int>();
  return s;
}
json fcp_to_json(const FcpConfig& f) {
  return json{{"k_past", f.k_past},
              {"k_future", f.k_future},
              {"lambda_floor_coeff", f.lambda_floor_coeff},
              {"regularizer_eps", f.regularizer_eps}};
}
FcpConfig fcp_from_json(const json& j) {
  FcpConfig f;
  f.k_past = j.at("k_past").get<int>();
  f.k_future = j.at("k_future").get<int>();
  f.lambda_floor_coeff = j.at("lambda_floor_coeff").get<double>();
  f.regularizer_eps = j.at("regularizer_eps").get<double>();
  return f;
}

json train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["stft"] = stft_to_json(cfg.stft);
  j["fcp"] = fcp_to_json(cfg.fcp);
  j["eval_fcp"] = fcp_to_json(cfg.eval_fcp);
  j["detach_fcp_filters"] = cfg.detach_fcp_filters;
  j["net"] = json{{"num_bins", cfg.net.num_bins},
                  {"hidden", {cfg.net.hidden[0], cfg.net.hidden[1]}},
                  {"feature_mag_floor", cfg.net.feature_mag_floor}};
  j["alpha_ref"] = cfg.alpha_ref;
  j["stage1"] = json{{"beta", cfg.stage1.beta},
                     {"gamma", cfg.stage1.gamma},
                     {"epochs", cfg.stage1.epochs}};
  j["stage2"] = json{{"beta", cfg.stage2.beta},
                     {"gamma", cfg.stage2.gamma},
                     {"epochs", cfg.stage2.epochs}};
  j["stage2_enabled"] = cfg.stage2_enabled;
  j["warmup_steps"] = cfg.warmup_steps;
  j["lr"] = cfg.lr;
  j["lr_halving_patience"] = cfg.lr_halving_patience;
  j["grad_clip_l2"] = cfg.grad_clip_l2;
  j["batch_scenes"] = cfg.batch_scenes;
  j["success_si_snr_db"] = cfg.success_si_snr_db;
  j["probation_epochs"] = cfg.probation_epochs;
  j["seed"] = cfg.seed;
  // threads is an execution detail: results are independent of it by
  // construction, so it is not persisted.
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.stft = stft_from_json(j.at("stft"));
  cfg.fcp = fcp_from_json(j.at("fcp"));
  cfg.eval_fcp = fcp_from_json(j.at("eval_fcp"));
  cfg.detach_fcp_filters = j.at("detach_fcp_filters").get<bool>();
  cfg.net.num_bins = j.at("net").at("num_bins").get<int>();
  cfg.net.hidden[0] = j.at("net").at("hidden").at(0).get<int>();
  cfg.net.hidden[1] = j.at("net").at("hidden").at(1).get<int>();
  cfg.net.feature_mag_floor = j.at("net").at("feature_mag_floor").get<double>();
  cfg.alpha_ref = j.at("alpha_ref").get<double>();
  cfg.stage1 = TrainStage{j.at("stage1").at("beta").get<double>(),
                          j.at("stage1").at("gamma").get<double>(),
                          j.at("stage1").at("epochs").get<int>()};
  cfg.stage2 = TrainStage{j.at("stage2").at("beta").get<double>(),
                          j.at("stage2").at("gamma").get<double>(),
                          j.at("stage2").at("epochs").get<int>()};
  cfg.stage2_enabled = j.at("stage2_enabled").get<bool>();
  cfg.warmup_steps = j.at("warmup_steps").get<int>();
  cfg.lr = j.at("lr").get<double>();
  cfg.lr_halving_patience = j.at("lr_halving_patience").get<int>();
  cfg.grad_clip_l2 = j.at("grad_clip_l2").get<double>();
  cfg.batch_scenes = j.at("batch_scenes").get<int>();
  cfg.success_si_snr_db = j.at("success_si_snr_db").get<double>();
  cfg.probation_epochs = j.at("probation_epochs").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.threads = j.value("threads", 0);
  return cfg;
}

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

}  // namespace

TrainerState TrainerState::fresh(const TrainConfig& cfg) {
  cfg.validate();
  TrainerState st;
  st.net = MaskNet::init(cfg.net, cfg.seed);
  const std::size_t n = st.net.num_params();
  st.adam.m.assign(n, 0.0);
  st.adam.v.assign(n, 0.0);
  st.adam.t = 0;
  st.lr = cfg.lr;
  st.rng_state = Rng(Rng::derive(cfg.seed, 999)).state_string();
  return st;
}

std::string checkpoint_to_json(const TrainerState& state, const TrainConfig& cfg) {
  json j;
  j["format"] = "eras-checkpoint";
  j["version"] = 1;
  j["config"] = train_config_to_json(cfg);
  json s;
  s["epoch"] = state.epoch;
  s["stage"] = state.stage;
  s["lr"] = state.lr;
  s["best_val_loss"] = state.best_val_loss;
  s["has_best_val_loss"] = state.has_best_val_loss;
  s["epochs_since_improvement"] = state.epochs_since_improvement;
  s["step"] = state.step;
  s["stage2_step0"] = state.stage2_step0;
  s["rng"] = state.rng_state;
  s["adam_t"] = state.adam.t;
  s["params"] = flatten_params(state.net.params);
  s["adam_m"] = state.adam.m;
  s["adam_v"] = state.adam.v;
  j["state"] = std::move(s);
  return j.dump() + "\n";
}

TrainerState checkpoint_from_json(const std::string& text, TrainConfig& cfg_out) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "eras-checkpoint")
    throw DataError("not an eras checkpoint (missing format marker)");
  if (j.value("version", 0) != 1)
    throw DataError("unsupported checkpoint version " +
                    std::to_string(j.value("version", 0)) + " (expected 1)");
  try {
    cfg_out = train_config_from_json(j.at("config"));
    const json& s = j.at("state");
    TrainerState st;
    st.net.config = cfg_out.net;
    st.net.params = unflatten_params(s.at("params").get<std::vector<double>>(),
                                     cfg_out.net);
    st.adam.m = s.at("adam_m").get<std::vector<double>>();
    st.adam.v = s.at("adam_v").get<std::vector<double>>();
    st.adam.t = s.at("adam_t").get<std::int64_t>();
    require(st.adam.m.size() == st.net.num_params() &&
                st.adam.v.size() == st.net.num_params(),
            ErrorKind::data, "checkpoint optimizer state size mismatch");
    st.epoch = s.at("epoch").get<int>();
    st.stage = s.at("stage").get<int>();
    st.lr = s.at("lr").get<double>();
    st.best_val_loss = s.at("best_val_loss").get<double>();
    st.has_best_val_loss = s.at("has_best_val_loss").get<bool>();
    st.epochs_since_improvement = s.at("epochs_since_improvement").get<int>();
    st.step = s.at("step").get<std::int64_t>();
    st.stage2_step0 = s.at("stage2_step0").get<std::int64_t>();
    st.rng_state = s.at("rng").get<std::string>();
    return st;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const TrainerState& state,
                     const TrainConfig& cfg) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint: " + path);
  os << checkpoint_to_json(state, cfg);
  if (!os) throw DataError("failed writing checkpoint: " + path);
}

TrainerState load_checkpoint(const std::string& path, TrainConfig& cfg_out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return checkpoint_from_json(text, cfg_out);
}

LossReport train_step(TrainerState& state, const TrainConfig& cfg,
                      const std::vector<const MixtureScene*>& batch,
                      const LossWeights& weights, double lr_now) {
  require(!batch.empty(), ErrorKind::config, "train_step: empty batch");
  const std::size_t num_params = state.net.params.size();

  std::vector<std::vector<ad::Tensor>> per_scene_grads(batch.size());
  std::vector<LossReport> per_scene_reports(batch.size());

  parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
    const ScenePrep prep = prepare_scene(*batch[i], cfg.stft);
    ad::Tape tape;
    std::vector<ad::Var> params;
    params.reserve(num_params);
    for (const auto& p : state.net.params) params.push_back(tape.param(p));
    SceneLossGraph graph = build_scene_loss(tape, params, cfg.net, prep, weights,
                                            cfg.fcp, cfg.detach_fcp_filters);
    tape.backward(graph.total);
    per_scene_grads[i].reserve(num_params);
    for (const auto& p : params) per_scene_grads[i].push_back(tape.grad(p));
    per_scene_reports[i] = std::move(graph.report);
  });

  // Mean gradient over the batch, reduced in scene order.
  std::vector<ad::Tensor> grads;
  grads.reserve(num_params);
  for (const auto& p : state.net.params) grads.push_back(ad::Tensor(p.shape));
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& scene_grads : per_scene_grads) {
    for (std::size_t k = 0; k < num_params; ++k) {
      const auto& src = scene_grads[k].v;
      auto& dst = grads[k].v;
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i] * inv_b;
    }
  }

  // Global L2 gradient clipping.
  double sq = 0.0;
  for (const auto& gt : grads)
    for (double v : gt.v) sq += v * v;
  require(std::isfinite(sq), ErrorKind::numerical,
          "train_step: non-finite gradient norm");
  const double norm = std::sqrt(sq);
  const double scale = norm > cfg.grad_clip_l2 ? cfg.grad_clip_l2 / norm : 1.0;

  // Adam update.
  state.adam.t += 1;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.adam.t));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.adam.t));
  std::size_t ofs = 0;
  for (std::size_t k = 0; k < num_params; ++k) {
    auto& p = state.net.params[k].v;
    const auto& gt = grads[k].v;
    for (std::size_t i = 0; i < p.size(); ++i, ++ofs) {
      const double g = gt[i] * scale;
      state.adam.m[ofs] = kAdamBeta1 * state.adam.m[ofs] + (1.0 - kAdamBeta1) * g;
      state.adam.v[ofs] = kAdamBeta2 * state.adam.v[ofs] + (1.0 - kAdamBeta2) * g * g;
      const double mhat = state.adam.m[ofs] / bc1;
      const double vhat = state.adam.v[ofs] / bc2;
      p[i] -= lr_now * mhat / (std::sqrt(vhat) + kAdamEps);
    }
  }
  state.step += 1;

  // Mean report across the batch.
  LossReport mean = per_scene_reports[0];
  for (std::size_t i = 1; i < per_scene_reports.size(); ++i) {
    mean.total += per_scene_reports[i].total;
    for (std::size_t d = 0; d < mean.directions.size(); ++d) {
      mean.directions[d].ras += per_scene_reports[i].directions[d].ras;
      mean.directions[d].isms += per_scene_reports[i].directions[d].isms;
      mean.directions[d].icc += per_scene_reports[i].directions[d].icc;
      mean.directions[d].ras_self += per_scene_reports[i].directions[d].ras_self;
    }
  }
  mean.total *= inv_b;
  for (auto& d : mean.directions) {
    d.ras *= inv_b;
    d.isms *= inv_b;
    d.icc *= inv_b;
    d.ras_self *= inv_b;
  }
  return mean;
}

double validation_si_snr(const MaskNet& net, const std::vector<MixtureScene>& val,
                         const TrainConfig& cfg) {
  require(!val.empty(), ErrorKind::config, "validation set is empty");
  std::vector<double> per_scene(val.size(), 0.0);
  parallel_for(val.size(), cfg.threads, [&](std::size_t i) {
    const MixtureScene& scene = val[i];
    double acc = 0.0;
    for (int mr = 0; mr < kNumMics; ++mr) {
      const auto normalized = normalize_by_std(scene.mixtures[mr]);
      const Spectrogram mix_spec = stft(normalized.first.mono(), cfg.stft);
      const auto ests = separate(net, mix_spec);
      const std::array<Waveform, kNumSources> refs{scene.images[0][mr],
                                                   scene.images[1][mr]};
      const EvalResult res =
          aligned_eval(refs, ests, scene.mixtures[mr], scene.mixtures, cfg.stft,
                       cfg.eval_fcp);
      acc += res.mean_si_snr_db;
    }
    per_scene[i] = acc / kNumMics;
  });
  double sum = 0.0;
  for (double v : per_scene) sum += v;
  return sum / static_cast<double>(val.size());
}

double validation_loss(const MaskNet& net, const std::vector<MixtureScene>& val,
                       const TrainConfig& cfg, const LossWeights& weights) {
  require(!val.empty(), ErrorKind::config, "validation set is empty");
  std::vector<double> per_scene(val.size(), 0.0);
  parallel_for(val.size(), cfg.threads, [&](std::size_t i) {
    const ScenePrep prep = prepare_scene(val[i], cfg.stft);
    std::array<std::vector<Spectrogram>, kNumMics> ests;
    for (int m = 0; m < kNumMics; ++m) ests[m] = separate(net, prep.mix_spec[m]);

    const bool need_self = weights.gamma > 0.0 || weights.alpha_ref() > 0.0;
    std::array<std::vector<Spectrogram>, kNumMics> self_mapped;
    if (need_self) {
      for (int m = 0; m < kNumMics; ++m)
        self_mapped[m] =
            map_sources_fcp(ests[m], prep.mix_spec[m], prep.lambda, cfg.fcp);
    }
    std::array<std::vector<Spectrogram>, kNumMics> cross_mapped;
    for (int mr = 0; mr < kNumMics; ++mr) {
      const int m = 1 - mr;
      cross_mapped[mr] =
          map_sources_fcp(ests[mr], prep.mix_spec[m], prep.lambda, cfg.fcp);
    }
    std::vector<DirectedTermInputs> terms(kNumMics);
    for (int mr = 0; mr < kNumMics; ++mr) {
      const int m = 1 - mr;
      terms[mr].direction = mr == 0 ? "L->R" : "R->L";
      terms[mr].mix_target = &prep.mix_spec[m];
      terms[mr].cross_mapped = &cross_mapped[mr];
      if (need_self) {
        terms[mr].self_mapped = &self_mapped[m];
        terms[mr].mix_ref = &prep.mix_spec[mr];
        terms[mr].self_mapped_ref = &self_mapped[mr];
      }
    }
    per_scene[i] = eras_loss(terms, weights).total;
  });
  double sum = 0.0;
  for (double v : per_scene) sum += v;
  return sum / static_cast<double>(val.size());
}

void run_stage(TrainerState& state, const TrainConfig& cfg, const SceneDataset& data,
               const TrainStage& stage, int stage_index, RunRecord& record,
               const TrainCallbacks& callbacks) {
  cfg.validate();
  require(!data.train.empty(), ErrorKind::config, "training set is empty");
  LossWeights weights;
  weights.alpha = {1.0, cfg.alpha_ref};
  weights.beta = stage.beta;
  weights.gamma = stage.gamma;
  weights.validate();
  state.stage = stage_index;

  Rng rng = Rng::from_state_string(state.rng_state);
  for (int e = 0; e < stage.epochs; ++e) {
    // Deterministic shuffle, independent of thread count.
    std::vector<int> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[i], order[j]);
    }

    double train_loss_acc = 0.0;
    int steps_this_epoch = 0;
    for (std::size_t pos = 0; pos < order.size();
         pos += static_cast<std::size_t>(cfg.batch_scenes)) {
      std::vector<const MixtureScene*> batch;
      for (std::size_t k = pos;
           k < std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch_scenes));
           ++k) {
        batch.push_back(&data.train[order[k]]);
      }
      double lr_now = state.lr;
      if (stage_index == 2 && cfg.warmup_steps > 0) {
        const std::int64_t s2 = state.step - state.stage2_step0;
        const double factor =
            std::min(1.0, static_cast<double>(s2) / cfg.warmup_steps);
        lr_now = state.lr * factor;
      }
      const LossReport report = train_step(state, cfg, batch, weights, lr_now);
      train_loss_acc += report.total;
      steps_this_epoch += 1;
      if (callbacks.on_step) callbacks.on_step(state.step, report);
    }

    state.epoch += 1;
    EpochRecord er;
    er.epoch = state.epoch;
    er.stage = stage_index;
    er.lr = state.lr;
    er.train_loss = steps_this_epoch ? train_loss_acc / steps_this_epoch : 0.0;
    er.val_loss = validation_loss(state.net, data.val, cfg, weights);
    er.val_si_snr_db = validation_si_snr(state.net, data.val, cfg);

    // lr halving on validation-loss plateau
    if (!state.has_best_val_loss || er.val_loss < state.best_val_loss) {
      state.best_val_loss = er.val_loss;
      state.has_best_val_loss = true;
      state.epochs_since_improvement = 0;
    } else {
      state.epochs_since_improvement += 1;
      if (state.epochs_since_improvement >= cfg.lr_halving_patience) {
        state.lr *= 0.5;
        state.epochs_since_improvement = 0;
      }
    }

    record.epochs.push_back(er);
    if (callbacks.on_epoch) callbacks.on_epoch(er);
  }
  state.rng_state = rng.state_string();
}

RunRecord run_two_stage(TrainerState& state, const TrainConfig& cfg,
                        const SceneDataset& data, const TrainCallbacks& callbacks) {
  RunRecord record;
  run_stage(state, cfg, data, cfg.stage1, 1, record, callbacks);
  if (cfg.stage2_enabled) {
    // The switch keeps parameters and optimizer state; only the loss
    // weights and the lr schedule change.
    state.stage2_step0 = state.step;
    // Plateau tracking restarts because the loss definition changed.
    state.has_best_val_loss = false;
    state.epochs_since_improvement = 0;
    run_stage(state, cfg, data, cfg.stage2, 2, record, callbacks);
  }

  double best = -1e30;
  int best_epoch = 0;
  for (const auto& er : record.epochs) {
    if (er.val_si_snr_db > best) {
      best = er.val_si_snr_db;
      best_epoch = er.epoch;
    }
  }
  record.best_val_si_snr_db = best;
  record.best_epoch = best_epoch;
  record.final_val_si_snr_db =
      record.epochs.empty() ? 0.0 : record.epochs.back().val_si_snr_db;

  // Scaled success criterion: validation SI-SNR at the probation epoch.
  double probation_si_snr = -1e30;
  for (const auto& er : record.epochs) {
    if (er.epoch == std::min<int>(cfg.probation_epochs,
                                  static_cast<int>(record.epochs.size()))) {
      probation_si_snr = er.val_si_snr_db;
    }
  }
  record.status = probation_si_snr >= cfg.success_si_snr_db ? RunStatus::success
                                                            : RunStatus::failure;
  return record;
}

SweepReport stability_sweep(const std::vector<double>& betas,
                            const std::vector<std::uint64_t>& seeds,
                            const SceneDataset& data, double alpha_ref,
                            TrainConfig cfg) {
  require(!betas.empty(), ErrorKind::config, "stability sweep needs >= 1 beta");
  require(seeds.size() >= 2, ErrorKind::config, "stability sweep needs >= 2 seeds");
  SweepReport report;
  report.seeds = seeds;
  cfg.alpha_ref = alpha_ref;
  cfg.stage2_enabled = false;
  cfg.stage1.gamma = 0.0;
  cfg.stage1.epochs = cfg.probation_epochs;
  for (double beta : betas) {
    SweepCell cell;
    cell.beta = beta;
    cell.alpha_ref = alpha_ref;
    for (std::uint64_t seed : seeds) {
      TrainConfig run_cfg = cfg;
      run_cfg.seed = seed;
      run_cfg.stage1.beta = beta;
      TrainerState st = TrainerState::fresh(run_cfg);
      const RunRecord rec = run_two_stage(st, run_cfg, data);
      if (rec.status == RunStatus::success) {
        cell.successes += 1;
      } else {
        cell.failures += 1;
      }
      cell.final_si_snr_db.push_back(rec.final_val_si_snr_db);
    }
    report.cells.push_back(std::move(cell));
  }
  return report;
}

}  // namespace eras

// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Command-line surface: scene simulation, the two oracle tables, training,
// the seed-stability sweep and checkpoint evaluation. Every command writes
// a resolved-config snapshot (<command>.config.json) into its output
// directory; rerunning with --config <snapshot> reproduces the primary
// outputs byte for byte.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "eras/common.hpp"
#include "eras/losses.hpp"
#include "eras/manifest.hpp"
#include "eras/metrics.hpp"
#include "eras/tables.hpp"
#include "eras/trainer.hpp"
#include "eras/wav_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace eras;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

std::string default_out_dir() {
  const char* env = std::getenv("ERAS_OUT_DIR");
  return env ? std::string(env) : std::string("eras_out");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory: " + dir);
  // Probe writability up front so nothing is half-written.
  const fs::path probe = fs::path(dir) / ".eras_write_probe";
  std::ofstream os(probe);
  if (!os) throw DataError("output directory is not writable: " + dir);
  os.close();
  fs::remove(probe, ec);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write file: " + path);
  os << text;
  if (!os) throw DataError("failed writing file: " + path);
}

json load_json_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open config file: " + path);
  try {
    return json::parse(std::string((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>()));
  } catch (const json::exception& e) {
    throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
  }
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

std::vector<MixtureScene> render_manifest_scenes(const SceneManifest& manifest,
                                                 int threads) {
  require(!manifest.scenes.empty(), ErrorKind::data, "manifest lists no scenes");
  for (const auto& e : manifest.scenes) {
    require(e.spec.duration > 0 && e.spec.rir_length > 0, ErrorKind::data,
            "scene '" + e.name + "' is missing oracle components in its spec");
  }
  std::vector<MixtureScene> scenes(manifest.scenes.size());
  parallel_for(scenes.size(), threads, [&](std::size_t i) {
    scenes[i] = make_scene(manifest.scenes[i].spec);
  });
  return scenes;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateParams {
  int count = 20;
  double rt60_lo = 0.12;
  double rt60_hi = 0.25;
  std::uint64_t seed = 1;
  int duration = 16000;
  int sample_rate = 8000;
  int rir_length = 2048;
  double noise_snr_db = 0.0;
  bool noise_enabled = false;
  std::string out_dir;
  int threads = 0;
};

json simulate_params_to_json(const SimulateParams& p) {
  json j;
  j["command"] = "simulate";
  j["count"] = p.count;
  j["rt60_lo"] = p.rt60_lo;
  j["rt60_hi"] = p.rt60_hi;
  j["seed"] = p.seed;
  j["duration"] = p.duration;
  j["sample_rate"] = p.sample_rate;
  j["rir_length"] = p.rir_length;
  if (p.noise_enabled) j["noise_snr_db"] = p.noise_snr_db;
  j["threads"] = p.threads;
  return j;
}

void simulate_params_from_json(const json& j, SimulateParams& p) {
  reject_unknown_keys(j,
                      {"command", "count", "rt60_lo", "rt60_hi", "seed", "duration",
                       "sample_rate", "rir_length", "noise_snr_db", "threads"},
                      "simulate config");
  p.count = j.value("count", p.count);
  p.rt60_lo = j.value("rt60_lo", p.rt60_lo);
  p.rt60_hi = j.value("rt60_hi", p.rt60_hi);
  p.seed = j.value("seed", p.seed);
  p.duration = j.value("duration", p.duration);
  p.sample_rate = j.value("sample_rate", p.sample_rate);
  p.rir_length = j.value("rir_length", p.rir_length);
  if (j.contains("noise_snr_db")) {
    p.noise_snr_db = j.at("noise_snr_db").get<double>();
    p.noise_enabled = true;
  }
  p.threads = j.value("threads", p.threads);
}

int run_simulate(const SimulateParams& p) {
  require(p.count >= 1, ErrorKind::config, "count must be >= 1");
  require(p.rt60_lo >= 0.05 && p.rt60_hi <= 1.0 && p.rt60_lo <= p.rt60_hi,
          ErrorKind::config, "rt60 range must lie within [0.05, 1.0] s");
  require(p.duration >= 4096, ErrorKind::config, "duration too short");
  ensure_dir(p.out_dir);

  DatasetConfig dc;
  dc.duration = p.duration;
  dc.sample_rate = p.sample_rate;
  dc.rt60_lo = p.rt60_lo;
  dc.rt60_hi = p.rt60_hi;
  dc.rir_length = p.rir_length;
  dc.seed = p.seed;

  Rng rng(Rng::derive(p.seed, 11));
  SceneManifest manifest;
  manifest.sample_rate = p.sample_rate;
  std::vector<SceneSpec> specs;
  for (int i = 0; i < p.count; ++i) {
    SceneSpec spec = draw_scene_spec(rng, dc, Rng::derive(p.seed, 1000 + i));
    if (p.noise_enabled) spec.noise_snr_db = p.noise_snr_db;
    specs.push_back(spec);
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04d", i);
    manifest.scenes.push_back(ManifestEntry{name, name, spec});
  }

  parallel_for(specs.size(), p.threads, [&](std::size_t i) {
    const MixtureScene scene = make_scene(specs[i]);
    const fs::path dir = fs::path(p.out_dir) / manifest.scenes[i].dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create scene directory: " + dir.string());
    for (int n = 0; n < kNumSources; ++n) {
      save_wav((dir / ("dry_" + std::to_string(n) + ".wav")).string(), scene.dry[n],
               WavFormat::float32);
      for (int m = 0; m < kNumMics; ++m) {
        save_wav((dir / ("image_" + std::to_string(n) + "_" + std::to_string(m) +
                         ".wav"))
                     .string(),
                 scene.images[n][m], WavFormat::float32);
        save_wav((dir / ("rir_" + std::to_string(n) + "_" + std::to_string(m) +
                         ".wav"))
                     .string(),
                 Waveform(scene.rirs[n][m].taps, scene.sample_rate),
                 WavFormat::float32);
      }
    }
    for (int m = 0; m < kNumMics; ++m) {
      save_wav((dir / ("mix_" + std::to_string(m) + ".wav")).string(),
               scene.mixtures[m], WavFormat::float32);
    }
  });

  save_manifest((fs::path(p.out_dir) / "manifest.json").string(), manifest);
  write_text((fs::path(p.out_dir) / "simulate.config.json").string(),
             simulate_params_to_json(p).dump(2) + "\n");
  std::cout << "wrote " << p.count << " scenes to " << p.out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// oracle-table

struct OracleParams {
  std::string manifest_path;
  std::string out_dir;
  bool wiener = true;
  bool fcp = true;
  int k_past = 19;
  int k_future = 1;
  int wiener_taps = 512;
  int threads = 0;
};

json oracle_params_to_json(const OracleParams& p) {
  json j;
  j["command"] = "oracle-table";
  j["manifest"] = p.manifest_path;
  j["wiener"] = p.wiener;
  j["fcp"] = p.fcp;
  j["k_past"] = p.k_past;
  j["k_future"] = p.k_future;
  j["wiener_taps"] = p.wiener_taps;
  j["threads"] = p.threads;
  return j;
}

void oracle_params_from_json(const json& j, OracleParams& p) {
  reject_unknown_keys(j,
                      {"command", "manifest", "wiener", "fcp", "k_past", "k_future",
                       "wiener_taps", "threads"},
                      "oracle-table config");
  p.manifest_path = j.value("manifest", p.manifest_path);
  p.wiener = j.value("wiener", p.wiener);
  p.fcp = j.value("fcp", p.fcp);
  p.k_past = j.value("k_past", p.k_past);
  p.k_future = j.value("k_future", p.k_future);
  p.wiener_taps = j.value("wiener_taps", p.wiener_taps);
  p.threads = j.value("threads", p.threads);
}

int run_oracle_table(const OracleParams& p) {
  require(!p.manifest_path.empty(), ErrorKind::config, "--manifest is required");
  ensure_dir(p.out_dir);
  const SceneManifest manifest = load_manifest(p.manifest_path);
  const auto scenes = render_manifest_scenes(manifest, p.threads);

  OracleTableConfig cfg;
  cfg.fcp.k_past = p.k_past;
  cfg.fcp.k_future = p.k_future;
  cfg.wiener.filter_length = p.wiener_taps;
  cfg.run_wiener = p.wiener;
  cfg.run_fcp = p.fcp;
  cfg.threads = p.threads;
  const OracleTable table = oracle_table(scenes, cfg);

  write_text((fs::path(p.out_dir) / "oracle_table.csv").string(), table.to_csv());
  write_text((fs::path(p.out_dir) / "oracle_table.txt").string(), table.to_text());
  write_text((fs::path(p.out_dir) / "oracle-table.config.json").string(),
             oracle_params_to_json(p).dump(2) + "\n");

  std::cout << table.to_text();
  bool all_pass = true;
  if (p.wiener && p.fcp) {
    const bool monotone = table.columns_strictly_increasing();
    const bool gap = table.gap_row0_to_row1(0) >= 3.0 && table.gap_row0_to_row1(1) >= 3.0;
    const bool fcp_below = table.fcp_mixture_below_wiener();
    std::cout << (monotone ? "PASS" : "FAIL")
              << " columns strictly increase down the rows\n";
    std::cout << (gap ? "PASS" : "FAIL")
              << " >= 3 dB gap between mixture and source-image rows\n";
    std::cout << (fcp_below ? "PASS" : "FAIL")
              << " FCP mixture-input row below Wiener's\n";
    all_pass = monotone && gap && fcp_below;
  }
  return all_pass ? kExitOk : kExitNumerical;
}

// ---------------------------------------------------------------------------
// isms-table

struct IsmsParams {
  std::string manifest_path;
  std::string out_dir;
  std::uint64_t perm_seed = 17;
  int threads = 0;
};

json isms_params_to_json(const IsmsParams& p) {
  json j;
  j["command"] = "isms-table";
  j["manifest"] = p.manifest_path;
  j["perm_seed"] = p.perm_seed;
  j["threads"] = p.threads;
  return j;
}

void isms_params_from_json(const json& j, IsmsParams& p) {
  reject_unknown_keys(j, {"command", "manifest", "perm_seed", "threads"},
                      "isms-table config");
  p.manifest_path = j.value("manifest", p.manifest_path);
  p.perm_seed = j.value("perm_seed", p.perm_seed);
  p.threads = j.value("threads", p.threads);
}

int run_isms_table(const IsmsParams& p) {
  require(!p.manifest_path.empty(), ErrorKind::config, "--manifest is required");
  ensure_dir(p.out_dir);
  const SceneManifest manifest = load_manifest(p.manifest_path);
  const auto scenes = render_manifest_scenes(manifest, p.threads);

  IsmsTableConfig cfg;
  cfg.permutation_seed = p.perm_seed;
  cfg.threads = p.threads;
  const IsmsTable table = isms_table(scenes, cfg);

  write_text((fs::path(p.out_dir) / "isms_table.csv").string(), table.to_csv());
  write_text((fs::path(p.out_dir) / "isms_table.txt").string(), table.to_text());
  write_text((fs::path(p.out_dir) / "isms-table.config.json").string(),
             isms_params_to_json(p).dump(2) + "\n");

  std::cout << table.to_text();
  const bool degenerate_rows = std::abs(table.mean_value[0] - 1.0) < 1e-6 &&
                               std::abs(table.mean_value[1] - 0.5) < 1e-6 &&
                               std::abs(table.mean_value[2]) < 1e-6;
  const bool image_row = table.mean_value[3] > 0.0 &&
                         table.mean_value[3] < table.mean_value[4];
  std::cout << (degenerate_rows ? "PASS" : "FAIL")
            << " degenerate rows equal 1.00 / 0.50 / 0.00\n";
  std::cout << (image_row ? "PASS" : "FAIL")
            << " source-image row positive and below the frequency-permuted row\n";
  return degenerate_rows && image_row ? kExitOk : kExitNumerical;
}

// ---------------------------------------------------------------------------
// train

struct TrainParams {
  std::string config_path;
  std::string out_dir;
  int threads = -1;  // -1: take from config
};

void apply_train_json(const json& j, TrainConfig& cfg, DatasetConfig& data) {
  reject_unknown_keys(j, {"command", "train", "dataset"}, "train config");
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    reject_unknown_keys(d,
                        {"train_scenes", "val_scenes", "duration", "sample_rate",
                         "rt60_lo", "rt60_hi", "rir_length", "seed"},
                        "train config dataset");
    data.train_scenes = d.value("train_scenes", data.train_scenes);
    data.val_scenes = d.value("val_scenes", data.val_scenes);
    data.duration = d.value("duration", data.duration);
    data.sample_rate = d.value("sample_rate", data.sample_rate);
    data.rt60_lo = d.value("rt60_lo", data.rt60_lo);
    data.rt60_hi = d.value("rt60_hi", data.rt60_hi);
    data.rir_length = d.value("rir_length", data.rir_length);
    data.seed = d.value("seed", data.seed);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown_keys(
        t, {"stft",       "fcp",         "eval_fcp",     "detach_fcp_filters",
            "net",        "alpha_ref",   "stage1",       "stage2",
            "stage2_enabled", "warmup_steps", "lr",       "lr_halving_patience",
            "grad_clip_l2", "batch_scenes", "success_si_snr_db",
            "probation_epochs", "seed",   "threads"},
        "train config train");
    if (t.contains("stft")) {
      const json& s = t.at("stft");
      reject_unknown_keys(s, {"window_length", "hop_length", "fft_size"},
                          "train config stft");
      cfg.stft.window_length = s.value("window_length", cfg.stft.window_length);
      cfg.stft.hop_length = s.value("hop_length", cfg.stft.hop_length);
      cfg.stft.fft_size = s.value("fft_size", cfg.stft.fft_size);
      cfg.net.num_bins = cfg.stft.num_bins();
    }
    auto apply_fcp = [&](const char* key, FcpConfig& f) {
      if (!t.contains(key)) return;
      const json& s = t.at(key);
      reject_unknown_keys(
          s, {"k_past", "k_future", "lambda_floor_coeff", "regularizer_eps"},
          std::string("train config ") + key);
      f.k_past = s.value("k_past", f.k_past);
      f.k_future = s.value("k_future", f.k_future);
      f.lambda_floor_coeff = s.value("lambda_floor_coeff", f.lambda_floor_coeff);
      f.regularizer_eps = s.value("regularizer_eps", f.regularizer_eps);
    };
    apply_fcp("fcp", cfg.fcp);
    apply_fcp("eval_fcp", cfg.eval_fcp);
    cfg.detach_fcp_filters = t.value("detach_fcp_filters", cfg.detach_fcp_filters);
    if (t.contains("net")) {
      const json& n = t.at("net");
      reject_unknown_keys(n, {"hidden", "feature_mag_floor"}, "train config net");
      if (n.contains("hidden")) {
        cfg.net.hidden[0] = n.at("hidden").at(0).get<int>();
        cfg.net.hidden[1] = n.at("hidden").at(1).get<int>();
      }
      cfg.net.feature_mag_floor = n.value("feature_mag_floor", cfg.net.feature_mag_floor);
    }
    cfg.alpha_ref = t.value("alpha_ref", cfg.alpha_ref);
    auto apply_stage = [&](const char* key, TrainStage& s) {
      if (!t.contains(key)) return;
      const json& js = t.at(key);
      reject_unknown_keys(js, {"beta", "gamma", "epochs"},
                          std::string("train config ") + key);
      s.beta = js.value("beta", s.beta);
      s.gamma = js.value("gamma", s.gamma);
      s.epochs = js.value("epochs", s.epochs);
    };
    apply_stage("stage1", cfg.stage1);
    apply_stage("stage2", cfg.stage2);
    cfg.stage2_enabled = t.value("stage2_enabled", cfg.stage2_enabled);
    cfg.warmup_steps = t.value("warmup_steps", cfg.warmup_steps);
    cfg.lr = t.value("lr", cfg.lr);
    cfg.lr_halving_patience = t.value("lr_halving_patience", cfg.lr_halving_patience);
    cfg.grad_clip_l2 = t.value("grad_clip_l2", cfg.grad_clip_l2);
    cfg.batch_scenes = t.value("batch_scenes", cfg.batch_scenes);
    cfg.success_si_snr_db = t.value("success_si_snr_db", cfg.success_si_snr_db);
    cfg.probation_epochs = t.value("probation_epochs", cfg.probation_epochs);
    cfg.seed = t.value("seed", cfg.seed);
    cfg.threads = t.value("threads", cfg.threads);
  }
}

json train_snapshot_json(const TrainConfig& cfg, const DatasetConfig& data) {
  json j;
  j["command"] = "train";
  json d;
  d["train_scenes"] = data.train_scenes;
  d["val_scenes"] = data.val_scenes;
  d["duration"] = data.duration;
  d["sample_rate"] = data.sample_rate;
  d["rt60_lo"] = data.rt60_lo;
  d["rt60_hi"] = data.rt60_hi;
  d["rir_length"] = data.rir_length;
  d["seed"] = data.seed;
  j["dataset"] = std::move(d);
  json t;
  t["stft"] = json{{"window_length", cfg.stft.window_length},
                   {"hop_length", cfg.stft.hop_length},
                   {"fft_size", cfg.stft.fft_size}};
  t["fcp"] = json{{"k_past", cfg.fcp.k_past},
                  {"k_future", cfg.fcp.k_future},
                  {"lambda_floor_coeff", cfg.fcp.lambda_floor_coeff},
                  {"regularizer_eps", cfg.fcp.regularizer_eps}};
  t["eval_fcp"] = json{{"k_past", cfg.eval_fcp.k_past},
                       {"k_future", cfg.eval_fcp.k_future},
                       {"lambda_floor_coeff", cfg.eval_fcp.lambda_floor_coeff},
                       {"regularizer_eps", cfg.eval_fcp.regularizer_eps}};
  t["detach_fcp_filters"] = cfg.detach_fcp_filters;
  t["net"] = json{{"hidden", {cfg.net.hidden[0], cfg.net.hidden[1]}},
                  {"feature_mag_floor", cfg.net.feature_mag_floor}};
  t["alpha_ref"] = cfg.alpha_ref;
  t["stage1"] = json{{"beta", cfg.stage1.beta},
                     {"gamma", cfg.stage1.gamma},
                     {"epochs", cfg.stage1.epochs}};
  t["stage2"] = json{{"beta", cfg.stage2.beta},
                     {"gamma", cfg.stage2.gamma},
                     {"epochs", cfg.stage2.epochs}};
  t["stage2_enabled"] = cfg.stage2_enabled;
  t["warmup_steps"] = cfg.warmup_steps;
  t["lr"] = cfg.lr;
  t["lr_halving_patience"] = cfg.lr_halving_patience;
  t["grad_clip_l2"] = cfg.grad_clip_l2;
  t["batch_scenes"] = cfg.batch_scenes;
  t["success_si_snr_db"] = cfg.success_si_snr_db;
  t["probation_epochs"] = cfg.probation_epochs;
  t["seed"] = cfg.seed;
  j["train"] = std::move(t);
  return j;
}

int run_train(const TrainParams& p) {
  require(!p.config_path.empty(), ErrorKind::config, "--config is required");
  TrainConfig cfg;
  DatasetConfig dataset_cfg;
  apply_train_json(load_json_file(p.config_path), cfg, dataset_cfg);
  if (p.threads >= 0) cfg.threads = p.threads;
  cfg.validate();
  dataset_cfg.validate();
  ensure_dir(p.out_dir);
  write_text((fs::path(p.out_dir) / "train.config.json").string(),
             train_snapshot_json(cfg, dataset_cfg).dump(2) + "\n");

  const SceneDataset data = make_toy_dataset(dataset_cfg, cfg.threads);
  TrainerState state = TrainerState::fresh(cfg);

  std::ofstream epoch_log((fs::path(p.out_dir) / "training_log.csv").string(),
                          std::ios::binary);
  epoch_log << "epoch,stage,lr,train_loss,val_loss,val_si_snr_db\n";
  std::ofstream trace_log((fs::path(p.out_dir) / "loss_trace.csv").string(),
                          std::ios::binary);
  trace_log << loss_csv_header() << "\n";

  double best_si_snr = -1e30;
  TrainCallbacks callbacks;
  callbacks.on_epoch = [&](const EpochRecord& er) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%d,%d,%.10g,%.10g,%.10g,%.6f\n", er.epoch,
                  er.stage, er.lr, er.train_loss, er.val_loss, er.val_si_snr_db);
    epoch_log << buf;
    epoch_log.flush();
    save_checkpoint((fs::path(p.out_dir) / "last.ckpt.json").string(), state, cfg);
    if (er.val_si_snr_db > best_si_snr) {
      best_si_snr = er.val_si_snr_db;
      save_checkpoint((fs::path(p.out_dir) / "best.ckpt.json").string(), state, cfg);
    }
    if (er.stage == 1 && er.epoch == cfg.stage1.epochs) {
      save_checkpoint((fs::path(p.out_dir) / "stage1.ckpt.json").string(), state,
                      cfg);
    }
    std::cout << "epoch " << er.epoch << " (stage " << er.stage
              << "): val SI-SNR " << er.val_si_snr_db << " dB, val loss "
              << er.val_loss << "\n";
  };
  callbacks.on_step = [&](std::int64_t step, const LossReport& report) {
    for (const auto& d : report.directions)
      trace_log << loss_csv_row(static_cast<int>(step), d) << "\n";
  };

  const RunRecord record = run_two_stage(state, cfg, data, callbacks);

  json summary;
  summary["status"] = record.status == RunStatus::success ? "success" : "failure";
  summary["final_val_si_snr_db"] = record.final_val_si_snr_db;
  summary["best_val_si_snr_db"] = record.best_val_si_snr_db;
  summary["best_epoch"] = record.best_epoch;
  write_text((fs::path(p.out_dir) / "run_record.json").string(),
             summary.dump(2) + "\n");
  std::cout << "training " << summary["status"].get<std::string>()
            << ", final val SI-SNR " << record.final_val_si_snr_db << " dB\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// stability-sweep

struct SweepParams {
  std::string config_path;  // optional: dataset/train overrides
  std::string out_dir;
  std::vector<double> betas{0.0, 0.3};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double alpha_ref = 0.0;
  int threads = -1;
};

json sweep_params_to_json(const SweepParams& p) {
  json j;
  j["command"] = "stability-sweep";
  j["config"] = p.config_path;
  j["betas"] = p.betas;
  j["seeds"] = p.seeds;
  j["alpha_ref"] = p.alpha_ref;
  j["threads"] = p.threads;
  return j;
}

int run_sweep(const SweepParams& p) {
  require(p.seeds.size() >= 2, ErrorKind::config, "need >= 2 seeds");
  TrainConfig cfg;
  DatasetConfig dataset_cfg;
  if (!p.config_path.empty())
    apply_train_json(load_json_file(p.config_path), cfg, dataset_cfg);
  if (p.threads >= 0) cfg.threads = p.threads;
  cfg.validate();
  dataset_cfg.validate();
  ensure_dir(p.out_dir);
  write_text((fs::path(p.out_dir) / "stability-sweep.config.json").string(),
             sweep_params_to_json(p).dump(2) + "\n");

  const SceneDataset data = make_toy_dataset(dataset_cfg, cfg.threads);
  const SweepReport report = stability_sweep(p.betas, p.seeds, data, p.alpha_ref, cfg);

  std::string csv = "alpha_ref,beta,successes,failures\n";
  std::string text;
  char buf[160];
  for (const auto& cell : report.cells) {
    std::snprintf(buf, sizeof(buf), "%.3g,%.3g,%d,%d\n", cell.alpha_ref, cell.beta,
                  cell.successes, cell.failures);
    csv += buf;
    std::snprintf(buf, sizeof(buf), "alpha_ref=%.3g beta=%.3g: %d / %d\n",
                  cell.alpha_ref, cell.beta, cell.successes, cell.failures);
    text += buf;
  }
  write_text((fs::path(p.out_dir) / "sweep.csv").string(), csv);
  write_text((fs::path(p.out_dir) / "sweep.txt").string(), text);
  std::cout << text;

  // Desk-scale check: the highest beta must not fail more than the lowest.
  int lo_idx = 0, hi_idx = 0;
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    if (report.cells[i].beta < report.cells[lo_idx].beta) lo_idx = static_cast<int>(i);
    if (report.cells[i].beta > report.cells[hi_idx].beta) hi_idx = static_cast<int>(i);
  }
  if (lo_idx != hi_idx) {
    const bool pass =
        report.cells[hi_idx].failures <= report.cells[lo_idx].failures;
    std::snprintf(buf, sizeof(buf),
                  "%s failures at beta=%.3g (%d) <= failures at beta=%.3g (%d)\n",
                  pass ? "PASS" : "FAIL", report.cells[hi_idx].beta,
                  report.cells[hi_idx].failures, report.cells[lo_idx].beta,
                  report.cells[lo_idx].failures);
    std::cout << buf;
    if (!pass) return kExitNumerical;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateParams {
  std::string checkpoint_path;
  std::string manifest_path;
  std::string out_dir;
  bool json_detail = false;
  int sdr_taps = 512;
  int stft_window = 0;  // 0: use checkpoint config
  int threads = 0;
};

json evaluate_params_to_json(const EvaluateParams& p) {
  json j;
  j["command"] = "evaluate";
  j["checkpoint"] = p.checkpoint_path;
  j["manifest"] = p.manifest_path;
  j["json_detail"] = p.json_detail;
  j["sdr_taps"] = p.sdr_taps;
  j["stft_window"] = p.stft_window;
  j["threads"] = p.threads;
  return j;
}

int run_evaluate(const EvaluateParams& p) {
  require(!p.checkpoint_path.empty(), ErrorKind::config, "--checkpoint is required");
  require(!p.manifest_path.empty(), ErrorKind::config, "--manifest is required");
  ensure_dir(p.out_dir);

  TrainConfig cfg;
  const TrainerState state = load_checkpoint(p.checkpoint_path, cfg);
  StftConfig stft_cfg = cfg.stft;
  if (p.stft_window > 0) {
    stft_cfg.window_length = p.stft_window;
    stft_cfg.fft_size = p.stft_window;
    stft_cfg.hop_length = p.stft_window / 4;
  }
  require(stft_cfg.num_bins() == state.net.config.num_bins, ErrorKind::config,
          "stft bin count does not match the checkpoint's network F");

  const SceneManifest manifest = load_manifest(p.manifest_path);
  const auto scenes = render_manifest_scenes(manifest, p.threads);

  std::vector<EvalResult> results(scenes.size());
  parallel_for(scenes.size(), p.threads, [&](std::size_t i) {
    const MixtureScene& scene = scenes[i];
    EvalResult acc;
    double mean_si = 0.0, mean_sdr = 0.0;
    for (int mr = 0; mr < kNumMics; ++mr) {
      const auto normalized = normalize_by_std(scene.mixtures[mr]);
      const Spectrogram mix_spec = stft(normalized.first.mono(), stft_cfg);
      const auto ests = separate(state.net, mix_spec);
      const std::array<Waveform, kNumSources> refs{scene.images[0][mr],
                                                   scene.images[1][mr]};
      const EvalResult r = aligned_eval(refs, ests, scene.mixtures[mr],
                                        scene.mixtures, stft_cfg, cfg.eval_fcp,
                                        p.sdr_taps);
      mean_si += r.mean_si_snr_db;
      mean_sdr += r.mean_sdr_db;
      if (mr == 0) acc = r;
    }
    acc.mean_si_snr_db = mean_si / kNumMics;
    acc.mean_sdr_db = mean_sdr / kNumMics;
    results[i] = acc;
  });

  std::string csv = "scene,si_snr_db,sdr_db\n";
  double total_si = 0.0, total_sdr = 0.0;
  json detail = json::array();
  char buf[200];
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f\n",
                  manifest.scenes[i].name.c_str(), results[i].mean_si_snr_db,
                  results[i].mean_sdr_db);
    csv += buf;
    total_si += results[i].mean_si_snr_db;
    total_sdr += results[i].mean_sdr_db;
    if (p.json_detail) {
      detail.push_back(json{{"scene", manifest.scenes[i].name},
                            {"si_snr_db", results[i].mean_si_snr_db},
                            {"sdr_db", results[i].mean_sdr_db},
                            {"per_source_si_snr_db", results[i].si_snr_db},
                            {"per_source_sdr_db", results[i].sdr_db},
                            {"permutation", results[i].permutation}});
    }
  }
  std::snprintf(buf, sizeof(buf), "mean,%.4f,%.4f\n",
                total_si / static_cast<double>(scenes.size()),
                total_sdr / static_cast<double>(scenes.size()));
  csv += buf;
  write_text((fs::path(p.out_dir) / "evaluation.csv").string(), csv);
  if (p.json_detail) {
    write_text((fs::path(p.out_dir) / "evaluation_detail.json").string(),
               detail.dump(2) + "\n");
  }
  write_text((fs::path(p.out_dir) / "evaluate.config.json").string(),
             evaluate_params_to_json(p).dump(2) + "\n");
  std::snprintf(buf, sizeof(buf), "mean SI-SNR %.2f dB, mean SDR %.2f dB over %zu scenes\n",
                total_si / static_cast<double>(scenes.size()),
                total_sdr / static_cast<double>(scenes.size()), scenes.size());
  std::cout << buf;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eras: unsupervised reverberation-as-supervision separation tools"};
  app.require_subcommand(1);

  SimulateParams sim;
  OracleParams oracle;
  IsmsParams isms;
  TrainParams train;
  SweepParams sweep;
  EvaluateParams eval;
  std::string sim_config, oracle_config, isms_config, sweep_config;

  auto* sim_cmd = app.add_subcommand("simulate", "synthesize scenes + manifest");
  sim_cmd->add_option("--config", sim_config, "config snapshot to replay");
  sim_cmd->add_option("--count", sim.count);
  sim_cmd->add_option("--rt60-lo", sim.rt60_lo);
  sim_cmd->add_option("--rt60-hi", sim.rt60_hi);
  sim_cmd->add_option("--seed", sim.seed);
  sim_cmd->add_option("--duration", sim.duration);
  sim_cmd->add_option("--sample-rate", sim.sample_rate);
  sim_cmd->add_option("--rir-length", sim.rir_length);
  auto* noise_opt = sim_cmd->add_option("--noise-snr-db", sim.noise_snr_db,
                                        "sensor noise SNR (off by default)");
  sim_cmd->add_option("--out", sim.out_dir);
  sim_cmd->add_option("--threads", sim.threads);

  auto* oracle_cmd =
      app.add_subcommand("oracle-table", "mixture-reconstruction SI-SNR table");
  oracle_cmd->add_option("--config", oracle_config);
  oracle_cmd->add_option("--manifest", oracle.manifest_path);
  oracle_cmd->add_flag("--wiener,!--no-wiener", oracle.wiener);
  oracle_cmd->add_flag("--fcp,!--no-fcp", oracle.fcp);
  oracle_cmd->add_option("--k-past", oracle.k_past);
  oracle_cmd->add_option("--k-future", oracle.k_future);
  oracle_cmd->add_option("--wiener-taps", oracle.wiener_taps);
  oracle_cmd->add_option("--out", oracle.out_dir);
  oracle_cmd->add_option("--threads", oracle.threads);

  auto* isms_cmd = app.add_subcommand("isms-table", "oracle ISMS loss table");
  isms_cmd->add_option("--config", isms_config);
  isms_cmd->add_option("--manifest", isms.manifest_path);
  isms_cmd->add_option("--perm-seed", isms.perm_seed);
  isms_cmd->add_option("--out", isms.out_dir);
  isms_cmd->add_option("--threads", isms.threads);

  auto* train_cmd = app.add_subcommand("train", "two-stage unsupervised training");
  train_cmd->add_option("--config", train.config_path)->required();
  train_cmd->add_option("--out", train.out_dir);
  train_cmd->add_option("--threads", train.threads);

  auto* sweep_cmd =
      app.add_subcommand("stability-sweep", "seed-stability counts per beta");
  sweep_cmd->add_option("--config", sweep.config_path,
                        "train/dataset config (optional)");
  sweep_cmd->add_option("--betas", sweep.betas)->delimiter(',');
  sweep_cmd->add_option("--seeds", sweep.seeds)->delimiter(',');
  sweep_cmd->add_option("--alpha-ref", sweep.alpha_ref);
  sweep_cmd->add_option("--out", sweep.out_dir);
  sweep_cmd->add_option("--threads", sweep.threads);

  auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on scenes");
  eval_cmd->add_option("--checkpoint", eval.checkpoint_path);
  eval_cmd->add_option("--manifest", eval.manifest_path);
  eval_cmd->add_flag("--json-detail", eval.json_detail);
  eval_cmd->add_option("--sdr-taps", eval.sdr_taps);
  eval_cmd->add_option("--stft-window", eval.stft_window);
  eval_cmd->add_option("--out", eval.out_dir);
  eval_cmd->add_option("--threads", eval.threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (sim_cmd->parsed()) {
      if (noise_opt->count() > 0) sim.noise_enabled = true;
      // a snapshot replays the run: its values win over flags
      if (!sim_config.empty())
        simulate_params_from_json(load_json_file(sim_config), sim);
      if (sim.out_dir.empty()) sim.out_dir = default_out_dir();
      return run_simulate(sim);
    }
    if (oracle_cmd->parsed()) {
      if (!oracle_config.empty())
        oracle_params_from_json(load_json_file(oracle_config), oracle);
      if (oracle.out_dir.empty()) oracle.out_dir = default_out_dir();
      return run_oracle_table(oracle);
    }
    if (isms_cmd->parsed()) {
      if (!isms_config.empty())
        isms_params_from_json(load_json_file(isms_config), isms);
      if (isms.out_dir.empty()) isms.out_dir = default_out_dir();
      return run_isms_table(isms);
    }
    if (train_cmd->parsed()) {
      if (train.out_dir.empty()) train.out_dir = default_out_dir();
      return run_train(train);
    }
    if (sweep_cmd->parsed()) {
      if (sweep.out_dir.empty()) sweep.out_dir = default_out_dir();
      return run_sweep(sweep);
    }
    if (eval_cmd->parsed()) {
      if (eval.out_dir.empty()) eval.out_dir = default_out_dir();
      return run_evaluate(eval);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::config:
        return kExitConfig;
      case ErrorKind::data:
        return kExitData;
      case ErrorKind::numerical:
        return kExitNumerical;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "eras/common.hpp"
#include "eras/trainer.hpp"

using namespace eras;

namespace {

// small-everything configuration so trainer tests stay fast
TrainConfig small_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.net.hidden = {16, 16};
  cfg.fcp.k_past = 2;
  cfg.fcp.k_future = 1;
  cfg.eval_fcp = cfg.fcp;
  cfg.batch_scenes = 2;
  cfg.stage1.epochs = 1;
  cfg.stage2.epochs = 1;
  cfg.warmup_steps = 4;
  cfg.probation_epochs = 1;
  cfg.seed = seed;
  cfg.threads = 1;
  return cfg;
}

DatasetConfig small_dataset_config(std::uint64_t seed) {
  DatasetConfig dc;
  dc.train_scenes = 4;
  dc.val_scenes = 2;
  dc.duration = 4096;
  dc.rir_length = 1024;
  dc.seed = seed;
  return dc;
}

bool params_equal(const MaskNet& a, const MaskNet& b) {
  for (std::size_t k = 0; k < a.params.size(); ++k) {
    for (std::size_t i = 0; i < a.params[k].v.size(); ++i) {
      if (a.params[k].v[i] != b.params[k].v[i]) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("toy dataset generation is deterministic") {
  const DatasetConfig dc = small_dataset_config(5);
  const SceneDataset a = make_toy_dataset(dc, 1);
  const SceneDataset b = make_toy_dataset(dc, 2);  // thread count must not matter
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t s = 0; s < a.train.size(); ++s) {
    const auto& ma = a.train[s].mixtures[0].mono();
    const auto& mb = b.train[s].mixtures[0].mono();
    REQUIRE(ma.size() == mb.size());
    for (std::size_t i = 0; i < ma.size(); ++i) CHECK(ma[i] == mb[i]);
  }
}

TEST_CASE("two identical train steps produce identical parameters") {
  const TrainConfig cfg = small_config(7);
  const SceneDataset data = make_toy_dataset(small_dataset_config(7), 0);
  LossWeights w;
  w.beta = 0.3;

  TrainerState s1 = TrainerState::fresh(cfg);
  TrainerState s2 = TrainerState::fresh(cfg);
  const std::vector<const MixtureScene*> batch{&data.train[0], &data.train[1]};
  train_step(s1, cfg, batch, w, cfg.lr);
  train_step(s2, cfg, batch, w, cfg.lr);
  CHECK(params_equal(s1.net, s2.net));
}

TEST_CASE("train_step is independent of the thread count") {
  TrainConfig cfg1 = small_config(8);
  TrainConfig cfg2 = small_config(8);
  cfg2.threads = 2;
  const SceneDataset data = make_toy_dataset(small_dataset_config(8), 0);
  LossWeights w;
  w.beta = 0.3;
  TrainerState s1 = TrainerState::fresh(cfg1);
  TrainerState s2 = TrainerState::fresh(cfg2);
  const std::vector<const MixtureScene*> batch{&data.train[0], &data.train[1],
                                               &data.train[2]};
  train_step(s1, cfg1, batch, w, cfg1.lr);
  train_step(s2, cfg2, batch, w, cfg2.lr);
  CHECK(params_equal(s1.net, s2.net));
}

TEST_CASE("loss decreases when overfitting one tiny scene") {
  TrainConfig cfg = small_config(9);
  cfg.batch_scenes = 1;
  const SceneDataset data = make_toy_dataset(small_dataset_config(9), 0);
  LossWeights w;
  w.beta = 0.3;
  TrainerState st = TrainerState::fresh(cfg);
  const std::vector<const MixtureScene*> batch{&data.train[0]};
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 50; ++step) {
    const LossReport rep = train_step(st, cfg, batch, w, cfg.lr);
    if (step == 0) first = rep.total;
    last = rep.total;
  }
  CHECK(last < first);
}

TEST_CASE("checkpoint round-trip resumes bit-identically") {
  const TrainConfig cfg = small_config(10);
  const SceneDataset data = make_toy_dataset(small_dataset_config(10), 0);

  // uninterrupted: two epochs of stage 1
  TrainerState cont = TrainerState::fresh(cfg);
  RunRecord rec_a;
  TrainStage two_epochs = cfg.stage1;
  two_epochs.epochs = 2;
  run_stage(cont, cfg, data, two_epochs, 1, rec_a);

  // interrupted: one epoch, serialize, restore, one more epoch
  TrainerState part = TrainerState::fresh(cfg);
  RunRecord rec_b;
  TrainStage one_epoch = cfg.stage1;
  one_epoch.epochs = 1;
  run_stage(part, cfg, data, one_epoch, 1, rec_b);
  const std::string blob = checkpoint_to_json(part, cfg);
  TrainConfig cfg_loaded;
  TrainerState resumed = checkpoint_from_json(blob, cfg_loaded);
  run_stage(resumed, cfg_loaded, data, one_epoch, 1, rec_b);

  CHECK(params_equal(cont.net, resumed.net));
  CHECK(cont.adam.t == resumed.adam.t);
  for (std::size_t i = 0; i < cont.adam.m.size(); ++i) {
    CHECK(cont.adam.m[i] == resumed.adam.m[i]);
    CHECK(cont.adam.v[i] == resumed.adam.v[i]);
  }
}

TEST_CASE("corrupt checkpoints are rejected with diagnostics") {
  const TrainConfig cfg = small_config(11);
  TrainerState st = TrainerState::fresh(cfg);
  const std::string blob = checkpoint_to_json(st, cfg);
  TrainConfig out;
  SUBCASE("not json") {
    CHECK_THROWS_WITH_AS(checkpoint_from_json("not json at all", out),
                         doctest::Contains("JSON"), Error);
  }
  SUBCASE("wrong format marker") {
    CHECK_THROWS_WITH_AS(checkpoint_from_json("{\"format\":\"other\"}", out),
                         doctest::Contains("format"), Error);
  }
  SUBCASE("wrong version") {
    std::string bad = blob;
    const auto pos = bad.find("\"version\":1");
    REQUIRE(pos != std::string::npos);
    bad.replace(pos, 11, "\"version\":9");
    CHECK_THROWS_WITH_AS(checkpoint_from_json(bad, out),
                         doctest::Contains("version"), Error);
  }
}

TEST_CASE("stage switch preserves parameters and warms the lr from zero") {
  TrainConfig cfg = small_config(12);
  cfg.stage2_enabled = true;
  cfg.warmup_steps = 1000;  // so the first stage-2 step uses lr ~ 0
  const SceneDataset data = make_toy_dataset(small_dataset_config(12), 0);

  TrainerState st = TrainerState::fresh(cfg);
  RunRecord rec;
  run_stage(st, cfg, data, cfg.stage1, 1, rec);
  const MaskNet snapshot = st.net;

  // first stage-2 step: lr factor is 0/warmup = 0, params must not move
  st.stage2_step0 = st.step;
  LossWeights w2;
  w2.beta = cfg.stage2.beta;
  w2.gamma = cfg.stage2.gamma;
  const std::vector<const MixtureScene*> batch{&data.train[0]};
  const std::int64_t s2 = st.step - st.stage2_step0;
  const double lr_now = cfg.lr * std::min(1.0, static_cast<double>(s2) / cfg.warmup_steps);
  train_step(st, cfg, batch, w2, lr_now);
  CHECK(params_equal(snapshot, st.net));
}

TEST_CASE("run_two_stage classifies against the probation epoch") {
  TrainConfig cfg = small_config(13);
  cfg.stage2_enabled = false;
  cfg.success_si_snr_db = -100.0;  // trivially satisfied
  const SceneDataset data = make_toy_dataset(small_dataset_config(13), 0);
  TrainerState st = TrainerState::fresh(cfg);
  const RunRecord rec = run_two_stage(st, cfg, data);
  CHECK(rec.status == RunStatus::success);
  CHECK(rec.epochs.size() == 1);

  TrainConfig cfg2 = small_config(13);
  cfg2.stage2_enabled = false;
  cfg2.success_si_snr_db = 100.0;  // unreachable
  TrainerState st2 = TrainerState::fresh(cfg2);
  const RunRecord rec2 = run_two_stage(st2, cfg2, data);
  CHECK(rec2.status == RunStatus::failure);
}

TEST_CASE("stability sweep is deterministic over a fixed seed list") {
  TrainConfig cfg = small_config(14);
  const SceneDataset data = make_toy_dataset(small_dataset_config(14), 0);
  const std::vector<double> betas{0.0, 0.3};
  const std::vector<std::uint64_t> seeds{1, 2};
  const SweepReport a = stability_sweep(betas, seeds, data, 0.0, cfg);
  const SweepReport b = stability_sweep(betas, seeds, data, 0.0, cfg);
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].successes == b.cells[i].successes);
    CHECK(a.cells[i].failures == b.cells[i].failures);
    for (std::size_t s = 0; s < a.cells[i].final_si_snr_db.size(); ++s)
      CHECK(a.cells[i].final_si_snr_db[s] == b.cells[i].final_si_snr_db[s]);
  }
}

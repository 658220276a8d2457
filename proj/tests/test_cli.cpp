// End-to-end checks of the installed command-line surface. These shell out
// to the built binary, so they cover argument parsing, exit codes and the
// replayability contract.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef ERAS_CLI_PATH
#error "ERAS_CLI_PATH must point at the eras binary"
#endif

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const fs::path out = fs::temp_directory_path() / "eras_cli_out.txt";
  const std::string cmd =
      std::string(ERAS_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult res;
  res.exit_code = WEXITSTATUS(status);
  std::ifstream is(out);
  res.output.assign((std::istreambuf_iterator<char>(is)),
                    std::istreambuf_iterator<char>());
  return res;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  return std::string((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kTinySim = " --count 2 --duration 4096 --rir-length 1024 --seed 42";

}  // namespace

TEST_CASE("simulate writes scenes and is byte-replayable") {
  const fs::path dir_a = fresh_dir("eras_sim_a");
  const fs::path dir_b = fresh_dir("eras_sim_b");
  const CliResult a = run_cli("simulate" + std::string(kTinySim) + " --out " +
                              dir_a.string());
  REQUIRE(a.exit_code == 0);
  CHECK(fs::exists(dir_a / "manifest.json"));
  CHECK(fs::exists(dir_a / "scene_0000" / "mix_0.wav"));
  CHECK(fs::exists(dir_a / "scene_0001" / "dry_1.wav"));

  // replay from the emitted snapshot into a second directory
  const CliResult b = run_cli("simulate --config " +
                              (dir_a / "simulate.config.json").string() +
                              " --out " + dir_b.string());
  REQUIRE(b.exit_code == 0);
  CHECK(slurp(dir_a / "manifest.json") == slurp(dir_b / "manifest.json"));
  for (const char* f : {"scene_0000/mix_0.wav", "scene_0000/mix_1.wav",
                        "scene_0001/image_0_1.wav", "scene_0001/rir_1_0.wav"}) {
    CHECK(slurp(dir_a / f) == slurp(dir_b / f));
  }
}

TEST_CASE("simulate validates rt60 before writing anything") {
  const fs::path dir = fresh_dir("eras_sim_bad");
  const CliResult r = run_cli("simulate --count 1 --rt60-lo 0.01 --rt60-hi 2.0 --out " +
                              dir.string());
  CHECK(r.exit_code == 2);
  CHECK(!fs::exists(dir / "manifest.json"));
}

TEST_CASE("isms-table emits the degenerate rows and PASS lines") {
  const fs::path sim = fresh_dir("eras_isms_sim");
  REQUIRE(run_cli("simulate" + std::string(kTinySim) + " --out " + sim.string())
              .exit_code == 0);
  const fs::path out = fresh_dir("eras_isms_out");
  const CliResult r = run_cli("isms-table --manifest " +
                              (sim / "manifest.json").string() + " --out " +
                              out.string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("PASS degenerate rows") != std::string::npos);
  CHECK(fs::exists(out / "isms_table.csv"));
  const std::string csv = slurp(out / "isms_table.csv");
  CHECK(csv.find("mixture_mixture,1.000000") != std::string::npos);
  CHECK(csv.find("mixture_zero,0.500000") != std::string::npos);
  CHECK(csv.find("zero_zero,0.000000") != std::string::npos);
}

TEST_CASE("table commands replay byte-identically from their snapshots") {
  const fs::path sim = fresh_dir("eras_tbl_sim");
  REQUIRE(run_cli("simulate" + std::string(kTinySim) + " --out " + sim.string())
              .exit_code == 0);
  const fs::path out_a = fresh_dir("eras_tbl_a");
  const CliResult a = run_cli(
      "oracle-table --manifest " + (sim / "manifest.json").string() +
      " --k-past 4 --k-future 1 --wiener-taps 64 --out " + out_a.string());
  REQUIRE(a.exit_code == 0);
  const fs::path out_b = fresh_dir("eras_tbl_b");
  const CliResult b = run_cli("oracle-table --config " +
                              (out_a / "oracle-table.config.json").string() +
                              " --out " + out_b.string());
  REQUIRE(b.exit_code == 0);
  CHECK(slurp(out_a / "oracle_table.csv") == slurp(out_b / "oracle_table.csv"));
}

TEST_CASE("empty manifest is a data error with a nonzero exit") {
  const fs::path dir = fresh_dir("eras_empty_manifest");
  const fs::path manifest = dir / "manifest.json";
  std::ofstream os(manifest);
  os << "{\"format\":\"eras-scene-manifest\",\"version\":1,\"sample_rate\":8000,"
        "\"scenes\":[]}";
  os.close();
  const CliResult r = run_cli("isms-table --manifest " + manifest.string() +
                              " --out " + dir.string());
  CHECK(r.exit_code == 3);
  CHECK(r.output.find("no scenes") != std::string::npos);
}

TEST_CASE("train then evaluate end to end, with the F mismatch guard") {
  const fs::path dir = fresh_dir("eras_cli_train");
  const fs::path cfg_path = dir / "config.json";
  {
    std::ofstream os(cfg_path);
    os << R"({
  "dataset": {"train_scenes": 3, "val_scenes": 2, "duration": 4096,
               "rir_length": 1024, "seed": 5},
  "train": {"net": {"hidden": [12, 12]},
             "fcp": {"k_past": 2, "k_future": 1},
             "eval_fcp": {"k_past": 2, "k_future": 1},
             "stage1": {"beta": 0.3, "gamma": 0.0, "epochs": 1},
             "stage2_enabled": false,
             "batch_scenes": 2,
             "probation_epochs": 1,
             "seed": 5}
})";
  }
  const CliResult tr = run_cli("train --config " + cfg_path.string() + " --out " +
                               dir.string());
  REQUIRE(tr.exit_code == 0);
  REQUIRE(fs::exists(dir / "last.ckpt.json"));
  CHECK(fs::exists(dir / "training_log.csv"));
  CHECK(fs::exists(dir / "loss_trace.csv"));

  const fs::path sim = fresh_dir("eras_cli_eval_scenes");
  REQUIRE(run_cli("simulate --count 2 --duration 4096 --rir-length 1024 --seed 6 --out " +
                  sim.string())
              .exit_code == 0);
  const fs::path eval_out = fresh_dir("eras_cli_eval");
  const CliResult ev = run_cli("evaluate --checkpoint " +
                               (dir / "last.ckpt.json").string() + " --manifest " +
                               (sim / "manifest.json").string() + " --out " +
                               eval_out.string());
  REQUIRE(ev.exit_code == 0);
  CHECK(fs::exists(eval_out / "evaluation.csv"));
  CHECK(ev.output.find("mean SI-SNR") != std::string::npos);

  // mismatched F: window 128 gives 65 bins against the checkpoint's 129
  const CliResult bad = run_cli("evaluate --checkpoint " +
                                (dir / "last.ckpt.json").string() + " --manifest " +
                                (sim / "manifest.json").string() +
                                " --stft-window 128 --out " + eval_out.string());
  CHECK(bad.exit_code == 2);
  CHECK(bad.output.find("bin count") != std::string::npos);

  // corrupt checkpoint: version diagnostics
  const fs::path corrupt = dir / "corrupt.ckpt.json";
  {
    std::string blob = slurp(dir / "last.ckpt.json");
    const auto pos = blob.find("\"version\":1");
    REQUIRE(pos != std::string::npos);
    blob.replace(pos, 11, "\"version\":7");
    std::ofstream os(corrupt, std::ios::binary);
    os << blob;
  }
  const CliResult cr = run_cli("evaluate --checkpoint " + corrupt.string() +
                               " --manifest " + (sim / "manifest.json").string() +
                               " --out " + eval_out.string());
  CHECK(cr.exit_code == 3);
  CHECK(cr.output.find("version") != std::string::npos);
}

TEST_CASE("unknown config keys are rejected") {
  const fs::path dir = fresh_dir("eras_cli_badcfg");
  const fs::path cfg_path = dir / "config.json";
  {
    std::ofstream os(cfg_path);
    os << R"({"train": {"learning_rate_typo": 0.1}})";
  }
  const CliResult r = run_cli("train --config " + cfg_path.string() + " --out " +
                              dir.string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("unknown key") != std::string::npos);
}

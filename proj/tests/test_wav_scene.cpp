#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "eras/common.hpp"
#include "eras/manifest.hpp"
#include "eras/rir.hpp"
#include "eras/scene.hpp"
#include "eras/wav_io.hpp"
#include "test_util.hpp"

using namespace eras;
namespace fs = std::filesystem;

namespace {
std::string temp_path(const char* name) {
  return (fs::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("float32 wav round-trip is bit exact") {
  Rng rng(11);
  std::vector<std::vector<double>> chans(2, std::vector<double>(500));
  for (auto& ch : chans)
    for (double& v : ch) v = static_cast<double>(static_cast<float>(rng.normal() * 0.3));
  Waveform w(chans, 8000);
  const std::string path = temp_path("eras_f32.wav");
  save_wav(path, w, WavFormat::float32);
  const Waveform r = load_wav(path);
  REQUIRE(r.num_channels() == 2);
  REQUIRE(r.length() == 500);
  CHECK(r.sample_rate == 8000);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 500; ++i) CHECK(r.channels[c][i] == w.channels[c][i]);
  fs::remove(path);
}

TEST_CASE("pcm16 quantization error is bounded by 2^-15") {
  Rng rng(12);
  std::vector<double> x(400);
  for (double& v : x) v = 0.9 * std::tanh(rng.normal());
  const std::string path = temp_path("eras_p16.wav");
  save_wav(path, Waveform(x, 16000), WavFormat::pcm16);
  const Waveform r = load_wav(path);
  for (int i = 0; i < 400; ++i)
    CHECK(std::abs(r.channels[0][i] - x[i]) <= std::pow(2.0, -15.0));
  fs::remove(path);
}

TEST_CASE("truncated wav file parses into an error, not a crash") {
  Rng rng(13);
  std::vector<double> x(300, 0.25);
  const std::string path = temp_path("eras_trunc.wav");
  save_wav(path, Waveform(x, 8000), WavFormat::pcm16);
  // chop the file mid-data
  std::ifstream is(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  is.close();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  os.close();
  CHECK_THROWS_WITH_AS(load_wav(path), doctest::Contains("truncated"), Error);
  fs::remove(path);
}

TEST_CASE("unsupported wav codec names the fmt chunk") {
  const std::string path = temp_path("eras_alaw.wav");
  // minimal RIFF with fmt format tag 6 (a-law)
  std::ofstream os(path, std::ios::binary);
  auto u32 = [&](std::uint32_t v) { os.write(reinterpret_cast<char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { os.write(reinterpret_cast<char*>(&v), 2); };
  os.write("RIFF", 4);
  u32(36);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  u32(16);
  u16(6);  // a-law
  u16(1);
  u32(8000);
  u32(8000);
  u16(1);
  u16(8);
  os.write("data", 4);
  u32(0);
  os.close();
  CHECK_THROWS_WITH_AS(load_wav(path), doctest::Contains("fmt"), Error);
  fs::remove(path);
}

TEST_CASE("synth_rir decay time matches rt60 within 5%") {
  // oracle: fit the log-energy envelope slope of the generated tail
  for (double rt60 : {0.15, 0.3}) {
    RirParams params;
    params.rt60 = rt60;
    params.delay = 10;
    params.length = static_cast<int>(rt60 * 8000 * 1.2);
    const Rir rir = synth_rir(params, 321, 8000);

    const int win = 64;
    std::vector<double> ts, ys;
    for (int start = params.delay + 1; start + win < params.length; start += win) {
      double e = 0.0;
      for (int i = start; i < start + win; ++i) e += rir.taps[i] * rir.taps[i];
      if (e <= 0.0) continue;
      ts.push_back((start + win / 2 - params.delay) / 8000.0);
      ys.push_back(std::log(e));
    }
    // linear regression of log-energy on time: slope = -2 ln(1000)/rt60
    double st = 0, sy = 0, stt = 0, sty = 0;
    const int n = static_cast<int>(ts.size());
    for (int i = 0; i < n; ++i) {
      st += ts[i];
      sy += ys[i];
      stt += ts[i] * ts[i];
      sty += ts[i] * ys[i];
    }
    const double slope = (n * sty - st * sy) / (n * stt - st * st);
    const double measured_rt60 = -2.0 * std::log(1000.0) / slope;
    CHECK(measured_rt60 == doctest::Approx(rt60).epsilon(0.05));
  }
}

TEST_CASE("synth_rir respects the direct-tap delay") {
  RirParams params;
  params.delay = 40;
  const Rir rir = synth_rir(params, 5, 8000);
  for (int i = 0; i < 40; ++i) CHECK(rir.taps[i] == 0.0);
  CHECK(rir.taps[40] == 1.0);
}

TEST_CASE("synth_rir is deterministic in the seed") {
  RirParams params;
  const Rir a = synth_rir(params, 77, 8000);
  const Rir b = synth_rir(params, 77, 8000);
  REQUIRE(a.taps.size() == b.taps.size());
  for (std::size_t i = 0; i < a.taps.size(); ++i) CHECK(a.taps[i] == b.taps[i]);
}

TEST_CASE("synth_rir trailing taps carry little energy") {
  RirParams params;
  params.rt60 = 0.2;
  params.length = 2048;
  const Rir rir = synth_rir(params, 2024, 8000);
  double total = 0.0, tail = 0.0;
  const std::size_t cut = rir.taps.size() - rir.taps.size() / 10;
  for (std::size_t i = 0; i < rir.taps.size(); ++i) {
    total += rir.taps[i] * rir.taps[i];
    if (i >= cut) tail += rir.taps[i] * rir.taps[i];
  }
  CHECK(tail < 0.1 * total);
}

TEST_CASE("synth_rir rejects out-of-range rt60") {
  RirParams params;
  params.rt60 = 1.5;
  CHECK_THROWS_AS(synth_rir(params, 1, 8000), Error);
  params.rt60 = 0.01;
  CHECK_THROWS_AS(synth_rir(params, 1, 8000), Error);
}

TEST_CASE("render_scene with identity RIRs returns the dry sources") {
  Rng rng(21);
  std::vector<Waveform> dry;
  for (int n = 0; n < 2; ++n)
    dry.emplace_back(testutil::random_signal(rng, 4000, 0.1), 8000);
  Rir ident;
  ident.taps = {1.0};
  ident.delay_to_direct = 0;
  ident.sample_rate = 8000;
  std::vector<std::vector<Rir>> rirs(2, std::vector<Rir>(2, ident));
  const MixtureScene scene = render_scene(dry, rirs, 50.0);
  for (int n = 0; n < 2; ++n)
    for (int m = 0; m < 2; ++m)
      CHECK(testutil::rel_l2_error(dry[n].mono(), scene.images[n][m].mono()) < 1e-12);
  for (std::size_t i = 0; i < scene.mixtures[0].length(); ++i) {
    CHECK(scene.mixtures[0].mono()[i] ==
          doctest::Approx(dry[0].mono()[i] + dry[1].mono()[i]).epsilon(1e-12));
  }
}

TEST_CASE("render_scene with one silent source reproduces the other image") {
  Rng rng(22);
  std::vector<Waveform> dry;
  dry.emplace_back(testutil::random_signal(rng, 4000, 0.1), 8000);
  dry.emplace_back(std::vector<double>(4000, 0.0), 8000);
  RirParams rp;
  rp.length = 512;
  std::vector<std::vector<Rir>> rirs(2, std::vector<Rir>(2));
  for (int n = 0; n < 2; ++n)
    for (int m = 0; m < 2; ++m) rirs[n][m] = synth_rir(rp, 100 + 2 * n + m, 8000);
  const MixtureScene scene = render_scene(dry, rirs, 50.0);
  for (int m = 0; m < 2; ++m)
    CHECK(testutil::rel_l2_error(scene.images[0][m].mono(),
                                 scene.mixtures[m].mono()) < 1e-12);
}

TEST_CASE("render_scene rejects mismatched sample rates") {
  std::vector<Waveform> dry;
  dry.emplace_back(std::vector<double>(2048, 0.1), 8000);
  dry.emplace_back(std::vector<double>(2048, 0.1), 16000);
  Rir ident;
  ident.taps = {1.0};
  ident.sample_rate = 8000;
  std::vector<std::vector<Rir>> rirs(2, std::vector<Rir>(2, ident));
  CHECK_THROWS_WITH_AS(render_scene(dry, rirs, 50.0),
                       doctest::Contains("sample rates"), Error);
}

TEST_CASE("scene mixtures equal the image sum exactly") {
  SceneSpec spec;
  spec.seed = 1234;
  spec.duration = 8000;
  const MixtureScene scene = make_scene(spec);
  for (int m = 0; m < 2; ++m) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < scene.mixtures[m].length(); ++i) {
      const double sum = scene.images[0][m].mono()[i] + scene.images[1][m].mono()[i];
      const double d = scene.mixtures[m].mono()[i] - sum;
      num += d * d;
      den += sum * sum;
    }
    CHECK(std::sqrt(num / den) < 1e-12);
  }
}

TEST_CASE("fft-based scene convolution matches direct convolution") {
  Rng rng(31);
  const auto x = testutil::random_signal(rng, 600, 0.2);
  RirParams rp;
  rp.length = 300;
  rp.rt60 = 0.1;
  const Rir rir = synth_rir(rp, 9, 8000);
  std::vector<Waveform> dry{Waveform(x, 8000), Waveform(std::vector<double>(600, 0.0), 8000)};
  std::vector<std::vector<Rir>> rirs(2, std::vector<Rir>(2, rir));
  const MixtureScene scene = render_scene(dry, rirs, 50.0);
  auto direct = testutil::direct_convolve(rir.taps, x);
  direct.resize(x.size());
  CHECK(testutil::rel_l2_error(direct, scene.images[0][0].mono()) < 1e-9);
}

TEST_CASE("make_scene is bit-deterministic in the seed") {
  SceneSpec spec;
  spec.seed = 777;
  spec.duration = 6000;
  const MixtureScene a = make_scene(spec);
  const MixtureScene b = make_scene(spec);
  for (int m = 0; m < 2; ++m) {
    REQUIRE(a.mixtures[m].length() == b.mixtures[m].length());
    for (std::size_t i = 0; i < a.mixtures[m].length(); ++i)
      CHECK(a.mixtures[m].mono()[i] == b.mixtures[m].mono()[i]);
  }
}

TEST_CASE("scene manifest round-trips and rejects unknown keys") {
  SceneManifest m;
  m.sample_rate = 8000;
  SceneSpec spec;
  spec.seed = 42;
  spec.rt60 = 0.17;
  spec.delays = {{{9, 11}, {14, 12}}};
  m.scenes.push_back({"scene_0000", "scene_0000", spec});
  const std::string text = manifest_to_json(m);
  const SceneManifest r = manifest_from_json(text);
  REQUIRE(r.scenes.size() == 1);
  CHECK(r.sample_rate == 8000);
  CHECK(r.scenes[0].spec.seed == 42);
  CHECK(r.scenes[0].spec.rt60 == doctest::Approx(0.17));
  CHECK(r.scenes[0].spec.delays[1][0] == 14);

  std::string bad = text;
  bad.insert(bad.find("\"sample_rate\""), "\"bogus_key\": 1, ");
  CHECK_THROWS_WITH_AS(manifest_from_json(bad), doctest::Contains("unknown key"),
                       Error);
}

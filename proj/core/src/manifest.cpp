// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "eras/manifest.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "eras/common.hpp"

namespace eras {

namespace {
using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

json spec_to_json(const SceneSpec& s) {
  json j;
  j["seed"] = s.seed;
  j["sample_rate"] = s.sample_rate;
  j["duration"] = s.duration;
  j["rt60"] = s.rt60;
  j["rir_length"] = s.rir_length;
  j["direct_to_reverb_db"] = s.direct_to_reverb_db;
  j["delays"] = {{s.delays[0][0], s.delays[0][1]}, {s.delays[1][0], s.delays[1][1]}};
  j["gains_db"] = {s.gains_db[0], s.gains_db[1]};
  j["early_window_ms"] = s.early_window_ms;
  if (s.noise_enabled()) j["noise_snr_db"] = s.noise_snr_db;
  return j;
}

SceneSpec spec_from_json(const json& j, const std::string& where) {
  check_keys(j,
             {"seed", "sample_rate", "duration", "rt60", "rir_length",
              "direct_to_reverb_db", "delays", "gains_db", "early_window_ms",
              "noise_snr_db"},
             where);
  SceneSpec s;
  try {
    s.seed = j.at("seed").get<std::uint64_t>();
    s.sample_rate = j.at("sample_rate").get<int>();
    s.duration = j.at("duration").get<int>();
    s.rt60 = j.at("rt60").get<double>();
    s.rir_length = j.at("rir_length").get<int>();
    s.direct_to_reverb_db = j.at("direct_to_reverb_db").get<double>();
    const auto& d = j.at("delays");
    for (int n = 0; n < kNumSources; ++n)
      for (int m = 0; m < kNumMics; ++m) s.delays[n][m] = d.at(n).at(m).get<int>();
    const auto& g = j.at("gains_db");
    for (int n = 0; n < kNumSources; ++n) s.gains_db[n] = g.at(n).get<double>();
    s.early_window_ms = j.at("early_window_ms").get<double>();
    if (j.contains("noise_snr_db")) s.noise_snr_db = j.at("noise_snr_db").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError("malformed scene spec in " + where + ": " + e.what());
  }
  return s;
}
}  // namespace

std::string manifest_to_json(const SceneManifest& m) {
  json j;
  j["format"] = "eras-scene-manifest";
  j["version"] = 1;
  j["sample_rate"] = m.sample_rate;
  j["scenes"] = json::array();
  for (const auto& e : m.scenes) {
    json je;
    je["name"] = e.name;
    je["dir"] = e.dir;
    je["spec"] = spec_to_json(e.spec);
    j["scenes"].push_back(je);
  }
  return j.dump(2) + "\n";
}

SceneManifest manifest_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "eras-scene-manifest")
    throw DataError("not a scene manifest (missing format marker)");
  check_keys(j, {"format", "version", "sample_rate", "scenes"}, "manifest");
  SceneManifest m;
  try {
    m.sample_rate = j.at("sample_rate").get<int>();
    for (const auto& je : j.at("scenes")) {
      check_keys(je, {"name", "dir", "spec"}, "manifest scene entry");
      ManifestEntry e;
      e.name = je.at("name").get<std::string>();
      e.dir = je.value("dir", "");
      e.spec = spec_from_json(je.at("spec"), "scene '" + e.name + "'");
      m.scenes.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void save_manifest(const std::string& path, const SceneManifest& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write manifest: " + path);
  os << manifest_to_json(m);
  if (!os) throw DataError("failed writing manifest: " + path);
}

SceneManifest load_manifest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open manifest: " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return manifest_from_json(text);
}

}  // namespace eras

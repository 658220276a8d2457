// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

#include "eras/scene.hpp"

namespace eras {

// Scene manifest: the generation parameters of every scene in a set, plus
// the directory its exported WAVs live in. Scenes regenerate bit-exactly
// from their spec, so the manifest alone is enough to replay experiments.
struct ManifestEntry {
  std::string name;
  std::string dir;  // relative to the manifest file, empty if not exported
  SceneSpec spec;
};

struct SceneManifest {
  int sample_rate = 8000;
  std::vector<ManifestEntry> scenes;
};

std::string manifest_to_json(const SceneManifest& m);
SceneManifest manifest_from_json(const std::string& text);

void save_manifest(const std::string& path, const SceneManifest& m);
SceneManifest load_manifest(const std::string& path);

}  // namespace eras

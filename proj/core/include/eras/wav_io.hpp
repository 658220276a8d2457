// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>

#include "eras/waveform.hpp"

namespace eras {

enum class WavFormat { pcm16, float32 };

// Reads a RIFF/WAVE file with PCM16 or IEEE float32 samples, 1-2 channels.
// Anything else is rejected with an error naming the offending chunk.
Waveform load_wav(const std::string& path);

// PCM16 quantization rounds half away from zero at scale 32768 and clamps
// to [-32768, 32767]; float32 stores the narrowed samples losslessly.
void save_wav(const std::string& path, const Waveform& w, WavFormat format);

}  // namespace eras

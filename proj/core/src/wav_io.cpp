// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "eras/wav_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "eras/common.hpp"

namespace eras {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

void write_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u16(std::ofstream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

struct Reader {
  const std::string& path;
  std::ifstream is;

  explicit Reader(const std::string& p) : path(p), is(p, std::ios::binary) {
    if (!is) throw DataError("cannot open wav file: " + p);
  }
  void read_bytes(void* dst, std::size_t n, const char* what) {
    is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
      throw DataError("truncated wav file (" + std::string(what) + ") in " + path);
  }
  std::uint32_t read_u32(const char* what) {
    unsigned char b[4];
    read_bytes(b, 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::uint16_t read_u16(const char* what) {
    unsigned char b[2];
    read_bytes(b, 2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
};

std::int16_t quantize_pcm16(double x) {
  // round half away from zero at scale 32768
  double scaled = x * 32768.0;
  double rounded = scaled >= 0.0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5);
  if (rounded > 32767.0) rounded = 32767.0;
  if (rounded < -32768.0) rounded = -32768.0;
  return static_cast<std::int16_t>(rounded);
}

}  // namespace

Waveform load_wav(const std::string& path) {
  Reader r(path);
  char tag[4];
  r.read_bytes(tag, 4, "RIFF header");
  if (std::memcmp(tag, "RIFF", 4) != 0)
    throw DataError("not a RIFF file (missing RIFF chunk): " + path);
  r.read_u32("RIFF size");
  r.read_bytes(tag, 4, "WAVE id");
  if (std::memcmp(tag, "WAVE", 4) != 0)
    throw DataError("not a WAVE file (missing WAVE id): " + path);

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<unsigned char> data;
  bool have_data = false;

  while (r.is.peek() != EOF) {
    r.read_bytes(tag, 4, "chunk id");
    const std::uint32_t size = r.read_u32("chunk size");
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (size < 16) throw DataError("malformed 'fmt ' chunk in " + path);
      format = r.read_u16("fmt format");
      channels = r.read_u16("fmt channels");
      rate = r.read_u32("fmt rate");
      r.read_u32("fmt byte rate");
      r.read_u16("fmt block align");
      bits = r.read_u16("fmt bits");
      std::vector<char> rest(size - 16);
      if (!rest.empty()) r.read_bytes(rest.data(), rest.size(), "fmt extension");
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(size);
      if (size > 0) r.read_bytes(data.data(), size, "data chunk");
      have_data = true;
    } else {
      // skip unknown chunk (word aligned)
      std::vector<char> skip(size + (size & 1));
      if (!skip.empty()) r.read_bytes(skip.data(), skip.size(), "chunk body");
      continue;
    }
    if (size & 1) {
      char pad;
      r.is.read(&pad, 1);
      if (!r.is) r.is.clear(std::ios::eofbit);
    }
    if (have_fmt && have_data) break;
  }
  if (!have_fmt) throw DataError("wav file missing 'fmt ' chunk: " + path);
  if (!have_data) throw DataError("wav file missing 'data' chunk: " + path);
  if (format != kFormatPcm && format != kFormatFloat)
    throw DataError("unsupported codec in 'fmt ' chunk (want PCM or IEEE float): " + path);
  if (format == kFormatPcm && bits != 16)
    throw DataError("unsupported PCM bit depth in 'fmt ' chunk (want 16): " + path);
  if (format == kFormatFloat && bits != 32)
    throw DataError("unsupported float bit depth in 'fmt ' chunk (want 32): " + path);
  if (channels < 1 || channels > 2)
    throw DataError("unsupported channel count in 'fmt ' chunk (want 1-2): " + path);
  if (rate == 0) throw DataError("zero sample rate in 'fmt ' chunk: " + path);

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  if (data.size() % frame_bytes != 0)
    throw DataError("'data' chunk size not a multiple of the frame size: " + path);
  const std::size_t frames = data.size() / frame_bytes;
  if (frames == 0) throw DataError("'data' chunk holds no samples: " + path);

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.channels.assign(channels, std::vector<double>(frames, 0.0));
  const unsigned char* p = data.data();
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::uint16_t c = 0; c < channels; ++c) {
      if (format == kFormatPcm) {
        const std::int16_t v =
            static_cast<std::int16_t>(p[0] | (static_cast<std::uint16_t>(p[1]) << 8));
        w.channels[c][i] = static_cast<double>(v) / 32768.0;
        p += 2;
      } else {
        std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
        float f;
        std::memcpy(&f, &u, 4);
        w.channels[c][i] = static_cast<double>(f);
        p += 4;
      }
    }
  }
  w.validate();
  return w;
}

void save_wav(const std::string& path, const Waveform& w, WavFormat format) {
  w.validate();
  require(w.num_channels() <= 2, ErrorKind::data, "save_wav supports 1-2 channels");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open wav file for writing: " + path);

  const std::uint16_t channels = static_cast<std::uint16_t>(w.num_channels());
  const std::uint32_t frames = static_cast<std::uint32_t>(w.length());
  const std::uint16_t bits = format == WavFormat::pcm16 ? 16 : 32;
  const std::uint16_t block_align = static_cast<std::uint16_t>(channels * bits / 8);
  const std::uint32_t data_size = frames * block_align;

  os.write("RIFF", 4);
  write_u32(os, 36 + data_size);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_u32(os, 16);
  write_u16(os, format == WavFormat::pcm16 ? kFormatPcm : kFormatFloat);
  write_u16(os, channels);
  write_u32(os, static_cast<std::uint32_t>(w.sample_rate));
  write_u32(os, static_cast<std::uint32_t>(w.sample_rate) * block_align);
  write_u16(os, block_align);
  write_u16(os, bits);
  os.write("data", 4);
  write_u32(os, data_size);

  for (std::uint32_t i = 0; i < frames; ++i) {
    for (std::uint16_t c = 0; c < channels; ++c) {
      if (format == WavFormat::pcm16) {
        const std::int16_t v = quantize_pcm16(w.channels[c][i]);
        const std::uint16_t u = static_cast<std::uint16_t>(v);
        unsigned char b[2] = {static_cast<unsigned char>(u & 0xff),
                              static_cast<unsigned char>((u >> 8) & 0xff)};
        os.write(reinterpret_cast<const char*>(b), 2);
      } else {
        const float f = static_cast<float>(w.channels[c][i]);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        write_u32(os, u);
      }
    }
  }
  if (!os) throw DataError("failed writing wav file: " + path);
}

}  // namespace eras

// SPDX-License-Identifier: Apache-2.0
#include "avsr/data/formats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "avsr/core/error.hpp"

namespace avsr::data {

namespace {

using Bytes = std::vector<unsigned char>;

void put_u16(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<unsigned char>(v & 0xff));
  b.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_file(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

std::uint16_t checked_u16(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint16_t>::max()) {
    throw SizeError(std::string(what) + " " + std::to_string(v) + " does not fit the frame header");
  }
  return static_cast<std::uint16_t>(v);
}

}  // namespace

void write_frames(const std::filesystem::path& path, std::span<const float> values,
                  std::size_t timesteps, std::size_t height, std::size_t width) {
  if (values.size() != timesteps * height * width) {
    throw SizeError("frame payload has " + std::to_string(values.size()) + " values for " +
                    std::to_string(timesteps) + "x" + std::to_string(height) + "x" +
                    std::to_string(width));
  }
  Bytes b{'A', 'V', 'F', 'R'};
  b.reserve(kFrameHeaderBytes + 4 * values.size());
  put_u16(b, checked_u16(timesteps, "T"));
  put_u16(b, checked_u16(height, "H"));
  put_u16(b, checked_u16(width, "W"));
  put_u16(b, 0);
  for (float v : values) put_u32(b, std::bit_cast<std::uint32_t>(v));
  write_file(path, b);
}

FrameArray read_frames(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  if (b.size() < kFrameHeaderBytes || std::memcmp(b.data(), "AVFR", 4) != 0) {
    throw FormatError(path.string() + ": not a frame file");
  }
  FrameArray f;
  f.timesteps = get_u16(&b[4]);
  f.height = get_u16(&b[6]);
  f.width = get_u16(&b[8]);
  const std::size_t n = f.timesteps * f.height * f.width;
  if (b.size() != kFrameHeaderBytes + 4 * n) {
    throw FormatError(path.string() + ": payload is " + std::to_string(b.size() - kFrameHeaderBytes) +
                      " bytes, header implies " + std::to_string(4 * n));
  }
  f.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.values[i] = std::bit_cast<float>(get_u32(&b[kFrameHeaderBytes + 4 * i]));
  }
  return f;
}

void write_wav16(const std::filesystem::path& path, std::span<const float> samples,
                 std::uint32_t sample_rate) {
  const auto data_bytes = static_cast<std::uint32_t>(2 * samples.size());
  Bytes b{'R', 'I', 'F', 'F'};
  b.reserve(44 + data_bytes);
  put_u32(b, 36 + data_bytes);
  for (char c : std::string("WAVEfmt ")) b.push_back(static_cast<unsigned char>(c));
  put_u32(b, 16);
  put_u16(b, 1);  // PCM
  put_u16(b, 1);  // mono
  put_u32(b, sample_rate);
  put_u32(b, sample_rate * 2);
  put_u16(b, 2);
  put_u16(b, 16);
  for (char c : std::string("data")) b.push_back(static_cast<unsigned char>(c));
  put_u32(b, data_bytes);
  for (float s : samples) {
    const double clamped = std::clamp(static_cast<double>(s), -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    put_u16(b, static_cast<std::uint16_t>(q));
  }
  write_file(path, b);
}

Waveform read_wav16(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  const auto bad = [&](const std::string& why) { return FormatError(path.string() + ": " + why); };
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(&b[8], "WAVE", 4) != 0) {
    throw bad("not a RIFF/WAVE file");
  }
  Waveform w;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::uint32_t len = get_u32(&b[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + len > b.size()) throw bad("truncated chunk");
    if (std::memcmp(&b[pos], "fmt ", 4) == 0) {
      if (len < 16) throw bad("short fmt chunk");
      if (get_u16(&b[body]) != 1) throw bad("not PCM");
      if (get_u16(&b[body + 2]) != 1) throw bad("not mono");
      if (get_u16(&b[body + 14]) != 16) throw bad("not 16-bit");
      w.sample_rate = get_u32(&b[body + 4]);
      have_fmt = true;
    } else if (std::memcmp(&b[pos], "data", 4) == 0) {
      if (!have_fmt) throw bad("data chunk before fmt chunk");
      if (len % 2 != 0) throw bad("odd data length");
      w.samples.resize(len / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto s = static_cast<std::int16_t>(get_u16(&b[body + 2 * i]));
        w.samples[i] = static_cast<float>(std::max(-1.0, s / 32767.0));
      }
      return w;
    }
    pos = body + len + (len & 1);
  }
  throw bad("no data chunk");
}

}  // namespace avsr::data

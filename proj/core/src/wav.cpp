// Copyright 2026 The WSI Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wsi/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "wsi/common.hpp"

namespace wsi {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

void write_wav(const std::filesystem::path& path, std::span<const double> samples, int sample_rate) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::string buf;
  buf.reserve(44 + data_bytes);
  buf.append("RIFF");
  put_u32(buf, 36 + data_bytes);
  buf.append("WAVE");
  buf.append("fmt ");
  put_u32(buf, 16);
  put_u16(buf, 1);  // PCM
  put_u16(buf, 1);  // mono
  put_u32(buf, static_cast<std::uint32_t>(sample_rate));
  put_u32(buf, static_cast<std::uint32_t>(sample_rate * 2));
  put_u16(buf, 2);   // block align
  put_u16(buf, 16);  // bits per sample
  buf.append("data");
  put_u32(buf, data_bytes);
  for (double s : samples) {
    double c = std::clamp(s, -1.0, 1.0);
    auto q = static_cast<std::int16_t>(std::lround(c * 32767.0));
    put_u16(buf, static_cast<std::uint16_t>(q));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open WAV file: " + path.string());
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (raw.size() < 12 || std::memcmp(raw.data(), "RIFF", 4) != 0 || std::memcmp(raw.data() + 8, "WAVE", 4) != 0)
    throw IoError("not a RIFF/WAVE file: " + path.string());

  WavData out;
  int bits = 0, channels = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= raw.size()) {
    const char* id = reinterpret_cast<const char*>(raw.data() + pos);
    std::uint32_t len = get_u32(raw.data() + pos + 4);
    pos += 8;
    if (pos + len > raw.size()) throw IoError("truncated WAV chunk in " + path.string());
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw IoError("malformed fmt chunk in " + path.string());
      std::uint16_t format = get_u16(raw.data() + pos);
      channels = get_u16(raw.data() + pos + 2);
      out.sample_rate = static_cast<int>(get_u32(raw.data() + pos + 4));
      bits = get_u16(raw.data() + pos + 14);
      if (format != 1) throw IoError("only PCM WAV supported: " + path.string());
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw IoError("data chunk before fmt in " + path.string());
      if (channels != 1 || bits != 16)
        throw IoError("expected mono 16-bit PCM: " + path.string());
      const std::size_t n = len / 2;
      out.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        auto v = static_cast<std::int16_t>(get_u16(raw.data() + pos + 2 * i));
        out.samples[i] = static_cast<double>(v) / 32767.0;
      }
      return out;
    }
    pos += len + (len & 1);  // chunks are word-aligned
  }
  throw IoError("no data chunk in " + path.string());
}

}  // namespace wsi

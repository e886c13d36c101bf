// wav.hpp: WAV ingestion and export.
//
// Supported input encodings: mono 16-bit PCM and mono 32-bit IEEE float.
// Samples map to pascal through a calibration constant (full scale = 1 Pa
// by default).  Stereo and other encodings are rejected with a diagnostic.
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
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "audemu/errors.hpp"
#include "audemu/waveform.hpp"

namespace audemu {
namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void append_u32le(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(x & 0xFF);
  v.push_back((x >> 8) & 0xFF);
  v.push_back((x >> 16) & 0xFF);
  v.push_back((x >> 24) & 0xFF);
}

inline void append_u16le(std::vector<unsigned char>& v, std::uint16_t x) {
  v.push_back(x & 0xFF);
  v.push_back((x >> 8) & 0xFF);
}

}  // namespace detail

// Reads a mono WAV file into pascal.  full_scale_pa is the pressure that a
// full-scale sample maps to.
inline Waveform read_wav(const std::string& path, double full_scale_pa = 1.0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw IoError("not a RIFF/WAVE file: " + path);
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t len = detail::read_u32le(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) break;
    if (std::memcmp(id, "fmt ", 4) == 0 && len >= 16) {
      format = detail::read_u16le(bytes.data() + body);
      channels = detail::read_u16le(bytes.data() + body + 2);
      rate = detail::read_u32le(bytes.data() + body + 4);
      bits = detail::read_u16le(bytes.data() + body + 14);
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1);  // chunks are word-aligned
  }
  if (data == nullptr || rate == 0) throw IoError("WAV file missing fmt/data chunk: " + path);
  if (channels != 1) {
    throw IoError("unsupported WAV: " + std::to_string(channels) +
                  " channels (only mono input is accepted): " + path);
  }
  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  if (format == 1 && bits == 16) {
    const std::size_t n = data_len / 2;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::int16_t s =
          static_cast<std::int16_t>(detail::read_u16le(data + 2 * i));
      w.samples[i] = static_cast<double>(s) / 32768.0 * full_scale_pa;
    }
  } else if (format == 3 && bits == 32) {
    const std::size_t n = data_len / 4;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t u = detail::read_u32le(data + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      w.samples[i] = static_cast<double>(f) * full_scale_pa;
    }
  } else {
    throw IoError("unsupported WAV encoding (format " + std::to_string(format) +
                  ", " + std::to_string(bits) + " bit); expected 16-bit PCM or 32-bit float: " + path);
  }
  if (w.samples.empty()) throw IoError("WAV file holds no samples: " + path);
  return w;
}

// Writes a mono 32-bit float WAV.  Pressure divides by full_scale_pa on
// the way out, so read_wav(write_wav(x)) round-trips at float precision.
inline void write_wav_float32(const std::string& path, const Waveform& w,
                              double full_scale_pa = 1.0) {
  validate(w);
  std::vector<unsigned char> bytes;
  bytes.reserve(58 + 4 * w.samples.size());
  const std::uint32_t data_len = static_cast<std::uint32_t>(4 * w.samples.size());
  const auto put4 = [&](const char* s) {
    bytes.insert(bytes.end(), s, s + 4);
  };
  put4("RIFF");
  detail::append_u32le(bytes, 4 + 8 + 16 + 8 + data_len);
  put4("WAVE");
  put4("fmt ");
  detail::append_u32le(bytes, 16);
  detail::append_u16le(bytes, 3);  // IEEE float
  detail::append_u16le(bytes, 1);  // mono
  detail::append_u32le(bytes, static_cast<std::uint32_t>(w.sample_rate));
  detail::append_u32le(bytes, static_cast<std::uint32_t>(w.sample_rate) * 4);
  detail::append_u16le(bytes, 4);
  detail::append_u16le(bytes, 32);
  put4("data");
  detail::append_u32le(bytes, data_len);
  for (double s : w.samples) {
    const float f = static_cast<float>(s / full_scale_pa);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    detail::append_u32le(bytes, u);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write WAV file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to WAV file: " + path);
}

}  // namespace audemu

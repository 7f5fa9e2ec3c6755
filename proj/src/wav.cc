// src/wav.cc

// Copyright 2026  cmbench authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <string>

#include "cm/binio.h"
#include "cm/dsp.h"
#include "cm/error.h"

namespace cm {

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

std::string FourCC(ByteReader &r) {
  auto b = r.Take(4);
  return std::string(b.begin(), b.end());
}

}  // namespace

Waveform DecodeWav(std::span<const uint8_t> bytes) {
  Waveform wave;
  try {
    ByteReader r(bytes);
    if (FourCC(r) != "RIFF") Fail(ErrorKind::kFormat, "missing RIFF tag");
    r.U32();
    if (FourCC(r) != "WAVE") Fail(ErrorKind::kFormat, "missing WAVE tag");

    bool have_fmt = false;
    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    while (r.remaining() >= 8) {
      std::string id = FourCC(r);
      uint32_t size = r.U32();
      if (size > r.remaining()) Fail(ErrorKind::kFormat, "chunk '" + id + "' overruns file");
      ByteReader chunk(r.Take(size));
      if (size % 2 == 1 && r.remaining() > 0) r.U8();
      if (id == "fmt ") {
        if (size < 16) Fail(ErrorKind::kFormat, "short fmt chunk");
        format = uint16_t(chunk.U8() | chunk.U8() << 8);
        channels = uint16_t(chunk.U8() | chunk.U8() << 8);
        rate = chunk.U32();
        chunk.U32();  // byte rate
        chunk.U8(); chunk.U8();  // block align
        bits = uint16_t(chunk.U8() | chunk.U8() << 8);
        if (format == kFormatExtensible) {
          if (size < 40) Fail(ErrorKind::kFormat, "short extensible fmt chunk");
          chunk.Take(8);
          format = uint16_t(chunk.U8() | chunk.U8() << 8);
        }
        have_fmt = true;
      } else if (id == "data") {
        if (!have_fmt) Fail(ErrorKind::kFormat, "data chunk before fmt chunk");
        if (channels != 1)
          Fail(ErrorKind::kUnsupportedFormat,
               "expected mono audio, got " + std::to_string(channels) + " channels");
        if (rate == 0) Fail(ErrorKind::kFormat, "zero sample rate");
        wave.sample_rate_hz = int(rate);
        if (format == kFormatPcm && bits == 16) {
          size_t n = size / 2;
          wave.samples.resize(n);
          for (size_t i = 0; i < n; ++i) {
            auto s = int16_t(uint16_t(chunk.U8() | chunk.U8() << 8));
            wave.samples[i] = float(s) / 32768.0f;
          }
        } else if (format == kFormatFloat && bits == 32) {
          size_t n = size / 4;
          wave.samples.resize(n);
          for (size_t i = 0; i < n; ++i) {
            float v = chunk.F32();
            if (!std::isfinite(v)) Fail(ErrorKind::kFormat, "non-finite float sample");
            wave.samples[i] = v;
          }
        } else {
          Fail(ErrorKind::kUnsupportedFormat,
               "unsupported codec (format " + std::to_string(format) + ", " +
                   std::to_string(bits) + " bits)");
        }
        return wave;
      }
    }
  } catch (const Error &e) {
    if (e.kind() == ErrorKind::kCorrupt) Fail(ErrorKind::kFormat, "truncated WAV header");
    throw;
  }
  Fail(ErrorKind::kFormat, "no data chunk");
}

Waveform ReadWav(const std::filesystem::path &path) {
  try {
    return DecodeWav(ReadFileBytes(path));
  } catch (const Error &e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<uint8_t> EncodeWav(const Waveform &wave) {
  const uint32_t data_bytes = uint32_t(wave.samples.size() * 2);
  ByteWriter w;
  auto tag = [&w](const char *s) {
    w.PutBytes({reinterpret_cast<const uint8_t *>(s), 4});
  };
  tag("RIFF");
  w.PutU32(36 + data_bytes);
  tag("WAVE");
  tag("fmt ");
  w.PutU32(16);
  w.PutU8(kFormatPcm); w.PutU8(0);
  w.PutU8(1); w.PutU8(0);
  w.PutU32(uint32_t(wave.sample_rate_hz));
  w.PutU32(uint32_t(wave.sample_rate_hz) * 2);
  w.PutU8(2); w.PutU8(0);
  w.PutU8(16); w.PutU8(0);
  tag("data");
  w.PutU32(data_bytes);
  for (float s : wave.samples) {
    double v = std::nearbyint(double(s) * 32768.0);
    if (v > 32767.0) v = 32767.0;
    if (v < -32768.0) v = -32768.0;
    auto q = uint16_t(int16_t(v));
    w.PutU8(uint8_t(q & 0xFF));
    w.PutU8(uint8_t(q >> 8));
  }
  return std::move(w.bytes());
}

void WriteWav(const std::filesystem::path &path, const Waveform &wave) {
  WriteFileBytes(path, EncodeWav(wave));
}

}  // namespace cm

// include/cm/binio.h

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

#ifndef CM_BINIO_H_
#define CM_BINIO_H_

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cm/error.h"

namespace cm {

// Little-endian byte buffer writer used by the binary containers.
class ByteWriter {
 public:
  void PutU8(uint8_t v) { bytes_.push_back(v); }
  void PutU32(uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(uint8_t(v >> (8 * i)));
  }
  void PutU64(uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(uint8_t(v >> (8 * i)));
  }
  void PutF32(float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    PutU32(u);
  }
  void PutF64(double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    PutU64(u);
  }
  void PutBytes(std::span<const uint8_t> b) {
    bytes_.insert(bytes_.end(), b.begin(), b.end());
  }
  void PutString(const std::string &s) {
    PutU32(uint32_t(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }

  size_t size() const { return bytes_.size(); }
  const std::vector<uint8_t> &bytes() const { return bytes_; }
  std::vector<uint8_t> &bytes() { return bytes_; }

 private:
  std::vector<uint8_t> bytes_;
};

// Bounds-checked little-endian reader; running past the end throws kCorrupt.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  uint8_t U8() { return Take(1)[0]; }
  uint32_t U32() {
    auto b = Take(4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
           uint32_t(b[3]) << 24;
  }
  uint64_t U64() {
    uint64_t lo = U32();
    uint64_t hi = U32();
    return lo | hi << 32;
  }
  float F32() {
    uint32_t u = U32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  double F64() {
    uint64_t u = U64();
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }
  std::string String() {
    uint32_t n = U32();
    auto b = Take(n);
    return std::string(b.begin(), b.end());
  }
  std::span<const uint8_t> Take(size_t n) {
    if (n > bytes_.size() - pos_) Fail(ErrorKind::kCorrupt, "unexpected end of data");
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  size_t pos() const { return pos_; }
  size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

uint32_t Crc32(std::span<const uint8_t> bytes);

std::vector<uint8_t> ReadFileBytes(const std::filesystem::path &path);

// Writes to a sibling temp file and renames over the target.
void WriteFileBytes(const std::filesystem::path &path,
                    std::span<const uint8_t> bytes);

}  // namespace cm

#endif  // CM_BINIO_H_

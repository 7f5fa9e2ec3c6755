// include/cm/error.h

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

#ifndef CM_ERROR_H_
#define CM_ERROR_H_

#include <stdexcept>
#include <string>

namespace cm {

enum class ErrorKind {
  kFormat,               // malformed file header or payload
  kUnsupportedFormat,    // valid container, unsupported content
  kParameter,            // out-of-range argument
  kShape,                // tensor / matrix shape disagreement
  kLookup,               // missing trial, key, or file
  kCorrupt,              // checksum or truncation failure
  kVersion,              // unknown container version
  kKindMismatch,         // checkpoint incompatible with the requested run
  kConfig,               // bad or unknown configuration
  kIo,                   // filesystem failure
  kParse,                // text grammar violation
  kDuplicate,            // repeated trial id
  kMetric,               // metric undefined for the given input
  kNumeric,              // NaN / divergence
  kContract,             // API misuse
  kInsufficientInput,    // signal too short
  kUnsupportedFrontend,  // probe cannot reach the waveform
};

const char *ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string &what) {
  throw Error(kind, what);
}

}  // namespace cm

#endif  // CM_ERROR_H_

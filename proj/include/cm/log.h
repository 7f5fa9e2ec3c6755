// include/cm/log.h

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

#ifndef CM_LOG_H_
#define CM_LOG_H_

#include <iostream>
#include <sstream>

namespace cm {

// Verbosity from the CM_LOG environment variable: 0 silent, 1 warnings,
// 2 info (default), 3 debug.
int LogLevel();

class LogLine {
 public:
  LogLine(int level, const char *tag) : enabled_(level <= LogLevel()) {
    if (enabled_) stream_ << tag << ": ";
  }
  ~LogLine() {
    if (enabled_) std::cerr << stream_.str() << '\n';
  }
  template <typename T>
  LogLine &operator<<(const T &value) {
    if (enabled_) stream_ << value;
    return *this;
  }

 private:
  bool enabled_;
  std::ostringstream stream_;
};

}  // namespace cm

#define CM_WARN ::cm::LogLine(1, "WARNING")
#define CM_LOG ::cm::LogLine(2, "LOG")
#define CM_VLOG ::cm::LogLine(3, "VLOG")

#endif  // CM_LOG_H_

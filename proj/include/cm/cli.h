// include/cm/cli.h

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

#ifndef CM_CLI_H_
#define CM_CLI_H_

#include <ostream>
#include <string>
#include <vector>

#include "cm/error.h"

namespace cm {

// Process exit codes.
constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;         // configuration, input, I/O
constexpr int kExitCompatibility = 3;  // checkpoint / front end / version mismatch
constexpr int kExitNumeric = 4;        // NaN or divergence

int ExitCodeFor(ErrorKind kind);

// Entry point of the `cm` tool; args exclude the program name. Results go
// to `out`, diagnostics to `err`.
int RunCli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace cm

#endif  // CM_CLI_H_

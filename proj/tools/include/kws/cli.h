// Copyright 2026 The kwsxattn Authors. All Rights Reserved.
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

#ifndef KWS_CLI_H_
#define KWS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace kws::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitNumerical = 2,
  kExitIo = 3,
};

// Runs one command line. `args` excludes the program name. Normal output goes
// to `out`, diagnostics to `err`; the return value is the process exit code.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kws::cli

#endif  // KWS_CLI_H_

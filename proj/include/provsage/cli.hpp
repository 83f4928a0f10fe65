/* Copyright 2026 The provsage Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <istream>
#include <ostream>

namespace provsage::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // a library error while running
inline constexpr int kExitUsage = 2;    // bad arguments, missing paths, bad config

// Entry point of the provsage tool. Data goes to `out` (or to files named
// by flags), logs and errors to `err`; `in` backs `--input -`.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace provsage::cli

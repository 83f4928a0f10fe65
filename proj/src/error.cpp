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

#include "provsage/error.hpp"

namespace provsage {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFormat: return "FormatError";
    case ErrorCode::kTypeConflict: return "TypeConflict";
    case ErrorCode::kUnknownNode: return "UnknownNode";
    case ErrorCode::kUnknownType: return "UnknownType";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kDivergence: return "Divergence";
    case ErrorCode::kEmptyClass: return "EmptyClass";
    case ErrorCode::kNegativeCount: return "NegativeCount";
    case ErrorCode::kInsufficientGraphs: return "InsufficientGraphs";
    case ErrorCode::kUndefinedMetric: return "UndefinedMetric";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Error";
}

}  // namespace provsage

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

#include <stdexcept>
#include <string>

namespace provsage {

enum class ErrorCode {
  kFormat,
  kTypeConflict,
  kUnknownNode,
  kUnknownType,
  kShapeMismatch,
  kDivergence,
  kEmptyClass,
  kNegativeCount,
  kInsufficientGraphs,
  kUndefinedMetric,
  kIo,
  kInvalidArgument,
};

const char* error_code_name(ErrorCode code);

// Base for every error raised by the library. The code lets callers (the CLI
// in particular) map failures onto exit statuses without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : Error(ErrorCode::kFormat,
              line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class TypeConflict : public Error {
 public:
  explicit TypeConflict(const std::string& what)
      : Error(ErrorCode::kTypeConflict, what) {}
};

class UnknownNode : public Error {
 public:
  explicit UnknownNode(const std::string& id)
      : Error(ErrorCode::kUnknownNode, "unknown node: " + id) {}
};

class UnknownType : public Error {
 public:
  explicit UnknownType(const std::string& what)
      : Error(ErrorCode::kUnknownType, what) {}
};

class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& what)
      : Error(ErrorCode::kShapeMismatch, what) {}
};

class Divergence : public Error {
 public:
  explicit Divergence(const std::string& what)
      : Error(ErrorCode::kDivergence, what) {}
};

class EmptyClass : public Error {
 public:
  explicit EmptyClass(const std::string& what)
      : Error(ErrorCode::kEmptyClass, what) {}
};

class NegativeCount : public Error {
 public:
  explicit NegativeCount(const std::string& what)
      : Error(ErrorCode::kNegativeCount, what) {}
};

class InsufficientGraphs : public Error {
 public:
  explicit InsufficientGraphs(const std::string& what)
      : Error(ErrorCode::kInsufficientGraphs, what) {}
};

class UndefinedMetric : public Error {
 public:
  explicit UndefinedMetric(const std::string& what)
      : Error(ErrorCode::kUndefinedMetric, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorCode::kInvalidArgument, what) {}
};

}  // namespace provsage

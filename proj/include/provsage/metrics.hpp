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

#include <optional>
#include <string>

#include "json.hpp"

namespace provsage {

// Counts may be means over repeated runs, hence doubles.
struct ConfusionCounts {
  double tp = 0;
  double tn = 0;
  double fp = 0;
  double fn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o);
  ConfusionCounts scaled(double factor) const;
  bool operator==(const ConfusionCounts&) const = default;
};

enum class Metric { kPrecision, kRecall, kAccuracy, kFScore, kFpr, kFnr };

const char* metric_name(Metric m);

// Each field is empty when its denominator is zero.
struct Metrics {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> accuracy;
  std::optional<double> f_score;
  std::optional<double> fpr;
  std::optional<double> fnr;

  std::optional<double> get(Metric m) const;
  // Throws UndefinedMetric.
  double value(Metric m) const;
  // Undefined metrics are written as null.
  nlohmann::json to_json() const;
};

// Throws InvalidArgument on negative counts.
Metrics compute_metrics(const ConfusionCounts& counts);

// "undefined" for empty values, else fixed six-decimal text.
std::string format_metric(const std::optional<double>& value);

}  // namespace provsage

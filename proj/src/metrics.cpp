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

#include "provsage/metrics.hpp"

#include <cstdio>

#include "provsage/error.hpp"

namespace provsage {

namespace {

std::optional<double> ratio(double num, double den) {
  if (den == 0) return std::nullopt;
  return num / den;
}

}  // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  tn += o.tn;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

ConfusionCounts ConfusionCounts::scaled(double factor) const {
  return {tp * factor, tn * factor, fp * factor, fn * factor};
}

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::kPrecision: return "precision";
    case Metric::kRecall: return "recall";
    case Metric::kAccuracy: return "accuracy";
    case Metric::kFScore: return "f_score";
    case Metric::kFpr: return "fpr";
    case Metric::kFnr: return "fnr";
  }
  return "?";
}

std::optional<double> Metrics::get(Metric m) const {
  switch (m) {
    case Metric::kPrecision: return precision;
    case Metric::kRecall: return recall;
    case Metric::kAccuracy: return accuracy;
    case Metric::kFScore: return f_score;
    case Metric::kFpr: return fpr;
    case Metric::kFnr: return fnr;
  }
  return std::nullopt;
}

double Metrics::value(Metric m) const {
  const auto v = get(m);
  if (!v) throw UndefinedMetric(std::string(metric_name(m)) + " has a zero denominator");
  return *v;
}

nlohmann::json Metrics::to_json() const {
  nlohmann::json j;
  for (Metric m : {Metric::kPrecision, Metric::kRecall, Metric::kAccuracy, Metric::kFScore,
                   Metric::kFpr, Metric::kFnr}) {
    const auto v = get(m);
    j[metric_name(m)] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  }
  return j;
}

Metrics compute_metrics(const ConfusionCounts& c) {
  if (c.tp < 0 || c.tn < 0 || c.fp < 0 || c.fn < 0) {
    throw InvalidArgument("confusion counts must be nonnegative");
  }
  Metrics m;
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.accuracy = ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn);
  if (m.precision && m.recall) {
    m.f_score = ratio(2 * *m.precision * *m.recall, *m.precision + *m.recall);
  }
  m.fpr = ratio(c.fp, c.fp + c.tn);
  m.fnr = ratio(c.fn, c.fn + c.tp);
  return m;
}

std::string format_metric(const std::optional<double>& value) {
  if (!value) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *value);
  return buf;
}

}  // namespace provsage

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

#include "provsage/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "provsage/binary_io.hpp"
#include "provsage/error.hpp"
#include "provsage/rng.hpp"

namespace provsage {

RowSparse mean_in_operator(std::size_t n, std::span<const LocalEdge> edges) {
  std::vector<std::uint32_t> in_degree(n, 0);
  for (const auto& e : edges) {
    if (e.src >= n || e.dst >= n) throw ShapeMismatch("edge endpoint out of range");
    ++in_degree[e.dst];
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(edges.size());
  for (const auto& e : edges) {
    triplets.emplace_back(e.dst, e.src, 1.0 / in_degree[e.dst]);
  }
  RowSparse p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  // Duplicates (parallel edges) are summed, which is the multiplicity weight.
  p.setFromTriplets(triplets.begin(), triplets.end());
  return p;
}

GraphTensor make_graph_tensor(std::size_t n, std::span<const LocalEdge> edges,
                              Eigen::MatrixXd features) {
  if (static_cast<std::size_t>(features.rows()) != n) {
    throw ShapeMismatch("feature rows do not match node count");
  }
  return GraphTensor{mean_in_operator(n, edges), std::move(features)};
}

Submodel::Submodel(std::vector<int> widths, Activation activation,
                   std::uint64_t maps_fingerprint)
    : widths_(std::move(widths)), activation_(activation), fingerprint_(maps_fingerprint) {
  if (widths_.size() < 2) throw ShapeMismatch("a submodel needs at least one layer");
  for (int w : widths_) {
    if (w <= 0) throw ShapeMismatch("layer widths must be positive");
  }
  for (std::size_t k = 1; k < widths_.size(); ++k) {
    weights_.push_back(Eigen::MatrixXd::Zero(widths_[k], 2 * widths_[k - 1]));
  }
}

Submodel Submodel::glorot(std::vector<int> widths, std::uint64_t seed,
                          std::uint64_t maps_fingerprint, Activation activation) {
  Submodel m(std::move(widths), activation, maps_fingerprint);
  Rng rng(seed);
  for (auto& w : m.weights_) {
    const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-a, a);
    }
  }
  return m;
}

bool Submodel::all_finite() const {
  return std::all_of(weights_.begin(), weights_.end(),
                     [](const Eigen::MatrixXd& w) { return w.allFinite(); });
}

bool Submodel::operator==(const Submodel& other) const {
  if (widths_ != other.widths_ || activation_ != other.activation_ ||
      fingerprint_ != other.fingerprint_ || weights_.size() != other.weights_.size()) {
    return false;
  }
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (weights_[k] != other.weights_[k]) return false;
  }
  return true;
}

void Submodel::write(std::ostream& out) const {
  using namespace binary;
  put_magic(out, "PSSM");
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(activation_));
  put_u32(out, static_cast<std::uint32_t>(widths_.size()));
  for (int w : widths_) put_u32(out, static_cast<std::uint32_t>(w));
  put_u64(out, fingerprint_);
  for (const auto& w : weights_) {
    put_u32(out, static_cast<std::uint32_t>(w.rows()));
    put_u32(out, static_cast<std::uint32_t>(w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) put_f64(out, w(i, j));
    }
  }
}

Submodel Submodel::read(std::istream& in) {
  using namespace binary;
  expect_magic(in, "PSSM");
  if (get_u32(in) != kFormatVersion) throw FormatError("unsupported submodel version");
  const auto act = get_u32(in);
  if (act != static_cast<std::uint32_t>(Activation::kRelu)) {
    throw FormatError("unknown activation id " + std::to_string(act));
  }
  const auto n_widths = get_u32(in);
  if (n_widths < 2 || n_widths > 16) throw FormatError("bad layer count");
  std::vector<int> widths(n_widths);
  for (auto& w : widths) {
    const auto v = get_u32(in);
    if (v == 0 || v > (1u << 20)) throw FormatError("bad layer width");
    w = static_cast<int>(v);
  }
  const auto fingerprint = get_u64(in);
  Submodel m(widths, Activation::kRelu, fingerprint);
  for (auto& w : m.weights_) {
    const auto rows = get_u32(in);
    const auto cols = get_u32(in);
    if (rows != w.rows() || cols != w.cols()) {
      throw FormatError("weight matrix shape does not match widths");
    }
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = get_f64(in);
    }
  }
  return m;
}

ForwardCache forward_cached(const GraphTensor& graph, const Submodel& model) {
  if (graph.features.cols() != model.input_width()) {
    throw ShapeMismatch("feature width " + std::to_string(graph.features.cols()) +
                        " does not match model input " +
                        std::to_string(model.input_width()));
  }
  if (graph.mean_in.rows() != graph.size() || graph.mean_in.cols() != graph.size()) {
    throw ShapeMismatch("aggregation operator does not match node count");
  }
  const int hops = model.hops();
  ForwardCache cache;
  const Eigen::Index n = graph.size();
  Eigen::MatrixXd h = graph.features;
  for (int k = 0; k < hops; ++k) {
    const auto& w = model.weights()[k];
    const Eigen::Index d = h.cols();
    if (w.cols() != 2 * d) throw ShapeMismatch("weight shape mismatch at layer " + std::to_string(k + 1));
    Eigen::MatrixXd c(n, 2 * d);
    c.leftCols(d) = h;
    c.rightCols(d) = graph.mean_in * h;
    Eigen::MatrixXd s = c * w.transpose();
    cache.concat.push_back(std::move(c));
    if (k + 1 == hops) {
      cache.scores = s;
      cache.pre.push_back(std::move(s));
      break;
    }
    Eigen::MatrixXd r = s.cwiseMax(0.0);
    Eigen::VectorXd norms = r.rowwise().norm();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (norms(i) > 0.0) r.row(i) /= norms(i);
    }
    cache.pre.push_back(std::move(s));
    cache.norms.push_back(norms);
    cache.hidden.push_back(r);
    h = std::move(r);
  }
  return cache;
}

Eigen::MatrixXd forward_propagate(const GraphTensor& graph, const Submodel& model) {
  return forward_cached(graph, model).scores;
}

Eigen::VectorXd class_probabilities(const Eigen::Ref<const Eigen::VectorXd>& z) {
  const double m = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - m).exp();
  return e / e.sum();
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd p(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    p.row(i) = class_probabilities(z.row(i).transpose()).transpose();
  }
  return p;
}

namespace {

double cross_entropy_row(const Eigen::Ref<const Eigen::RowVectorXd>& z, int label) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return lse - z(label);
}

}  // namespace

LossGradient loss_and_gradient(const GraphTensor& graph, const Submodel& model,
                               std::span<const std::uint32_t> targets,
                               std::span<const int> labels,
                               bool with_input_gradient) {
  if (targets.size() != labels.size()) throw ShapeMismatch("targets and labels differ in length");
  if (targets.empty()) throw InvalidArgument("loss over an empty target set");
  const ForwardCache cache = forward_cached(graph, model);
  const Eigen::Index n = graph.size();
  const int hops = model.hops();
  const double inv = 1.0 / static_cast<double>(targets.size());

  LossGradient out;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, model.n_classes());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto v = static_cast<Eigen::Index>(targets[i]);
    if (v >= n || labels[i] < 0 || labels[i] >= model.n_classes()) {
      throw ShapeMismatch("target or label out of range");
    }
    out.loss += cross_entropy_row(cache.scores.row(v), labels[i]) * inv;
    Eigen::RowVectorXd p = class_probabilities(cache.scores.row(v).transpose()).transpose();
    p(labels[i]) -= 1.0;
    g.row(v) += p * inv;
  }

  out.weights.resize(hops);
  const RowSparse mean_in_t = graph.mean_in.transpose();
  for (int k = hops - 1; k >= 0; --k) {
    // g holds d loss / d pre-activation of layer k+1.
    out.weights[k] = g.transpose() * cache.concat[k];
    if (k == 0 && !with_input_gradient) break;
    const Eigen::MatrixXd dc = g * model.weights()[k];
    const Eigen::Index d = dc.cols() / 2;
    Eigen::MatrixXd dh = dc.leftCols(d) + mean_in_t * dc.rightCols(d);
    if (k == 0) {
      out.input = std::move(dh);
      break;
    }
    // Back through row normalization t = r / |r| and the rectifier.
    const Eigen::MatrixXd& t = cache.hidden[k - 1];
    const Eigen::VectorXd& norms = cache.norms[k - 1];
    const Eigen::MatrixXd& s = cache.pre[k - 1];
    Eigen::MatrixXd ds = Eigen::MatrixXd::Zero(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (norms(i) <= 0.0) continue;
      const double proj = t.row(i).dot(dh.row(i));
      for (Eigen::Index j = 0; j < d; ++j) {
        if (s(i, j) > 0.0) ds(i, j) = (dh(i, j) - t(i, j) * proj) / norms(i);
      }
    }
    g = std::move(ds);
  }
  return out;
}

double mean_loss(const GraphTensor& graph, const Submodel& model,
                 std::span<const std::uint32_t> targets, std::span<const int> labels) {
  const Eigen::MatrixXd z = forward_propagate(graph, model);
  double loss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    loss += cross_entropy_row(z.row(targets[i]), labels[i]);
  }
  return targets.empty() ? 0.0 : loss / static_cast<double>(targets.size());
}

Submodel train_submodel(const GraphTensor& graph,
                        std::span<const std::uint32_t> targets,
                        std::span<const int> labels, int n_classes,
                        const TrainConfig& config, std::uint64_t maps_fingerprint,
                        TrainTrace* trace) {
  if (targets.size() != labels.size()) throw ShapeMismatch("targets and labels differ in length");
  if (config.hops < 1) throw InvalidArgument("hops must be >= 1");
  if (config.batch_size == 0) throw InvalidArgument("batch size must be >= 1");
  std::vector<int> widths{static_cast<int>(graph.features.cols())};
  for (int k = 1; k < config.hops; ++k) widths.push_back(config.hidden_width);
  widths.push_back(n_classes);

  Rng rng(config.seed);
  Submodel model = Submodel::glorot(widths, rng.next(), maps_fingerprint);
  if (targets.empty()) return model;

  std::vector<Eigen::MatrixXd> m1, m2;
  for (const auto& w : model.weights()) {
    m1.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    m2.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  std::vector<std::size_t> order(targets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::uint32_t> batch_targets;
  std::vector<int> batch_labels;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch_targets.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_targets.push_back(targets[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      const LossGradient lg = loss_and_gradient(graph, model, batch_targets, batch_labels);
      if (!std::isfinite(lg.loss)) {
        throw Divergence("training loss became non-finite at step " + std::to_string(step));
      }
      if (trace) trace->step_losses.push_back(lg.loss);
      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < model.weights().size(); ++k) {
        m1[k] = config.beta1 * m1[k] + (1.0 - config.beta1) * lg.weights[k];
        m2[k] = config.beta2 * m2[k] +
                (1.0 - config.beta2) * lg.weights[k].cwiseProduct(lg.weights[k]);
        model.weights()[k].array() -=
            config.learning_rate * (m1[k].array() / c1) /
            ((m2[k].array() / c2).sqrt() + config.adam_epsilon);
      }
      if (!model.all_finite()) {
        throw Divergence("weights became non-finite at step " + std::to_string(step));
      }
    }
  }
  return model;
}

Confidence assess_confidence(std::span<const double> p, int label, double ratio_threshold) {
  Confidence c;
  if (p.empty()) return c;
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  c.best = static_cast<int>(best);
  double second_p = -1.0;
  bool tie = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i == best) continue;
    if (p[i] == p[best]) tie = true;
    if (p[i] > second_p) {
      second_p = p[i];
      c.second = static_cast<int>(i);
    }
  }
  if (tie) {
    c.ratio = 1.0;
    c.accepted = false;
    return c;
  }
  c.ratio = second_p <= 0.0 ? std::numeric_limits<double>::infinity() : p[best] / second_p;
  c.accepted = c.best == label && c.ratio > ratio_threshold;
  return c;
}

bool classify_with_confidence(std::span<const double> p, int label, double ratio_threshold) {
  return assess_confidence(p, label, ratio_threshold).accepted;
}

}  // namespace provsage

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

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

namespace provsage {

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct LocalEdge {
  std::uint32_t src;
  std::uint32_t dst;
};

// Message-passing view of a (sub)graph over local indices [0, n).
// `mean_in` row v averages v's in-neighbors, one term per edge, so parallel
// edges weigh proportionally; a node without in-edges gets an empty row and
// thus aggregates the zero vector.
struct GraphTensor {
  RowSparse mean_in;
  Eigen::MatrixXd features;  // n x input width

  Eigen::Index size() const { return features.rows(); }
};

RowSparse mean_in_operator(std::size_t n, std::span<const LocalEdge> edges);
GraphTensor make_graph_tensor(std::size_t n, std::span<const LocalEdge> edges,
                              Eigen::MatrixXd features);

enum class Activation : std::uint32_t { kRelu = 1 };

// GraphSAGE-mean classifier over K = widths.size() - 1 hops. Layer k maps
// concat(self, mean of in-neighbors) of width 2 * widths[k-1] to widths[k].
// Hidden layers apply the activation then row L2 normalization; the last
// layer emits raw class scores.
class Submodel {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  Submodel() = default;
  Submodel(std::vector<int> widths, Activation activation,
           std::uint64_t maps_fingerprint);

  // Uniform Glorot initialization: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
  static Submodel glorot(std::vector<int> widths, std::uint64_t seed,
                         std::uint64_t maps_fingerprint,
                         Activation activation = Activation::kRelu);

  int hops() const { return static_cast<int>(widths_.size()) - 1; }
  const std::vector<int>& widths() const { return widths_; }
  int input_width() const { return widths_.front(); }
  int n_classes() const { return widths_.back(); }
  Activation activation() const { return activation_; }
  std::uint64_t maps_fingerprint() const { return fingerprint_; }

  // weights()[k] is W^{k+1}: widths[k+1] x 2*widths[k].
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  std::vector<Eigen::MatrixXd>& weights() { return weights_; }

  bool all_finite() const;

  void write(std::ostream& out) const;
  static Submodel read(std::istream& in);

  bool operator==(const Submodel& other) const;

 private:
  std::vector<int> widths_;
  Activation activation_ = Activation::kRelu;
  std::uint64_t fingerprint_ = 0;
  std::vector<Eigen::MatrixXd> weights_;
};

// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> concat;    // C_k = [H_{k-1}, P H_{k-1}]
  std::vector<Eigen::MatrixXd> pre;       // S_k = C_k W_k^T
  std::vector<Eigen::VectorXd> norms;     // row norms after activation (k < K)
  std::vector<Eigen::MatrixXd> hidden;    // H_k for k < K (normalized)
  Eigen::MatrixXd scores;                 // Z
};

// Throws ShapeMismatch when the feature width or weight shapes are off.
ForwardCache forward_cached(const GraphTensor& graph, const Submodel& model);
Eigen::MatrixXd forward_propagate(const GraphTensor& graph, const Submodel& model);

// Max-subtracted softmax.
Eigen::VectorXd class_probabilities(const Eigen::Ref<const Eigen::VectorXd>& z);
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& z);

struct LossGradient {
  double loss = 0.0;
  std::vector<Eigen::MatrixXd> weights;  // same shapes as Submodel::weights()
  Eigen::MatrixXd input;                 // d loss / d features, if requested
};

// Mean softmax cross-entropy over `targets` (local indices) with `labels`
// aligned to targets, plus its analytic gradient.
LossGradient loss_and_gradient(const GraphTensor& graph, const Submodel& model,
                               std::span<const std::uint32_t> targets,
                               std::span<const int> labels,
                               bool with_input_gradient = false);

double mean_loss(const GraphTensor& graph, const Submodel& model,
                 std::span<const std::uint32_t> targets,
                 std::span<const int> labels);

struct TrainConfig {
  int epochs = 60;
  std::size_t batch_size = 5000;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int hidden_width = 32;
  int hops = 2;
  std::uint64_t seed = 0;
};

struct TrainTrace {
  std::vector<double> step_losses;
};

// One Adam step per minibatch of `batch_size` shuffled targets, `epochs`
// passes. Throws Divergence on a non-finite loss or weight.
Submodel train_submodel(const GraphTensor& graph,
                        std::span<const std::uint32_t> targets,
                        std::span<const int> labels, int n_classes,
                        const TrainConfig& config, std::uint64_t maps_fingerprint,
                        TrainTrace* trace = nullptr);

struct Confidence {
  int best = -1;
  int second = -1;      // -1 when there is a single class
  double ratio = 0.0;   // +inf when the runner-up probability is 0 or absent
  bool accepted = false;
};

// Accepted iff the unique argmax equals `label` and best / second > R. A tie
// for the maximum is a rejection.
Confidence assess_confidence(std::span<const double> probabilities, int label,
                             double ratio_threshold);
bool classify_with_confidence(std::span<const double> probabilities, int label,
                              double ratio_threshold);

}  // namespace provsage

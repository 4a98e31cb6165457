#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedfm/dataset.hpp"

namespace fedfm::learner {

enum class Activation { relu, tanh };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

// Fully connected network: layer_sizes = {input, hidden..., n_classes}.
// Hidden layers use `activation`; the output is softmax + cross-entropy.
// Two layers is multinomial logistic regression.
struct ModelSpec {
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::relu;

  void validate() const;
  std::size_t n_layers() const noexcept { return layer_sizes.size() - 1; }
  std::size_t parameter_count() const;
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t n_outputs() const { return layer_sizes.back(); }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct LayerShape {
  std::size_t rows;  // outputs
  std::size_t cols;  // inputs
  std::size_t bias;

  std::size_t count() const noexcept { return rows * cols + bias; }
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

std::vector<LayerShape> layer_shapes(const ModelSpec& spec);

// Per layer: row-major weight matrix (rows x cols) followed by the bias.
struct ModelWeights {
  ModelSpec spec;
  std::vector<double> values;

  std::vector<LayerShape> shapes() const { return layer_shapes(spec); }
  // FNV-1a over the raw bytes of `values`.
  std::uint64_t hash() const;
  bool all_finite() const;

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

struct TrainConfig {
  double learning_rate = 0.05;
  int local_epochs = 1;
  int batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

ModelWeights init_weights(const ModelSpec& spec, std::uint64_t seed);

// Cross-entropy of a single sample and its gradient w.r.t. every parameter.
struct LossGradient {
  double loss;
  std::vector<double> gradient;
};

double sample_loss(const ModelWeights& w, std::span<const double> x, int label);
LossGradient loss_and_gradient(const ModelWeights& w, std::span<const double> x, int label);

struct LocalUpdate {
  ModelWeights weights;
  // Mean per-sample loss over the final local epoch, measured on each batch
  // before its step.
  double train_loss;
  std::size_t n_samples;
};

// E epochs of mini-batch SGD over the shard starting from `w`.
// Throws NoDataError for an empty shard.
LocalUpdate client_update(const ModelWeights& w, const data::DataShard& shard, const TrainConfig& cfg);

struct Evaluation {
  double loss;
  double accuracy;
};

Evaluation evaluate(const ModelWeights& w, const data::Dataset& data);

// Index of the largest logit; ties go to the lowest class index.
int predict(const ModelWeights& w, std::span<const double> x);

// alpha: size in bytes of the serialized model blob.
// kappa: parameter bytes plus the widest adjacent input/output activation
// pair held during a batch-1 forward pass.
struct ModelConstants {
  double alpha_bytes;
  double kappa_bytes;
};

ModelConstants model_constants(const ModelSpec& spec);

// Blob layout: u32 LE header length, JSON header, then values as f64 LE.
std::string shape_header(const ModelSpec& spec);
std::vector<std::uint8_t> serialize(const ModelWeights& w);
ModelWeights deserialize(std::span<const std::uint8_t> blob);

}  // namespace fedfm::learner

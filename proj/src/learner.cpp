#include "fedfm/learner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include <json.hpp>

#include "fedfm/errors.hpp"
#include "fedfm/rng.hpp"

namespace fedfm::learner {

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

void ModelSpec::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("model: need at least input and output layers");
  for (auto s : layer_sizes) {
    if (s == 0) throw ConfigError("model: layer sizes must be positive");
  }
}

std::size_t ModelSpec::parameter_count() const {
  std::size_t n = 0;
  for (const auto& s : layer_shapes(*this)) n += s.count();
  return n;
}

std::vector<LayerShape> layer_shapes(const ModelSpec& spec) {
  std::vector<LayerShape> out;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    out.push_back({spec.layer_sizes[l + 1], spec.layer_sizes[l], spec.layer_sizes[l + 1]});
  }
  return out;
}

std::uint64_t ModelWeights::hash() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

bool ModelWeights::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train: learning_rate must be a non-negative finite number");
  }
  if (local_epochs <= 0) throw ConfigError("train: local_epochs must be positive");
  if (batch_size <= 0) throw ConfigError("train: batch_size must be positive");
}

ModelWeights init_weights(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelWeights w{spec, std::vector<double>(spec.parameter_count(), 0.0)};
  Rng rng(derive_seed(seed, "init-weights"));
  std::size_t offset = 0;
  for (const auto& shape : w.shapes()) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(shape.cols));
    for (std::size_t i = 0; i < shape.rows * shape.cols; ++i) {
      w.values[offset + i] = rng.uniform(-limit, limit);
    }
    offset += shape.count();  // biases stay zero
  }
  return w;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

void check_input(const ModelWeights& w, std::size_t dim, int label) {
  if (dim != w.spec.input_dim()) {
    throw ShapeError("model expects " + std::to_string(w.spec.input_dim()) + " features, got " +
                     std::to_string(dim));
  }
  if (label < 0 || static_cast<std::size_t>(label) >= w.spec.n_outputs()) {
    throw ShapeError("label " + std::to_string(label) + " outside model output range " +
                     std::to_string(w.spec.n_outputs()));
  }
}

// Reusable buffers for one network; activations[0] is the input copy.
class Network {
 public:
  explicit Network(const ModelSpec& spec) : spec_(spec), shapes_(layer_shapes(spec)) {
    for (auto s : spec.layer_sizes) {
      activations_.emplace_back(s, 0.0);
      deltas_.emplace_back(s, 0.0);
    }
    std::size_t offset = 0;
    for (const auto& s : shapes_) {
      offsets_.push_back(offset);
      offset += s.count();
    }
  }

  // Fills activations_; the last layer holds raw logits.
  void forward(std::span<const double> values, std::span<const double> x) {
    std::copy(x.begin(), x.end(), activations_[0].begin());
    std::size_t offset = 0;
    const std::size_t last = shapes_.size() - 1;
    for (std::size_t l = 0; l < shapes_.size(); ++l) {
      const auto& s = shapes_[l];
      const double* W = values.data() + offset;
      const double* b = W + s.rows * s.cols;
      const auto& in = activations_[l];
      auto& out = activations_[l + 1];
      for (std::size_t r = 0; r < s.rows; ++r) {
        double z = b[r];
        const double* row = W + r * s.cols;
        for (std::size_t c = 0; c < s.cols; ++c) z += row[c] * in[c];
        if (l != last) z = spec_.activation == Activation::relu ? std::max(z, 0.0) : std::tanh(z);
        out[r] = z;
      }
      offset += s.count();
    }
  }

  const std::vector<double>& logits() const { return activations_.back(); }

  // -log softmax(logits)[label], computed stably.
  double loss(int label) const {
    const auto& z = logits();
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    return std::log(sum) + zmax - z[label];
  }

  // Adds d loss / d params for the last forward() into grad.
  void backward(std::span<const double> values, int label, std::span<double> grad) {
    auto& top = deltas_.back();
    const auto& z = logits();
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      top[i] = std::exp(z[i] - zmax);
      sum += top[i];
    }
    for (auto& v : top) v /= sum;
    top[label] -= 1.0;

    for (std::size_t l = shapes_.size(); l-- > 0;) {
      const auto& s = shapes_[l];
      const auto& in = activations_[l];
      const auto& delta = deltas_[l + 1];
      double* gW = grad.data() + offsets_[l];
      double* gb = gW + s.rows * s.cols;
      for (std::size_t r = 0; r < s.rows; ++r) {
        const double d = delta[r];
        gb[r] += d;
        if (d == 0.0) continue;
        double* grow = gW + r * s.cols;
        for (std::size_t c = 0; c < s.cols; ++c) grow[c] += d * in[c];
      }
      if (l == 0) break;
      // Propagate through W^T and the hidden activation of layer l.
      const double* W = values.data() + offsets_[l];
      auto& below = deltas_[l];
      std::fill(below.begin(), below.end(), 0.0);
      for (std::size_t r = 0; r < s.rows; ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        const double* row = W + r * s.cols;
        for (std::size_t c = 0; c < s.cols; ++c) below[c] += row[c] * d;
      }
      for (std::size_t c = 0; c < s.cols; ++c) {
        const double a = in[c];
        below[c] *= spec_.activation == Activation::relu ? (a > 0.0 ? 1.0 : 0.0) : (1.0 - a * a);
      }
    }
  }

 private:
  ModelSpec spec_;
  std::vector<LayerShape> shapes_;
  std::vector<std::size_t> offsets_;
  std::vector<std::vector<double>> activations_;
  std::vector<std::vector<double>> deltas_;
};

}  // namespace

double sample_loss(const ModelWeights& w, std::span<const double> x, int label) {
  check_input(w, x.size(), label);
  Network net(w.spec);
  net.forward(w.values, x);
  return net.loss(label);
}

LossGradient loss_and_gradient(const ModelWeights& w, std::span<const double> x, int label) {
  check_input(w, x.size(), label);
  Network net(w.spec);
  net.forward(w.values, x);
  LossGradient out{net.loss(label), std::vector<double>(w.values.size(), 0.0)};
  net.backward(w.values, label, out.gradient);
  return out;
}

int predict(const ModelWeights& w, std::span<const double> x) {
  check_input(w, x.size(), 0);
  Network net(w.spec);
  net.forward(w.values, x);
  const auto& z = net.logits();
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

LocalUpdate client_update(const ModelWeights& w, const data::DataShard& shard, const TrainConfig& cfg) {
  cfg.validate();
  if (shard.empty()) {
    throw NoDataError("node " + std::to_string(shard.owner) + " has no local samples");
  }
  check_input(w, static_cast<std::size_t>(shard.source->dim()), 0);

  LocalUpdate out{w, 0.0, shard.n_k()};
  auto& values = out.weights.values;
  Network net(w.spec);
  std::vector<double> grad(values.size());
  std::vector<std::size_t> order(shard.n_k());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(cfg.seed, "batch-order"));
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(start + batch, order.size());
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const auto s = shard[order[i]];
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= w.spec.n_outputs()) {
          throw ShapeError("label outside model output range");
        }
        net.forward(values, s.features);
        epoch_loss += net.loss(s.label);
        net.backward(values, s.label, grad);
      }
      const double step = cfg.learning_rate / static_cast<double>(end - start);
      for (std::size_t p = 0; p < values.size(); ++p) values[p] -= step * grad[p];
    }
    out.train_loss = epoch_loss / static_cast<double>(order.size());
  }
  return out;
}

Evaluation evaluate(const ModelWeights& w, const data::Dataset& data) {
  if (data.empty()) throw ShapeError("evaluate: empty dataset");
  if (static_cast<std::size_t>(data.dim()) != w.spec.input_dim()) {
    throw ShapeError("evaluate: model expects " + std::to_string(w.spec.input_dim()) +
                     " features, dataset has " + std::to_string(data.dim()));
  }
  Network net(w.spec);
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto s = data[i];
    check_input(w, s.features.size(), s.label);
    net.forward(w.values, s.features);
    loss += net.loss(s.label);
    const auto& z = net.logits();
    if (std::max_element(z.begin(), z.end()) - z.begin() == s.label) ++correct;
  }
  const double n = static_cast<double>(data.size());
  return {loss / n, static_cast<double>(correct) / n};
}

// ---------------------------------------------------------------------------
// Serialization

std::string shape_header(const ModelSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& s : layer_shapes(spec)) {
    layers.push_back({{"rows", s.rows}, {"cols", s.cols}, {"bias", s.bias}});
  }
  nlohmann::json header = {{"dtype", "f64le"},
                           {"activation", std::string(to_string(spec.activation))},
                           {"layer_sizes", spec.layer_sizes},
                           {"layers", layers}};
  return header.dump();
}

ModelConstants model_constants(const ModelSpec& spec) {
  spec.validate();
  const double params = static_cast<double>(spec.parameter_count());
  const double alpha = 4.0 + static_cast<double>(shape_header(spec).size()) + 8.0 * params;
  std::size_t widest = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    widest = std::max(widest, spec.layer_sizes[l] + spec.layer_sizes[l + 1]);
  }
  const double kappa = 8.0 * (params + static_cast<double>(widest));
  return {alpha, kappa};
}

std::vector<std::uint8_t> serialize(const ModelWeights& w) {
  const std::string header = shape_header(w.spec);
  std::vector<std::uint8_t> blob;
  blob.reserve(4 + header.size() + 8 * w.values.size());
  const auto len = static_cast<std::uint32_t>(header.size());
  for (int b = 0; b < 4; ++b) blob.push_back(static_cast<std::uint8_t>(len >> (8 * b)));
  blob.insert(blob.end(), header.begin(), header.end());
  for (double v : w.values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) blob.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
  return blob;
}

ModelWeights deserialize(std::span<const std::uint8_t> blob) {
  if (blob.size() < 4) throw FormatError("model blob: too short");
  std::uint32_t len = 0;
  for (int b = 0; b < 4; ++b) len |= std::uint32_t(blob[b]) << (8 * b);
  if (blob.size() < 4 + std::size_t(len)) throw FormatError("model blob: truncated header");

  ModelSpec spec;
  try {
    const auto header = nlohmann::json::parse(blob.begin() + 4, blob.begin() + 4 + len);
    if (header.at("dtype") != "f64le") throw FormatError("model blob: unsupported dtype");
    spec.layer_sizes = header.at("layer_sizes").get<std::vector<std::size_t>>();
    spec.activation = parse_activation(header.at("activation").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model blob: bad header: ") + e.what());
  }
  spec.validate();

  const std::size_t n = spec.parameter_count();
  const std::size_t body = blob.size() - 4 - len;
  if (body != 8 * n) {
    throw FormatError("model blob: expected " + std::to_string(8 * n) + " value bytes, got " +
                      std::to_string(body));
  }
  ModelWeights w{spec, std::vector<double>(n)};
  const auto* p = blob.data() + 4 + len;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t(p[8 * i + b]) << (8 * b);
    w.values[i] = std::bit_cast<double>(bits);
  }
  return w;
}

}  // namespace fedfm::learner

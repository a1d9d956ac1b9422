#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "eegconn/nn/layers.hpp"
#include "json.hpp"

namespace eegconn::nn {

struct LayerSpec {
  std::string type;
  std::string name;
  nlohmann::json params = nlohmann::json::object();
};

/// Ordered layer list plus the per-sample input shape and initializer seed.
struct ModelSpec {
  std::string name;
  Shape input_shape;  // per sample, without batch axis
  std::size_t num_classes = 3;
  std::uint64_t seed = 0;
  std::vector<LayerSpec> layers;

  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

// Standard architectures; `kernel` is the temporal kernel length (fs/2 samples).
ModelSpec mlp_spec(std::size_t channels, std::size_t window, std::uint64_t seed, std::size_t hidden = 64,
                   double dropout = 0.25);
ModelSpec eegnet_spec(std::size_t channels, std::size_t window, std::size_t kernel, std::uint64_t seed,
                      double dropout = 0.25);
ModelSpec mha_eegnet_spec(std::size_t channels, std::size_t window, std::size_t kernel, std::uint64_t seed,
                          std::size_t heads = 4, double dropout = 0.25);
// "mlp" | "eegnet" | "mha-eegnet"; ConfigError otherwise.
ModelSpec model_spec_by_name(const std::string& name, std::size_t channels, std::size_t window,
                             std::size_t kernel, std::uint64_t seed);

class Model {
 public:
  // Builds and initializes every layer; ConfigError names the first layer whose input shape is incompatible.
  static Model build(const ModelSpec& spec);

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelSpec& spec() const { return spec_; }
  Shape output_shape(std::size_t batch) const;

  Tensor logits(const Tensor& x, bool training, Rng* dropout_rng = nullptr);
  // Row-wise class probabilities.
  Tensor forward(const Tensor& x, bool training, Rng* dropout_rng = nullptr);
  // Gradient of the loss w.r.t. the logits of the last training forward; accumulates into parameter grads.
  void backward(const Tensor& grad_logits);

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> trainable_parameters();
  std::size_t parameter_count(bool trainable_only = true);
  void zero_grad();

  std::vector<std::unique_ptr<Layer>>& layers() { return layers_; }
  Layer& layer(const std::string& name);

 private:
  Model() = default;
  ModelSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
  bool has_training_forward_ = false;
};

/// Adaptive moment estimation over a model's trainable parameters.
struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(Model& model, AdamConfig config = {});
  void step();
  std::uint64_t steps() const { return t_; }
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }

 private:
  AdamConfig cfg_;
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_, v_;
  std::uint64_t t_ = 0;
};

/// Named tensors (values, running stats, optimizer moments) for persistence.
struct ParameterSet {
  struct Entry {
    std::string name;
    Tensor value;
  };
  std::vector<Entry> entries;
  std::uint64_t optimizer_steps = 0;

  static ParameterSet capture(Model& model, Adam* adam = nullptr);
  // Copies values into matching model parameters; ConfigError on missing names or shape mismatch.
  void restore(Model& model) const;
  const Entry* find(const std::string& name) const;

  // Writes <base>.bin (little-endian doubles) and <base>.json (name/shape/offset index).
  void save(const std::filesystem::path& base) const;
  static ParameterSet load(const std::filesystem::path& base);
};

/// Samples stacked along the first axis with integer class labels.
struct Dataset {
  Shape sample_shape;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t sample_size() const { return shape_size(sample_shape); }
  Tensor batch(const std::vector<std::size_t>& indices) const;
  std::vector<int> batch_labels(const std::vector<std::size_t>& indices) const;
  void validate(std::size_t num_classes) const;
};

struct TrainConfig {
  std::size_t batch_size = 10;
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> val_loss, val_acc;
};

struct TrainResult {
  std::vector<EpochStats> curves;
  std::uint64_t optimizer_steps = 0;
};

// Mini-batch training with per-epoch shuffling; NumericalError when the loss stops being finite.
TrainResult train(Model& model, const Dataset& train_set, const Dataset* val_set, const TrainConfig& config);

// Class probabilities in inference mode, evaluated in chunks.
Tensor predict_proba(Model& model, const Dataset& data, std::size_t chunk = 64);
std::vector<int> predict(Model& model, const Dataset& data, std::size_t chunk = 64);
// (mean loss, accuracy) in inference mode.
std::pair<double, double> evaluate_loss(Model& model, const Dataset& data, std::size_t chunk = 64);

nlohmann::json curves_to_json(const std::vector<EpochStats>& curves);

}  // namespace eegconn::nn

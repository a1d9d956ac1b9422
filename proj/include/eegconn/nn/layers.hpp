#pragma once

#include <memory>
#include <string>
#include <vector>

#include "eegconn/nn/tensor.hpp"
#include "eegconn/rng.hpp"

namespace eegconn::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;  // dropout stream; required when training with dropout
};

enum class Padding { same, valid };

class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const std::string& name() const { return name_; }
  virtual std::string type() const = 0;

  // Throws ConfigError naming the layer when `in` is incompatible.
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor forward(const Tensor& x, const ForwardContext& ctx) = 0;
  // Accumulates parameter gradients and returns d(loss)/d(input).
  virtual Tensor backward(const Tensor& grad_out) = 0;

  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual void initialize(Rng& /*rng*/) {}

  // The first layer of a model skips the input gradient.
  void set_needs_input_grad(bool v) { needs_input_grad_ = v; }
  bool needs_input_grad() const { return needs_input_grad_; }

 protected:
  [[noreturn]] void shape_error(const std::string& expected, const Shape& got) const;
  void require_cache(bool present) const;

  bool needs_input_grad_ = true;

 private:
  std::string name_;
};

/// y = x W + b on (B, in) inputs; W is (in, out).
class Dense : public Layer {
 public:
  Dense(std::string name, std::size_t in, std::size_t out, bool bias = true);
  std::string type() const override { return "dense"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Parameter*> parameters() override;
  void initialize(Rng& rng) override;

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  std::size_t in_, out_;
  bool has_bias_;
  Parameter weight_, bias_;
  Tensor input_;
};

/// Stride-1 2-D convolution on (B, Ci, H, W); kernel (Co, Ci, kh, kw).
class Conv2D : public Layer {
 public:
  Conv2D(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw, Padding padding,
         bool bias = false);
  std::string type() const override { return "conv2d"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Parameter*> parameters() override;
  void initialize(Rng& rng) override;

  Parameter& weight() { return weight_; }

 private:
  std::size_t in_ch_, out_ch_, kh_, kw_;
  Padding padding_;
  bool has_bias_;
  Parameter weight_, bias_;
  Tensor input_;
};

/// Each input map convolved with `multiplier` kernels; output map ci*M + m.
class DepthwiseConv2D : public Layer {
 public:
  DepthwiseConv2D(std::string name, std::size_t in_ch, std::size_t multiplier, std::size_t kh, std::size_t kw,
                  Padding padding);
  std::string type() const override { return "depthwise_conv2d"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Parameter*> parameters() override;
  void initialize(Rng& rng) override;

  Parameter& weight() { return weight_; }

 private:
  std::size_t in_ch_, mult_, kh_, kw_;
  Padding padding_;
  Parameter weight_;
  Tensor input_;
};

/// Depthwise (multiplier 1) followed by a 1x1 pointwise convolution.
class SeparableConv2D : public Layer {
 public:
  SeparableConv2D(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw,
                  Padding padding);
  std::string type() const override { return "separable_conv2d"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Parameter*> parameters() override;
  void initialize(Rng& rng) override;

  DepthwiseConv2D& depthwise() { return depthwise_; }
  Conv2D& pointwise() { return pointwise_; }

 private:
  DepthwiseConv2D depthwise_;
  Conv2D pointwise_;
};

/// Per-channel normalization over (B, H, W) for 4-D input or over B for 2-D input.
class BatchNorm : public Layer {
 public:
  BatchNorm(std::string name, std::size_t channels, double momentum = 0.1, double eps = 1e-5);
  std::string type() const override { return "batch_norm"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Parameter*> parameters() override;
  void initialize(Rng& rng) override;

  Parameter& gamma() { return gamma_; }
  Parameter& beta() { return beta_; }
  Parameter& running_mean() { return running_mean_; }
  Parameter& running_var() { return running_var_; }

 private:
  std::size_t channels_;
  double momentum_, eps_;
  Parameter gamma_, beta_, running_mean_, running_var_;
  Tensor x_hat_;
  std::vector<double> inv_std_;
  bool cached_training_ = false;
  bool has_cache_ = false;
};

class Elu : public Layer {
 public:
  explicit Elu(std::string name, double alpha = 1.0) : Layer(std::move(name)), alpha_(alpha) {}
  std::string type() const override { return "elu"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  double alpha_;
  Tensor input_, output_;
};

/// Non-overlapping average pooling over (H, W) windows; remainders dropped.
class AvgPool2D : public Layer {
 public:
  AvgPool2D(std::string name, std::size_t ph, std::size_t pw) : Layer(std::move(name)), ph_(ph), pw_(pw) {}
  std::string type() const override { return "avg_pool2d"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::size_t ph_, pw_;
  Shape input_shape_;
};

/// Inverted dropout: kept activations are scaled by 1/(1-rate) at train time.
class Dropout : public Layer {
 public:
  Dropout(std::string name, double rate);
  std::string type() const override { return "dropout"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  double rate_;
  std::vector<double> mask_;
  bool has_cache_ = false;
};

class Flatten : public Layer {
 public:
  explicit Flatten(std::string name) : Layer(std::move(name)) {}
  std::string type() const override { return "flatten"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Shape input_shape_;
};

/// (B, C, 1, L) -> (B, L, C): feature maps become per-time-step tokens.
class ToSequence : public Layer {
 public:
  explicit ToSequence(std::string name) : Layer(std::move(name)) {}
  std::string type() const override { return "to_sequence"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Shape input_shape_;
};

/// Scaled dot-product attention over the sequence axis of (B, L, d_model),
/// h heads of width d_model/h, with query/key/value/output projections.
class MultiHeadAttention : public Layer {
 public:
  MultiHeadAttention(std::string name, std::size_t d_model, std::size_t heads);
  std::string type() const override { return "multi_head_attention"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Parameter*> parameters() override;
  void initialize(Rng& rng) override;

  std::size_t heads() const { return heads_; }
  Parameter& wq() { return wq_; }
  Parameter& wk() { return wk_; }
  Parameter& wv() { return wv_; }
  Parameter& wo() { return wo_; }
  // (B, h, L, L) softmax weights from the last forward.
  const Tensor& attention() const { return attn_; }

 private:
  std::size_t d_model_, heads_, d_k_;
  Parameter wq_, wk_, wv_, wo_, bq_, bk_, bv_, bo_;
  Tensor input_, q_, k_, v_, concat_, attn_;
};

/// (B, L, D) -> (B, D) mean over L.
class SequenceMeanPool : public Layer {
 public:
  explicit SequenceMeanPool(std::string name) : Layer(std::move(name)) {}
  std::string type() const override { return "sequence_mean_pool"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, const ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Shape input_shape_;
};

// Row-wise softmax of (B, K) logits.
Tensor softmax(const Tensor& logits);

struct LossResult {
  double loss = 0.0;
  Tensor grad_logits;  // (softmax - one_hot) / B
};

/// Mean categorical cross-entropy of probability rows against class indices,
/// with the gradient with respect to the logits that produced `probs`.
/// Throws DataError for a label outside [0, K).
LossResult cce_loss(const Tensor& probs, const std::vector<int>& labels);

}  // namespace eegconn::nn

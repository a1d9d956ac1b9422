#pragma once

// Central finite-difference checks shared by unit tests and the acceptance run.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "eegconn/nn/layers.hpp"

namespace gradcheck {

using eegconn::Rng;
using eegconn::nn::Tensor;

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline Tensor random_tensor(const eegconn::nn::Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor t(shape);
  for (double& v : t.values()) v = uniform(rng, -scale, scale);
  return t;
}

// ||a - b|| / max(||a||, ||b||, floor); the floor covers gradients that are exactly zero (attention key bias)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-6) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

struct Result {
  double worst = 0.0;
  std::string where;
};

// Probe loss L = sum(probe * layer(x)). Checks d/dx (if the layer propagates) and every trainable parameter.
// `training` forwards use batch statistics; dropout is left out (random masks are not differentiable).
inline Result check_layer(eegconn::nn::Layer& layer, Tensor x, Rng& rng, bool training, double h = 1e-5) {
  eegconn::nn::ForwardContext ctx{training, nullptr};
  const Tensor y0 = layer.forward(x, ctx);
  const Tensor probe = random_tensor(y0.shape(), rng);
  auto loss = [&](const Tensor& in) {
    const Tensor y = layer.forward(in, ctx);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += probe[i] * y[i];
    return s;
  };
  for (auto* p : layer.parameters()) p->grad.fill(0.0);
  layer.forward(x, ctx);
  const Tensor dx = layer.backward(probe);
  // Snapshot analytic parameter grads before the numeric probes disturb caches.
  std::vector<std::vector<double>> analytic;
  for (auto* p : layer.parameters()) analytic.emplace_back(p->grad.values().begin(), p->grad.values().end());

  Result r;
  auto record = [&](double e, const std::string& what) {
    if (e > r.worst || std::isnan(e)) {
      r.worst = std::isnan(e) ? 1e300 : e;
      r.where = what;
    }
  };
  if (layer.needs_input_grad()) {
    std::vector<double> num(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x[i];
      x[i] = orig + h;
      const double lp = loss(x);
      x[i] = orig - h;
      const double lm = loss(x);
      x[i] = orig;
      num[i] = (lp - lm) / (2 * h);
    }
    record(relative_error(std::vector<double>(dx.values().begin(), dx.values().end()), num), layer.name() + ":input");
  }
  auto params = layer.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto* p = params[k];
    if (!p->trainable) continue;
    std::vector<double> num(p->value.size());
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double lp = loss(x);
      p->value[i] = orig - h;
      const double lm = loss(x);
      p->value[i] = orig;
      num[i] = (lp - lm) / (2 * h);
    }
    record(relative_error(analytic[k], num), p->name);
  }
  return r;
}

// Softmax followed by CCE: gradient w.r.t. logits.
inline double check_softmax_cce(Rng& rng, std::size_t batch, std::size_t classes, double h = 1e-5) {
  Tensor logits = random_tensor({batch, classes}, rng, 3.0);
  std::vector<int> labels(batch);
  for (auto& y : labels) y = static_cast<int>(rng() % classes);
  const auto res = eegconn::nn::cce_loss(eegconn::nn::softmax(logits), labels);
  std::vector<double> num(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double orig = logits[i];
    logits[i] = orig + h;
    const double lp = eegconn::nn::cce_loss(eegconn::nn::softmax(logits), labels).loss;
    logits[i] = orig - h;
    const double lm = eegconn::nn::cce_loss(eegconn::nn::softmax(logits), labels).loss;
    logits[i] = orig;
    num[i] = (lp - lm) / (2 * h);
  }
  return relative_error(std::vector<double>(res.grad_logits.values().begin(), res.grad_logits.values().end()), num);
}

// One randomized instance per layer kind; returns (kind, worst error) pairs.
inline std::vector<std::pair<std::string, Result>> check_all_layers(std::uint64_t seed) {
  using namespace eegconn::nn;
  Rng rng(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng() % (hi - lo + 1)); };
  auto init = [&](Layer& l) {
    l.initialize(rng);
    // Non-trivial affine/bias values so their gradients are exercised.
    for (auto* p : l.parameters()) {
      if (p->trainable) {
        for (double& v : p->value.values()) v += uniform(rng, -0.5, 0.5);
      }
    }
  };
  std::vector<std::pair<std::string, Result>> out;
  {
    Dense l("dense", pick(2, 6), pick(2, 5));
    init(l);
    const auto in = l.weight().value.dim(0);
    out.emplace_back("dense", check_layer(l, random_tensor({pick(1, 4), in}, rng), rng, true));
  }
  {
    const auto ci = pick(1, 3), co = pick(1, 3), kh = pick(1, 3), kw = pick(1, 4);
    Conv2D l("conv2d", ci, co, kh, kw, rng() % 2 ? Padding::same : Padding::valid, rng() % 2 == 0);
    init(l);
    out.emplace_back("conv2d", check_layer(l, random_tensor({pick(1, 3), ci, kh + pick(0, 3), kw + pick(0, 4)}, rng), rng, true));
  }
  {
    const auto ci = pick(1, 3), m = pick(1, 3), kh = pick(1, 3), kw = pick(1, 4);
    DepthwiseConv2D l("depthwise", ci, m, kh, kw, rng() % 2 ? Padding::same : Padding::valid);
    init(l);
    out.emplace_back("depthwise_conv2d",
                     check_layer(l, random_tensor({pick(1, 3), ci, kh + pick(0, 3), kw + pick(0, 4)}, rng), rng, true));
  }
  {
    const auto ci = pick(1, 3), co = pick(1, 3), kh = pick(1, 2), kw = pick(1, 4);
    SeparableConv2D l("separable", ci, co, kh, kw, rng() % 2 ? Padding::same : Padding::valid);
    init(l);
    out.emplace_back("separable_conv2d",
                     check_layer(l, random_tensor({pick(1, 3), ci, kh + pick(0, 2), kw + pick(0, 4)}, rng), rng, true));
  }
  {
    const auto c = pick(1, 3);
    BatchNorm l("batch_norm", c);
    init(l);
    const bool four_d = rng() % 2 == 0;
    const Tensor x = four_d ? random_tensor({pick(2, 3), c, pick(1, 2), pick(2, 4)}, rng) : random_tensor({pick(3, 6), c}, rng);
    out.emplace_back("batch_norm", check_layer(l, x, rng, true));
    BatchNorm li("batch_norm_inference", c);
    init(li);
    for (double& v : li.running_var().value.values()) v = uniform(rng, 0.5, 2.0);
    out.emplace_back("batch_norm_inference", check_layer(li, x, rng, false));
  }
  {
    Elu l("elu");
    out.emplace_back("elu", check_layer(l, random_tensor({pick(1, 3), pick(1, 3), pick(1, 3), pick(1, 5)}, rng), rng, true));
  }
  {
    const auto ph = pick(1, 2), pw = pick(1, 3);
    AvgPool2D l("avg_pool2d", ph, pw);
    out.emplace_back("avg_pool2d",
                     check_layer(l, random_tensor({pick(1, 2), pick(1, 3), ph * pick(1, 2) + pick(0, 1), pw * pick(1, 3)}, rng), rng, true));
  }
  {
    Flatten l("flatten");
    out.emplace_back("flatten", check_layer(l, random_tensor({pick(1, 3), pick(1, 3), pick(1, 3), pick(1, 3)}, rng), rng, true));
    ToSequence s("to_sequence");
    out.emplace_back("to_sequence", check_layer(s, random_tensor({pick(1, 3), pick(1, 4), 1, pick(1, 5)}, rng), rng, true));
    SequenceMeanPool m("sequence_mean_pool");
    out.emplace_back("sequence_mean_pool", check_layer(m, random_tensor({pick(1, 3), pick(1, 5), pick(1, 4)}, rng), rng, true));
  }
  {
    const auto heads = pick(1, 3), dk = pick(1, 3);
    MultiHeadAttention l("attention", heads * dk, heads);
    init(l);
    out.emplace_back("multi_head_attention",
                     check_layer(l, random_tensor({pick(1, 3), pick(1, 5), heads * dk}, rng), rng, true));
  }
  out.emplace_back("softmax_cce", Result{check_softmax_cce(rng, pick(1, 6), pick(2, 5)), "logits"});
  return out;
}

}  // namespace gradcheck

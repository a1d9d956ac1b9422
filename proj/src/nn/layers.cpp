#include "eegconn/nn/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "eegconn/errors.hpp"

namespace eegconn::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;
using Eigen::Index;

Index ix(std::size_t v) { return static_cast<Index>(v); }

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.values()) v = (2.0 * uniform01(rng) - 1.0) * limit;
}

Parameter make_param(const std::string& name, Shape shape, bool trainable = true) {
  Tensor t(shape);
  return Parameter{name, t, Tensor(shape), trainable};
}

std::size_t pad_before(Padding p, std::size_t k) { return p == Padding::same ? (k - 1) / 2 : 0; }

std::size_t out_extent(Padding p, std::size_t in, std::size_t k) { return p == Padding::same ? in : in - k + 1; }

}  // namespace

void Layer::shape_error(const std::string& expected, const Shape& got) const {
  throw ConfigError("layer '" + name_ + "' (" + type() + "): expected input " + expected + ", got " +
                    shape_string(got));
}

void Layer::require_cache(bool present) const {
  if (!present) throw ConfigError("layer '" + name_ + "': backward called without a preceding forward");
}

// ---------------------------------------------------------------- Dense

Dense::Dense(std::string name, std::size_t in, std::size_t out, bool bias)
    : Layer(std::move(name)), in_(in), out_(out), has_bias_(bias) {
  weight_ = make_param(this->name() + ".weight", {in, out});
  if (has_bias_) bias_ = make_param(this->name() + ".bias", {out});
}

Shape Dense::output_shape(const Shape& in) const {
  if (in.size() != 2 || in[1] != in_) shape_error("(B, " + std::to_string(in_) + ")", in);
  return {in[0], out_};
}

Tensor Dense::forward(const Tensor& x, const ForwardContext&) {
  const auto shape = output_shape(x.shape());
  input_ = x;
  Tensor y(shape);
  CMapRM xm(x.data(), ix(shape[0]), ix(in_));
  CMapRM w(weight_.value.data(), ix(in_), ix(out_));
  MapRM ym(y.data(), ix(shape[0]), ix(out_));
  ym.noalias() = xm * w;
  if (has_bias_) {
    Eigen::Map<const Eigen::RowVectorXd> b(bias_.value.data(), ix(out_));
    ym.rowwise() += b;
  }
  return y;
}

Tensor Dense::backward(const Tensor& grad_out) {
  require_cache(input_.size() > 0);
  const std::size_t batch = input_.dim(0);
  CMapRM g(grad_out.data(), ix(batch), ix(out_));
  CMapRM xm(input_.data(), ix(batch), ix(in_));
  MapRM dw(weight_.grad.data(), ix(in_), ix(out_));
  dw.noalias() += xm.transpose() * g;
  if (has_bias_) {
    Eigen::Map<Eigen::RowVectorXd> db(bias_.grad.data(), ix(out_));
    db += g.colwise().sum();
  }
  Tensor dx(input_.shape());
  if (needs_input_grad_) {
    CMapRM w(weight_.value.data(), ix(in_), ix(out_));
    MapRM dxm(dx.data(), ix(batch), ix(in_));
    dxm.noalias() = g * w.transpose();
  }
  return dx;
}

std::vector<Parameter*> Dense::parameters() {
  if (has_bias_) return {&weight_, &bias_};
  return {&weight_};
}

void Dense::initialize(Rng& rng) {
  glorot_uniform(weight_.value, in_, out_, rng);
  if (has_bias_) bias_.value.fill(0.0);
}

// ---------------------------------------------------------------- Conv2D

Conv2D::Conv2D(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw,
               Padding padding, bool bias)
    : Layer(std::move(name)), in_ch_(in_ch), out_ch_(out_ch), kh_(kh), kw_(kw), padding_(padding), has_bias_(bias) {
  weight_ = make_param(this->name() + ".weight", {out_ch, in_ch, kh, kw});
  if (has_bias_) bias_ = make_param(this->name() + ".bias", {out_ch});
}

Shape Conv2D::output_shape(const Shape& in) const {
  const std::string expected = "(B, " + std::to_string(in_ch_) + ", H, W)";
  if (in.size() != 4 || in[1] != in_ch_) shape_error(expected, in);
  if (padding_ == Padding::valid && (in[2] < kh_ || in[3] < kw_)) shape_error(expected + " at least kernel-sized", in);
  return {in[0], out_ch_, out_extent(padding_, in[2], kh_), out_extent(padding_, in[3], kw_)};
}

namespace {

// Row-major (Ci*kh*kw) x (Ho*Wo) patch matrix of one sample.
void im2col(const double* x, std::size_t ci_n, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
            std::size_t ph0, std::size_t pw0, std::size_t ho_n, std::size_t wo_n, RowMat& col) {
  col.resize(ix(ci_n * kh * kw), ix(ho_n * wo_n));
  for (std::size_t ci = 0; ci < ci_n; ++ci) {
    for (std::size_t dh = 0; dh < kh; ++dh) {
      for (std::size_t dw = 0; dw < kw; ++dw) {
        double* row = col.data() + ((ci * kh + dh) * kw + dw) * ho_n * wo_n;
        const long wo_lo = std::max<long>(0, static_cast<long>(pw0) - static_cast<long>(dw));
        const long wo_hi = std::min<long>(static_cast<long>(wo_n), static_cast<long>(w + pw0) - static_cast<long>(dw));
        for (std::size_t ho = 0; ho < ho_n; ++ho) {
          double* dst = row + ho * wo_n;
          const long hi = static_cast<long>(ho + dh) - static_cast<long>(ph0);
          if (hi < 0 || hi >= static_cast<long>(h) || wo_lo >= wo_hi) {
            std::fill(dst, dst + wo_n, 0.0);
            continue;
          }
          std::fill(dst, dst + wo_lo, 0.0);
          const double* src = x + (ci * h + static_cast<std::size_t>(hi)) * w;
          for (long wo = wo_lo; wo < wo_hi; ++wo) dst[wo] = src[wo + static_cast<long>(dw) - static_cast<long>(pw0)];
          std::fill(dst + wo_hi, dst + wo_n, 0.0);
        }
      }
    }
  }
}

void col2im_add(const RowMat& col, std::size_t ci_n, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                std::size_t ph0, std::size_t pw0, std::size_t ho_n, std::size_t wo_n, double* dx) {
  for (std::size_t ci = 0; ci < ci_n; ++ci) {
    for (std::size_t dh = 0; dh < kh; ++dh) {
      for (std::size_t dw = 0; dw < kw; ++dw) {
        const double* row = col.data() + ((ci * kh + dh) * kw + dw) * ho_n * wo_n;
        const long wo_lo = std::max<long>(0, static_cast<long>(pw0) - static_cast<long>(dw));
        const long wo_hi = std::min<long>(static_cast<long>(wo_n), static_cast<long>(w + pw0) - static_cast<long>(dw));
        for (std::size_t ho = 0; ho < ho_n; ++ho) {
          const long hi = static_cast<long>(ho + dh) - static_cast<long>(ph0);
          if (hi < 0 || hi >= static_cast<long>(h)) continue;
          double* dst = dx + (ci * h + static_cast<std::size_t>(hi)) * w;
          const double* src = row + ho * wo_n;
          for (long wo = wo_lo; wo < wo_hi; ++wo) dst[wo + static_cast<long>(dw) - static_cast<long>(pw0)] += src[wo];
        }
      }
    }
  }
}

}  // namespace

Tensor Conv2D::forward(const Tensor& x, const ForwardContext&) {
  const auto shape = output_shape(x.shape());
  input_ = x;
  const std::size_t b_n = shape[0], ho = shape[2], wo = shape[3], h = x.dim(2), w = x.dim(3);
  const std::size_t q = in_ch_ * kh_ * kw_, p = ho * wo;
  Tensor y(shape);
  CMapRM wm(weight_.value.data(), ix(out_ch_), ix(q));
  RowMat col;
  for (std::size_t b = 0; b < b_n; ++b) {
    im2col(x.data() + b * in_ch_ * h * w, in_ch_, h, w, kh_, kw_, pad_before(padding_, kh_), pad_before(padding_, kw_),
           ho, wo, col);
    MapRM yb(y.data() + b * out_ch_ * p, ix(out_ch_), ix(p));
    yb.noalias() = wm * col;
    if (has_bias_) {
      for (std::size_t c = 0; c < out_ch_; ++c) yb.row(ix(c)).array() += bias_.value[c];
    }
  }
  return y;
}

Tensor Conv2D::backward(const Tensor& grad_out) {
  require_cache(input_.size() > 0);
  const std::size_t b_n = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
  const std::size_t ho = grad_out.dim(2), wo = grad_out.dim(3);
  const std::size_t q = in_ch_ * kh_ * kw_, p = ho * wo;
  const std::size_t ph0 = pad_before(padding_, kh_), pw0 = pad_before(padding_, kw_);
  CMapRM wm(weight_.value.data(), ix(out_ch_), ix(q));
  MapRM dw(weight_.grad.data(), ix(out_ch_), ix(q));
  Tensor dx(input_.shape());
  RowMat col, dcol;
  for (std::size_t b = 0; b < b_n; ++b) {
    CMapRM gb(grad_out.data() + b * out_ch_ * p, ix(out_ch_), ix(p));
    im2col(input_.data() + b * in_ch_ * h * w, in_ch_, h, w, kh_, kw_, ph0, pw0, ho, wo, col);
    dw.noalias() += gb * col.transpose();
    if (has_bias_) {
      for (std::size_t c = 0; c < out_ch_; ++c) bias_.grad[c] += gb.row(ix(c)).sum();
    }
    if (needs_input_grad_) {
      dcol.noalias() = wm.transpose() * gb;
      col2im_add(dcol, in_ch_, h, w, kh_, kw_, ph0, pw0, ho, wo, dx.data() + b * in_ch_ * h * w);
    }
  }
  return dx;
}

std::vector<Parameter*> Conv2D::parameters() {
  if (has_bias_) return {&weight_, &bias_};
  return {&weight_};
}

void Conv2D::initialize(Rng& rng) {
  glorot_uniform(weight_.value, in_ch_ * kh_ * kw_, out_ch_ * kh_ * kw_, rng);
  if (has_bias_) bias_.value.fill(0.0);
}

// ---------------------------------------------------------------- DepthwiseConv2D

DepthwiseConv2D::DepthwiseConv2D(std::string name, std::size_t in_ch, std::size_t multiplier, std::size_t kh,
                                 std::size_t kw, Padding padding)
    : Layer(std::move(name)), in_ch_(in_ch), mult_(multiplier), kh_(kh), kw_(kw), padding_(padding) {
  weight_ = make_param(this->name() + ".weight", {in_ch * multiplier, 1, kh, kw});
}

Shape DepthwiseConv2D::output_shape(const Shape& in) const {
  const std::string expected = "(B, " + std::to_string(in_ch_) + ", H, W)";
  if (in.size() != 4 || in[1] != in_ch_) shape_error(expected, in);
  if (padding_ == Padding::valid && (in[2] < kh_ || in[3] < kw_)) shape_error(expected + " at least kernel-sized", in);
  return {in[0], in_ch_ * mult_, out_extent(padding_, in[2], kh_), out_extent(padding_, in[3], kw_)};
}

Tensor DepthwiseConv2D::forward(const Tensor& x, const ForwardContext&) {
  const auto shape = output_shape(x.shape());
  input_ = x;
  Tensor y(shape);
  const std::size_t h = x.dim(2), w = x.dim(3), ho_n = shape[2], wo_n = shape[3];
  const long ph0 = static_cast<long>(pad_before(padding_, kh_)), pw0 = static_cast<long>(pad_before(padding_, kw_));
  for (std::size_t b = 0; b < shape[0]; ++b) {
    for (std::size_t ci = 0; ci < in_ch_; ++ci) {
      const double* xin = x.data() + (b * in_ch_ + ci) * h * w;
      for (std::size_t m = 0; m < mult_; ++m) {
        const std::size_t co = ci * mult_ + m;
        double* out = y.data() + (b * in_ch_ * mult_ + co) * ho_n * wo_n;
        for (std::size_t dh = 0; dh < kh_; ++dh) {
          for (std::size_t dw = 0; dw < kw_; ++dw) {
            const double k = weight_.value[(co * kh_ + dh) * kw_ + dw];
            const long off = static_cast<long>(dw) - pw0;
            const long wo_lo = std::max<long>(0, -off);
            const long wo_hi = std::min<long>(static_cast<long>(wo_n), static_cast<long>(w) - off);
            for (std::size_t ho = 0; ho < ho_n; ++ho) {
              const long hi = static_cast<long>(ho + dh) - ph0;
              if (hi < 0 || hi >= static_cast<long>(h)) continue;
              const double* src = xin + static_cast<std::size_t>(hi) * w;
              double* dst = out + ho * wo_n;
              for (long wo = wo_lo; wo < wo_hi; ++wo) dst[wo] += k * src[wo + off];
            }
          }
        }
      }
    }
  }
  return y;
}

Tensor DepthwiseConv2D::backward(const Tensor& grad_out) {
  require_cache(input_.size() > 0);
  const std::size_t b_n = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
  const std::size_t ho_n = grad_out.dim(2), wo_n = grad_out.dim(3);
  const long ph0 = static_cast<long>(pad_before(padding_, kh_)), pw0 = static_cast<long>(pad_before(padding_, kw_));
  Tensor dx(input_.shape());
  for (std::size_t b = 0; b < b_n; ++b) {
    for (std::size_t ci = 0; ci < in_ch_; ++ci) {
      const double* xin = input_.data() + (b * in_ch_ + ci) * h * w;
      double* dxin = dx.data() + (b * in_ch_ + ci) * h * w;
      for (std::size_t m = 0; m < mult_; ++m) {
        const std::size_t co = ci * mult_ + m;
        const double* g = grad_out.data() + (b * in_ch_ * mult_ + co) * ho_n * wo_n;
        for (std::size_t dh = 0; dh < kh_; ++dh) {
          for (std::size_t dw = 0; dw < kw_; ++dw) {
            const std::size_t kidx = (co * kh_ + dh) * kw_ + dw;
            const double k = weight_.value[kidx];
            const long off = static_cast<long>(dw) - pw0;
            const long wo_lo = std::max<long>(0, -off);
            const long wo_hi = std::min<long>(static_cast<long>(wo_n), static_cast<long>(w) - off);
            double acc = 0.0;
            for (std::size_t ho = 0; ho < ho_n; ++ho) {
              const long hi = static_cast<long>(ho + dh) - ph0;
              if (hi < 0 || hi >= static_cast<long>(h)) continue;
              const double* src = xin + static_cast<std::size_t>(hi) * w;
              double* dsrc = dxin + static_cast<std::size_t>(hi) * w;
              const double* gr = g + ho * wo_n;
              for (long wo = wo_lo; wo < wo_hi; ++wo) {
                acc += gr[wo] * src[wo + off];
                if (needs_input_grad_) dsrc[wo + off] += gr[wo] * k;
              }
            }
            weight_.grad[kidx] += acc;
          }
        }
      }
    }
  }
  return dx;
}

std::vector<Parameter*> DepthwiseConv2D::parameters() { return {&weight_}; }

void DepthwiseConv2D::initialize(Rng& rng) { glorot_uniform(weight_.value, kh_ * kw_, mult_ * kh_ * kw_, rng); }

// ---------------------------------------------------------------- SeparableConv2D

SeparableConv2D::SeparableConv2D(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kh,
                                 std::size_t kw, Padding padding)
    : Layer(name),
      depthwise_(name + ".depthwise", in_ch, 1, kh, kw, padding),
      pointwise_(name + ".pointwise", in_ch, out_ch, 1, 1, Padding::valid, false) {}

Shape SeparableConv2D::output_shape(const Shape& in) const {
  return pointwise_.output_shape(depthwise_.output_shape(in));
}

Tensor SeparableConv2D::forward(const Tensor& x, const ForwardContext& ctx) {
  return pointwise_.forward(depthwise_.forward(x, ctx), ctx);
}

Tensor SeparableConv2D::backward(const Tensor& grad_out) {
  depthwise_.set_needs_input_grad(needs_input_grad_);
  return depthwise_.backward(pointwise_.backward(grad_out));
}

std::vector<Parameter*> SeparableConv2D::parameters() {
  auto p = depthwise_.parameters();
  for (auto* q : pointwise_.parameters()) p.push_back(q);
  return p;
}

void SeparableConv2D::initialize(Rng& rng) {
  depthwise_.initialize(rng);
  pointwise_.initialize(rng);
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::string name, std::size_t channels, double momentum, double eps)
    : Layer(std::move(name)), channels_(channels), momentum_(momentum), eps_(eps) {
  gamma_ = make_param(this->name() + ".gamma", {channels});
  beta_ = make_param(this->name() + ".beta", {channels});
  running_mean_ = make_param(this->name() + ".running_mean", {channels}, false);
  running_var_ = make_param(this->name() + ".running_var", {channels}, false);
  gamma_.value.fill(1.0);
  running_var_.value.fill(1.0);
}

Shape BatchNorm::output_shape(const Shape& in) const {
  if ((in.size() != 4 && in.size() != 2) || in[1] != channels_) {
    shape_error("(B, " + std::to_string(channels_) + ", H, W) or (B, " + std::to_string(channels_) + ")", in);
  }
  return in;
}

Tensor BatchNorm::forward(const Tensor& x, const ForwardContext& ctx) {
  output_shape(x.shape());
  const std::size_t b_n = x.dim(0);
  const std::size_t inner = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  const std::size_t n = b_n * inner;
  Tensor y(x.shape());
  x_hat_ = Tensor(x.shape());
  inv_std_.assign(channels_, 0.0);
  for (std::size_t c = 0; c < channels_; ++c) {
    double mean, var;
    if (ctx.training) {
      double s = 0.0;
      for (std::size_t b = 0; b < b_n; ++b) {
        const double* p = x.data() + (b * channels_ + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) s += p[i];
      }
      mean = s / static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t b = 0; b < b_n; ++b) {
        const double* p = x.data() + (b * channels_ + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) ss += (p[i] - mean) * (p[i] - mean);
      }
      var = ss / static_cast<double>(n);
      const double unbiased = n > 1 ? ss / static_cast<double>(n - 1) : var;
      running_mean_.value[c] = (1.0 - momentum_) * running_mean_.value[c] + momentum_ * mean;
      running_var_.value[c] = (1.0 - momentum_) * running_var_.value[c] + momentum_ * unbiased;
    } else {
      mean = running_mean_.value[c];
      var = running_var_.value[c];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[c] = inv;
    const double g = gamma_.value[c], be = beta_.value[c];
    for (std::size_t b = 0; b < b_n; ++b) {
      const std::size_t off = (b * channels_ + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const double xh = (x[off + i] - mean) * inv;
        x_hat_[off + i] = xh;
        y[off + i] = g * xh + be;
      }
    }
  }
  cached_training_ = ctx.training;
  has_cache_ = true;
  return y;
}

Tensor BatchNorm::backward(const Tensor& grad_out) {
  require_cache(has_cache_);
  const std::size_t b_n = x_hat_.dim(0);
  const std::size_t inner = x_hat_.rank() == 4 ? x_hat_.dim(2) * x_hat_.dim(3) : 1;
  const double n = static_cast<double>(b_n * inner);
  Tensor dx(x_hat_.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (std::size_t b = 0; b < b_n; ++b) {
      const std::size_t off = (b * channels_ + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        sum_dy += grad_out[off + i];
        sum_dy_xh += grad_out[off + i] * x_hat_[off + i];
      }
    }
    gamma_.grad[c] += sum_dy_xh;
    beta_.grad[c] += sum_dy;
    if (!needs_input_grad_) continue;
    const double g = gamma_.value[c], inv = inv_std_[c];
    for (std::size_t b = 0; b < b_n; ++b) {
      const std::size_t off = (b * channels_ + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        dx[off + i] = cached_training_
                          ? g * inv / n * (n * grad_out[off + i] - sum_dy - x_hat_[off + i] * sum_dy_xh)
                          : g * inv * grad_out[off + i];
      }
    }
  }
  return dx;
}

std::vector<Parameter*> BatchNorm::parameters() { return {&gamma_, &beta_, &running_mean_, &running_var_}; }

void BatchNorm::initialize(Rng&) {
  gamma_.value.fill(1.0);
  beta_.value.fill(0.0);
  running_mean_.value.fill(0.0);
  running_var_.value.fill(1.0);
}

// ---------------------------------------------------------------- Elu

Tensor Elu::forward(const Tensor& x, const ForwardContext&) {
  input_ = x;
  output_ = Tensor(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) output_[i] = x[i] > 0.0 ? x[i] : alpha_ * std::expm1(x[i]);
  return output_;
}

Tensor Elu::backward(const Tensor& grad_out) {
  require_cache(input_.size() > 0);
  Tensor dx(input_.shape());
  for (std::size_t i = 0; i < dx.size(); ++i) {
    dx[i] = grad_out[i] * (input_[i] > 0.0 ? 1.0 : output_[i] + alpha_);
  }
  return dx;
}

// ---------------------------------------------------------------- AvgPool2D

Shape AvgPool2D::output_shape(const Shape& in) const {
  if (in.size() != 4 || in[2] < ph_ || in[3] < pw_) shape_error("(B, C, H >= ph, W >= pw)", in);
  return {in[0], in[1], in[2] / ph_, in[3] / pw_};
}

Tensor AvgPool2D::forward(const Tensor& x, const ForwardContext&) {
  const auto shape = output_shape(x.shape());
  input_shape_ = x.shape();
  Tensor y(shape);
  const double scale = 1.0 / static_cast<double>(ph_ * pw_);
  for (std::size_t b = 0; b < shape[0]; ++b) {
    for (std::size_t c = 0; c < shape[1]; ++c) {
      for (std::size_t ho = 0; ho < shape[2]; ++ho) {
        for (std::size_t wo = 0; wo < shape[3]; ++wo) {
          double s = 0.0;
          for (std::size_t i = 0; i < ph_; ++i) {
            for (std::size_t j = 0; j < pw_; ++j) s += x.at(b, c, ho * ph_ + i, wo * pw_ + j);
          }
          y.at(b, c, ho, wo) = s * scale;
        }
      }
    }
  }
  return y;
}

Tensor AvgPool2D::backward(const Tensor& grad_out) {
  require_cache(!input_shape_.empty());
  Tensor dx(input_shape_);
  const double scale = 1.0 / static_cast<double>(ph_ * pw_);
  const auto& s = grad_out.shape();
  for (std::size_t b = 0; b < s[0]; ++b) {
    for (std::size_t c = 0; c < s[1]; ++c) {
      for (std::size_t ho = 0; ho < s[2]; ++ho) {
        for (std::size_t wo = 0; wo < s[3]; ++wo) {
          const double g = grad_out.at(b, c, ho, wo) * scale;
          for (std::size_t i = 0; i < ph_; ++i) {
            for (std::size_t j = 0; j < pw_; ++j) dx.at(b, c, ho * ph_ + i, wo * pw_ + j) = g;
          }
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(std::string name, double rate) : Layer(std::move(name)), rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, const ForwardContext& ctx) {
  has_cache_ = true;
  if (!ctx.training || rate_ == 0.0) {
    mask_.assign(x.size(), 1.0);
    return x;
  }
  if (ctx.rng == nullptr) throw ConfigError("layer '" + name() + "': training forward needs a dropout stream");
  const double keep = 1.0 - rate_;
  mask_.resize(x.size());
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = uniform01(*ctx.rng) < keep ? 1.0 / keep : 0.0;
    y[i] = x[i] * mask_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  require_cache(has_cache_);
  Tensor dx(grad_out.shape());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = grad_out[i] * mask_[i];
  return dx;
}

// ---------------------------------------------------------------- reshaping layers

Shape Flatten::output_shape(const Shape& in) const {
  if (in.size() < 2) shape_error("(B, ...)", in);
  std::size_t n = 1;
  for (std::size_t i = 1; i < in.size(); ++i) n *= in[i];
  return {in[0], n};
}

Tensor Flatten::forward(const Tensor& x, const ForwardContext&) {
  input_shape_ = x.shape();
  Tensor y = x;
  y.reshape(output_shape(x.shape()));
  return y;
}

Tensor Flatten::backward(const Tensor& grad_out) {
  require_cache(!input_shape_.empty());
  Tensor dx = grad_out;
  dx.reshape(input_shape_);
  return dx;
}

Shape ToSequence::output_shape(const Shape& in) const {
  if (in.size() != 4 || in[2] != 1) shape_error("(B, C, 1, L)", in);
  return {in[0], in[3], in[1]};
}

Tensor ToSequence::forward(const Tensor& x, const ForwardContext&) {
  const auto shape = output_shape(x.shape());
  input_shape_ = x.shape();
  Tensor y(shape);
  for (std::size_t b = 0; b < shape[0]; ++b) {
    for (std::size_t c = 0; c < shape[2]; ++c) {
      for (std::size_t l = 0; l < shape[1]; ++l) y.at(b, l, c) = x.at(b, c, 0, l);
    }
  }
  return y;
}

Tensor ToSequence::backward(const Tensor& grad_out) {
  require_cache(!input_shape_.empty());
  Tensor dx(input_shape_);
  for (std::size_t b = 0; b < input_shape_[0]; ++b) {
    for (std::size_t c = 0; c < input_shape_[1]; ++c) {
      for (std::size_t l = 0; l < input_shape_[3]; ++l) dx.at(b, c, 0, l) = grad_out.at(b, l, c);
    }
  }
  return dx;
}

Shape SequenceMeanPool::output_shape(const Shape& in) const {
  if (in.size() != 3) shape_error("(B, L, D)", in);
  return {in[0], in[2]};
}

Tensor SequenceMeanPool::forward(const Tensor& x, const ForwardContext&) {
  const auto shape = output_shape(x.shape());
  input_shape_ = x.shape();
  Tensor y(shape);
  const std::size_t len = x.dim(1);
  for (std::size_t b = 0; b < shape[0]; ++b) {
    for (std::size_t l = 0; l < len; ++l) {
      for (std::size_t d = 0; d < shape[1]; ++d) y.at(b, d) += x.at(b, l, d);
    }
    for (std::size_t d = 0; d < shape[1]; ++d) y.at(b, d) /= static_cast<double>(len);
  }
  return y;
}

Tensor SequenceMeanPool::backward(const Tensor& grad_out) {
  require_cache(!input_shape_.empty());
  Tensor dx(input_shape_);
  const std::size_t len = input_shape_[1];
  for (std::size_t b = 0; b < input_shape_[0]; ++b) {
    for (std::size_t l = 0; l < len; ++l) {
      for (std::size_t d = 0; d < input_shape_[2]; ++d) dx.at(b, l, d) = grad_out.at(b, d) / static_cast<double>(len);
    }
  }
  return dx;
}

// ---------------------------------------------------------------- MultiHeadAttention

MultiHeadAttention::MultiHeadAttention(std::string name, std::size_t d_model, std::size_t heads)
    : Layer(std::move(name)), d_model_(d_model), heads_(heads), d_k_(heads ? d_model / heads : 0) {
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("layer '" + this->name() + "': d_model " + std::to_string(d_model) +
                      " is not divisible by " + std::to_string(heads) + " heads");
  }
  const std::string& n = this->name();
  wq_ = make_param(n + ".wq", {d_model, d_model});
  wk_ = make_param(n + ".wk", {d_model, d_model});
  wv_ = make_param(n + ".wv", {d_model, d_model});
  wo_ = make_param(n + ".wo", {d_model, d_model});
  bq_ = make_param(n + ".bq", {d_model});
  bk_ = make_param(n + ".bk", {d_model});
  bv_ = make_param(n + ".bv", {d_model});
  bo_ = make_param(n + ".bo", {d_model});
}

Shape MultiHeadAttention::output_shape(const Shape& in) const {
  if (in.size() != 3 || in[2] != d_model_) shape_error("(B, L, " + std::to_string(d_model_) + ")", in);
  return in;
}

Tensor MultiHeadAttention::forward(const Tensor& x, const ForwardContext&) {
  output_shape(x.shape());
  const std::size_t b_n = x.dim(0), len = x.dim(1), d = d_model_;
  input_ = x;
  q_ = Tensor(x.shape());
  k_ = Tensor(x.shape());
  v_ = Tensor(x.shape());
  concat_ = Tensor(x.shape());
  attn_ = Tensor({b_n, heads_, len, len});
  Tensor y(x.shape());
  CMapRM wq(wq_.value.data(), ix(d), ix(d)), wk(wk_.value.data(), ix(d), ix(d)),
      wv(wv_.value.data(), ix(d), ix(d)), wo(wo_.value.data(), ix(d), ix(d));
  Eigen::Map<const Eigen::RowVectorXd> bq(bq_.value.data(), ix(d)), bk(bk_.value.data(), ix(d)),
      bv(bv_.value.data(), ix(d)), bo(bo_.value.data(), ix(d));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_k_));
  for (std::size_t b = 0; b < b_n; ++b) {
    const std::size_t off = b * len * d;
    CMapRM xb(x.data() + off, ix(len), ix(d));
    MapRM qb(q_.data() + off, ix(len), ix(d)), kb(k_.data() + off, ix(len), ix(d)),
        vb(v_.data() + off, ix(len), ix(d)), ob(concat_.data() + off, ix(len), ix(d));
    qb.noalias() = xb * wq;
    qb.rowwise() += bq;
    kb.noalias() = xb * wk;
    kb.rowwise() += bk;
    vb.noalias() = xb * wv;
    vb.rowwise() += bv;
    for (std::size_t h = 0; h < heads_; ++h) {
      const Index c0 = ix(h * d_k_), dk = ix(d_k_);
      MapRM a(attn_.data() + (b * heads_ + h) * len * len, ix(len), ix(len));
      a.noalias() = qb.middleCols(c0, dk) * kb.middleCols(c0, dk).transpose() * scale;
      for (Index r = 0; r < a.rows(); ++r) {
        const double mx = a.row(r).maxCoeff();
        a.row(r) = (a.row(r).array() - mx).exp();
        a.row(r) /= a.row(r).sum();
      }
      ob.middleCols(c0, dk).noalias() = a * vb.middleCols(c0, dk);
    }
    MapRM yb(y.data() + off, ix(len), ix(d));
    yb.noalias() = ob * wo;
    yb.rowwise() += bo;
  }
  return y;
}

Tensor MultiHeadAttention::backward(const Tensor& grad_out) {
  require_cache(input_.size() > 0);
  const std::size_t b_n = input_.dim(0), len = input_.dim(1), d = d_model_;
  CMapRM wq(wq_.value.data(), ix(d), ix(d)), wk(wk_.value.data(), ix(d), ix(d)),
      wv(wv_.value.data(), ix(d), ix(d)), wo(wo_.value.data(), ix(d), ix(d));
  MapRM dwq(wq_.grad.data(), ix(d), ix(d)), dwk(wk_.grad.data(), ix(d), ix(d)),
      dwv(wv_.grad.data(), ix(d), ix(d)), dwo(wo_.grad.data(), ix(d), ix(d));
  Eigen::Map<Eigen::RowVectorXd> dbq(bq_.grad.data(), ix(d)), dbk(bk_.grad.data(), ix(d)),
      dbv(bv_.grad.data(), ix(d)), dbo(bo_.grad.data(), ix(d));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_k_));
  Tensor dx(input_.shape());
  RowMat d_concat(ix(len), ix(d)), dq(ix(len), ix(d)), dk(ix(len), ix(d)), dv(ix(len), ix(d));
  RowMat da, ds;
  for (std::size_t b = 0; b < b_n; ++b) {
    const std::size_t off = b * len * d;
    CMapRM g(grad_out.data() + off, ix(len), ix(d));
    CMapRM xb(input_.data() + off, ix(len), ix(d)), qb(q_.data() + off, ix(len), ix(d)),
        kb(k_.data() + off, ix(len), ix(d)), vb(v_.data() + off, ix(len), ix(d)),
        ob(concat_.data() + off, ix(len), ix(d));
    dwo.noalias() += ob.transpose() * g;
    dbo += g.colwise().sum();
    d_concat.noalias() = g * wo.transpose();
    for (std::size_t h = 0; h < heads_; ++h) {
      const Index c0 = ix(h * d_k_), dkw = ix(d_k_);
      CMapRM a(attn_.data() + (b * heads_ + h) * len * len, ix(len), ix(len));
      da.noalias() = d_concat.middleCols(c0, dkw) * vb.middleCols(c0, dkw).transpose();
      dv.middleCols(c0, dkw).noalias() = a.transpose() * d_concat.middleCols(c0, dkw);
      const Eigen::VectorXd row_dot = (da.array() * a.array()).rowwise().sum();
      ds = a.array() * (da.colwise() - row_dot).array();
      dq.middleCols(c0, dkw).noalias() = ds * kb.middleCols(c0, dkw) * scale;
      dk.middleCols(c0, dkw).noalias() = ds.transpose() * qb.middleCols(c0, dkw) * scale;
    }
    dwq.noalias() += xb.transpose() * dq;
    dwk.noalias() += xb.transpose() * dk;
    dwv.noalias() += xb.transpose() * dv;
    dbq += dq.colwise().sum();
    dbk += dk.colwise().sum();
    dbv += dv.colwise().sum();
    if (needs_input_grad_) {
      MapRM dxb(dx.data() + off, ix(len), ix(d));
      dxb.noalias() = dq * wq.transpose() + dk * wk.transpose() + dv * wv.transpose();
    }
  }
  return dx;
}

std::vector<Parameter*> MultiHeadAttention::parameters() {
  return {&wq_, &wk_, &wv_, &wo_, &bq_, &bk_, &bv_, &bo_};
}

void MultiHeadAttention::initialize(Rng& rng) {
  for (auto* p : {&wq_, &wk_, &wv_, &wo_}) glorot_uniform(p->value, d_model_, d_model_, rng);
  for (auto* p : {&bq_, &bk_, &bv_, &bo_}) p->value.fill(0.0);
}

// ---------------------------------------------------------------- softmax / loss

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) throw ConfigError("softmax expects (B, K) logits");
  Tensor p(logits.shape());
  const std::size_t k = logits.dim(1);
  for (std::size_t b = 0; b < logits.dim(0); ++b) {
    double mx = logits.at(b, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at(b, j));
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      p.at(b, j) = std::exp(logits.at(b, j) - mx);
      s += p.at(b, j);
    }
    for (std::size_t j = 0; j < k; ++j) p.at(b, j) /= s;
  }
  return p;
}

LossResult cce_loss(const Tensor& probs, const std::vector<int>& labels) {
  if (probs.rank() != 2 || probs.dim(0) != labels.size()) {
    throw DataError("cce_loss: probabilities and labels disagree in batch size");
  }
  const std::size_t b_n = probs.dim(0), k = probs.dim(1);
  LossResult r{0.0, probs};
  for (std::size_t b = 0; b < b_n; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw DataError("cce_loss: label " + std::to_string(y) + " outside [0, " + std::to_string(k) + ")");
    }
    r.loss -= std::log(std::max(probs.at(b, static_cast<std::size_t>(y)), 1e-300));
    r.grad_logits.at(b, static_cast<std::size_t>(y)) -= 1.0;
  }
  r.loss /= static_cast<double>(b_n);
  for (double& g : r.grad_logits.values()) g /= static_cast<double>(b_n);
  return r;
}

}  // namespace eegconn::nn

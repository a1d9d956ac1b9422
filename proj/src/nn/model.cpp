#include "eegconn/nn/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "eegconn/errors.hpp"
#include "eegconn/io_util.hpp"

namespace eegconn::nn {

using nlohmann::json;

// ---------------------------------------------------------------- spec

json ModelSpec::to_json() const {
  json layers_j = json::array();
  for (const auto& l : layers) layers_j.push_back({{"type", l.type}, {"name", l.name}, {"params", l.params}});
  return {{"name", name}, {"input_shape", input_shape}, {"num_classes", num_classes}, {"seed", seed},
          {"layers", layers_j}};
}

ModelSpec ModelSpec::from_json(const json& j) {
  try {
    ModelSpec s;
    s.name = j.at("name").get<std::string>();
    s.input_shape = j.at("input_shape").get<Shape>();
    s.num_classes = j.at("num_classes").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& l : j.at("layers")) {
      s.layers.push_back({l.at("type").get<std::string>(), l.at("name").get<std::string>(),
                          l.value("params", json::object())});
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model spec: ") + e.what());
  }
}

namespace {

json kernel(std::size_t kh, std::size_t kw) { return json::array({kh, kw}); }

void eegnet_front(ModelSpec& s, std::size_t channels, std::size_t kernel_len, double dropout) {
  constexpr std::size_t f1 = 8, depth = 2, f2 = 16;
  s.layers = {
      {"conv2d", "temporal_conv",
       {{"in_channels", 1}, {"out_channels", f1}, {"kernel", kernel(1, kernel_len)}, {"padding", "same"}}},
      {"batch_norm", "bn1", {{"channels", f1}}},
      {"depthwise_conv2d", "spatial_conv",
       {{"in_channels", f1}, {"multiplier", depth}, {"kernel", kernel(channels, 1)}, {"padding", "valid"}}},
      {"batch_norm", "bn2", {{"channels", f1 * depth}}},
      {"elu", "elu1", json::object()},
      {"avg_pool2d", "pool1", {{"pool", kernel(1, 4)}}},
      {"dropout", "drop1", {{"rate", dropout}}},
      {"separable_conv2d", "separable_conv",
       {{"in_channels", f1 * depth}, {"out_channels", f2}, {"kernel", kernel(1, 16)}, {"padding", "same"}}},
      {"batch_norm", "bn3", {{"channels", f2}}},
      {"elu", "elu2", json::object()},
      {"avg_pool2d", "pool2", {{"pool", kernel(1, 8)}}},
      {"dropout", "drop2", {{"rate", dropout}}},
  };
}

}  // namespace

ModelSpec mlp_spec(std::size_t channels, std::size_t window, std::uint64_t seed, std::size_t hidden, double dropout) {
  ModelSpec s{"mlp", {1, channels, window}, 3, seed, {}};
  s.layers = {
      {"flatten", "flatten", json::object()},
      {"dense", "hidden", {{"in", channels * window}, {"out", hidden}}},
      {"elu", "elu", json::object()},
      {"dropout", "drop", {{"rate", dropout}}},
      {"dense", "classifier", {{"in", hidden}, {"out", 3}}},
  };
  return s;
}

ModelSpec eegnet_spec(std::size_t channels, std::size_t window, std::size_t kernel_len, std::uint64_t seed,
                      double dropout) {
  ModelSpec s{"eegnet", {1, channels, window}, 3, seed, {}};
  eegnet_front(s, channels, kernel_len, dropout);
  const std::size_t len = window / 4 / 8;
  s.layers.push_back({"flatten", "flatten", json::object()});
  s.layers.push_back({"dense", "classifier", {{"in", 16 * len}, {"out", 3}}});
  return s;
}

ModelSpec mha_eegnet_spec(std::size_t channels, std::size_t window, std::size_t kernel_len, std::uint64_t seed,
                          std::size_t heads, double dropout) {
  ModelSpec s{"mha-eegnet", {1, channels, window}, 3, seed, {}};
  eegnet_front(s, channels, kernel_len, dropout);
  s.layers.push_back({"to_sequence", "to_sequence", json::object()});
  s.layers.push_back({"multi_head_attention", "attention", {{"d_model", 16}, {"heads", heads}}});
  s.layers.push_back({"sequence_mean_pool", "mean_pool", json::object()});
  s.layers.push_back({"dense", "classifier", {{"in", 16}, {"out", 3}}});
  return s;
}

ModelSpec model_spec_by_name(const std::string& name, std::size_t channels, std::size_t window,
                             std::size_t kernel_len, std::uint64_t seed) {
  if (name == "mlp") return mlp_spec(channels, window, seed);
  if (name == "eegnet") return eegnet_spec(channels, window, kernel_len, seed);
  if (name == "mha-eegnet") return mha_eegnet_spec(channels, window, kernel_len, seed);
  throw ConfigError("unknown model '" + name + "' (expected mlp, eegnet or mha-eegnet)");
}

// ---------------------------------------------------------------- model

namespace {

Padding parse_padding(const json& p, const std::string& layer) {
  const auto s = p.value("padding", std::string("valid"));
  if (s == "same") return Padding::same;
  if (s == "valid") return Padding::valid;
  throw ConfigError("layer '" + layer + "': unknown padding '" + s + "'");
}

std::pair<std::size_t, std::size_t> parse_pair(const json& p, const char* key) {
  const auto v = p.at(key).get<std::vector<std::size_t>>();
  if (v.size() != 2 || v[0] == 0 || v[1] == 0) throw ConfigError(std::string(key) + " must be two positive integers");
  return {v[0], v[1]};
}

std::unique_ptr<Layer> make_layer(const LayerSpec& ls) {
  const auto& p = ls.params;
  const auto& n = ls.name;
  try {
    if (ls.type == "dense") {
      return std::make_unique<Dense>(n, p.at("in").get<std::size_t>(), p.at("out").get<std::size_t>(),
                                     p.value("bias", true));
    }
    if (ls.type == "conv2d") {
      auto [kh, kw] = parse_pair(p, "kernel");
      return std::make_unique<Conv2D>(n, p.at("in_channels").get<std::size_t>(), p.at("out_channels").get<std::size_t>(),
                                      kh, kw, parse_padding(p, n), p.value("bias", false));
    }
    if (ls.type == "depthwise_conv2d") {
      auto [kh, kw] = parse_pair(p, "kernel");
      return std::make_unique<DepthwiseConv2D>(n, p.at("in_channels").get<std::size_t>(),
                                               p.at("multiplier").get<std::size_t>(), kh, kw, parse_padding(p, n));
    }
    if (ls.type == "separable_conv2d") {
      auto [kh, kw] = parse_pair(p, "kernel");
      return std::make_unique<SeparableConv2D>(n, p.at("in_channels").get<std::size_t>(),
                                               p.at("out_channels").get<std::size_t>(), kh, kw, parse_padding(p, n));
    }
    if (ls.type == "batch_norm") {
      return std::make_unique<BatchNorm>(n, p.at("channels").get<std::size_t>(), p.value("momentum", 0.1),
                                         p.value("eps", 1e-5));
    }
    if (ls.type == "elu") return std::make_unique<Elu>(n, p.value("alpha", 1.0));
    if (ls.type == "avg_pool2d") {
      auto [ph, pw] = parse_pair(p, "pool");
      return std::make_unique<AvgPool2D>(n, ph, pw);
    }
    if (ls.type == "dropout") return std::make_unique<Dropout>(n, p.at("rate").get<double>());
    if (ls.type == "flatten") return std::make_unique<Flatten>(n);
    if (ls.type == "to_sequence") return std::make_unique<ToSequence>(n);
    if (ls.type == "sequence_mean_pool") return std::make_unique<SequenceMeanPool>(n);
    if (ls.type == "multi_head_attention") {
      return std::make_unique<MultiHeadAttention>(n, p.at("d_model").get<std::size_t>(), p.at("heads").get<std::size_t>());
    }
  } catch (const json::exception& e) {
    throw ConfigError("layer '" + n + "': bad parameters: " + e.what());
  }
  throw ConfigError("layer '" + n + "': unknown layer type '" + ls.type + "'");
}

}  // namespace

Model Model::build(const ModelSpec& spec) {
  if (spec.layers.empty()) throw ConfigError("model '" + spec.name + "' has no layers");
  Model m;
  m.spec_ = spec;
  std::set<std::string> names;
  Shape shape{1};
  shape.insert(shape.end(), spec.input_shape.begin(), spec.input_shape.end());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& ls = spec.layers[i];
    if (!names.insert(ls.name).second) throw ConfigError("duplicate layer name '" + ls.name + "'");
    auto layer = make_layer(ls);
    shape = layer->output_shape(shape);
    Rng rng = make_rng(spec.seed, "init", i);
    layer->initialize(rng);
    m.layers_.push_back(std::move(layer));
  }
  if (shape != Shape{1, spec.num_classes}) {
    throw ConfigError("model '" + spec.name + "': final layer '" + spec.layers.back().name + "' emits " +
                      shape_string(shape) + ", expected (1, " + std::to_string(spec.num_classes) + ")");
  }
  m.layers_.front()->set_needs_input_grad(false);
  return m;
}

Shape Model::output_shape(std::size_t batch) const { return {batch, spec_.num_classes}; }

Tensor Model::logits(const Tensor& x, bool training, Rng* dropout_rng) {
  Shape expected{x.rank() > 0 ? x.dim(0) : 0};
  expected.insert(expected.end(), spec_.input_shape.begin(), spec_.input_shape.end());
  if (x.shape() != expected) {
    throw ConfigError("model '" + spec_.name + "': input " + shape_string(x.shape()) + " does not match " +
                      shape_string(expected));
  }
  ForwardContext ctx{training, dropout_rng};
  Tensor h = x;
  for (auto& l : layers_) h = l->forward(h, ctx);
  has_training_forward_ = training;
  return h;
}

Tensor Model::forward(const Tensor& x, bool training, Rng* dropout_rng) {
  return softmax(logits(x, training, dropout_rng));
}

void Model::backward(const Tensor& grad_logits) {
  if (!has_training_forward_) {
    throw ConfigError("model '" + spec_.name + "': backward requires a preceding forward with training=true");
  }
  Tensor g = grad_logits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    for (auto* p : l->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<Parameter*> Model::trainable_parameters() {
  std::vector<Parameter*> out;
  for (auto* p : parameters()) {
    if (p->trainable) out.push_back(p);
  }
  return out;
}

std::size_t Model::parameter_count(bool trainable_only) {
  std::size_t n = 0;
  for (auto* p : trainable_only ? trainable_parameters() : parameters()) n += p->value.size();
  return n;
}

void Model::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(0.0);
}

Layer& Model::layer(const std::string& name) {
  for (auto& l : layers_) {
    if (l->name() == name) return *l;
  }
  throw ConfigError("model '" + spec_.name + "' has no layer '" + name + "'");
}

// ---------------------------------------------------------------- Adam

Adam::Adam(Model& model, AdamConfig config) : cfg_(config), params_(model.trainable_parameters()) {
  if (!(cfg_.learning_rate >= 0.0) || !std::isfinite(cfg_.learning_rate)) {
    throw ConfigError("learning rate must be a finite non-negative number");
  }
  for (auto* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      p.value[j] -= cfg_.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
    }
  }
}

// ---------------------------------------------------------------- ParameterSet

ParameterSet ParameterSet::capture(Model& model, Adam* adam) {
  ParameterSet ps;
  for (auto* p : model.parameters()) ps.entries.push_back({p->name, p->value});
  if (adam != nullptr) {
    const auto params = model.trainable_parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      ps.entries.push_back({params[i]->name + "@adam_m", adam->first_moments()[i]});
      ps.entries.push_back({params[i]->name + "@adam_v", adam->second_moments()[i]});
    }
    ps.optimizer_steps = adam->steps();
  }
  return ps;
}

const ParameterSet::Entry* ParameterSet::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

void ParameterSet::restore(Model& model) const {
  for (auto* p : model.parameters()) {
    const Entry* e = find(p->name);
    if (e == nullptr) throw ConfigError("parameter set lacks '" + p->name + "'");
    if (e->value.shape() != p->value.shape()) {
      throw ConfigError("parameter '" + p->name + "' has shape " + shape_string(e->value.shape()) + ", model expects " +
                        shape_string(p->value.shape()));
    }
    p->value = e->value;
  }
}

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffULL) << (8 * (7 - i));
  return r;
}

std::filesystem::path with_suffix(const std::filesystem::path& base, const char* suffix) {
  return base.string() + suffix;
}

}  // namespace

void ParameterSet::save(const std::filesystem::path& base) const {
  json index = {{"format", "eegconn-parameters"}, {"dtype", "float64"}, {"endianness", "little"},
                {"optimizer_steps", optimizer_steps}, {"entries", json::array()}};
  std::string blob;
  std::size_t offset = 0;
  for (const auto& e : entries) {
    index["entries"].push_back({{"name", e.name}, {"shape", e.value.shape()}, {"offset", offset}, {"count", e.value.size()}});
    for (double d : e.value.values()) {
      const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(d));
      char buf[8];
      std::memcpy(buf, &bits, 8);
      blob.append(buf, 8);
    }
    offset += e.value.size();
  }
  write_text(with_suffix(base, ".bin"), blob);
  write_text(with_suffix(base, ".json"), index.dump(2) + "\n");
}

ParameterSet ParameterSet::load(const std::filesystem::path& base) {
  const auto index_path = with_suffix(base, ".json");
  json index;
  try {
    index = json::parse(read_text(index_path));
  } catch (const json::exception& e) {
    throw DataError(index_path.string() + ": " + e.what());
  }
  const std::string blob = read_text(with_suffix(base, ".bin"));
  ParameterSet ps;
  ps.optimizer_steps = index.value("optimizer_steps", std::uint64_t{0});
  for (const auto& e : index.at("entries")) {
    const auto offset = e.at("offset").get<std::size_t>();
    const auto count = e.at("count").get<std::size_t>();
    if ((offset + count) * 8 > blob.size()) throw DataError("parameter blob truncated at '" + e.at("name").get<std::string>() + "'");
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, blob.data() + (offset + i) * 8, 8);
      values[i] = std::bit_cast<double>(to_little(bits));
    }
    ps.entries.push_back({e.at("name").get<std::string>(), Tensor(e.at("shape").get<Shape>(), std::move(values))});
  }
  return ps;
}

// ---------------------------------------------------------------- dataset / training

Tensor Dataset::batch(const std::vector<std::size_t>& indices) const {
  Shape shape{indices.size()};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  std::vector<double> v(indices.size() * sample_size());
  const std::size_t n = sample_size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(features.begin() + static_cast<std::ptrdiff_t>(indices[i] * n), n,
                v.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return Tensor(shape, std::move(v));
}

std::vector<int> Dataset::batch_labels(const std::vector<std::size_t>& indices) const {
  std::vector<int> y;
  y.reserve(indices.size());
  for (auto i : indices) y.push_back(labels[i]);
  return y;
}

void Dataset::validate(std::size_t num_classes) const {
  if (labels.empty()) throw DataError("dataset is empty");
  if (features.size() != labels.size() * sample_size()) throw DataError("dataset features do not match labels");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) throw DataError("label " + std::to_string(y) + " out of range");
  }
}

namespace {

int argmax_row(const Tensor& p, std::size_t b) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < p.dim(1); ++j) {
    if (p.at(b, j) > p.at(b, best)) best = j;
  }
  return static_cast<int>(best);
}

}  // namespace

TrainResult train(Model& model, const Dataset& train_set, const Dataset* val_set, const TrainConfig& config) {
  if (config.batch_size == 0) throw ConfigError("batch size must be positive");
  train_set.validate(model.spec().num_classes);
  if (val_set != nullptr) val_set->validate(model.spec().num_classes);
  Adam adam(model, {config.learning_rate});
  Rng shuffle_rng = make_rng(config.seed, "shuffle");
  Rng dropout_rng = make_rng(config.seed, "dropout");
  std::vector<std::size_t> order(train_set.size());
  TrainResult result;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng() % i]);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0, batch_no = 0; start < order.size(); start += config.batch_size, ++batch_no) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + config.batch_size)));
      const auto labels = train_set.batch_labels(idx);
      const Tensor probs = model.forward(train_set.batch(idx), true, &dropout_rng);
      const auto loss = cce_loss(probs, labels);
      if (!std::isfinite(loss.loss)) {
        throw NumericalError("training of '" + model.spec().name + "' diverged at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batch_no) + ": loss is not finite");
      }
      model.zero_grad();
      model.backward(loss.grad_logits);
      adam.step();
      loss_sum += loss.loss * static_cast<double>(idx.size());
      for (std::size_t b = 0; b < idx.size(); ++b) correct += argmax_row(probs, b) == labels[b];
    }
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_sum / static_cast<double>(order.size());
    st.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    if (val_set != nullptr) {
      auto [vl, va] = evaluate_loss(model, *val_set);
      st.val_loss = vl;
      st.val_acc = va;
    }
    result.curves.push_back(st);
  }
  result.optimizer_steps = adam.steps();
  return result;
}

Tensor predict_proba(Model& model, const Dataset& data, std::size_t chunk) {
  const std::size_t k = model.spec().num_classes;
  Tensor out({std::max<std::size_t>(data.size(), 1), k});
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + chunk); ++i) idx.push_back(i);
    const Tensor p = model.forward(data.batch(idx), false);
    std::copy(p.values().begin(), p.values().end(), out.data() + start * k);
  }
  return out;
}

std::vector<int> predict(Model& model, const Dataset& data, std::size_t chunk) {
  const Tensor p = predict_proba(model, data, chunk);
  std::vector<int> y(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) y[i] = argmax_row(p, i);
  return y;
}

std::pair<double, double> evaluate_loss(Model& model, const Dataset& data, std::size_t chunk) {
  const Tensor p = predict_proba(model, data, chunk);
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    loss -= std::log(std::max(p.at(i, static_cast<std::size_t>(data.labels[i])), 1e-300));
    correct += argmax_row(p, i) == data.labels[i];
  }
  const double n = static_cast<double>(data.size());
  return {loss / n, static_cast<double>(correct) / n};
}

json curves_to_json(const std::vector<EpochStats>& curves) {
  json arr = json::array();
  for (const auto& c : curves) {
    arr.push_back({{"epoch", c.epoch},
                   {"train_loss", c.train_loss},
                   {"train_acc", c.train_acc},
                   {"val_loss", c.val_loss ? json(*c.val_loss) : json(nullptr)},
                   {"val_acc", c.val_acc ? json(*c.val_acc) : json(nullptr)}});
  }
  return arr;
}

}  // namespace eegconn::nn

#include <cmath>
#include <filesystem>

#include "../support/gradcheck.hpp"
#include "doctest.h"
#include "eegconn/errors.hpp"
#include "eegconn/nn/model.hpp"

using namespace eegconn;
using namespace eegconn::nn;
using gradcheck::random_tensor;

TEST_CASE("every layer passes finite-difference gradient checks over 20 seeds") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (const auto& [kind, res] : gradcheck::check_all_layers(seed)) {
      INFO(kind << " seed " << seed << " at " << res.where);
      CHECK(res.worst <= 1e-4);
    }
  }
}

TEST_CASE("dense gradient on a quadratic probe loss is tight") {
  Rng rng(7);
  Dense d("d", 4, 3);
  d.initialize(rng);
  const auto r = gradcheck::check_layer(d, random_tensor({5, 4}, rng), rng, true);
  CHECK(r.worst <= 1e-6);
}

TEST_CASE("softmax+cce gradient is tight") {
  Rng rng(3);
  for (int i = 0; i < 10; ++i) CHECK(gradcheck::check_softmax_cce(rng, 4, 3) <= 1e-6);
}

TEST_CASE("cce values") {
  Tensor p({2, 3}, {1.0, 0.0, 0.0, 0.0, 0.0, 1.0});
  CHECK(cce_loss(p, {0, 2}).loss == doctest::Approx(0.0));
  Tensor u({1, 3}, 1.0 / 3.0);
  CHECK(cce_loss(u, {1}).loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK_THROWS_AS(cce_loss(u, {3}), DataError);
  CHECK_THROWS_AS(cce_loss(u, {-1}), DataError);
}

TEST_CASE("softmax rows are positive and sum to one") {
  Rng rng(11);
  const Tensor p = softmax(random_tensor({6, 3}, rng, 50.0));
  for (std::size_t b = 0; b < 6; ++b) {
    double s = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(p.at(b, j) > 0.0);
      s += p.at(b, j);
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("dropout: identity at inference, scaled mask in training") {
  Dropout d("drop", 0.5);
  Rng rng(5);
  const Tensor x = random_tensor({4, 10}, rng);
  CHECK(d.forward(x, {false, nullptr}) == x);
  CHECK_THROWS_AS(d.forward(x, {true, nullptr}), ConfigError);
  const Tensor y = d.forward(x, {true, &rng});
  const Tensor g = d.backward(Tensor({4, 10}, 1.0));
  std::size_t kept = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK((y[i] == 0.0 || y[i] == doctest::Approx(2.0 * x[i])));
    CHECK((g[i] == 0.0 || g[i] == 2.0));
    kept += g[i] != 0.0;
  }
  CHECK(kept > 5);
  CHECK(kept < 35);
  CHECK_THROWS_AS(Dropout("bad", 1.0), ConfigError);
}

TEST_CASE("batch norm in inference mode with identity parameters is the identity") {
  BatchNorm bn("bn", 3);
  Rng rng(1);
  const Tensor x = random_tensor({2, 3, 2, 5}, rng, 4.0);
  const Tensor y = bn.forward(x, {false, nullptr});
  // (x - 0) / sqrt(1 + eps): identity up to the eps term.
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i] / std::sqrt(1.0 + 1e-5)).epsilon(1e-15));
  BatchNorm exact("bn0", 3, 0.1, 0.0);
  const Tensor y0 = exact.forward(x, {false, nullptr});
  CHECK(y0 == x);
}

TEST_CASE("batch norm training normalizes per channel and updates running stats") {
  BatchNorm bn("bn", 2, 0.5);
  Rng rng(2);
  const Tensor x = random_tensor({4, 2, 1, 6}, rng, 3.0);
  const Tensor y = bn.forward(x, {true, nullptr});
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0, ss = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      for (std::size_t w = 0; w < 6; ++w) {
        s += y.at(b, c, 0, w);
        ss += y.at(b, c, 0, w) * y.at(b, c, 0, w);
      }
    }
    CHECK(std::abs(s / 24) < 1e-12);
    CHECK(ss / 24 == doctest::Approx(1.0).epsilon(1e-3));
  }
  CHECK(bn.running_mean().value[0] != 0.0);
}

TEST_CASE("separable convolution equals the materialized full convolution") {
  Rng rng(9);
  const std::size_t ci = 3, co = 2, kh = 2, kw = 3;
  SeparableConv2D sep("sep", ci, co, kh, kw, Padding::same);
  sep.initialize(rng);
  Conv2D full("full", ci, co, kh, kw, Padding::same);
  auto& dw = sep.depthwise().weight().value;   // (ci, 1, kh, kw)
  auto& pw = sep.pointwise().weight().value;   // (co, ci, 1, 1)
  auto& fw = full.weight().value;              // (co, ci, kh, kw)
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t c = 0; c < ci; ++c)
      for (std::size_t a = 0; a < kh; ++a)
        for (std::size_t b = 0; b < kw; ++b) fw.at(o, c, a, b) = pw.at(o, c, 0, 0) * dw.at(c, 0, a, b);
  const Tensor x = random_tensor({2, ci, 4, 7}, rng);
  const Tensor a = sep.forward(x, {});
  const Tensor b = full.forward(x, {});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-10);
}

TEST_CASE("conv2d same padding keeps extent and matches a direct loop") {
  Rng rng(4);
  Conv2D conv("c", 2, 3, 3, 4, Padding::same, true);
  conv.initialize(rng);
  for (double& v : conv.parameters()[1]->value.values()) v = gradcheck::uniform(rng, -1, 1);
  const Tensor x = random_tensor({1, 2, 5, 6}, rng);
  const Tensor y = conv.forward(x, {});
  REQUIRE(y.shape() == Shape{1, 3, 5, 6});
  const auto& w = conv.weight().value;
  const auto& bias = conv.parameters()[1]->value;
  for (std::size_t o = 0; o < 3; ++o)
    for (long h = 0; h < 5; ++h)
      for (long ww = 0; ww < 6; ++ww) {
        double s = bias[o];
        for (std::size_t c = 0; c < 2; ++c)
          for (long a = 0; a < 3; ++a)
            for (long b = 0; b < 4; ++b) {
              const long hi = h + a - 1, wi = ww + b - 1;
              if (hi >= 0 && hi < 5 && wi >= 0 && wi < 6) s += w.at(o, c, a, b) * x.at(0, c, hi, wi);
            }
        CHECK(y.at(0, o, h, ww) == doctest::Approx(s).epsilon(1e-12));
      }
}

namespace {

void set_identity(Parameter& p) {
  p.value.fill(0.0);
  for (std::size_t i = 0; i < p.value.dim(0); ++i) p.value.at(i, i) = 1.0;
}

}  // namespace

TEST_CASE("attention: single position with identity projections is the identity") {
  MultiHeadAttention mha("a", 4, 2);
  for (auto* p : {&mha.wq(), &mha.wk(), &mha.wv(), &mha.wo()}) set_identity(*p);
  Rng rng(1);
  const Tensor x = random_tensor({2, 1, 4}, rng);
  const Tensor y = mha.forward(x, {});
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-14));
}

TEST_CASE("attention: identical keys give uniform weights, rows are stochastic") {
  MultiHeadAttention mha("a", 4, 2);
  Rng rng(2);
  mha.initialize(rng);
  mha.wk().value.fill(0.0);  // every key equals the key bias (zero)
  const Tensor x = random_tensor({1, 5, 4}, rng);
  mha.forward(x, {});
  const Tensor& a = mha.attention();
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) CHECK(a.at(0, h, i, j) == doctest::Approx(0.2).epsilon(1e-14));

  MultiHeadAttention m2("b", 6, 3);
  m2.initialize(rng);
  m2.forward(random_tensor({2, 4, 6}, rng, 3.0), {});
  const Tensor& a2 = m2.attention();
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t h = 0; h < 3; ++h)
      for (std::size_t i = 0; i < 4; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 4; ++j) s += a2.at(b, h, i, j);
        CHECK(std::abs(s - 1.0) < 1e-12);
      }
}

TEST_CASE("attention matches a three-loop reference on B=1, L=3, d=4, h=2") {
  MultiHeadAttention mha("a", 4, 2);
  Rng rng(17);
  mha.initialize(rng);
  auto params = mha.parameters();
  for (auto* p : params)
    for (double& v : p->value.values()) v += gradcheck::uniform(rng, -0.3, 0.3);
  const Tensor x = random_tensor({1, 3, 4}, rng);
  const Tensor y = mha.forward(x, {});
  const auto& wq = params[0]->value; const auto& wk = params[1]->value;
  const auto& wv = params[2]->value; const auto& wo = params[3]->value;
  const auto& bq = params[4]->value; const auto& bk = params[5]->value;
  const auto& bv = params[6]->value; const auto& bo = params[7]->value;
  double q[3][4], k[3][4], v[3][4], cat[3][4] = {};
  for (int l = 0; l < 3; ++l)
    for (int j = 0; j < 4; ++j) {
      q[l][j] = bq[j]; k[l][j] = bk[j]; v[l][j] = bv[j];
      for (int i = 0; i < 4; ++i) {
        q[l][j] += x.at(0, l, i) * wq.at(i, j);
        k[l][j] += x.at(0, l, i) * wk.at(i, j);
        v[l][j] += x.at(0, l, i) * wv.at(i, j);
      }
    }
  for (int h = 0; h < 2; ++h)
    for (int i = 0; i < 3; ++i) {
      double s[3], z = 0;
      for (int j = 0; j < 3; ++j) {
        s[j] = 0;
        for (int d = 0; d < 2; ++d) s[j] += q[i][h * 2 + d] * k[j][h * 2 + d];
        s[j] = std::exp(s[j] / std::sqrt(2.0));
        z += s[j];
      }
      for (int j = 0; j < 3; ++j)
        for (int d = 0; d < 2; ++d) cat[i][h * 2 + d] += s[j] / z * v[j][h * 2 + d];
    }
  for (int l = 0; l < 3; ++l)
    for (int j = 0; j < 4; ++j) {
      double r = bo[j];
      for (int i = 0; i < 4; ++i) r += cat[l][i] * wo.at(i, j);
      CHECK(std::abs(y.at(0, l, j) - r) < 1e-12);
    }
  CHECK_THROWS_AS(MultiHeadAttention("bad", 5, 2), ConfigError);
}

TEST_CASE("models: probabilities, uniform output and determinism") {
  for (const auto& spec : {mlp_spec(8, 64, 1), eegnet_spec(8, 64, 16, 1), mha_eegnet_spec(8, 64, 16, 1)}) {
    INFO(spec.name);
    Model m = Model::build(spec);
    Rng rng(3);
    const Tensor x = random_tensor({4, 1, 8, 64}, rng);
    const Tensor p = m.forward(x, false);
    REQUIRE(p.shape() == Shape{4, 3});
    for (std::size_t b = 0; b < 4; ++b) CHECK(std::abs(p.at(b, 0) + p.at(b, 1) + p.at(b, 2) - 1.0) < 1e-12);

    Model m2 = Model::build(spec);
    CHECK(m2.forward(x, false) == p);

    auto& cls = dynamic_cast<Dense&>(m.layer("classifier"));
    cls.weight().value.fill(0.0);
    cls.bias().value.fill(0.0);
    const Tensor u = m.forward(x, false);
    for (double v : u.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("model build reports the incompatible layer") {
  auto spec = mha_eegnet_spec(8, 64, 16, 1);
  spec.layers.back().params["in"] = 17;
  try {
    Model::build(spec);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("classifier") != std::string::npos);
  }
  Model m = Model::build(mha_eegnet_spec(8, 64, 16, 1));
  try {
    m.forward(Tensor({1, 1, 20, 64}), false);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("input") != std::string::npos);
  }
  spec = mha_eegnet_spec(8, 64, 16, 1);
  spec.layers[13].params["heads"] = 3;
  CHECK_THROWS_AS(Model::build(spec), ConfigError);
}

TEST_CASE("MHA-EEGNet parameter count matches the closed form") {
  for (std::size_t c : {8u, 20u}) {
    for (std::size_t k : {16u, 62u}) {
      Model m = Model::build(mha_eegnet_spec(c, 250, k, 0));
      // temporal 8k, bn 2*8, depthwise 16c, bn 2*16, separable 16*16 + 16*16, bn 2*16, attention 4*(16*16+16), dense 16*3+3
      const std::size_t expected = 8 * k + 16 + 16 * c + 32 + 256 + 256 + 32 + 4 * (256 + 16) + 51;
      CHECK(m.parameter_count() == expected);
      CHECK(m.parameter_count(false) == expected + 2 * (8 + 16 + 16));
    }
  }
}

TEST_CASE("spec json round trip") {
  const auto spec = mha_eegnet_spec(20, 250, 62, 9);
  const auto back = ModelSpec::from_json(nlohmann::json::parse(spec.to_json().dump()));
  CHECK(back.to_json() == spec.to_json());
  CHECK_THROWS_AS(ModelSpec::from_json(nlohmann::json{{"name", "x"}}), ConfigError);
}

TEST_CASE("backward without a training forward is an error; zero input gives zero first-layer weight grads") {
  Model m = Model::build(mlp_spec(2, 3, 5, 4, 0.0));
  CHECK_THROWS_AS(m.backward(Tensor({1, 3})), ConfigError);
  m.forward(Tensor({2, 1, 2, 3}), false);
  CHECK_THROWS_AS(m.backward(Tensor({2, 3})), ConfigError);

  Rng rng(1);
  const Tensor probs = m.forward(Tensor({4, 1, 2, 3}), true, &rng);
  const std::vector<int> labels{0, 1, 2, 1};
  const auto loss = cce_loss(probs, labels);
  m.zero_grad();
  m.backward(loss.grad_logits);
  auto& hidden = dynamic_cast<Dense&>(m.layer("hidden"));
  for (double g : hidden.weight().grad.values()) CHECK(g == 0.0);
  auto& cls = dynamic_cast<Dense&>(m.layer("classifier"));
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (std::size_t b = 0; b < 4; ++b) mean += (probs.at(b, j) - (labels[b] == static_cast<int>(j))) / 4.0;
    CHECK(cls.bias().grad[j] == doctest::Approx(mean).epsilon(1e-12));
  }
}

namespace {

Dataset toy_separable(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d{{1, 1, 4}, {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 3);
    for (int f = 0; f < 4; ++f) {
      d.features.push_back((f == y ? 2.0 : 0.0) + gradcheck::uniform(rng, -0.4, 0.4));
    }
    d.labels.push_back(y);
  }
  return d;
}

}  // namespace

TEST_CASE("MLP separates a linearly separable toy set") {
  const Dataset d = toy_separable(60, 1);
  Model m = Model::build(mlp_spec(1, 4, 3, 16));
  const auto res = train(m, d, nullptr, {10, 200, 1e-2, 4});
  CHECK(res.curves.back().train_acc >= 0.99);
  CHECK(evaluate_loss(m, d).second >= 0.99);
}

TEST_CASE("zero learning rate leaves trainable parameters untouched") {
  const Dataset d = toy_separable(30, 2);
  Model m = Model::build(mlp_spec(1, 4, 3, 8));
  const auto before = ParameterSet::capture(m);
  const auto res = train(m, d, &d, {10, 5, 0.0, 1});
  const auto after = ParameterSet::capture(m);
  for (std::size_t i = 0; i < before.entries.size(); ++i) CHECK(before.entries[i].value == after.entries[i].value);
  for (const auto& c : res.curves) {
    CHECK(*c.val_loss == *res.curves.front().val_loss);
    CHECK(*c.val_acc == *res.curves.front().val_acc);
  }
}

TEST_CASE("training is deterministic given the seed") {
  const Dataset d = toy_separable(30, 3);
  Model a = Model::build(mha_eegnet_spec(1, 4 * 8, 4, 2));
  Dataset seq{{1, 1, 32}, {}, d.labels};
  for (std::size_t i = 0; i < d.size(); ++i)
    for (int t = 0; t < 32; ++t) seq.features.push_back(d.features[i * 4 + t % 4] * std::sin(0.3 * t));
  Model b = Model::build(mha_eegnet_spec(1, 32, 4, 2));
  const auto ra = train(a, seq, &seq, {10, 3, 1e-3, 8});
  const auto rb = train(b, seq, &seq, {10, 3, 1e-3, 8});
  CHECK(curves_to_json(ra.curves).dump() == curves_to_json(rb.curves).dump());
}

TEST_CASE("training aborts on divergence") {
  Dataset d = toy_separable(9, 1);
  d.features[0] = std::nan("");
  Model m = Model::build(mlp_spec(1, 4, 3, 4));
  CHECK_THROWS_AS(train(m, d, nullptr, {3, 2, 1e-3, 1}), NumericalError);
  Dataset bad = toy_separable(9, 1);
  bad.labels[0] = 5;
  CHECK_THROWS_AS(train(m, bad, nullptr, {3, 2, 1e-3, 1}), DataError);
}

TEST_CASE("parameter set round-trips through the binary blob") {
  Model m = Model::build(mha_eegnet_spec(4, 64, 8, 3));
  const Dataset d{{1, 4, 64}, std::vector<double>(6 * 256, 0.5), {0, 1, 2, 0, 1, 2}};
  Adam adam(m);
  Rng rng(1);
  m.forward(d.batch({0, 1, 2}), true, &rng);
  m.zero_grad();
  m.backward(Tensor({3, 3}, 0.1));
  adam.step();
  const auto ps = ParameterSet::capture(m, &adam);
  const auto dir = std::filesystem::temp_directory_path() / "eegconn_ps_test";
  ps.save(dir / "params");
  const auto back = ParameterSet::load(dir / "params");
  REQUIRE(back.entries.size() == ps.entries.size());
  for (std::size_t i = 0; i < ps.entries.size(); ++i) {
    CHECK(back.entries[i].name == ps.entries[i].name);
    CHECK(back.entries[i].value == ps.entries[i].value);
  }
  CHECK(back.optimizer_steps == 1);
  Model fresh = Model::build(mha_eegnet_spec(4, 64, 8, 99));
  back.restore(fresh);
  CHECK(fresh.forward(d.batch({0, 1}), false) == m.forward(d.batch({0, 1}), false));
  std::filesystem::remove_all(dir);
}

#include <set>

#include "../support/fixtures.hpp"
#include "doctest.h"
#include "eegconn/connectivity.hpp"
#include "eegconn/errors.hpp"

using namespace eegconn;

namespace {

// Pearson by double loop.
double brute_pcc(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

ConnectivityMatrix matrix_from(const std::vector<std::string>& names, const std::vector<double>& upper) {
  ConnectivityMatrix m{names, std::vector<double>(names.size() * names.size(), 0.0), {}};
  std::size_t k = 0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    m(i, i) = 1.0;
    for (std::size_t j = i + 1; j < names.size(); ++j) m(i, j) = m(j, i) = upper[k++];
  }
  return m;
}

ConnectivityMatrix random_matrix(std::mt19937_64& rng, std::size_t c = 20) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> up(edge_count(c));
  for (double& v : up) v = u(rng);
  auto names = Montage::standard20().names();
  names.resize(c);
  return matrix_from(names, up);
}

}  // namespace

TEST_CASE("pcc examples and invariants") {
  const std::vector<double> x{1, 2, 3, 4};
  CHECK(pcc(x, std::vector<double>{2, 4, 6, 8}) == doctest::Approx(1.0));
  CHECK(pcc(x, std::vector<double>{8, 6, 4, 2}) == doctest::Approx(-1.0));
  CHECK(std::abs(pcc(std::vector<double>{1, 2, 1, 2}, std::vector<double>{1, 1, 2, 2})) < 1e-15);
  CHECK_THROWS_AS(pcc(x, std::vector<double>{3, 3, 3, 3}), NumericalError);
  CHECK_THROWS_AS(pcc(x, std::vector<double>{1, 2}), DataError);
  CHECK_THROWS_AS(pcc(std::vector<double>{1}, std::vector<double>{1}), DataError);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a(200), b(200);
    for (auto& v : a) v = n(rng);
    for (auto& v : b) v = n(rng) + 0.3 * a[&v - b.data()];
    const double r = pcc(a, b);
    CHECK(r == doctest::Approx(pcc(b, a)).epsilon(1e-14));
    auto scaled = a;
    const double s = (t % 2 ? -1.0 : 1.0) * (0.1 + t);
    for (auto& v : scaled) v = s * v + 17.0;
    CHECK(std::abs(pcc(scaled, b) - (s > 0 ? r : -r)) < 1e-12);
    CHECK(std::abs(r) <= 1.0);
  }
}

TEST_CASE("connectivity matrix equals the brute-force oracle") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto rec = fixtures::noise_recording(1000, seed);
    const auto m = connectivity_matrix(rec.samples, rec.channels);
    for (std::size_t i = 0; i < 20; ++i) {
      CHECK(m(i, i) == 1.0);
      for (std::size_t j = 0; j < 20; ++j) {
        CHECK(m(i, j) == m(j, i));
        CHECK(std::abs(m(i, j) - (i == j ? 1.0 : brute_pcc(rec.samples.row(i), rec.samples.row(j)))) <= 1e-10);
      }
    }
  }
  SignalMatrix s(3, 10);
  for (std::size_t t = 0; t < 10; ++t) {
    s(0, t) = std::sin(t);
    s(1, t) = std::sin(t);
    s(2, t) = -std::sin(t);
  }
  const auto m = connectivity_matrix(s, {"a", "b", "c"});
  CHECK(m(0, 1) == doctest::Approx(1.0));
  CHECK(m(0, 2) == doctest::Approx(-1.0));
  std::fill(s.row(2).begin(), s.row(2).end(), 1.0);
  CHECK_THROWS_WITH_AS(connectivity_matrix(s, {"a", "b", "c"}), doctest::Contains("c"), NumericalError);
}

TEST_CASE("embedding: sorted upper triangles, lexicographic ties") {
  const auto m = matrix_from({"A", "B", "C"}, {0.9, 0.1, 0.5});
  const auto e = build_embedding({m});
  REQUIRE(e.lists.size() == 1);
  std::vector<double> w;
  for (const auto& x : e.lists[0].edges) w.push_back(x.weight);
  CHECK(w == std::vector<double>{0.9, 0.5, 0.1});

  const auto tie = build_embedding({matrix_from({"A", "B", "C"}, {0.5, 0.5, 0.5})});
  CHECK(tie.lists[0].edges[0] == Edge{"A", "B", 0.5});
  CHECK(tie.lists[0].edges[1] == Edge{"A", "C", 0.5});
  CHECK(tie.lists[0].edges[2] == Edge{"B", "C", 0.5});

  std::mt19937_64 rng(2);
  std::vector<ConnectivityMatrix> ms;
  for (int i = 0; i < 6; ++i) ms.push_back(random_matrix(rng));
  const auto emb = build_embedding(ms);
  for (std::size_t k = 0; k < ms.size(); ++k) {
    std::multiset<double> want, got;
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = i + 1; j < 20; ++j) want.insert(ms[k](i, j));
    for (const auto& x : emb.lists[k].edges) got.insert(x.weight);
    CHECK(got == want);
    for (std::size_t i = 1; i < emb.lists[k].edges.size(); ++i) CHECK(emb.lists[k].edges[i - 1].weight >= emb.lists[k].edges[i].weight);
  }
  auto other = ms[0];
  other.channels[0] = "Q";
  CHECK_THROWS_AS(build_embedding({ms[1], other}), DataError);
}

TEST_CASE("difficulty weights") {
  const std::vector<double> p{0.8315, 0.8074, 0.7259};
  const auto w = difficulty_weights(p);
  CHECK(std::abs(w[0] - 0.3516) <= 5e-5);
  CHECK(std::abs(w[1] - 0.3414) <= 5e-5);
  CHECK(std::abs(w[2] - 0.3070) <= 5e-5);
  CHECK(w[0] + w[1] + w[2] == doctest::Approx(1.0));
  const auto eq = difficulty_weights(std::vector<double>{0.4, 0.4, 0.4});
  for (double v : eq) CHECK(v == doctest::Approx(1.0 / 3.0));
  CHECK(difficulty_weights(std::vector<double>{0.7}) == std::vector<double>{1.0});
  CHECK_THROWS_AS(difficulty_weights(std::vector<double>{0.5, 0.0}), ConfigError);
  CHECK_THROWS_AS(difficulty_weights(std::vector<double>{}), ConfigError);
}

TEST_CASE("aggregation modes") {
  std::mt19937_64 rng(3);
  auto a = random_matrix(rng);
  const auto s = aggregate_sum({a, a});
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(s.values[i] == 2 * a.values[i]);
  CHECK(s.provenance.mode == "overall_sum");
  CHECK_THROWS_AS(aggregate_sum({}), ConfigError);

  std::vector<ConnectivityMatrix> levels;
  for (int d = 1; d <= 3; ++d) {
    auto m = random_matrix(rng);
    m.provenance.difficulty = d;
    levels.push_back(m);
  }
  const auto w = aggregate_weighted(levels, std::vector<double>{1, 0, 0});
  CHECK(w.values == levels[0].values);
  CHECK_THROWS_AS(aggregate_weighted(levels, std::vector<double>{0.5, 0.5}), ConfigError);

  std::vector<ConnectivityMatrix> cohort;
  for (int i = 0; i < 30; ++i) {
    auto m = random_matrix(rng);
    m.provenance.gender = i < 21 ? Gender::male : Gender::female;
    cohort.push_back(m);
  }
  const auto by = aggregate_by_cohort(cohort);
  const auto all = aggregate_sum(cohort);
  for (std::size_t i = 0; i < all.values.size(); ++i) {
    CHECK(std::abs(by.at(Gender::male).values[i] + by.at(Gender::female).values[i] - all.values[i]) <= 1e-12);
  }
  const auto mean = aggregate_mean(cohort);
  for (std::size_t i = 0; i < all.values.size(); ++i) CHECK(mean.values[i] == doctest::Approx(all.values[i] / 30));
}

TEST_CASE("sign split, top-k and ranking") {
  const auto m = matrix_from({"A", "B", "C"}, {0.5, -0.3, 0.0});
  const auto split = split_by_sign(m);
  REQUIRE(split.positive.size() == 1);
  REQUIRE(split.negative.size() == 1);
  CHECK(split.positive[0].weight == 0.5);
  CHECK(split.negative[0].weight == -0.3);
  CHECK(split.negative[0].sign == EdgeSign::negative);
  CHECK(split_by_sign(matrix_from({"A", "B", "C"}, {0.5, 0.3, 0.2})).negative.empty());

  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    auto r = random_matrix(rng);
    r(0, 1) = r(1, 0) = 0.0;
    const auto sp = split_by_sign(r);
    CHECK(sp.positive.size() + sp.negative.size() + 1 == edge_count(20));
    for (std::size_t i = 1; i < sp.negative.size(); ++i) CHECK(std::abs(sp.negative[i - 1].weight) >= std::abs(sp.negative[i].weight));
  }

  auto r = random_matrix(rng);
  CHECK(top_k_edges(r, edge_count(20)).size() == edge_count(20));
  CHECK_THROWS_AS(top_k_edges(r, 0), ConfigError);
  CHECK_THROWS_AS(top_k_edges(r, edge_count(20) + 1), ConfigError);
  for (std::size_t k1 = 1; k1 < 60; k1 += 7) {
    const auto small = top_k_edges(r, k1), big = top_k_edges(r, k1 + 13);
    for (std::size_t i = 0; i < small.size(); ++i) CHECK((small[i].a == big[i].a && small[i].b == big[i].b));
  }
  const auto& mont = Montage::standard20();
  auto fz = r;
  for (double& v : fz.values) v *= 0.5;
  fz(mont.require_index("F3"), mont.require_index("Fz")) = fz(mont.require_index("Fz"), mont.require_index("F3")) = 0.99;
  const auto top1 = top_k_edges(fz, 1);
  CHECK(((top1[0].a == "F3" && top1[0].b == "Fz") || (top1[0].a == "Fz" && top1[0].b == "F3")));

  // Planted 20 strong edges.
  auto planted = random_matrix(rng);
  for (double& v : planted.values) v *= 0.3;
  std::set<std::pair<std::size_t, std::size_t>> strong;
  while (strong.size() < 20) {
    std::size_t i = rng() % 20, j = rng() % 20;
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    strong.insert({i, j});
  }
  for (auto [i, j] : strong) planted(i, j) = planted(j, i) = 0.8 + 0.01 * (rng() % 10);
  const auto got = top_k_edges(planted, 20);
  for (const auto& e : got) {
    auto i = mont.require_index(e.a), j = mont.require_index(e.b);
    if (i > j) std::swap(i, j);
    CHECK(strong.count({i, j}) == 1);
  }

  const auto names = mont.names();
  auto ranked = rank_channels({{"A", "B", 0.8, EdgeSign::positive}}, {"A", "B", "C"});
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0].channel == "A");
  CHECK(ranked[0].score == 0.8);
  CHECK(ranked[1].score == 0.8);
  CHECK(ranked[2].channel == "C");
  CHECK(ranked[2].score == 0.0);
  ranked = rank_channels({{"Fz", "F3", 0.5, EdgeSign::positive}, {"Fz", "F4", 0.5, EdgeSign::positive},
                          {"Cz", "Fz", 0.5, EdgeSign::positive}},
                         names);
  CHECK(ranked[0].channel == "Fz");
  CHECK(ranked[0].score == doctest::Approx(1.5));
  CHECK(ranked.size() == 20);
}

#include <algorithm>
#include <random>

#include "doctest.h"
#include "eegconn/errors.hpp"
#include "eegconn/labeling.hpp"

using namespace eegconn;

TEST_CASE("combined score") {
  CHECK(combined_score(1.0, 0.0) == 1.0);
  CHECK(combined_score(0.0, 1.0) == 0.0);
  CHECK(combined_score(0.8315, 0.4770) == doctest::Approx(0.67725).epsilon(1e-12));
  CHECK(combined_score(0.8, 0.4, false) == doctest::Approx(0.6));
  CHECK_THROWS_AS(combined_score(1.2, 0.1), DataError);
  CHECK_THROWS_AS(combined_score(0.5, -0.1), DataError);
}

TEST_CASE("quartile labels") {
  std::vector<double> s;
  for (int i = 1; i <= 8; ++i) s.push_back(i / 8.0);
  const auto l = quartile_label(s);
  const std::vector<CognitiveState> want{CognitiveState::low,        CognitiveState::low,        CognitiveState::transition,
                                         CognitiveState::transition, CognitiveState::transition, CognitiveState::transition,
                                         CognitiveState::high,       CognitiveState::high};
  CHECK(l == want);
  for (auto x : quartile_label(std::vector<double>(6, 0.4))) CHECK(x == CognitiveState::transition);
  CHECK_THROWS_AS(quartile_label(std::vector<double>{0.1, 0.2, 0.3}), ConfigError);
}

namespace {

// Independent sort-and-threshold re-computation.
std::array<int, 3> reference_counts(std::vector<double> s) {
  std::vector<double> sorted = s;
  std::sort(sorted.begin(), sorted.end());
  auto q = [&](double p) {
    const double pos = p * (sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
  };
  const double q1 = q(0.25), q3 = q(0.75);
  std::array<int, 3> c{};
  for (double v : s) ++c[v < q1 ? 0 : (v > q3 ? 2 : 1)];
  return c;
}

}  // namespace

TEST_CASE("quartile labeling: reference counts, invariances, bounds") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 30; ++t) {
    std::vector<double> s(270);
    for (auto& v : s) v = u(rng);
    const auto l = quartile_label(s);
    std::array<int, 3> c{};
    for (auto x : l) ++c[static_cast<int>(x)];
    CHECK(c == reference_counts(s));
    CHECK(c[0] <= 68);
    CHECK(c[2] <= 68);

    std::vector<double> cubed(s);
    for (auto& v : cubed) v = std::exp(3 * v) + 1;
    CHECK(quartile_label(cubed) == l);

    std::vector<std::size_t> perm(s.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> ps;
    for (auto i : perm) ps.push_back(s[i]);
    const auto pl = quartile_label(ps);
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(pl[i] == l[perm[i]]);
  }
}

TEST_CASE("label rounds and CSV round trip") {
  std::vector<Recording> recs(2);
  for (int r = 0; r < 2; ++r) {
    recs[r].subject_id = "s" + std::to_string(r);
    for (int k = 0; k < 3; ++k) {
      recs[r].annotations.push_back({kAllTasks[k], k + 1, k * 10.0, k * 10.0 + 5, 0.2 + 0.3 * k, 0.6 - 0.1 * r});
    }
  }
  const auto trials = label_rounds(recs);
  REQUIRE(trials.size() == 6);
  CHECK(trials[0].subject_id == "s0");
  CHECK(trials[5].task == Task::graphic);
  const auto csv = labels_to_csv(trials);
  CHECK(csv.rfind("subject_id,task,difficulty,performance,nasa_tlx,score,state\n", 0) == 0);
  const auto back = labels_from_csv(csv);
  REQUIRE(back.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(back[i].score == trials[i].score);
    CHECK(back[i].state == trials[i].state);
    CHECK(back[i].difficulty == trials[i].difficulty);
  }
  CHECK_THROWS_AS(labels_from_csv("subject_id,task\nx,y\n"), DataError);
}

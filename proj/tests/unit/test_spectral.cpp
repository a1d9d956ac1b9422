#include <numeric>

#include "../support/fixtures.hpp"
#include "doctest.h"
#include "eegconn/errors.hpp"
#include "eegconn/spectral.hpp"

using namespace eegconn;
using fixtures::rms;
using fixtures::sine;

namespace {

Recording one_channel_like(const std::vector<double>& x, double fs = 500.0) {
  auto r = fixtures::blank_recording(x.size(), fs);
  r.channels = {"Fz"};
  r.samples = SignalMatrix(1, x.size());
  std::copy(x.begin(), x.end(), r.samples.row(0).begin());
  return r;
}

double integrate(const PsdEstimate& p) { return total_power(p)[0]; }

}  // namespace

TEST_CASE("standard bands partition 0.1-50 Hz") {
  const auto& b = standard_bands();
  REQUIRE(b.size() == 5);
  CHECK(b[0].name == "delta");
  CHECK(b[0].low_hz == 0.1);
  for (std::size_t i = 1; i < 5; ++i) CHECK(b[i].low_hz == b[i - 1].high_hz);
  CHECK(b[4].high_hz == 50.0);
}

TEST_CASE("band decomposition of a pure 10 Hz sine") {
  const std::size_t n = 10000;
  const auto x = sine(n, 10, 500);
  const auto bands = band_decompose(one_channel_like(x), standard_bands());
  const double in = rms(x, 2000);
  CHECK(std::abs(rms(bands.at("alpha").samples.row(0), 2000) / in - 1.0) < 0.05);
  for (const char* other : {"delta", "theta", "beta", "gamma"}) {
    INFO(other);
    CHECK(rms(bands.at(other).samples.row(0), 2000) < 0.05 * in);
  }
  const auto low = band_decompose(one_channel_like(sine(n, 2, 500)), standard_bands());
  std::string best;
  double best_rms = 0;
  for (const auto& [name, r] : low) {
    const double v = rms(r.samples.row(0), 2000);
    if (v > best_rms) {
      best_rms = v;
      best = name;
    }
  }
  CHECK(best == "delta");
}

TEST_CASE("band decomposition is linear") {
  auto a = fixtures::noise_recording(3000, 1);
  auto b = fixtures::noise_recording(3000, 2);
  auto mix = a;
  for (std::size_t i = 0; i < mix.samples.data().size(); ++i) mix.samples.data()[i] = 2.5 * a.samples.data()[i] - 0.7 * b.samples.data()[i];
  const auto da = band_decompose(a, standard_bands()), db = band_decompose(b, standard_bands()),
             dm = band_decompose(mix, standard_bands());
  for (const auto& band : standard_bands()) {
    const auto& ma = da.at(band.name).samples.data();
    const auto& mb = db.at(band.name).samples.data();
    const auto& mm = dm.at(band.name).samples.data();
    double worst = 0;
    for (std::size_t i = 0; i < mm.size(); ++i) worst = std::max(worst, std::abs(mm[i] - (2.5 * ma[i] - 0.7 * mb[i])));
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("white noise band powers add up to the 0.1-50 Hz power") {
  // Band-limited noise: sum of band powers vs. total power of the band-passed signal.
  auto r = fixtures::noise_recording(60000, 3, 1.0);
  r.samples = r.samples.select_rows(std::vector<std::size_t>{0});
  r.channels = {"Fz"};
  const auto bands = band_decompose(r, standard_bands());
  double sum = 0;
  for (const auto& [name, rec] : bands) sum += std::pow(rms(rec.samples.row(0), 5000), 2);
  const auto broad = band_decompose(r, {{"broad", 0.1, 50.0}});
  const double total = std::pow(rms(broad.at("broad").samples.row(0), 5000), 2);
  CHECK(std::abs(sum / total - 1.0) < 0.10);

  const auto psd = welch_psd(broad.at("broad"));
  double bp = 0;
  for (const auto& band : standard_bands()) bp += band_power(psd, band)[0];
  CHECK(std::abs(bp / total - 1.0) < 0.10);
}

TEST_CASE("welch: sine peak and power") {
  const auto x = sine(20000, 10, 500);
  const auto p = welch_psd(x, 500.0);
  CHECK(p.segment_length == 1000);
  CHECK(p.freqs_hz[1] - p.freqs_hz[0] == doctest::Approx(0.5));
  const auto peak = std::max_element(p.power[0].begin(), p.power[0].end()) - p.power[0].begin();
  CHECK(p.freqs_hz[static_cast<std::size_t>(peak)] == doctest::Approx(10.0));
  CHECK(std::abs(integrate(p) - 0.5) < 0.025);
  const auto alpha = band_power(p, standard_bands()[2])[0];
  CHECK(alpha == doctest::Approx(integrate(p)).epsilon(0.02));
  for (double v : p.power[0]) CHECK(v >= 0.0);
}

TEST_CASE("welch: white noise integrates to its variance") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1);
  double mean = 0;
  for (int k = 0; k < 50; ++k) {
    std::vector<double> x(10000);
    for (double& v : x) v = n(rng);
    const double tp = integrate(welch_psd(x, 500.0));
    CHECK(tp >= 0.9);
    CHECK(tp <= 1.1);
    mean += tp / 50;
  }
  CHECK(std::abs(mean - 1.0) < 0.02);
}

TEST_CASE("welch: DC, sign and scaling") {
  const std::vector<double> dc(4000, 3.0);
  const auto p = welch_psd(dc, 500.0);
  const auto& pw = p.power[0];
  CHECK(std::max_element(pw.begin(), pw.end()) == pw.begin());
  // The Hann window spreads a pure DC line over bins 0 and 1 only.
  for (std::size_t b = 2; b < pw.size(); ++b) CHECK(pw[b] < 1e-20);
  CHECK(integrate(p) == doctest::Approx(9.0).epsilon(1e-9));  // mean square

  auto x = fixtures::noise_recording(5000, 9).samples.data();
  x.resize(5000);
  auto neg = x, dbl = x;
  for (auto& v : neg) v = -v;
  for (auto& v : dbl) v *= 2;
  const auto a = welch_psd(x, 500.0), b = welch_psd(neg, 500.0), c = welch_psd(dbl, 500.0);
  for (std::size_t i = 0; i < a.power[0].size(); ++i) {
    CHECK(a.power[0][i] == doctest::Approx(b.power[0][i]).epsilon(1e-12));
    CHECK(c.power[0][i] == doctest::Approx(4 * a.power[0][i]).epsilon(1e-6));
  }
  CHECK_THROWS_AS(welch_psd(std::vector<double>(100, 1.0), 500.0), DataError);
  CHECK_THROWS_AS(welch_psd(x, 500.0, {0.01, 0.5}), ConfigError);
  CHECK_THROWS_AS(welch_psd(x, 500.0, {2.0, 1.0}), ConfigError);
}

TEST_CASE("band_power trapezoid") {
  PsdEstimate p;
  p.channels = {"x"};
  for (int i = 0; i <= 100; ++i) p.freqs_hz.push_back(0.5 * i);
  p.power = {std::vector<double>(101, 1.0)};
  CHECK(band_power(p, {"theta", 4.0, 8.0})[0] == doctest::Approx(4.0));
  CHECK(band_power(p, {"x", 4.2, 8.3})[0] == doctest::Approx(4.1));
  p.power = {std::vector<double>(101, 0.0)};
  CHECK(band_power(p, {"theta", 4.0, 8.0})[0] == 0.0);
}

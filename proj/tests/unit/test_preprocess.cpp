#include <Eigen/Dense>
#include <numbers>

#include "../support/fixtures.hpp"
#include "doctest.h"
#include "eegconn/connectivity.hpp"
#include "eegconn/errors.hpp"
#include "eegconn/preprocess.hpp"

using namespace eegconn;
using fixtures::rms;
using fixtures::sine;

namespace {

double gain_db(const SosFilter& f, double freq, double fs = 500.0, std::size_t n = 10000) {
  const auto x = sine(n, freq, fs);
  const auto y = apply_filter(f, x);
  return 20 * std::log10(rms(y, n / 5) / rms(x, n / 5));
}

}  // namespace

TEST_CASE("band-pass and band-stop magnitude oracles") {
  const auto bp = design_filter({FilterKind::bandpass, 0.1, 50.0, 6, true}, 500.0);
  const auto x10 = sine(10000, 10, 500);
  const auto y10 = apply_filter(bp, x10);
  CHECK(std::abs(rms(y10, 2000) / rms(x10, 2000) - 1.0) < 0.05);
  CHECK(gain_db(bp, 80.0) <= -40.0);

  const auto bs = design_filter({FilterKind::bandstop, 49.0, 51.0, 6, true}, 500.0);
  CHECK(gain_db(bs, 50.0) <= -30.0);
  CHECK(std::abs(gain_db(bs, 40.0)) < 20 * std::log10(1.05));

  // Analytic response agrees with measurement; zero phase squares the magnitude.
  CHECK(std::abs(frequency_response(bp, 10.0, 500.0)) == doctest::Approx(1.0).epsilon(1e-3));
  const double h80 = std::abs(frequency_response(bp, 80.0, 500.0));
  CHECK(gain_db(bp, 80.0) == doctest::Approx(40 * std::log10(h80)).epsilon(0.02));
}

TEST_CASE("text-2022 and alg1 presets") {
  const auto t = filter_preset("text-2022");
  CHECK(t.bandstop.low_hz == 46.0);
  CHECK(t.bandstop.high_hz == 50.0);
  const auto a = filter_preset("alg1");
  CHECK(a.bandpass.high_hz == 80.0);
  CHECK(filter_preset("default").bandpass.high_hz == 50.0);
  CHECK_THROWS_AS(filter_preset("nope"), ConfigError);
}

TEST_CASE("filter design errors") {
  CHECK_THROWS_WITH_AS(design_filter({FilterKind::bandpass, 0.1, 250.0, 6, true}, 500.0), doctest::Contains("Nyquist"),
                       ConfigError);
  CHECK_THROWS_AS(design_filter({FilterKind::bandpass, 0.1, 50.0, 3, true}, 500.0), ConfigError);
  CHECK_THROWS_AS(design_filter({FilterKind::bandpass, 60.0, 50.0, 4, true}, 500.0), ConfigError);
  CHECK_THROWS_AS(design_filter({FilterKind::bandpass, -1.0, 50.0, 4, true}, 500.0), ConfigError);
}

TEST_CASE("zero-phase filtering has no lag") {
  const auto bp = design_filter({FilterKind::bandpass, 0.1, 50.0, 6, true}, 500.0);
  const std::size_t n = 5000;
  const auto x = sine(n, 7.3, 500);
  const auto y = apply_filter(bp, x);
  int best_lag = 999;
  double best = -1e300;
  for (int lag = -40; lag <= 40; ++lag) {
    double s = 0;
    for (std::size_t i = 1000; i < n - 1000; ++i) s += x[i] * y[static_cast<std::size_t>(static_cast<long>(i) + lag)];
    if (s > best) {
      best = s;
      best_lag = lag;
    }
  }
  CHECK(best_lag == 0);
  // Causal single pass does lag.
  const auto yc = filter_causal(bp, x);
  double s0 = 0, s5 = 0;
  for (std::size_t i = 1000; i < n - 1000; ++i) {
    s0 += x[i] * yc[i];
    s5 += x[i] * yc[i + 5];
  }
  CHECK(s5 > s0);
}

TEST_CASE("detect_corruption") {
  auto rec = fixtures::blank_recording(2000);
  for (std::size_t c = 0; c < 20; ++c) {
    auto s = sine(2000, 10, 500, 20.0, 0.1 * c);
    std::copy(s.begin(), s.end(), rec.samples.row(c).begin());
  }
  CHECK(detect_corruption(rec).empty());

  rec.samples(3, 777) = 200.0;
  auto r = detect_corruption(rec);
  REQUIRE(r.channels[3].intervals.size() == 1);
  CHECK(r.channels[3].intervals[0] == std::pair<std::size_t, std::size_t>{777, 778});
  CHECK_FALSE(r.channels[3].whole_channel);

  std::fill(rec.samples.row(10).begin(), rec.samples.row(10).end(), 0.0);
  r = detect_corruption(rec, 100.0, 1.0);
  CHECK(r.channels[10].whole_channel);

  // A flat run shorter than the window is fine; one at least as long is flagged.
  auto row = rec.samples.row(5);
  std::fill(row.begin() + 100, row.begin() + 300, 4.0);
  std::fill(row.begin() + 1000, row.begin() + 1600, 4.0);
  r = detect_corruption(rec, 100.0, 1.0);
  REQUIRE(r.channels[5].intervals.size() == 1);
  CHECK(r.channels[5].intervals[0].first == 1000);
  CHECK(r.channels[5].intervals[0].second == 1600);
}

namespace {

// Straightforward re-implementation of the two interpolation rules.
Recording reference_interpolate(const Recording& rec, const std::vector<std::vector<bool>>& bad,
                                const std::vector<bool>& whole) {
  Recording out = rec;
  const std::size_t n = rec.samples.samples();
  for (std::size_t c = 0; c < 20; ++c) {
    if (whole[c]) continue;
    for (std::size_t t = 0; t < n; ++t) {
      if (!bad[c][t]) continue;
      long l = static_cast<long>(t) - 1;
      while (l >= 0 && bad[c][static_cast<std::size_t>(l)]) --l;
      std::size_t r = t + 1;
      while (r < n && bad[c][r]) ++r;
      if (l < 0 && r >= n) continue;
      if (l < 0) {
        out.samples(c, t) = rec.samples(c, r);
      } else if (r >= n) {
        out.samples(c, t) = rec.samples(c, static_cast<std::size_t>(l));
      } else {
        const double a = rec.samples(c, static_cast<std::size_t>(l)), b = rec.samples(c, r);
        out.samples(c, t) = a + (b - a) * static_cast<double>(static_cast<long>(t) - l) / static_cast<double>(static_cast<long>(r) - l);
      }
    }
  }
  const auto& m = Montage::standard20();
  for (std::size_t c = 0; c < 20; ++c) {
    if (!whole[c]) continue;
    std::vector<std::size_t> nb;
    for (auto j : m.neighbors(c)) {
      if (!whole[j]) nb.push_back(j);
    }
    for (std::size_t t = 0; t < n; ++t) {
      double s = 0;
      for (auto j : nb) s += out.samples(j, t);
      out.samples(c, t) = s / static_cast<double>(nb.size());
    }
  }
  return out;
}

}  // namespace

TEST_CASE("interpolate: midpoint, whole channel, and reference oracle") {
  auto rec = fixtures::blank_recording(3);
  rec.samples(0, 0) = 1;
  rec.samples(0, 1) = 999;
  rec.samples(0, 2) = 3;
  CorruptionReport rep;
  rep.channels.resize(20);
  rep.channels[0].intervals = {{1, 2}};
  CHECK(interpolate(rec, rep, Montage::standard20()).samples(0, 1) == doctest::Approx(2.0));

  std::mt19937_64 rng(3);
  const auto& m = Montage::standard20();
  for (int trial = 0; trial < 20; ++trial) {
    auto r = fixtures::noise_recording(300, 100 + trial);
    CorruptionReport cr;
    cr.channels.resize(20);
    std::vector<std::vector<bool>> bad(20, std::vector<bool>(300, false));
    std::vector<bool> whole(20, false);
    for (std::size_t c = 0; c < 20; ++c) {
      if (rng() % 10 == 0 && c != 10) {
        whole[c] = true;
        cr.channels[c].whole_channel = true;
        cr.channels[c].intervals = {{0, 300}};
        continue;
      }
      std::size_t t = 0;
      while (t < 300) {
        if (rng() % 25 == 0) {
          const std::size_t len = 1 + rng() % 12;
          const std::size_t end = std::min<std::size_t>(300, t + len);
          cr.channels[c].intervals.push_back({t, end});
          for (std::size_t k = t; k < end; ++k) bad[c][k] = true;
          t = end + 1;
        } else {
          ++t;
        }
      }
    }
    // Skip masks where a whole channel has no surviving neighbor (tested separately).
    bool recoverable = true;
    for (std::size_t c = 0; c < 20; ++c) {
      if (!whole[c]) continue;
      bool any = false;
      for (auto j : m.neighbors(c)) any |= !whole[j];
      recoverable &= any;
    }
    if (!recoverable) continue;
    const auto got = interpolate(r, cr, m);
    const auto want = reference_interpolate(r, bad, whole);
    for (std::size_t i = 0; i < got.samples.data().size(); ++i) {
      CHECK(got.samples.data()[i] == doctest::Approx(want.samples.data()[i]).epsilon(1e-12));
    }
  }

  // Cz whole-corrupt: mean of its neighbors.
  auto r = fixtures::noise_recording(50, 9);
  CorruptionReport cz;
  cz.channels.resize(20);
  const auto czi = m.require_index("Cz");
  cz.channels[czi].whole_channel = true;
  cz.channels[czi].intervals = {{0, 50}};
  const auto out = interpolate(r, cz, m);
  for (std::size_t t = 0; t < 50; ++t) {
    double s = 0;
    for (auto j : m.neighbors(czi)) s += r.samples(j, t);
    CHECK(out.samples(czi, t) == doctest::Approx(s / m.neighbors(czi).size()));
  }
  // Cz and all neighbors whole-corrupt: unrecoverable.
  for (auto j : m.neighbors(czi)) {
    cz.channels[j].whole_channel = true;
    cz.channels[j].intervals = {{0, 50}};
  }
  CHECK_THROWS_WITH_AS(interpolate(r, cz, m), doctest::Contains("Cz"), DataError);
}

TEST_CASE("baseline correction") {
  auto rec = fixtures::blank_recording(3000);
  for (double& v : rec.samples.data()) v = 7.0;
  auto out = baseline_correct(rec, 3000, 5000);
  for (double v : out.samples.data()) CHECK(v == 0.0);

  auto s = fixtures::blank_recording(3000);
  auto wave = sine(3000, 10, 500);
  for (std::size_t c = 0; c < 20; ++c)
    for (std::size_t t = 0; t < 3000; ++t) s.samples(c, t) = wave[t] + 3.0;
  out = baseline_correct(s, 3000, 5000);  // 1000 samples = 20 whole periods
  for (std::size_t t = 0; t < 3000; ++t) CHECK(std::abs(out.samples(0, t) - wave[t]) < 1e-9);

  auto n = fixtures::noise_recording(3000, 4);
  out = baseline_correct(n, 1000, 2500);
  for (std::size_t c = 0; c < 20; ++c) {
    double mean = 0;
    for (std::size_t t = 500; t < 1250; ++t) mean += out.samples(c, t);
    CHECK(std::abs(mean / 750) < 1e-12);
  }
  CHECK_THROWS_AS(baseline_correct(n, 2000, 2000), ConfigError);
  CHECK_THROWS_AS(baseline_correct(n, 5000, 9000), ConfigError);
}

TEST_CASE("normalize") {
  CHECK(normalize(std::vector<double>{1, 2, 3}) == std::vector<double>{0, 0.5, 1});
  CHECK(normalize(std::vector<double>{-1, 0, 3}) == std::vector<double>{0, 0.25, 1});
  CHECK_THROWS_AS(normalize(std::vector<double>{5, 5, 5}), NumericalError);
  const std::vector<double> u{0, 0.3, 1, 0.7};
  CHECK(normalize(u) == u);
}

namespace {

double abs_corr(std::span<const double> a, std::span<const double> b) { return std::abs(pcc(a, b)); }

}  // namespace

TEST_CASE("fast_ica recovers planted sources and whitens") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  const std::size_t n = 5000;
  SignalMatrix s(2, n);
  for (std::size_t t = 0; t < n; ++t) {
    s(0, t) = u(rng);
    s(1, t) = std::sin(2 * std::numbers::pi * 7 * t / 500.0);
  }
  SignalMatrix x(2, n);
  const double a[2][2] = {{0.8, 0.6}, {-0.4, 0.9}};
  for (std::size_t t = 0; t < n; ++t)
    for (int i = 0; i < 2; ++i) x(i, t) = a[i][0] * s(0, t) + a[i][1] * s(1, t);
  const auto dec = fast_ica(x, {0, 200, 1e-6, 3, 1});
  CHECK(dec.converged);
  const double direct = std::min(abs_corr(dec.sources.row(0), s.row(0)), abs_corr(dec.sources.row(1), s.row(1)));
  const double swapped = std::min(abs_corr(dec.sources.row(0), s.row(1)), abs_corr(dec.sources.row(1), s.row(0)));
  CHECK(std::max(direct, swapped) >= 0.95);

  // Unmixing rows unit norm; sources mutually uncorrelated.
  for (Eigen::Index i = 0; i < dec.unmixing.rows(); ++i) CHECK(dec.unmixing.row(i).norm() == doctest::Approx(1.0));
  CHECK(std::abs(pcc(dec.sources.row(0), dec.sources.row(1))) < 1e-6);

  const auto rec = reconstruct(dec);
  for (std::size_t i = 0; i < rec.data().size(); ++i) CHECK(std::abs(rec.data()[i] - x.data()[i]) < 1e-8);

  // Constant channel: whitening impossible.
  SignalMatrix c = x;
  std::fill(c.row(1).begin(), c.row(1).end(), 2.0);
  CHECK_THROWS_AS(fast_ica(c, {}), NumericalError);
}

TEST_CASE("fast_ica on independent whitened inputs gives a signed permutation") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-std::sqrt(3.0), std::sqrt(3.0));
  const std::size_t n = 20000;
  SignalMatrix x(3, n);
  for (double& v : x.data()) v = u(rng);
  const auto dec = fast_ica(x, {0, 400, 1e-8, 1, 1});
  const Eigen::MatrixXd total = dec.unmixing * dec.whitening;
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(total.row(i).cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(0.05));
    CHECK(total.row(i).norm() == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("reject_artifacts: lossless without rejections; zero threshold rejects everything") {
  auto rec = fixtures::noise_recording(4000, 12);
  auto dec = fast_ica(rec.samples, {0, 200, 1e-4, 1, 1});
  auto out = reject_artifacts(dec, rec, 0.999);
  for (bool r : dec.rejected) CHECK_FALSE(r);
  for (std::size_t i = 0; i < out.samples.data().size(); ++i)
    CHECK(std::abs(out.samples.data()[i] - rec.samples.data()[i]) < 1e-8);
  CHECK_THROWS_AS(reject_artifacts(dec, rec, 0.0), DataError);
}

TEST_CASE("full pipeline preserves shape and marks the stage") {
  auto rec = fixtures::noise_recording(3000, 2);
  rec.annotations = {{Task::nback, 1, 0.0, 6.0, 0.5, 0.5}};
  PreprocessConfig cfg;
  cfg.ica.fit_stride = 2;
  const auto res = preprocess(rec, Montage::standard20(), cfg);
  CHECK(res.recording.samples.channels() == 20);
  CHECK(res.recording.samples.samples() == 3000);
  CHECK(res.recording.pipeline_stage == "preprocessed");
  CHECK(res.rejected_components.size() == 20);
}

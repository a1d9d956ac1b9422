#include "eegconn/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "eegconn/errors.hpp"
#include "eegconn/filter.hpp"

namespace eegconn {

const std::vector<BandDefinition>& standard_bands() {
  static const std::vector<BandDefinition> bands = {
      {"delta", 0.1, 4.0}, {"theta", 4.0, 8.0}, {"alpha", 8.0, 13.0}, {"beta", 13.0, 30.0}, {"gamma", 30.0, 50.0}};
  return bands;
}

std::map<std::string, Recording> band_decompose(const Recording& rec, const std::vector<BandDefinition>& bands,
                                                int order) {
  std::map<std::string, Recording> out;
  for (const auto& band : bands) {
    const auto filter =
        design_filter(FilterSpec{FilterKind::bandpass, band.low_hz, band.high_hz, order, true}, rec.sampling_rate);
    Recording r = rec;
    for (std::size_t c = 0; c < r.samples.channels(); ++c) {
      const auto y = apply_filter(filter, rec.samples.row(c));
      std::copy(y.begin(), y.end(), r.samples.row(c).begin());
    }
    r.pipeline_stage = "band:" + band.name;
    out.emplace(band.name, std::move(r));
  }
  return out;
}

namespace {

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

std::vector<double> welch_one(std::span<const double> x, std::size_t seg, std::size_t step, double fs,
                              std::size_t& segments) {
  std::vector<double> window(seg);
  double wss = 0.0;
  for (std::size_t i = 0; i < seg; ++i) {
    window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(seg)));
    wss += window[i] * window[i];
  }
  const std::size_t bins = seg / 2 + 1;
  std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * seg)));
  std::unique_ptr<fftw_complex, FftwFree> out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan(
      fftw_plan_dft_r2c_1d(static_cast<int>(seg), in.get(), out.get(), FFTW_ESTIMATE));

  std::vector<double> acc(bins, 0.0);
  segments = (x.size() - seg) / step + 1;
  for (std::size_t k = 0; k < segments; ++k) {
    const std::size_t start = k * step;
    for (std::size_t i = 0; i < seg; ++i) in.get()[i] = x[start + i] * window[i];
    fftw_execute(plan.get());
    for (std::size_t b = 0; b < bins; ++b) {
      const double re = out.get()[b][0];
      const double im = out.get()[b][1];
      acc[b] += re * re + im * im;
    }
  }
  const double scale = 1.0 / (fs * wss * static_cast<double>(segments));
  for (std::size_t b = 0; b < bins; ++b) {
    acc[b] *= scale;
    const bool nyquist = seg % 2 == 0 && b == bins - 1;
    if (b != 0 && !nyquist) acc[b] *= 2.0;
  }
  return acc;
}

void check_params(double fs, const WelchParams& params) {
  if (!(fs > 0.0)) throw ConfigError("welch_psd: sampling rate must be positive");
  if (!(params.overlap >= 0.0 && params.overlap < 1.0)) throw ConfigError("welch_psd: overlap must lie in [0, 1)");
  if (!(params.segment_s * fs >= 8.0)) throw ConfigError("welch_psd: segment must span at least 8 samples");
}

}  // namespace

PsdEstimate welch_psd(std::span<const double> signal, double fs, const WelchParams& params, std::string channel) {
  check_params(fs, params);
  const auto seg = static_cast<std::size_t>(std::llround(params.segment_s * fs));
  if (signal.size() < seg) throw DataError("welch_psd: signal shorter than one segment");
  const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(seg * (1.0 - params.overlap))));
  PsdEstimate psd;
  psd.channels = {std::move(channel)};
  psd.sampling_rate = fs;
  psd.segment_length = seg;
  psd.overlap = params.overlap;
  psd.power.push_back(welch_one(signal, seg, step, fs, psd.segment_count));
  for (std::size_t b = 0; b < psd.power[0].size(); ++b) {
    psd.freqs_hz.push_back(static_cast<double>(b) * fs / static_cast<double>(seg));
  }
  return psd;
}

PsdEstimate welch_psd(const Recording& rec, const WelchParams& params) {
  PsdEstimate psd;
  for (std::size_t c = 0; c < rec.samples.channels(); ++c) {
    auto one = welch_psd(rec.samples.row(c), rec.sampling_rate, params, rec.channels[c]);
    if (c == 0) {
      psd = std::move(one);
    } else {
      psd.channels.push_back(rec.channels[c]);
      psd.power.push_back(std::move(one.power[0]));
    }
  }
  return psd;
}

std::vector<double> band_power(const PsdEstimate& psd, const BandDefinition& band) {
  const auto& f = psd.freqs_hz;
  if (f.size() < 2) throw DataError("band_power: PSD grid too small");
  if (!(band.low_hz >= f.front() && band.high_hz <= f.back() && band.low_hz <= band.high_hz)) {
    throw ConfigError("band_power: band " + band.name + " outside the PSD grid");
  }
  std::vector<double> out;
  for (const auto& p : psd.power) {
    auto value_at = [&](double x) {
      auto it = std::upper_bound(f.begin(), f.end(), x);
      if (it == f.end()) return p.back();
      const auto i = static_cast<std::size_t>(it - f.begin());
      if (i == 0) return p.front();
      const double frac = (x - f[i - 1]) / (f[i] - f[i - 1]);
      return p[i - 1] + frac * (p[i] - p[i - 1]);
    };
    std::vector<std::pair<double, double>> pts;
    pts.emplace_back(band.low_hz, value_at(band.low_hz));
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i] > band.low_hz && f[i] < band.high_hz) pts.emplace_back(f[i], p[i]);
    }
    pts.emplace_back(band.high_hz, value_at(band.high_hz));
    double area = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      area += 0.5 * (pts[i].second + pts[i - 1].second) * (pts[i].first - pts[i - 1].first);
    }
    out.push_back(area);
  }
  return out;
}

std::vector<double> total_power(const PsdEstimate& psd) {
  const double df = psd.sampling_rate / static_cast<double>(psd.segment_length);
  std::vector<double> out;
  for (const auto& p : psd.power) {
    double s = 0.0;
    for (double v : p) s += v * df;
    out.push_back(s);
  }
  return out;
}

}  // namespace eegconn

#include "eegconn/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "eegconn/errors.hpp"

namespace eegconn {

bool CorruptionReport::empty() const {
  return std::all_of(channels.begin(), channels.end(),
                     [](const auto& c) { return c.intervals.empty() && !c.whole_channel; });
}

std::size_t CorruptionReport::corrupt_samples(std::size_t channel) const {
  std::size_t n = 0;
  for (const auto& [a, b] : channels.at(channel).intervals) n += b - a;
  return n;
}

CorruptionReport detect_corruption(const Recording& rec, double amp_limit, double flat_window_s) {
  if (!(amp_limit > 0.0)) throw ConfigError("detect_corruption: amp_limit must be positive");
  const std::size_t n = rec.samples.samples();
  const auto flat_len = static_cast<std::size_t>(std::max(1.0, std::round(flat_window_s * rec.sampling_rate)));
  CorruptionReport report;
  report.channels.resize(rec.samples.channels());
  std::vector<char> bad(n);
  for (std::size_t c = 0; c < rec.samples.channels(); ++c) {
    const auto x = rec.samples.row(c);
    std::fill(bad.begin(), bad.end(), 0);
    for (std::size_t i = 0; i < n; ++i) bad[i] = std::abs(x[i]) > amp_limit;
    // runs of identical values
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i + 1;
      while (j < n && x[j] == x[i]) ++j;
      if (j - i >= flat_len) std::fill(bad.begin() + static_cast<std::ptrdiff_t>(i), bad.begin() + static_cast<std::ptrdiff_t>(j), 1);
      i = j;
    }
    std::size_t count = 0;
    auto& out = report.channels[c];
    for (std::size_t i = 0; i < n;) {
      if (!bad[i]) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < n && bad[j]) ++j;
      out.intervals.emplace_back(i, j);
      count += j - i;
      i = j;
    }
    out.whole_channel = n > 0 && 2 * count > n;
  }
  return report;
}

Recording interpolate(const Recording& rec, const CorruptionReport& report, const Montage& montage) {
  if (report.channels.size() != rec.samples.channels()) {
    throw DataError("interpolate: report does not match the recording's channel count");
  }
  Recording out = rec;
  const std::size_t n = rec.samples.samples();
  for (std::size_t c = 0; c < report.channels.size(); ++c) {
    const auto& ch = report.channels[c];
    if (ch.whole_channel) continue;
    auto x = out.samples.row(c);
    for (const auto& [first, last] : ch.intervals) {
      if (last > n || first >= last) throw DataError("interpolate: interval outside the signal");
      const bool has_left = first > 0;
      const bool has_right = last < n;
      if (!has_left && !has_right) throw DataError("interpolate: channel has no clean samples");
      const double left = has_left ? x[first - 1] : x[last];
      const double right = has_right ? x[last] : x[first - 1];
      const double span = static_cast<double>(last - first + 1);
      for (std::size_t i = first; i < last; ++i) {
        if (has_left && has_right) {
          const double frac = static_cast<double>(i - first + 1) / span;
          x[i] = left + frac * (right - left);
        } else {
          x[i] = has_left ? left : right;
        }
      }
    }
  }
  for (std::size_t c = 0; c < report.channels.size(); ++c) {
    if (!report.channels[c].whole_channel) continue;
    const auto idx = montage.index_of(rec.channels[c]);
    if (!idx) throw DataError("interpolate: channel " + rec.channels[c] + " is not in the montage");
    std::vector<std::size_t> donors;
    for (std::size_t nb : montage.neighbors(*idx)) {
      const auto& name = montage.channel(nb).name;
      for (std::size_t k = 0; k < rec.channels.size(); ++k) {
        if (rec.channels[k] == name && !report.channels[k].whole_channel) donors.push_back(k);
      }
    }
    if (donors.empty()) {
      throw DataError("interpolate: channel " + rec.channels[c] + " is unrecoverable, all neighbors are corrupt");
    }
    auto x = out.samples.row(c);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k : donors) s += out.samples(k, i);
      x[i] = s / static_cast<double>(donors.size());
    }
  }
  return out;
}

Recording baseline_correct(const Recording& rec, double start_ms, double end_ms) {
  const auto first = static_cast<long long>(std::llround(start_ms * rec.sampling_rate / 1000.0));
  const auto last = static_cast<long long>(std::llround(end_ms * rec.sampling_rate / 1000.0));
  const auto n = static_cast<long long>(rec.samples.samples());
  if (first < 0 || last > n) throw ConfigError("baseline_correct: window lies outside the recording");
  if (last <= first) throw ConfigError("baseline_correct: empty baseline window");
  Recording out = rec;
  for (std::size_t c = 0; c < out.samples.channels(); ++c) {
    auto x = out.samples.row(c);
    double mean = 0.0;
    for (auto i = first; i < last; ++i) mean += x[static_cast<std::size_t>(i)];
    mean /= static_cast<double>(last - first);
    for (double& v : x) v -= mean;
  }
  return out;
}

std::vector<double> normalize(std::span<const double> signal) {
  if (signal.empty()) throw DataError("normalize: empty signal");
  const auto [lo, hi] = std::minmax_element(signal.begin(), signal.end());
  const double range = *hi - *lo;
  if (range == 0.0) throw NumericalError("normalize: degenerate signal (max == min)");
  std::vector<double> out;
  out.reserve(signal.size());
  for (double v : signal) out.push_back((v - *lo) / range);
  return out;
}

Recording filter_recording(const Recording& rec, const FilterSpec& spec) {
  const auto filter = design_filter(spec, rec.sampling_rate);
  Recording out = rec;
  for (std::size_t c = 0; c < out.samples.channels(); ++c) {
    const auto y = apply_filter(filter, rec.samples.row(c));
    std::copy(y.begin(), y.end(), out.samples.row(c).begin());
  }
  return out;
}

FilterPreset filter_preset(std::string_view name) {
  const FilterSpec stop_49_51{FilterKind::bandstop, 49.0, 51.0, 6, true};
  if (name == "default") return {"default", {FilterKind::bandpass, 0.1, 50.0, 6, true}, stop_49_51};
  if (name == "text-2022") {
    return {"text-2022", {FilterKind::bandpass, 0.1, 50.0, 6, true}, {FilterKind::bandstop, 46.0, 50.0, 6, true}};
  }
  if (name == "alg1") return {"alg1", {FilterKind::bandpass, 0.1, 80.0, 6, true}, stop_49_51};
  throw ConfigError("unknown filter preset '" + std::string(name) + "' (expected default, text-2022 or alg1)");
}

PreprocessResult preprocess(const Recording& rec, const Montage& montage, const PreprocessConfig& config) {
  validate(rec);
  PreprocessResult result;
  result.corruption = detect_corruption(rec, config.amp_limit_uv, config.flat_window_s);
  Recording cur = result.corruption.empty() ? rec : interpolate(rec, result.corruption, montage);
  cur = filter_recording(cur, config.filters.bandpass);
  cur = filter_recording(cur, config.filters.bandstop);
  cur = baseline_correct(cur, config.baseline_start_ms, config.baseline_end_ms);
  if (config.run_ica) {
    auto dec = fast_ica(cur.samples, config.ica);
    cur = reject_artifacts(dec, cur, config.ica_corr_threshold);
    result.rejected_components = dec.rejected;
    result.rejection_reasons = dec.reasons;
    result.ica_converged = dec.converged;
    result.ica_iterations = dec.iterations;
  }
  cur.pipeline_stage = "preprocessed";
  result.recording = std::move(cur);
  return result;
}

}  // namespace eegconn

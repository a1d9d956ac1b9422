#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eegconn/filter.hpp"
#include "eegconn/ica.hpp"
#include "eegconn/montage.hpp"
#include "eegconn/recording.hpp"

namespace eegconn {

struct ChannelCorruption {
  std::vector<std::pair<std::size_t, std::size_t>> intervals;  // [first, last) sample ranges
  bool whole_channel = false;
};

struct CorruptionReport {
  std::vector<ChannelCorruption> channels;
  bool empty() const;
  std::size_t corrupt_samples(std::size_t channel) const;
};

/// A sample is corrupt when |value| > amp_limit or it lies in a run of at
/// least flat_window_s seconds of identical values. A channel with more than
/// half of its samples corrupt is flagged whole.
CorruptionReport detect_corruption(const Recording& rec, double amp_limit = 100.0, double flat_window_s = 1.0);

/// Corrupt segments are linearly interpolated between the nearest clean
/// samples (held flat at the edges); whole channels are replaced by the
/// sample-wise mean of their montage neighbors that are not whole-corrupt.
Recording interpolate(const Recording& rec, const CorruptionReport& report, const Montage& montage);

/// Subtracts, per channel, the mean over [start_ms, end_ms).
Recording baseline_correct(const Recording& rec, double start_ms, double end_ms);

/// Min-max scaling onto [0, 1]. Throws NumericalError when max == min.
std::vector<double> normalize(std::span<const double> signal);

Recording filter_recording(const Recording& rec, const FilterSpec& spec);

struct FilterPreset {
  std::string name;
  FilterSpec bandpass;
  FilterSpec bandstop;
};

// "default" (0.1-50 Hz + 49-51 Hz stop), "text-2022" (0.1-50 Hz + 46-50 Hz stop),
// "alg1" (0.1-80 Hz + 49-51 Hz stop). Throws ConfigError otherwise.
FilterPreset filter_preset(std::string_view name);

struct PreprocessConfig {
  FilterPreset filters = filter_preset("default");
  double amp_limit_uv = 100.0;
  double flat_window_s = 1.0;
  double baseline_start_ms = 3000.0;
  double baseline_end_ms = 5000.0;
  bool run_ica = true;
  double ica_corr_threshold = 0.8;
  IcaOptions ica;
};

struct PreprocessResult {
  Recording recording;
  CorruptionReport corruption;
  std::vector<bool> rejected_components;
  std::vector<std::string> rejection_reasons;
  bool ica_converged = false;
  std::size_t ica_iterations = 0;
};

/// Corruption detection, interpolation, band-pass, band-stop, baseline
/// correction and ICA artifact rejection, in that order.
PreprocessResult preprocess(const Recording& rec, const Montage& montage, const PreprocessConfig& config);

}  // namespace eegconn

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "eegconn/recording.hpp"

namespace eegconn {

struct BandDefinition {
  std::string name;
  double low_hz = 0.0;
  double high_hz = 0.0;
};

// delta [0.1,4), theta [4,8), alpha [8,13), beta [13,30), gamma [30,50].
const std::vector<BandDefinition>& standard_bands();

/// Zero-phase band-pass of every channel at each band's edges.
std::map<std::string, Recording> band_decompose(const Recording& rec, const std::vector<BandDefinition>& bands,
                                                int order = 6);

struct WelchParams {
  double segment_s = 2.0;
  double overlap = 0.5;
};

struct PsdEstimate {
  std::vector<std::string> channels;
  std::vector<double> freqs_hz;
  std::vector<std::vector<double>> power;  // per channel, uV^2/Hz
  double sampling_rate = 0.0;
  std::size_t segment_length = 0;
  std::size_t segment_count = 0;
  double overlap = 0.0;
  std::string window = "hann";
};

/// One-sided Welch estimate with periodic Hann segments and density
/// scaling: summing power * df over the grid recovers the mean square.
/// Throws ConfigError on bad parameters, DataError when the signal is
/// shorter than one segment.
PsdEstimate welch_psd(std::span<const double> signal, double fs, const WelchParams& params = {},
                      std::string channel = "x");
PsdEstimate welch_psd(const Recording& rec, const WelchParams& params = {});

/// Trapezoidal integral of each channel's PSD over [low_hz, high_hz]; the
/// end points are linearly interpolated on the grid.
std::vector<double> band_power(const PsdEstimate& psd, const BandDefinition& band);

// Sum of power * df over all bins, per channel.
std::vector<double> total_power(const PsdEstimate& psd);

}  // namespace eegconn

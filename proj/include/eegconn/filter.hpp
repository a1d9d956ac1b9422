#pragma once

#include <complex>
#include <span>
#include <vector>

namespace eegconn {

enum class FilterKind { bandpass, bandstop };

struct FilterSpec {
  FilterKind kind = FilterKind::bandpass;
  double low_hz = 0.1;
  double high_hz = 50.0;
  int order = 6;  // Butterworth prototype order per band edge; even
  bool zero_phase = true;
};

// Transposed direct-form II section, a0 normalized to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

struct SosFilter {
  std::vector<Biquad> sections;
  bool zero_phase = true;
  std::size_t edge_pad = 0;  // reflection length for zero-phase runs
  int poles() const { return static_cast<int>(2 * sections.size()); }
};

/// Digital Butterworth band-pass or band-stop via the bilinear transform.
///
/// Throws ConfigError unless 0 <= low_hz < high_hz < fs/2 and order is a
/// positive even integer. A band-pass with low_hz == 0 degenerates to a
/// low-pass of the same order.
SosFilter design_filter(const FilterSpec& spec, double fs);

std::complex<double> frequency_response(const SosFilter& filter, double freq_hz, double fs);

/// Applies the filter. Zero-phase filters run forward then backward, so the
/// magnitude response is squared and the phase is zero. Each end is extended
/// by an even reflection of `edge_pad` samples (three periods of the slowest
/// band feature, capped at the signal length) and the sections start in the
/// steady state of the reflection's mean level.
std::vector<double> apply_filter(const SosFilter& filter, std::span<const double> x);

// Single causal pass starting from rest.
std::vector<double> filter_causal(const SosFilter& filter, std::span<const double> x);

}  // namespace eegconn

#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "eegconn/recording.hpp"

namespace fixtures {

inline eegconn::Recording blank_recording(std::size_t samples, double fs = 500.0) {
  eegconn::Recording r;
  r.subject_id = "s01";
  r.sampling_rate = fs;
  r.channels = eegconn::Montage::standard20().names();
  r.samples = eegconn::SignalMatrix(r.channels.size(), samples);
  return r;
}

inline eegconn::Recording noise_recording(std::size_t samples, std::uint64_t seed, double sigma = 10.0,
                                          double fs = 500.0) {
  auto r = blank_recording(samples, fs);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (double& v : r.samples.data()) v = n(rng);
  return r;
}

inline std::vector<double> sine(std::size_t n, double freq, double fs, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2 * std::numbers::pi * freq * i / fs + phase);
  return x;
}

inline double rms(std::span<const double> x, std::size_t trim = 0) {
  double s = 0;
  for (std::size_t i = trim; i + trim < x.size(); ++i) s += x[i] * x[i];
  return std::sqrt(s / static_cast<double>(x.size() - 2 * trim));
}

}  // namespace fixtures

#include "eegconn/filter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "eegconn/errors.hpp"

namespace eegconn {

namespace {

using cd = std::complex<double>;

// Pairs conjugate poles; real poles are paired with their nearest real neighbor.
std::vector<std::pair<cd, cd>> pair_poles(const std::vector<cd>& poles) {
  constexpr double kImagTol = 1e-12;
  std::vector<cd> upper;
  std::vector<double> reals;
  for (const auto& p : poles) {
    if (std::abs(p.imag()) <= kImagTol * std::max(1.0, std::abs(p))) {
      reals.push_back(p.real());
    } else if (p.imag() > 0) {
      upper.push_back(p);
    }
  }
  std::sort(reals.begin(), reals.end());
  std::sort(upper.begin(), upper.end(), [](const cd& a, const cd& b) { return std::abs(a) < std::abs(b); });
  std::vector<std::pair<cd, cd>> out;
  for (const auto& p : upper) out.emplace_back(p, std::conj(p));
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) out.emplace_back(cd(reals[i]), cd(reals[i + 1]));
  if (reals.size() % 2 == 1) out.emplace_back(cd(reals.back()), cd(0.0));
  return out;
}

cd section_response(const Biquad& s, cd z1) {  // z1 = z^{-1}
  const cd num = s.b0 + s.b1 * z1 + s.b2 * z1 * z1;
  const cd den = 1.0 + s.a1 * z1 + s.a2 * z1 * z1;
  return num / den;
}

void run_sections(const std::vector<Biquad>& sections, std::vector<double>& x) {
  for (const auto& s : sections) {
    double z1 = 0.0;
    double z2 = 0.0;
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

// Steady-state section states for a unit step at the cascade input.
std::vector<double> steady_state(const std::vector<Biquad>& sections) {
  std::vector<double> zi(2 * sections.size());
  double scale = 1.0;
  for (std::size_t k = 0; k < sections.size(); ++k) {
    const auto& s = sections[k];
    const double g = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    zi[2 * k] = scale * (g - s.b0);
    zi[2 * k + 1] = scale * (s.b2 - s.a2 * g);
    scale *= g;
  }
  return zi;
}

// Runs the sections as if the input had rested at `start_level` forever.
void filter_with_initial_step(const std::vector<Biquad>& sections, const std::vector<double>& zi, double start_level,
                              std::vector<double>& x) {
  if (x.empty()) return;
  const double x0 = start_level;
  for (std::size_t k = 0; k < sections.size(); ++k) {
    const auto& s = sections[k];
    double z1 = zi[2 * k] * x0;
    double z2 = zi[2 * k + 1] * x0;
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

}  // namespace

SosFilter design_filter(const FilterSpec& spec, double fs) {
  if (!(fs > 0.0)) throw ConfigError("sampling rate must be positive");
  if (spec.order <= 0 || spec.order % 2 != 0) throw ConfigError("filter order must be a positive even integer");
  const double nyquist = fs / 2.0;
  if (!(spec.low_hz >= 0.0 && spec.low_hz < spec.high_hz)) {
    throw ConfigError("filter band requires 0 <= low_hz < high_hz");
  }
  if (!(spec.high_hz < nyquist)) {
    throw ConfigError("filter cutoff " + std::to_string(spec.high_hz) + " Hz is not below Nyquist (" +
                      std::to_string(nyquist) + " Hz)");
  }

  const int n = spec.order;
  const double fs2 = 2.0 * fs;
  const double w_hi = fs2 * std::tan(std::numbers::pi * spec.high_hz / fs);

  std::vector<cd> proto;
  for (int k = -n + 1; k < n; k += 2) {
    proto.push_back(-std::exp(cd(0.0, std::numbers::pi * k / (2.0 * n))));
  }

  std::vector<cd> analog_poles;
  std::vector<cd> digital_zeros;
  double ref_omega = 0.0;  // digital frequency (rad/sample) where |H| = 1

  if (spec.kind == FilterKind::bandpass && spec.low_hz == 0.0) {
    for (const auto& p : proto) analog_poles.push_back(p * w_hi);
    digital_zeros.assign(n, cd(-1.0));
    ref_omega = 0.0;
  } else {
    if (spec.low_hz <= 0.0) throw ConfigError("band-stop requires low_hz > 0");
    const double w_lo = fs2 * std::tan(std::numbers::pi * spec.low_hz / fs);
    const double bw = w_hi - w_lo;
    const double w0 = std::sqrt(w_lo * w_hi);
    if (spec.kind == FilterKind::bandpass) {
      for (const auto& p : proto) {
        const cd half = p * bw / 2.0;
        const cd root = std::sqrt(half * half - w0 * w0);
        analog_poles.push_back(half + root);
        analog_poles.push_back(half - root);
      }
      for (int i = 0; i < n; ++i) {
        digital_zeros.emplace_back(1.0);
        digital_zeros.emplace_back(-1.0);
      }
      ref_omega = 2.0 * std::atan(w0 / fs2);
    } else {
      for (const auto& p : proto) {
        const cd half = (bw / 2.0) / p;
        const cd root = std::sqrt(half * half - w0 * w0);
        analog_poles.push_back(half + root);
        analog_poles.push_back(half - root);
      }
      const cd zj = (fs2 + cd(0.0, w0)) / (fs2 - cd(0.0, w0));
      for (int i = 0; i < n; ++i) {
        digital_zeros.push_back(zj);
        digital_zeros.push_back(std::conj(zj));
      }
      ref_omega = 0.0;
    }
  }

  std::vector<cd> digital_poles;
  for (const auto& p : analog_poles) digital_poles.push_back((fs2 + p) / (fs2 - p));

  SosFilter out;
  out.zero_phase = spec.zero_phase;
  // Edge transients decay on the scale of the slowest feature: the lowest edge or a narrow stop band.
  const double slowest_hz = spec.low_hz > 0.0 ? std::min(spec.low_hz, spec.high_hz - spec.low_hz) : spec.high_hz;
  out.edge_pad = std::max<std::size_t>(static_cast<std::size_t>(std::ceil(3.0 * fs / slowest_hz)),
                                       static_cast<std::size_t>(6 * n));
  const auto pole_pairs = pair_poles(digital_poles);
  const cd z1_ref = std::exp(cd(0.0, -ref_omega));
  std::size_t zi = 0;
  for (const auto& [p1, p2] : pole_pairs) {
    Biquad s;
    s.a1 = -(p1 + p2).real();
    s.a2 = (p1 * p2).real();
    const cd q1 = zi < digital_zeros.size() ? digital_zeros[zi++] : cd(0.0);
    const cd q2 = zi < digital_zeros.size() ? digital_zeros[zi++] : cd(0.0);
    s.b0 = 1.0;
    s.b1 = -(q1 + q2).real();
    s.b2 = (q1 * q2).real();
    const double g = std::abs(section_response(s, z1_ref));
    s.b0 /= g;
    s.b1 /= g;
    s.b2 /= g;
    out.sections.push_back(s);
  }
  return out;
}

std::complex<double> frequency_response(const SosFilter& filter, double freq_hz, double fs) {
  const cd z1 = std::exp(cd(0.0, -2.0 * std::numbers::pi * freq_hz / fs));
  cd h(1.0);
  for (const auto& s : filter.sections) h *= section_response(s, z1);
  return h;
}

std::vector<double> filter_causal(const SosFilter& filter, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  run_sections(filter.sections, y);
  return y;
}

std::vector<double> apply_filter(const SosFilter& filter, std::span<const double> x) {
  if (!filter.zero_phase) return filter_causal(filter, x);
  const std::size_t n = x.size();
  if (n < 2) return std::vector<double>(x.begin(), x.end());
  const std::size_t pad = std::min(filter.edge_pad, n - 1);

  // Even reflection keeps the local mean; the initial state assumes the pad's mean level.
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) ext[i] = x[pad - i];
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t i = 0; i < pad; ++i) ext[pad + n + i] = x[n - 2 - i];

  auto head_mean = [&] {
    const std::size_t m = std::max<std::size_t>(pad, 1);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += ext[i];
    return s / static_cast<double>(m);
  };
  const auto zi = steady_state(filter.sections);
  filter_with_initial_step(filter.sections, zi, head_mean(), ext);
  std::reverse(ext.begin(), ext.end());
  filter_with_initial_step(filter.sections, zi, head_mean(), ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

}  // namespace eegconn

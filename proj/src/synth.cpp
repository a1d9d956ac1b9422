#include "eegconn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "eegconn/errors.hpp"
#include "eegconn/filter.hpp"
#include "eegconn/labeling.hpp"
#include "eegconn/rng.hpp"

namespace eegconn {

using nlohmann::json;

void CohortSpec::validate() const {
  if (n_subjects == 0) throw ConfigError("cohort needs at least one subject");
  if (n_female > n_subjects) throw ConfigError("more female subjects than subjects");
  if (!(sampling_rate > 0.0)) throw ConfigError("sampling rate must be positive");
  if (rounds.empty()) throw ConfigError("cohort needs at least one round per subject");
  if (n_subjects * rounds.size() < 4) throw ConfigError("quartile labeling needs at least 4 rounds in the cohort");
  if (!(noise_sigma_uv >= 0.0) || !std::isfinite(noise_sigma_uv)) throw ConfigError("noise sigma must be finite and >= 0");
  if (lead_in_s < 0.0) throw ConfigError("lead-in must be non-negative");
  for (const auto& r : rounds) {
    if (!(r.duration_s > 0.0)) throw ConfigError("round durations must be positive");
    if (r.difficulty < 1 || r.difficulty > 3) throw ConfigError("difficulty must be 1, 2 or 3");
  }
  for (double g : class_gain) {
    if (!std::isfinite(g)) throw ConfigError("class gains must be finite");
  }
  const auto& montage = Montage::standard20();
  std::map<std::string, const LatentSource*> by_name;
  for (const auto& s : sources) {
    if (!by_name.emplace(s.name, &s).second) throw ConfigError("duplicate source '" + s.name + "'");
    if (!(s.low_hz > 0.0 && s.low_hz < s.high_hz && s.high_hz < sampling_rate / 2)) {
      throw ConfigError("source '" + s.name + "' band must satisfy 0 < low < high < Nyquist");
    }
    if (!std::isfinite(s.amplitude_uv)) throw ConfigError("source '" + s.name + "' amplitude must be finite");
  }
  for (const auto& p : projections) {
    if (!by_name.count(p.source)) throw ConfigError("projection refers to unknown source '" + p.source + "'");
    if (p.channels.size() != p.gains.size()) {
      throw ConfigError("projection of '" + p.source + "' has " + std::to_string(p.channels.size()) + " channels but " +
                        std::to_string(p.gains.size()) + " gains");
    }
    for (const auto& c : p.channels) montage.require_index(c);
    for (double g : p.gains) {
      if (!std::isfinite(g)) throw ConfigError("projection gains must be finite");
    }
  }
}

json CohortSpec::to_json() const {
  json r = json::array(), s = json::array(), p = json::array();
  for (const auto& x : rounds) r.push_back({{"task", to_string(x.task)}, {"difficulty", x.difficulty}, {"duration_s", x.duration_s}});
  for (const auto& x : sources) {
    s.push_back({{"name", x.name}, {"low_hz", x.low_hz}, {"high_hz", x.high_hz}, {"amplitude_uv", x.amplitude_uv},
                 {"class_modulated", x.class_modulated}});
  }
  for (const auto& x : projections) p.push_back({{"source", x.source}, {"channels", x.channels}, {"gains", x.gains}});
  return {{"n_subjects", n_subjects}, {"n_female", n_female},   {"sampling_rate_hz", sampling_rate},
          {"lead_in_s", lead_in_s},   {"rounds", r},            {"sources", s},
          {"projections", p},         {"class_gain", class_gain}, {"noise_sigma_uv", noise_sigma_uv},
          {"seed", seed}};
}

json GroundTruth::to_json() const {
  json edges = json::array(), rs = json::array();
  for (const auto& [a, b] : strong_edges) edges.push_back({a, b});
  for (const auto& r : rounds) {
    rs.push_back({{"subject_id", r.subject_id}, {"round_index", r.round_index}, {"task", to_string(r.task)},
                  {"difficulty", r.difficulty}, {"state", to_string(r.state)}});
  }
  return {{"informative_channels", informative_channels}, {"strong_edges", edges}, {"rounds", rs}};
}

GroundTruth GroundTruth::from_json(const json& j) {
  try {
    GroundTruth g;
    g.informative_channels = j.at("informative_channels").get<std::vector<std::string>>();
    for (const auto& e : j.at("strong_edges")) g.strong_edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    for (const auto& r : j.at("rounds")) {
      g.rounds.push_back({r.at("subject_id").get<std::string>(), r.at("round_index").get<std::size_t>(),
                          parse_task(r.at("task").get<std::string>()), r.at("difficulty").get<int>(),
                          parse_state(r.at("state").get<std::string>())});
    }
    return g;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed ground truth: ") + e.what());
  }
}

std::array<std::size_t, 3> quartile_class_counts(std::size_t n) {
  const double q1 = 0.25 * static_cast<double>(n - 1);
  const double q3 = 0.75 * static_cast<double>(n - 1);
  const auto low = static_cast<std::size_t>(std::ceil(q1));
  const auto high = n - 1 - static_cast<std::size_t>(std::floor(q3));
  return {low, n - low - high, high};
}

double expected_shared_pcc(double g1, double g2, double source_power, double noise_var) {
  return g1 * g2 * source_power / std::sqrt((g1 * g1 * source_power + noise_var) * (g2 * g2 * source_power + noise_var));
}

namespace {

// Disjoint score bands per class; the quartile cut points fall in the gaps.
constexpr std::array<std::pair<double, double>, 3> kScoreBand = {{{0.25, 0.40}, {0.45, 0.60}, {0.65, 0.80}}};

std::vector<double> band_limited_noise(std::size_t n, const LatentSource& src, double fs, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = normal(rng);
  const auto filter = design_filter({FilterKind::bandpass, src.low_hz, src.high_hz, 4, true}, fs);
  auto y = apply_filter(filter, x);
  double ss = 0.0;
  for (double v : y) ss += v * v;
  const double scale = ss > 0.0 ? src.amplitude_uv / std::sqrt(ss / static_cast<double>(n)) : 0.0;
  for (double& v : y) v *= scale;
  return y;
}

}  // namespace

std::pair<std::vector<Recording>, GroundTruth> generate_cohort(const CohortSpec& spec) {
  spec.validate();
  const auto& montage = Montage::standard20();
  const std::size_t n_rounds = spec.n_subjects * spec.rounds.size();

  // Cohort-level draws: gender assignment and round states.
  Rng cohort_rng = make_rng(spec.seed, "synth.cohort");
  std::vector<Gender> genders(spec.n_subjects, Gender::male);
  std::fill(genders.end() - static_cast<std::ptrdiff_t>(spec.n_female), genders.end(), Gender::female);
  for (std::size_t i = genders.size(); i > 1; --i) std::swap(genders[i - 1], genders[cohort_rng() % i]);

  const auto counts = quartile_class_counts(n_rounds);
  std::vector<CognitiveState> states;
  for (std::size_t c = 0; c < 3; ++c) states.insert(states.end(), counts[c], kAllStates[c]);
  for (std::size_t i = states.size(); i > 1; --i) std::swap(states[i - 1], states[cohort_rng() % i]);

  GroundTruth truth;
  std::vector<bool> informative(montage.size(), false);
  for (const auto& p : spec.projections) {
    const auto src = std::find_if(spec.sources.begin(), spec.sources.end(), [&](const auto& s) { return s.name == p.source; });
    if (!src->class_modulated) continue;
    for (std::size_t k = 0; k < p.channels.size(); ++k) {
      if (p.gains[k] != 0.0) informative[montage.require_index(p.channels[k])] = true;
    }
  }
  for (std::size_t i = 0; i < montage.size(); ++i) {
    if (!informative[i]) continue;
    truth.informative_channels.push_back(montage.channel(i).name);
    for (std::size_t j = i + 1; j < montage.size(); ++j) {
      if (informative[j]) truth.strong_edges.emplace_back(montage.channel(i).name, montage.channel(j).name);
    }
  }

  std::vector<Recording> recordings;
  const double fs = spec.sampling_rate;
  for (std::size_t s = 0; s < spec.n_subjects; ++s) {
    Rng rng = make_rng(spec.seed, "synth.subject", s);
    Recording rec;
    rec.subject_id = "s" + std::string(s + 1 < 10 ? "0" : "") + std::to_string(s + 1);
    rec.gender = genders[s];
    rec.sampling_rate = fs;
    rec.channels = montage.names();

    double t = spec.lead_in_s;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<CognitiveState> subject_states;
    for (std::size_t r = 0; r < spec.rounds.size(); ++r) {
      const auto state = states[s * spec.rounds.size() + r];
      const auto [lo, hi] = kScoreBand[static_cast<std::size_t>(state)];
      const double score = lo + (hi - lo) * unit(rng);
      const double perf = score + (unit(rng) - 0.5) * 0.2;
      const double tlx = 1.0 + perf - 2.0 * score;
      const auto& plan = spec.rounds[r];
      rec.annotations.push_back({plan.task, plan.difficulty, t, t + plan.duration_s, perf, tlx});
      truth.rounds.push_back({rec.subject_id, r, plan.task, plan.difficulty, state});
      subject_states.push_back(state);
      t += plan.duration_s;
    }
    const auto n = static_cast<std::size_t>(std::llround(t * fs));
    rec.samples = SignalMatrix(montage.size(), n);

    // Per-sample gain of class-modulated sources (lead-in uses the transition gain).
    std::vector<double> class_gain(n, spec.class_gain[1]);
    for (std::size_t r = 0; r < rec.annotations.size(); ++r) {
      const auto [first, last] = round_sample_range(rec, rec.annotations[r]);
      std::fill(class_gain.begin() + static_cast<std::ptrdiff_t>(first), class_gain.begin() + static_cast<std::ptrdiff_t>(last),
                spec.class_gain[static_cast<std::size_t>(subject_states[r])]);
    }
    for (std::size_t k = 0; k < spec.sources.size(); ++k) {
      const auto& src = spec.sources[k];
      Rng src_rng = make_rng(spec.seed, "synth.source." + src.name, s);
      auto wave = band_limited_noise(n, src, fs, src_rng);
      if (src.class_modulated) {
        for (std::size_t i = 0; i < n; ++i) wave[i] *= class_gain[i];
      }
      for (const auto& p : spec.projections) {
        if (p.source != src.name) continue;
        for (std::size_t c = 0; c < p.channels.size(); ++c) {
          auto row = rec.samples.row(montage.require_index(p.channels[c]));
          for (std::size_t i = 0; i < n; ++i) row[i] += p.gains[c] * wave[i];
        }
      }
    }
    std::normal_distribution<double> noise(0.0, spec.noise_sigma_uv);
    Rng noise_rng = make_rng(spec.seed, "synth.noise", s);
    for (double& v : rec.samples.data()) v += noise(noise_rng);
    validate(rec);
    recordings.push_back(std::move(rec));
  }
  return {std::move(recordings), std::move(truth)};
}

CohortSpec default_cohort_spec(std::uint64_t seed) {
  CohortSpec spec;
  spec.seed = seed;
  for (Task task : kAllTasks) {
    for (int d = 1; d <= 3; ++d) spec.rounds.push_back({task, d, 80.0});
  }
  // Sized against in-band noise: only ~20% of the 10 uV white noise survives the 0.1-50 Hz band-pass.
  // Larger frontal amplitudes push its correlation with Fp1 past the 0.8 ocular threshold and ICA drops it.
  spec.sources = {{"frontal", 1.0, 40.0, 3.0, true}, {"posterior_alpha", 8.0, 13.0, 2.0, false}};
  std::vector<std::string> frontal(kReferenceEightElectrodes.begin(), kReferenceEightElectrodes.end());
  spec.projections = {{"frontal", frontal, std::vector<double>(frontal.size(), 1.0)},
                      {"posterior_alpha", {"P3", "Pz", "P4", "O1", "O2"}, {1.0, 1.0, 1.0, 1.0, 1.0}}};
  return spec;
}

std::pair<std::vector<Recording>, GroundTruth> default_cohort(std::uint64_t seed) {
  return generate_cohort(default_cohort_spec(seed));
}

std::vector<double> add_blinks(Recording& rec, double amplitude_uv, double rate_hz, std::uint64_t seed) {
  const std::size_t n = rec.samples.samples();
  const double fs = rec.sampling_rate;
  const auto width = static_cast<std::size_t>(std::llround(0.25 * fs));
  std::vector<double> tmpl(n, 0.0);
  Rng rng = make_rng(seed, "synth.blinks");
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  double t = jitter(rng) / rate_hz;
  while (true) {
    const auto start = static_cast<std::size_t>(t * fs);
    if (start + width >= n) break;
    for (std::size_t i = 0; i < width; ++i) {
      tmpl[start + i] += 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(width)));
    }
    t += jitter(rng) / rate_hz;
  }
  const std::map<std::string, double> spread = {{"Fp1", 1.0}, {"Fpz", 1.0}, {"Fp2", 1.0}, {"F7", 0.4},
                                                {"F3", 0.5},  {"Fz", 0.5},  {"F4", 0.5},  {"F8", 0.4}};
  for (const auto& [name, w] : spread) {
    const auto idx = std::find(rec.channels.begin(), rec.channels.end(), name);
    if (idx == rec.channels.end()) continue;
    auto row = rec.samples.row(static_cast<std::size_t>(idx - rec.channels.begin()));
    for (std::size_t i = 0; i < n; ++i) row[i] += w * amplitude_uv * tmpl[i];
  }
  return tmpl;
}

}  // namespace eegconn

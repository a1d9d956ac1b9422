#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "eegconn/recording.hpp"
#include "json.hpp"

namespace eegconn {

// Band-limited Gaussian noise of unit-gain standard deviation `amplitude_uv`.
struct LatentSource {
  std::string name;
  double low_hz = 1.0;
  double high_hz = 40.0;
  double amplitude_uv = 10.0;
  bool class_modulated = false;  // scaled by CohortSpec::class_gain of the round's state
};

struct SourceProjection {
  std::string source;
  std::vector<std::string> channels;
  std::vector<double> gains;  // one per channel
};

struct RoundPlan {
  Task task = Task::nback;
  int difficulty = 1;
  double duration_s = 80.0;
};

struct CohortSpec {
  std::size_t n_subjects = 30;
  std::size_t n_female = 9;
  double sampling_rate = 500.0;
  double lead_in_s = 10.0;  // rest before the first round
  std::vector<RoundPlan> rounds;
  std::vector<LatentSource> sources;
  std::vector<SourceProjection> projections;
  std::array<double, 3> class_gain = {0.7, 1.0, 1.3};  // low, transition, high
  double noise_sigma_uv = 10.0;
  std::uint64_t seed = 0;

  // ConfigError on unknown channels/sources, gain count mismatch, non-finite gains.
  void validate() const;
  nlohmann::json to_json() const;
};

struct RoundTruth {
  std::string subject_id;
  std::size_t round_index = 0;
  Task task = Task::nback;
  int difficulty = 1;
  CognitiveState state = CognitiveState::transition;
};

struct GroundTruth {
  std::vector<std::string> informative_channels;  // montage order
  std::vector<std::pair<std::string, std::string>> strong_edges;
  std::vector<RoundTruth> rounds;

  nlohmann::json to_json() const;
  static GroundTruth from_json(const nlohmann::json& j);
};

/// Channel = sum of projected sources + white noise. Round states are drawn
/// so the pooled quartile rule on the emitted performance/TLX values recovers
/// them exactly.
std::pair<std::vector<Recording>, GroundTruth> generate_cohort(const CohortSpec& spec);

/// 30 subjects (21 male, 9 female), 3 tasks x 3 difficulties of 80 s at
/// 500 Hz. A class-modulated frontal source drives the eight reference
/// electrodes; a weak posterior alpha source is class independent.
CohortSpec default_cohort_spec(std::uint64_t seed);
std::pair<std::vector<Recording>, GroundTruth> default_cohort(std::uint64_t seed);

// Class counts (low, transition, high) that the quartile rule reproduces for n trials.
std::array<std::size_t, 3> quartile_class_counts(std::size_t n);

/// Adds blinks (raised-cosine bumps, ~250 ms) to the frontal channels and
/// returns the unit template (one value per sample).
std::vector<double> add_blinks(Recording& rec, double amplitude_uv, double rate_hz, std::uint64_t seed);

// Expected Pearson correlation of two channels sharing one source.
double expected_shared_pcc(double g1, double g2, double source_power, double noise_var);

}  // namespace eegconn

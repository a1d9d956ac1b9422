#pragma once

#include <span>
#include <string>
#include <vector>

#include "eegconn/recording.hpp"
#include "eegconn/types.hpp"

namespace eegconn {

/// (performance + (1 - nasa_tlx)) / 2 when invert_tlx, else the plain mean.
/// Inverting the workload score makes high workload map to a low state.
double combined_score(double performance, double nasa_tlx, bool invert_tlx = true);

struct Quartiles {
  double q1 = 0.0;
  double q3 = 0.0;
};

// Linear interpolation on the sorted sample at position q * (n - 1).
Quartiles cohort_quartiles(std::span<const double> scores);

/// s < Q1 -> low, s > Q3 -> high, anything else (including equality) -> transition.
/// Throws ConfigError for fewer than 4 scores.
std::vector<CognitiveState> quartile_label(std::span<const double> scores);

struct LabeledTrial {
  std::string subject_id;
  Task task = Task::nback;
  int difficulty = 1;
  double performance = 0.0;
  double nasa_tlx = 0.0;
  double score = 0.0;
  CognitiveState state = CognitiveState::transition;
};

struct LabelingOptions {
  bool invert_tlx = true;
  bool per_task_quartiles = false;  // pooled cohort by default
};

// One trial per annotated round, in recording then round order.
std::vector<LabeledTrial> label_rounds(const std::vector<Recording>& recordings, const LabelingOptions& options = {});

std::string labels_to_csv(const std::vector<LabeledTrial>& trials);
std::vector<LabeledTrial> labels_from_csv(const std::string& text);  // throws DataError

}  // namespace eegconn

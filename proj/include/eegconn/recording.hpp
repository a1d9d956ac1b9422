#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eegconn/montage.hpp"
#include "eegconn/types.hpp"

namespace eegconn {

// Channel-major sample matrix.
class SignalMatrix {
 public:
  SignalMatrix() = default;
  SignalMatrix(std::size_t channels, std::size_t samples, double fill = 0.0)
      : channels_(channels), samples_(samples), data_(channels * samples, fill) {}

  std::size_t channels() const { return channels_; }
  std::size_t samples() const { return samples_; }

  std::span<double> row(std::size_t c) { return {data_.data() + c * samples_, samples_}; }
  std::span<const double> row(std::size_t c) const { return {data_.data() + c * samples_, samples_}; }

  double& operator()(std::size_t c, std::size_t t) { return data_[c * samples_ + t]; }
  double operator()(std::size_t c, std::size_t t) const { return data_[c * samples_ + t]; }

  AlignedVector& data() { return data_; }
  const AlignedVector& data() const { return data_; }

  // Copy of columns [start, start + length).
  SignalMatrix slice(std::size_t start, std::size_t length) const;
  // Copy of the given rows, in the given order.
  SignalMatrix select_rows(std::span<const std::size_t> rows) const;

  bool operator==(const SignalMatrix&) const = default;

 private:
  std::size_t channels_ = 0;
  std::size_t samples_ = 0;
  AlignedVector data_;
};

struct TaskRound {
  Task task = Task::nback;
  int difficulty = 1;  // 1..3
  double start_s = 0.0;
  double end_s = 0.0;
  double performance = 0.0;  // fraction
  double nasa_tlx = 0.0;     // fraction

  bool operator==(const TaskRound&) const = default;
};

struct Recording {
  std::string subject_id;
  Gender gender = Gender::male;
  double sampling_rate = 500.0;
  std::vector<std::string> channels;  // montage order
  SignalMatrix samples;               // microvolts
  std::vector<TaskRound> annotations;
  std::optional<std::string> pipeline_stage;

  double duration_s() const { return static_cast<double>(samples.samples()) / sampling_rate; }
  std::size_t channel_index(std::string_view name) const;  // throws DataError

  bool operator==(const Recording&) const = default;
};

// Throws DataError describing the first violated invariant.
void validate(const Recording& rec);

std::filesystem::path sidecar_path(const std::filesystem::path& csv);

/// Reads `<name>.csv` plus `<name>.meta.json`. Columns may appear in any
/// order; the result is reordered to montage order.
Recording load_recording(const std::filesystem::path& csv, const Montage& montage = Montage::standard20());

/// Writes the CSV + sidecar pair. Samples use shortest round-trip decimal
/// formatting, so load_recording(save_recording(r)) == r.
// Sidecar only: metadata and annotations, no samples.
Recording load_recording_meta(const std::filesystem::path& csv, const Montage& montage = Montage::standard20());

void save_recording(const Recording& rec, const std::filesystem::path& csv);

struct EpochRange {
  std::size_t round_index = 0;
  std::size_t start = 0;  // sample index
  std::size_t length = 0;
};

struct Epoch {
  std::string recording_id;
  std::size_t round_index = 0;
  std::size_t start = 0;
  SignalMatrix window;
  std::optional<CognitiveState> label;
};

// Sample range [first, last) covered by a round.
std::pair<std::size_t, std::size_t> round_sample_range(const Recording& rec, const TaskRound& round);

std::vector<EpochRange> epoch_ranges(const Recording& rec, double window_s, double overlap);
std::vector<Epoch> epoch_recording(const Recording& rec, double window_s, double overlap);

}  // namespace eegconn

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "eegconn/labeling.hpp"
#include "eegconn/nn/model.hpp"
#include "eegconn/recording.hpp"

namespace eegconn {

enum class InputKind { raw, connectivity };

std::string_view to_string(InputKind k);
InputKind parse_input_kind(std::string_view s);  // throws ConfigError

struct DatasetOptions {
  double window_s = 2.0;
  double overlap = 0.5;
  std::size_t decimation = 4;        // 500 Hz -> 125 Hz
  std::size_t epochs_per_round = 0;  // 0 = every epoch; else evenly spread across the round
  std::vector<std::string> channels;  // empty = all recording channels
  InputKind input = InputKind::raw;

  void validate() const;
};

/// Classifier-ready epochs. Raw input has sample shape (1, C, W); the
/// connectivity input is the epoch's upper-triangle PCC vector, shape (1, 1, E).
struct EpochDataset {
  nn::Dataset data;
  std::vector<std::string> groups;  // subject id per sample
  std::vector<std::size_t> trial;   // index into the labeled trial list
  std::vector<std::string> channels;
  double sampling_rate = 0.0;
  InputKind input = InputKind::raw;

  std::size_t size() const { return data.size(); }
  EpochDataset subset(const std::vector<std::size_t>& indices) const;
  // Keeps only the named rows (raw input only); ConfigError for unknown names.
  EpochDataset select_channels(const std::vector<std::string>& names) const;
};

/// Zero-phase low-pass at 0.4 * fs / factor, then every factor-th sample.
Recording decimate(const Recording& rec, std::size_t factor);

/// Trials are matched to rounds per subject in annotation order; task and
/// difficulty must agree (DataError otherwise).
EpochDataset build_epoch_dataset(const std::vector<Recording>& recordings, const std::vector<LabeledTrial>& trials,
                                 const DatasetOptions& options);

/// Per-channel z-scoring with statistics from one (training) dataset.
struct ChannelScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  static ChannelScaler fit(const nn::Dataset& data);
  void apply(nn::Dataset& data) const;
};

}  // namespace eegconn

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "eegconn/analysis.hpp"
#include "eegconn/dataset.hpp"
#include "eegconn/eval.hpp"
#include "eegconn/labeling.hpp"
#include "eegconn/preprocess.hpp"
#include "eegconn/spectral.hpp"
#include "eegconn/synth.hpp"
#include "json.hpp"

namespace eegconn {

/// Every knob of the synth -> evaluate chain. JSON sections mirror the
/// commands; unknown keys are rejected so typos cannot pass silently.
struct PipelineConfig {
  std::uint64_t seed = 0;

  // synth
  std::size_t n_subjects = 30;
  std::size_t n_female = 9;
  double round_s = 80.0;
  double lead_in_s = 10.0;

  // preprocess
  std::string filter_preset = "default";
  double amp_limit_uv = 100.0;
  double flat_window_s = 1.0;
  double baseline_start_ms = 3000.0;
  double baseline_end_ms = 5000.0;
  bool run_ica = true;
  double ica_corr_threshold = 0.8;
  std::size_t ica_fit_stride = 20;
  std::size_t ica_max_iter = 200;
  double ica_tol = 1e-4;

  // connect / select
  std::vector<std::string> bands = {"broadband"};
  AggregationMode aggregation = AggregationMode::weighted;
  std::vector<std::size_t> edge_sets = {20, 50, 100};
  double psd_segment_s = 2.0;
  std::size_t select_top_edges = 50;
  std::size_t select_channels = 8;

  // label
  bool invert_tlx = true;
  bool per_task_quartiles = false;

  // dataset / model / training
  DatasetOptions dataset = default_dataset_options();
  std::string model = "mha-eegnet";
  std::string electrodes = "topk:8";
  nn::TrainConfig train = default_train_config();
  double val_fraction = 0.1;  // subjects held out by `train` for validation curves

  // evaluate
  std::size_t folds = 10;
  SplitMode split = SplitMode::subject;
  std::vector<std::string> electrode_sets = {"all20", "topk:8"};
  std::vector<std::string> models;  // empty = {model}

  static DatasetOptions default_dataset_options();
  static nn::TrainConfig default_train_config();

  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);  // ConfigError
  // Checks every module precondition that does not need data.
  void validate() const;
  // FNV-1a over the canonical JSON; 16 hex digits.
  std::string hash() const;

  std::size_t temporal_kernel() const;  // half the decimated sampling rate, in samples
  std::vector<std::string> evaluation_models() const;
};

CohortSpec cohort_spec(const PipelineConfig& cfg);
PreprocessConfig preprocess_config(const PipelineConfig& cfg, std::size_t subject_index);
std::vector<PreprocessResult> preprocess_cohort(const std::vector<Recording>& recordings, const PipelineConfig& cfg);

struct ConnectivityResult {
  std::string band;
  std::vector<ConnectivityMatrix> matrices;  // one per round, recording order
  CorrelationEmbedding embedding;
  std::vector<double> mean_performance;       // per difficulty level
  std::vector<double> weights;
  ConnectivityMatrix aggregate;               // configured mode
  std::map<Gender, ConnectivityMatrix> by_cohort;
  SignSplit signs;
  std::vector<std::pair<std::size_t, EdgeSet>> top_edges;
};

std::vector<ConnectivityResult> connectivity_stage(const std::vector<Recording>& recordings, const PipelineConfig& cfg);
ChannelSelection selection_stage(const ConnectivityResult& result, const PipelineConfig& cfg);
std::vector<LabeledTrial> label_stage(const std::vector<Recording>& recordings, const PipelineConfig& cfg);
// Every montage channel; electrode sets are sliced from it.
EpochDataset dataset_stage(const std::vector<Recording>& recordings, const std::vector<LabeledTrial>& trials,
                           const PipelineConfig& cfg);
NeuralOptions neural_options(const PipelineConfig& cfg, const std::string& model);

/// Cohort-mean Welch PSD per channel: {kind, params, channels: [{channel, freqs_hz, psd}]}.
nlohmann::json cohort_psd(const std::vector<Recording>& recordings, const PipelineConfig& cfg);

}  // namespace eegconn

#include "eegconn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "eegconn/errors.hpp"
#include "eegconn/rng.hpp"

namespace eegconn {

using nlohmann::json;

DatasetOptions PipelineConfig::default_dataset_options() {
  DatasetOptions d;
  d.epochs_per_round = 4;
  return d;
}

nn::TrainConfig PipelineConfig::default_train_config() {
  nn::TrainConfig t;
  t.epochs = 30;
  return t;
}

json PipelineConfig::to_json() const {
  return {
      {"seed", seed},
      {"synth", {{"n_subjects", n_subjects}, {"n_female", n_female}, {"round_s", round_s}, {"lead_in_s", lead_in_s}}},
      {"preprocess",
       {{"filter_preset", filter_preset},
        {"amp_limit_uv", amp_limit_uv},
        {"flat_window_s", flat_window_s},
        {"baseline_ms", {baseline_start_ms, baseline_end_ms}},
        {"run_ica", run_ica},
        {"ica_corr_threshold", ica_corr_threshold},
        {"ica_fit_stride", ica_fit_stride},
        {"ica_max_iter", ica_max_iter},
        {"ica_tol", ica_tol}}},
      {"connect",
       {{"bands", bands}, {"aggregation", to_string(aggregation)}, {"edge_sets", edge_sets}, {"psd_segment_s", psd_segment_s}}},
      {"select", {{"top_edges", select_top_edges}, {"channels", select_channels}}},
      {"label", {{"invert_tlx", invert_tlx}, {"per_task_quartiles", per_task_quartiles}}},
      {"dataset",
       {{"window_s", dataset.window_s},
        {"overlap", dataset.overlap},
        {"decimation", dataset.decimation},
        {"epochs_per_round", dataset.epochs_per_round},
        {"input", to_string(dataset.input)}}},
      {"train",
       {{"model", model},
        {"electrodes", electrodes},
        {"epochs", train.epochs},
        {"batch_size", train.batch_size},
        {"learning_rate", train.learning_rate},
        {"val_fraction", val_fraction}}},
      {"evaluate", {{"folds", folds}, {"split", to_string(split)}, {"electrode_sets", electrode_sets}, {"models", models}}},
  };
}

namespace {

// Walks one section, rejecting unknown keys.
class Section {
 public:
  Section(const json& root, const std::string& name) : name_(name) {
    if (!root.contains(name)) return;
    node_ = &root.at(name);
    if (!node_->is_object()) throw ConfigError("config section '" + name + "' must be an object");
  }
  template <class T>
  void get(const char* key, T& out) {
    known_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    try {
      out = node_->at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config field " + name_ + "." + key + " has the wrong type");
    }
  }
  void finish() const {
    if (!node_) return;
    for (const auto& [k, v] : node_->items()) {
      if (!known_.count(k)) throw ConfigError("unknown config field " + name_ + "." + k);
    }
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> known_;
};

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> sections = {"seed", "synth", "preprocess", "connect", "select",
                                                 "label", "dataset", "train", "evaluate"};
  for (const auto& [k, v] : j.items()) {
    if (!sections.count(k)) throw ConfigError("unknown config section '" + k + "'");
  }
  PipelineConfig c;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("config field seed must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  Section s(j, "synth");
  s.get("n_subjects", c.n_subjects);
  s.get("n_female", c.n_female);
  s.get("round_s", c.round_s);
  s.get("lead_in_s", c.lead_in_s);
  s.finish();

  Section p(j, "preprocess");
  p.get("filter_preset", c.filter_preset);
  p.get("amp_limit_uv", c.amp_limit_uv);
  p.get("flat_window_s", c.flat_window_s);
  std::vector<double> baseline = {c.baseline_start_ms, c.baseline_end_ms};
  p.get("baseline_ms", baseline);
  if (baseline.size() != 2) throw ConfigError("config field preprocess.baseline_ms needs [start, end]");
  c.baseline_start_ms = baseline[0];
  c.baseline_end_ms = baseline[1];
  p.get("run_ica", c.run_ica);
  p.get("ica_corr_threshold", c.ica_corr_threshold);
  p.get("ica_fit_stride", c.ica_fit_stride);
  p.get("ica_max_iter", c.ica_max_iter);
  p.get("ica_tol", c.ica_tol);
  p.finish();

  Section cn(j, "connect");
  cn.get("bands", c.bands);
  std::string mode(to_string(c.aggregation));
  cn.get("aggregation", mode);
  c.aggregation = parse_aggregation_mode(mode);
  cn.get("edge_sets", c.edge_sets);
  cn.get("psd_segment_s", c.psd_segment_s);
  cn.finish();

  Section sl(j, "select");
  sl.get("top_edges", c.select_top_edges);
  sl.get("channels", c.select_channels);
  sl.finish();

  Section lb(j, "label");
  lb.get("invert_tlx", c.invert_tlx);
  lb.get("per_task_quartiles", c.per_task_quartiles);
  lb.finish();

  Section ds(j, "dataset");
  ds.get("window_s", c.dataset.window_s);
  ds.get("overlap", c.dataset.overlap);
  ds.get("decimation", c.dataset.decimation);
  ds.get("epochs_per_round", c.dataset.epochs_per_round);
  std::string input(to_string(c.dataset.input));
  ds.get("input", input);
  c.dataset.input = parse_input_kind(input);
  ds.finish();

  Section tr(j, "train");
  tr.get("model", c.model);
  tr.get("electrodes", c.electrodes);
  tr.get("epochs", c.train.epochs);
  tr.get("batch_size", c.train.batch_size);
  tr.get("learning_rate", c.train.learning_rate);
  tr.get("val_fraction", c.val_fraction);
  tr.finish();

  Section ev(j, "evaluate");
  ev.get("folds", c.folds);
  std::string split(to_string(c.split));
  ev.get("split", split);
  c.split = parse_split_mode(split);
  ev.get("electrode_sets", c.electrode_sets);
  ev.get("models", c.models);
  ev.finish();
  return c;
}

namespace {

void check_electrode_spec(const std::string& spec) {
  // topk needs a ranking at run time; validate the syntax with a placeholder one.
  std::vector<ChannelScore> placeholder;
  for (const auto& n : Montage::standard20().names()) placeholder.push_back({n, 0.0});
  resolve_electrodes(spec, &placeholder);
}

}  // namespace

void PipelineConfig::validate() const {
  cohort_spec(*this).validate();
  eegconn::filter_preset(filter_preset);
  if (!(amp_limit_uv > 0.0)) throw ConfigError("preprocess.amp_limit_uv must be positive");
  if (!(flat_window_s > 0.0)) throw ConfigError("preprocess.flat_window_s must be positive");
  if (!(baseline_start_ms >= 0.0 && baseline_start_ms < baseline_end_ms)) {
    throw ConfigError("preprocess.baseline_ms must satisfy 0 <= start < end");
  }
  if (baseline_end_ms > (lead_in_s + round_s * static_cast<double>(cohort_spec(*this).rounds.size())) * 1000.0) {
    throw ConfigError("preprocess.baseline_ms ends after the recording");
  }
  if (!(ica_corr_threshold > 0.0 && ica_corr_threshold <= 1.0)) throw ConfigError("preprocess.ica_corr_threshold must lie in (0, 1]");
  if (ica_fit_stride == 0 || ica_max_iter == 0 || !(ica_tol > 0.0)) throw ConfigError("preprocess ICA settings must be positive");
  if (bands.empty()) throw ConfigError("connect.bands must not be empty");
  for (const auto& b : bands) {
    if (b == "broadband") continue;
    const auto& std_bands = standard_bands();
    if (std::none_of(std_bands.begin(), std_bands.end(), [&](const auto& d) { return d.name == b; })) {
      throw ConfigError("unknown band '" + b + "' (broadband, delta, theta, alpha, beta, gamma)");
    }
  }
  if (std::count(bands.begin(), bands.end(), "broadband") != 1) throw ConfigError("connect.bands must list broadband exactly once");
  const std::size_t max_edges = edge_count(Montage::kSize);
  for (auto k : edge_sets) {
    if (k == 0 || k > max_edges) throw ConfigError("connect.edge_sets entries must lie in [1, " + std::to_string(max_edges) + "]");
  }
  if (!(psd_segment_s > 0.0)) throw ConfigError("connect.psd_segment_s must be positive");
  if (select_top_edges == 0 || select_top_edges > max_edges) throw ConfigError("select.top_edges out of range");
  if (select_channels == 0 || select_channels > Montage::kSize) throw ConfigError("select.channels must lie in [1, 20]");
  dataset.validate();
  if (dataset.window_s * cohort_spec(*this).sampling_rate / static_cast<double>(dataset.decimation) < 32.0) {
    throw ConfigError("dataset window is too short after decimation");
  }
  if (dataset.window_s > round_s) throw ConfigError("dataset.window_s is longer than a round");
  for (const auto& m : evaluation_models()) nn::model_spec_by_name(m, 8, 250, 62, 0);
  nn::model_spec_by_name(model, 8, 250, 62, 0);
  if (dataset.input == InputKind::connectivity) {
    for (const auto& m : evaluation_models()) {
      if (m != "mlp") throw ConfigError("connectivity input only fits the mlp model");
    }
    if (model != "mlp") throw ConfigError("connectivity input only fits the mlp model");
  }
  if (train.epochs == 0 || train.batch_size == 0) throw ConfigError("train.epochs and train.batch_size must be positive");
  if (!(train.learning_rate >= 0.0) || !std::isfinite(train.learning_rate)) throw ConfigError("train.learning_rate must be finite and >= 0");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("train.val_fraction must lie in (0, 1)");
  check_electrode_spec(electrodes);
  if (folds < 2) throw ConfigError("evaluate.folds must be >= 2");
  if (split == SplitMode::subject && folds > n_subjects) throw ConfigError("evaluate.folds exceeds the subject count");
  if (electrode_sets.empty()) throw ConfigError("evaluate.electrode_sets must not be empty");
  for (const auto& e : electrode_sets) check_electrode_spec(e);
}

std::string PipelineConfig::hash() const {
  const std::string text = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::size_t PipelineConfig::temporal_kernel() const {
  const double fs = cohort_spec(*this).sampling_rate / static_cast<double>(dataset.decimation);
  return std::max<std::size_t>(1, static_cast<std::size_t>(fs / 2.0));
}

std::vector<std::string> PipelineConfig::evaluation_models() const { return models.empty() ? std::vector<std::string>{model} : models; }

CohortSpec cohort_spec(const PipelineConfig& cfg) {
  auto spec = default_cohort_spec(cfg.seed);
  spec.n_subjects = cfg.n_subjects;
  spec.n_female = cfg.n_female;
  spec.lead_in_s = cfg.lead_in_s;
  for (auto& r : spec.rounds) r.duration_s = cfg.round_s;
  return spec;
}

PreprocessConfig preprocess_config(const PipelineConfig& cfg, std::size_t subject_index) {
  PreprocessConfig p;
  p.filters = filter_preset(cfg.filter_preset);
  p.amp_limit_uv = cfg.amp_limit_uv;
  p.flat_window_s = cfg.flat_window_s;
  p.baseline_start_ms = cfg.baseline_start_ms;
  p.baseline_end_ms = cfg.baseline_end_ms;
  p.run_ica = cfg.run_ica;
  p.ica_corr_threshold = cfg.ica_corr_threshold;
  p.ica.fit_stride = cfg.ica_fit_stride;
  p.ica.max_iter = cfg.ica_max_iter;
  p.ica.tol = cfg.ica_tol;
  p.ica.seed = derive_seed(cfg.seed, "ica", subject_index);
  return p;
}

std::vector<PreprocessResult> preprocess_cohort(const std::vector<Recording>& recordings, const PipelineConfig& cfg) {
  std::vector<PreprocessResult> out;
  for (std::size_t i = 0; i < recordings.size(); ++i) {
    try {
      out.push_back(preprocess(recordings[i], Montage::standard20(), preprocess_config(cfg, i)));
    } catch (const DataError& e) {
      throw DataError(recordings[i].subject_id + ": " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError(recordings[i].subject_id + ": " + e.what());
    }
  }
  return out;
}

std::vector<ConnectivityResult> connectivity_stage(const std::vector<Recording>& recordings, const PipelineConfig& cfg) {
  if (recordings.empty()) throw DataError("no recordings for the connectivity stage");
  std::vector<ConnectivityResult> results;
  const auto perf = mean_performance_by_difficulty(recordings);
  const auto weights = difficulty_weights(perf);
  for (const auto& band : cfg.bands) {
    ConnectivityResult r;
    r.band = band;
    r.mean_performance = perf;
    r.weights = weights;
    for (const auto& rec : recordings) {
      std::vector<ConnectivityMatrix> ms;
      if (band == "broadband") {
        ms = round_matrices(rec, band);
      } else {
        const auto& defs = standard_bands();
        const auto def = *std::find_if(defs.begin(), defs.end(), [&](const auto& d) { return d.name == band; });
        ms = round_matrices(band_decompose(rec, {def}).at(band), band);
      }
      r.matrices.insert(r.matrices.end(), std::make_move_iterator(ms.begin()), std::make_move_iterator(ms.end()));
    }
    r.embedding = build_embedding(r.matrices);
    r.aggregate = aggregate(r.matrices, cfg.aggregation, weights);
    r.by_cohort = aggregate_by_cohort(r.matrices);
    r.signs = split_by_sign(r.aggregate);
    for (auto k : cfg.edge_sets) r.top_edges.emplace_back(k, top_k_edges(r.aggregate, k));
    results.push_back(std::move(r));
  }
  return results;
}

ChannelSelection selection_stage(const ConnectivityResult& result, const PipelineConfig& cfg) {
  return select_channels(result.aggregate, cfg.select_top_edges, cfg.select_channels);
}

std::vector<LabeledTrial> label_stage(const std::vector<Recording>& recordings, const PipelineConfig& cfg) {
  return label_rounds(recordings, {cfg.invert_tlx, cfg.per_task_quartiles});
}

EpochDataset dataset_stage(const std::vector<Recording>& recordings, const std::vector<LabeledTrial>& trials,
                           const PipelineConfig& cfg) {
  auto opt = cfg.dataset;
  opt.channels.clear();
  return build_epoch_dataset(recordings, trials, opt);
}

NeuralOptions neural_options(const PipelineConfig& cfg, const std::string& model) {
  NeuralOptions o;
  o.model = model;
  o.kernel = cfg.temporal_kernel();
  o.train = cfg.train;
  o.standardize = cfg.dataset.input == InputKind::raw;
  return o;
}

json cohort_psd(const std::vector<Recording>& recordings, const PipelineConfig& cfg) {
  if (recordings.empty()) throw DataError("no recordings for the PSD");
  WelchParams params{cfg.psd_segment_s, 0.5};
  PsdEstimate mean;
  for (const auto& rec : recordings) {
    const auto p = welch_psd(rec, params);
    if (mean.power.empty()) {
      mean = p;
      for (auto& row : mean.power) std::fill(row.begin(), row.end(), 0.0);
    }
    if (p.freqs_hz != mean.freqs_hz) throw DataError("recordings disagree on the PSD grid");
    for (std::size_t c = 0; c < p.power.size(); ++c) {
      for (std::size_t f = 0; f < p.power[c].size(); ++f) mean.power[c][f] += p.power[c][f] / static_cast<double>(recordings.size());
    }
  }
  json channels = json::array();
  for (std::size_t c = 0; c < mean.channels.size(); ++c) {
    channels.push_back({{"channel", mean.channels[c]}, {"freqs_hz", mean.freqs_hz}, {"psd", mean.power[c]}});
  }
  return {{"kind", "psd"},
          {"unit", "uV^2/Hz"},
          {"params",
           {{"sampling_rate_hz", mean.sampling_rate},
            {"segment_length", mean.segment_length},
            {"overlap", mean.overlap},
            {"window", mean.window},
            {"recordings", recordings.size()}}},
          {"channels", channels}};
}

}  // namespace eegconn

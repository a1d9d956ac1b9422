#include "eegconn/commands.hpp"

#include <fstream>
#include <ostream>
#include <set>

#include "eegconn/errors.hpp"
#include "eegconn/io_util.hpp"
#include "eegconn/rng.hpp"

namespace eegconn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void log(const RunContext& run, const std::string& line) {
  if (run.log) *run.log << line << std::endl;
}

json stamp(const PipelineConfig& cfg, const std::string& command) {
  return {{"command", command}, {"config_hash", cfg.hash()}, {"version", EEGCONN_VERSION}};
}

void write_json(const fs::path& path, json j, const PipelineConfig& cfg, const RunContext& run, const std::string& command) {
  if (run.stamp && j.is_object()) j["stamp"] = stamp(cfg, command);
  write_text(path, j.dump(1) + "\n");
}

json read_json(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw DataError("missing " + path.string() + ": run `eegconn " + producer + "` (cmd_" + producer + ") first");
  }
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + " is not valid JSON: " + e.what());
  }
}

// Stage directories carry an ordered recording list next to the CSVs.
void write_recordings(const std::vector<Recording>& recs, const fs::path& dir) {
  json names = json::array();
  for (const auto& r : recs) {
    save_recording(r, dir / (r.subject_id + ".csv"));
    names.push_back(r.subject_id + ".csv");
  }
  write_text(dir / "recordings.json", json{{"recordings", names}}.dump(1) + "\n");
}

std::vector<fs::path> recording_paths(const fs::path& dir, const std::string& producer) {
  const auto j = read_json(dir / "recordings.json", producer);
  std::vector<fs::path> out;
  for (const auto& n : j.at("recordings")) out.push_back(dir / n.get<std::string>());
  return out;
}

std::vector<Recording> read_recordings(const fs::path& dir, const std::string& producer, const RunContext& run) {
  std::vector<Recording> out;
  for (const auto& p : recording_paths(dir, producer)) {
    log(run, "  loading " + p.filename().string());
    out.push_back(load_recording(p));
  }
  return out;
}

std::vector<LabeledTrial> read_labels(const RunContext& run) {
  const auto path = run.out / "label" / "labels.csv";
  if (!fs::exists(path)) throw DataError("missing " + path.string() + ": run `eegconn label` (cmd_label) first");
  return labels_from_csv(read_text(path));
}

std::vector<ChannelScore> read_ranking(const RunContext& run) {
  const auto j = read_json(run.out / "select" / "selection.json", "select");
  std::vector<ChannelScore> out;
  for (const auto& e : j.at("ranking")) out.push_back({e.at("channel").get<std::string>(), e.at("score").get<double>()});
  return out;
}

std::vector<std::string> electrodes_for(const std::string& spec, const RunContext& run) {
  if (spec.starts_with("topk:")) {
    const auto ranking = read_ranking(run);
    return resolve_electrodes(spec, &ranking);
  }
  return resolve_electrodes(spec);
}

json ranking_json(const std::vector<ChannelScore>& ranking) {
  json arr = json::array();
  for (const auto& s : ranking) arr.push_back({{"channel", s.channel}, {"score", s.score}});
  return arr;
}

}  // namespace

void cmd_synth(const PipelineConfig& cfg, const RunContext& run) {
  cfg.validate();
  const auto spec = cohort_spec(cfg);
  log(run, "synth: generating " + std::to_string(spec.n_subjects) + " subjects");
  const auto [recs, truth] = generate_cohort(spec);
  const auto dir = run.out / "cohort";
  write_recordings(recs, dir);
  write_json(dir / "ground_truth.json", truth.to_json(), cfg, run, "synth");
  write_json(dir / "cohort_spec.json", spec.to_json(), cfg, run, "synth");
}

void cmd_preprocess(const PipelineConfig& cfg, const RunContext& run) {
  cfg.validate();
  const auto paths = recording_paths(run.out / "cohort", "synth");
  const auto dir = run.out / "preprocessed";
  json entries = json::array();
  std::vector<Recording> cleaned;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    log(run, "preprocess: " + paths[i].filename().string());
    const auto rec = load_recording(paths[i]);
    PreprocessResult res;
    try {
      res = preprocess(rec, Montage::standard20(), preprocess_config(cfg, i));
    } catch (const DataError& e) {
      throw DataError(rec.subject_id + ": " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError(rec.subject_id + ": " + e.what());
    }
    json channels = json::object();
    for (std::size_t c = 0; c < res.corruption.channels.size(); ++c) {
      const auto& ch = res.corruption.channels[c];
      if (ch.intervals.empty() && !ch.whole_channel) continue;
      json iv = json::array();
      for (const auto& [a, b] : ch.intervals) iv.push_back({a, b});
      channels[rec.channels[c]] = {{"intervals", iv}, {"whole_channel", ch.whole_channel}};
    }
    json rejected = json::array();
    for (std::size_t k = 0; k < res.rejected_components.size(); ++k) {
      if (res.rejected_components[k]) rejected.push_back({{"component", k}, {"reason", res.rejection_reasons[k]}});
    }
    entries.push_back({{"subject_id", rec.subject_id},
                       {"corruption", channels},
                       {"ica_converged", res.ica_converged},
                       {"ica_iterations", res.ica_iterations},
                       {"rejected_components", rejected}});
    cleaned.push_back(std::move(res.recording));
  }
  write_recordings(cleaned, dir);
  write_json(dir / "preprocess_log.json", {{"kind", "preprocess_log"}, {"subjects", entries}}, cfg, run, "preprocess");
}

void cmd_connect(const PipelineConfig& cfg, const RunContext& run) {
  cfg.validate();
  const auto recs = read_recordings(run.out / "preprocessed", "preprocess", run);
  log(run, "connect: per-round matrices");
  const auto results = connectivity_stage(recs, cfg);
  const auto dir = run.out / "connect";
  for (const auto& r : results) {
    const auto bdir = dir / r.band;
    json mats = json::array();
    for (const auto& m : r.matrices) mats.push_back(to_json(m));
    write_json(bdir / "matrices.json", {{"kind", "connectivity_matrices"}, {"band", r.band}, {"matrices", mats}}, cfg, run, "connect");

    json lists = json::array();
    for (const auto& l : r.embedding.lists) {
      json edges = json::array();
      for (const auto& e : l.edges) edges.push_back({e.a, e.b, e.weight});
      lists.push_back({{"provenance", to_json(l.provenance)}, {"edges", edges}});
    }
    write_json(bdir / "embedding.json", {{"kind", "correlation_embedding"}, {"channels", r.embedding.channels}, {"lists", lists}},
               cfg, run, "connect");

    auto agg = to_json(r.aggregate);
    agg["mean_performance_by_difficulty"] = r.mean_performance;
    agg["difficulty_weights"] = r.weights;
    write_json(bdir / "aggregate.json", agg, cfg, run, "connect");
    write_text(bdir / "aggregate.csv", matrix_to_csv(r.aggregate));
    for (const auto& [g, m] : r.by_cohort) {
      write_json(bdir / ("aggregate_" + std::string(to_string(g)) + ".json"), to_json(m), cfg, run, "connect");
    }
    write_json(bdir / "sign_split.json",
               {{"kind", "sign_split"}, {"positive", to_json(r.signs.positive)}, {"negative", to_json(r.signs.negative)}}, cfg,
               run, "connect");
    for (const auto& [k, edges] : r.top_edges) {
      write_json(bdir / ("edges_top" + std::to_string(k) + ".json"),
                 {{"kind", "edge_set"}, {"band", r.band}, {"k", k}, {"mode", to_string(cfg.aggregation)}, {"edges", to_json(edges)}},
                 cfg, run, "connect");
    }
  }
  log(run, "connect: PSD");
  write_json(dir / "psd.json", cohort_psd(recs, cfg), cfg, run, "connect");
}

void cmd_select(const PipelineConfig& cfg, const RunContext& run) {
  cfg.validate();
  const auto agg = matrix_from_json(read_json(run.out / "connect" / "broadband" / "aggregate.json", "connect"));
  ConnectivityResult r;
  r.aggregate = agg;
  const auto sel = selection_stage(r, cfg);
  write_json(run.out / "select" / "selection.json",
             {{"kind", "channel_selection"},
              {"top_edges", sel.top_k_edges},
              {"edges", to_json(sel.edges)},
              {"ranking", ranking_json(sel.ranking)},
              {"selected", sel.selected}},
             cfg, run, "select");
}

void cmd_label(const PipelineConfig& cfg, const RunContext& run) {
  cfg.validate();
  std::vector<Recording> meta;
  for (const auto& p : recording_paths(run.out / "preprocessed", "preprocess")) meta.push_back(load_recording_meta(p));
  const auto trials = label_stage(meta, cfg);
  std::vector<double> scores;
  std::array<std::size_t, 3> counts{};
  for (const auto& t : trials) {
    scores.push_back(t.score);
    ++counts[static_cast<std::size_t>(t.state)];
  }
  json summary = {{"kind", "label_summary"},
                  {"trials", trials.size()},
                  {"counts", {{"low", counts[0]}, {"transition", counts[1]}, {"high", counts[2]}}},
                  {"invert_tlx", cfg.invert_tlx},
                  {"per_task_quartiles", cfg.per_task_quartiles}};
  if (!cfg.per_task_quartiles) {
    const auto q = cohort_quartiles(scores);
    summary["q1"] = q.q1;
    summary["q3"] = q.q3;
  }
  write_text(run.out / "label" / "labels.csv", labels_to_csv(trials));
  write_json(run.out / "label" / "summary.json", summary, cfg, run, "label");
}

void cmd_train(const PipelineConfig& cfg, const RunContext& run) {
  cfg.validate();
  const auto trials = read_labels(run);
  const auto channels = electrodes_for(cfg.electrodes, run);
  const auto recs = read_recordings(run.out / "preprocessed", "preprocess", run);
  auto data = dataset_stage(recs, trials, cfg);
  if (data.input == InputKind::raw) data = data.select_channels(channels);

  // Hold out whole subjects for the validation curves.
  std::set<std::string> subjects(data.groups.begin(), data.groups.end());
  if (subjects.size() < 2) throw DataError("train needs at least two subjects for a held-out split");
  const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(1.0 / cfg.val_fraction)), 2, subjects.size());
  const auto plan = make_fold_plan(data, k, SplitMode::subject, derive_seed(cfg.seed, "train.split"));
  auto train_set = data.subset(plan.folds[0].train);
  auto val_set = data.subset(plan.folds[0].test);

  const auto opts = neural_options(cfg, cfg.model);
  ChannelScaler scaler;
  if (opts.standardize) {
    scaler = ChannelScaler::fit(train_set.data);
    scaler.apply(train_set.data);
    scaler.apply(val_set.data);
  }
  const auto s = train_set.data.sample_shape;
  const auto spec = nn::model_spec_by_name(cfg.model, s[1], s[2], opts.kernel, derive_seed(cfg.seed, "train.init"));
  auto model = nn::Model::build(spec);
  auto tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "train.fit");
  log(run, "train: " + cfg.model + " on " + std::to_string(train_set.size()) + " epochs, " + std::to_string(val_set.size()) +
               " held out");
  const auto result = nn::train(model, train_set.data, &val_set.data, tc);

  const auto dir = run.out / "train";
  auto spec_json = spec.to_json();
  spec_json["channels"] = data.channels;
  write_json(dir / "model_spec.json", spec_json, cfg, run, "train");
  auto params = nn::ParameterSet::capture(model, nullptr);
  params.optimizer_steps = result.optimizer_steps;
  params.save(dir / "params");
  write_json(dir / "scaler.json", {{"kind", "channel_scaler"}, {"channels", data.channels}, {"mean", scaler.mean}, {"scale", scaler.scale}},
             cfg, run, "train");
  write_json(dir / "curves.json",
             {{"kind", "training_curves"}, {"model", cfg.model}, {"electrodes", cfg.electrodes}, {"curves", nn::curves_to_json(result.curves)}},
             cfg, run, "train");
}

void cmd_evaluate(const PipelineConfig& cfg, const RunContext& run) {
  cfg.validate();
  const auto trials = read_labels(run);
  std::vector<ElectrodeSet> sets;
  for (const auto& e : cfg.electrode_sets) sets.push_back({e, electrodes_for(e, run)});
  const auto recs = read_recordings(run.out / "preprocessed", "preprocess", run);
  const auto data = dataset_stage(recs, trials, cfg);
  const auto plan = make_fold_plan(data, cfg.folds, cfg.split, derive_seed(cfg.seed, "cv"));

  json reports = json::array();
  std::string csv = report_csv_header();
  for (const auto& m : cfg.evaluation_models()) {
    const auto opts = neural_options(cfg, m);
    const ClassifierFactory make = [opts] { return std::make_unique<NeuralClassifier>(opts); };
    for (const auto& set : sets) {
      log(run, "evaluate: " + m + " on " + set.id);
      const auto sliced = data.input == InputKind::raw ? data.select_channels(set.channels) : data;
      auto report = evaluate_cv(make, sliced, plan, set.id, [&](const FoldResult& f) {
        log(run, "  fold " + std::to_string(f.fold) + " accuracy_top1 " + format_double(f.accuracy_top1));
      });
      report.model_id = m;
      reports.push_back(report.to_json());
      csv += report_csv_row(report);
    }
  }
  const auto dir = run.out / "evaluate";
  write_json(dir / "report.json", {{"kind", "evaluation_reports"}, {"reports", reports}}, cfg, run, "evaluate");
  write_text(dir / "report.csv", csv);
  write_json(dir / "fold_plan.json", plan.to_json(), cfg, run, "evaluate");
}

void cmd_report(const PipelineConfig& cfg, const RunContext& run) {
  cfg.validate();
  struct Item {
    fs::path src;
    std::string producer;
  };
  std::vector<Item> items = {{run.out / "cohort" / "ground_truth.json", "synth"},
                             {run.out / "preprocessed" / "preprocess_log.json", "preprocess"},
                             {run.out / "connect" / "psd.json", "connect"},
                             {run.out / "select" / "selection.json", "select"},
                             {run.out / "label" / "summary.json", "label"},
                             {run.out / "train" / "curves.json", "train"},
                             {run.out / "train" / "model_spec.json", "train"},
                             {run.out / "evaluate" / "report.json", "evaluate"},
                             {run.out / "evaluate" / "fold_plan.json", "evaluate"}};
  for (const auto& band : cfg.bands) {
    const auto bdir = run.out / "connect" / band;
    for (const char* f : {"aggregate.json", "aggregate_male.json", "aggregate_female.json", "sign_split.json"}) {
      items.push_back({bdir / f, "connect"});
    }
    for (auto k : cfg.edge_sets) items.push_back({bdir / ("edges_top" + std::to_string(k) + ".json"), "connect"});
  }
  if (!fs::exists(run.out / "connect" / "broadband" / "aggregate.json")) {
    throw DataError("missing " + (run.out / "connect").string() + ": run `eegconn connect` (cmd_connect) first");
  }
  const auto dir = run.out / "report";
  json index = json::array();
  for (const auto& it : items) {
    if (!fs::exists(it.src)) continue;
    const auto rel = fs::relative(it.src, run.out);
    std::string flat = rel.generic_string();
    std::replace(flat.begin(), flat.end(), '/', '_');
    auto j = read_json(it.src, it.producer);
    write_text(dir / flat, j.dump(1) + "\n");
    index.push_back({{"file", flat}, {"source", rel.generic_string()}, {"producer", it.producer},
                     {"kind", j.is_object() ? j.value("kind", "") : ""}});
  }
  json montage = json::array();
  for (const auto& c : Montage::standard20().channels()) {
    montage.push_back({{"name", c.name}, {"x", c.x}, {"y", c.y}, {"hemisphere", to_string(c.hemisphere)}, {"lobe", to_string(c.lobe)}});
  }
  write_json(dir / "montage.json", {{"kind", "montage"}, {"channels", montage}}, cfg, run, "report");
  index.push_back({{"file", "montage.json"}, {"source", ""}, {"producer", "report"}, {"kind", "montage"}});
  write_json(dir / "index.json", {{"kind", "report_index"}, {"schema_version", 1}, {"artifacts", index}}, cfg, run, "report");
}

void run_command(const std::string& name, const PipelineConfig& cfg, const RunContext& run) {
  if (name == "synth") return cmd_synth(cfg, run);
  if (name == "preprocess") return cmd_preprocess(cfg, run);
  if (name == "connect") return cmd_connect(cfg, run);
  if (name == "select") return cmd_select(cfg, run);
  if (name == "label") return cmd_label(cfg, run);
  if (name == "train") return cmd_train(cfg, run);
  if (name == "evaluate") return cmd_evaluate(cfg, run);
  if (name == "report") return cmd_report(cfg, run);
  throw ConfigError("unknown command '" + name + "'");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const NumericalError*>(&e)) return 4;
  return 1;
}

}  // namespace eegconn

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "eegconn/commands.hpp"
#include "eegconn/errors.hpp"
#include "eegconn/io_util.hpp"

using namespace eegconn;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> filter_preset, electrodes, model, split, input;
  std::optional<std::size_t> folds, subjects, females, epochs;
  std::optional<double> round_s;
};

PipelineConfig load_config(const Overrides& o) {
  PipelineConfig cfg;
  if (!o.config.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text(o.config));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(o.config + ": " + e.what());
    }
    cfg = PipelineConfig::from_json(j);
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.filter_preset) cfg.filter_preset = *o.filter_preset;
  if (o.electrodes) cfg.electrodes = *o.electrodes;
  if (o.model) {
    cfg.model = *o.model;
    cfg.models.clear();
  }
  if (o.folds) cfg.folds = *o.folds;
  if (o.split) cfg.split = parse_split_mode(*o.split);
  if (o.input) cfg.dataset.input = parse_input_kind(*o.input);
  if (o.subjects) {
    // keep the default 9:21 split unless given explicitly
    cfg.n_subjects = *o.subjects;
    cfg.n_female = (*o.subjects * 9 + 15) / 30;
  }
  if (o.females) cfg.n_female = *o.females;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.round_s) cfg.round_s = *o.round_s;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Connectivity-guided channel selection and workload classification for 20-channel EEG"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  std::string out = "run";
  bool no_stamp = false;
  bool quiet = false;
  app.add_option("--config", o.config, "JSON pipeline config")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Root seed");
  app.add_option("--out", out, "Run directory")->capture_default_str();
  app.add_option("--filter-preset", o.filter_preset, "default | text-2022 | alg1");
  app.add_option("--electrodes", o.electrodes, "all20 | ref8 | topk:<n> | comma list");
  app.add_option("--model", o.model, "mlp | eegnet | mha-eegnet");
  app.add_option("--folds", o.folds, "Cross-validation folds");
  app.add_option("--split", o.split, "subject | epoch");
  app.add_option("--input", o.input, "raw | connectivity");
  app.add_option("--subjects", o.subjects, "Synthetic cohort size");
  app.add_option("--females", o.females, "Female subjects in the synthetic cohort");
  app.add_option("--round-s", o.round_s, "Synthetic round length in seconds");
  app.add_option("--epochs", o.epochs, "Training epochs");
  app.add_flag("--no-stamp", no_stamp, "Omit config hash and version from artifacts");
  app.add_flag("-q,--quiet", quiet, "No progress output");

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"synth", "Generate the synthetic cohort with planted ground truth"},
      {"preprocess", "Filter, mark corruption, remove ocular components, baseline-correct"},
      {"connect", "Per-round correlation matrices, aggregates, edge sets, PSD"},
      {"select", "Rank channels from the aggregated network"},
      {"label", "Derive three-class workload labels"},
      {"train", "Fit one model with held-out validation curves"},
      {"evaluate", "Cross-validated comparison of electrode sets"},
      {"report", "Bundle JSON artifacts for plotting"},
      {"config", "Print the effective config as JSON"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto cfg = load_config(o);
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "config") {
      std::cout << cfg.to_json().dump(2) << "\n";
      return 0;
    }
    RunContext run{out, !no_stamp, quiet ? nullptr : &std::cerr};
    run_command(name, cfg, run);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

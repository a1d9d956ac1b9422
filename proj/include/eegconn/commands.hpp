#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "eegconn/pipeline.hpp"

namespace eegconn {

/// Run directory layout, one folder per command:
///   cohort/ preprocessed/ connect/ select/ label/ train/ evaluate/ report/
struct RunContext {
  std::filesystem::path out = "run";
  bool stamp = true;         // config hash + toolkit version in every JSON artifact
  std::ostream* log = nullptr;  // progress lines; never part of an artifact
};

void cmd_synth(const PipelineConfig& cfg, const RunContext& run);
void cmd_preprocess(const PipelineConfig& cfg, const RunContext& run);
void cmd_connect(const PipelineConfig& cfg, const RunContext& run);
void cmd_select(const PipelineConfig& cfg, const RunContext& run);
void cmd_label(const PipelineConfig& cfg, const RunContext& run);
void cmd_train(const PipelineConfig& cfg, const RunContext& run);
void cmd_evaluate(const PipelineConfig& cfg, const RunContext& run);
void cmd_report(const PipelineConfig& cfg, const RunContext& run);

// Dispatch by name ("synth", ..., "report"); ConfigError for unknown names.
void run_command(const std::string& name, const PipelineConfig& cfg, const RunContext& run);

// 2 config, 3 data/parse, 4 numerical, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace eegconn

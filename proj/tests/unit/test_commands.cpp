#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "eegconn/commands.hpp"
#include "eegconn/errors.hpp"
#include "eegconn/io_util.hpp"

using namespace eegconn;
namespace fs = std::filesystem;

namespace {

PipelineConfig tiny_config() {
  PipelineConfig c;
  c.seed = 11;
  c.n_subjects = 4;
  c.n_female = 1;
  c.round_s = 12;
  c.lead_in_s = 6;
  c.folds = 2;
  c.train.epochs = 2;
  c.dataset.epochs_per_round = 2;
  c.edge_sets = {10, 20};
  return c;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("eegconn_cmd_" + name);
  fs::remove_all(p);
  return p;
}

void run_all(const PipelineConfig& cfg, const RunContext& run) {
  for (const char* c : {"synth", "preprocess", "connect", "select", "label", "train", "evaluate", "report"}) {
    run_command(c, cfg, run);
  }
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_text(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("command chain is byte-for-byte reproducible for a fixed seed") {
  const auto cfg = tiny_config();
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  run_all(cfg, {a, true, nullptr});
  run_all(cfg, {b, true, nullptr});
  const auto sa = snapshot(a);
  const auto sb = snapshot(b);
  REQUIRE(sa.size() == sb.size());
  for (const auto& [name, content] : sa) {
    INFO(name);
    REQUIRE(sb.count(name) == 1);
    CHECK_MESSAGE(content == sb.at(name), "contents differ");
  }
  for (const char* f : {"cohort/ground_truth.json", "preprocessed/preprocess_log.json", "connect/psd.json",
                        "connect/broadband/aggregate.json", "connect/broadband/edges_top10.json",
                        "select/selection.json", "label/labels.csv", "train/model_spec.json", "train/params.bin",
                        "train/curves.json", "evaluate/report.json", "evaluate/report.csv", "report/index.json"}) {
    INFO(f);
    CHECK(sa.count(f) == 1);
  }

  {  // "stamps carry the config hash"
    const auto j = nlohmann::json::parse(sa.at("select/selection.json"));
    CHECK(j.at("stamp").at("config_hash") == cfg.hash());
  }
  {  // "a different seed changes the cohort"
    auto other = cfg;
    other.seed = 12;
    const auto c = scratch("det_c");
    cmd_synth(other, {c, true, nullptr});
    CHECK(read_text(c / "cohort" / "s01.csv") != sa.at("cohort/s01.csv"));
    fs::remove_all(c);
  }
  {  // "trained parameters restore into the saved architecture"
    const auto spec = nn::ModelSpec::from_json(nlohmann::json::parse(sa.at("train/model_spec.json")));
    auto model = nn::Model::build(spec);
    const auto params = nn::ParameterSet::load(a / "train" / "params");
    CHECK_NOTHROW(params.restore(model));
  }
  {  // "report index lists existing files"
    const auto idx = nlohmann::json::parse(sa.at("report/index.json"));
    CHECK(idx.at("artifacts").size() >= 10);
    for (const auto& e : idx.at("artifacts")) CHECK(fs::exists(a / "report" / e.at("file").get<std::string>()));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("--no-stamp leaves artifacts without provenance fields") {
  auto cfg = tiny_config();
  cfg.n_subjects = 2;
  cfg.folds = 2;
  const auto d = scratch("nostamp");
  cmd_synth(cfg, {d, false, nullptr});
  const auto j = nlohmann::json::parse(read_text(d / "cohort" / "ground_truth.json"));
  CHECK_FALSE(j.contains("stamp"));
  fs::remove_all(d);
}

TEST_CASE("missing upstream artifacts name the command to run") {
  const auto cfg = tiny_config();
  const auto d = scratch("missing");
  auto message = [&](const std::string& cmd) -> std::string {
    try {
      run_command(cmd, cfg, {d, true, nullptr});
    } catch (const DataError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message("train").find("eegconn label") != std::string::npos);
  CHECK(message("evaluate").find("eegconn label") != std::string::npos);
  CHECK(message("preprocess").find("eegconn synth") != std::string::npos);
  CHECK(message("connect").find("eegconn preprocess") != std::string::npos);
  CHECK(message("select").find("eegconn connect") != std::string::npos);
  CHECK(message("report").find("eegconn connect") != std::string::npos);
  CHECK_THROWS_AS(run_command("bogus", cfg, {d, true, nullptr}), ConfigError);
  fs::remove_all(d);
}

TEST_CASE("exit codes follow the error taxonomy") {
  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(DataError("x")) == 3);
  CHECK(exit_code_for(ParseError("x", 1, "f")) == 3);
  CHECK(exit_code_for(NumericalError("x")) == 4);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}

#include "eegconn/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

#include "eegconn/errors.hpp"
#include "eegconn/io_util.hpp"
#include "eegconn/montage.hpp"

namespace eegconn {

using nlohmann::json;

std::string_view to_string(AggregationMode m) {
  switch (m) {
    case AggregationMode::overall_sum: return "overall_sum";
    case AggregationMode::mean: return "mean";
    case AggregationMode::weighted: return "weighted";
  }
  return "?";
}

AggregationMode parse_aggregation_mode(std::string_view s) {
  if (s == "overall_sum" || s == "sum") return AggregationMode::overall_sum;
  if (s == "mean") return AggregationMode::mean;
  if (s == "weighted") return AggregationMode::weighted;
  throw ConfigError("unknown aggregation mode '" + std::string(s) + "' (expected overall_sum, mean or weighted)");
}

std::vector<ConnectivityMatrix> round_matrices(const Recording& rec, const std::string& band) {
  std::vector<ConnectivityMatrix> out;
  for (const auto& round : rec.annotations) {
    const auto [first, last] = round_sample_range(rec, round);
    Provenance p;
    p.subject_id = rec.subject_id;
    p.gender = rec.gender;
    p.task = round.task;
    p.difficulty = round.difficulty;
    p.band = band;
    try {
      out.push_back(connectivity_matrix(rec.samples.slice(first, last - first), rec.channels, p));
    } catch (const NumericalError& e) {
      throw NumericalError(rec.subject_id + " " + std::string(to_string(round.task)) + " difficulty " +
                      std::to_string(round.difficulty) + ": " + e.what());
    }
  }
  return out;
}

std::vector<double> mean_performance_by_difficulty(const std::vector<Recording>& recordings) {
  std::map<int, std::pair<double, std::size_t>> acc;
  for (const auto& rec : recordings) {
    for (const auto& r : rec.annotations) {
      acc[r.difficulty].first += r.performance;
      ++acc[r.difficulty].second;
    }
  }
  if (acc.empty()) throw DataError("no annotated rounds to average performance over");
  std::vector<double> out;
  for (const auto& [level, sum] : acc) out.push_back(sum.first / static_cast<double>(sum.second));
  return out;
}

ConnectivityMatrix aggregate(const std::vector<ConnectivityMatrix>& matrices, AggregationMode mode,
                             const std::vector<double>& difficulty_weights) {
  switch (mode) {
    case AggregationMode::overall_sum: return aggregate_sum(matrices);
    case AggregationMode::mean: return aggregate_mean(matrices);
    case AggregationMode::weighted: return aggregate_weighted(matrices, difficulty_weights);
  }
  throw ConfigError("bad aggregation mode");
}

ChannelSelection select_channels(const ConnectivityMatrix& agg, std::size_t k_edges, std::size_t n_channels) {
  if (n_channels == 0 || n_channels > agg.size()) {
    throw ConfigError("cannot select " + std::to_string(n_channels) + " of " + std::to_string(agg.size()) + " channels");
  }
  ChannelSelection sel;
  sel.top_k_edges = k_edges;
  sel.edges = top_k_edges(agg, k_edges);
  sel.ranking = rank_channels(sel.edges, agg.channels);
  for (std::size_t i = 0; i < n_channels; ++i) sel.selected.push_back(sel.ranking[i].channel);
  return sel;
}

namespace {

std::vector<std::string> in_montage_order(std::vector<std::string> names) {
  const auto& montage = Montage::standard20();
  std::vector<std::size_t> idx;
  for (const auto& n : names) idx.push_back(montage.require_index(n));
  std::sort(idx.begin(), idx.end());
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end()) throw ConfigError("electrode list repeats a channel");
  std::vector<std::string> out;
  for (auto i : idx) out.push_back(montage.channel(i).name);
  return out;
}

}  // namespace

std::vector<std::string> resolve_electrodes(std::string_view spec, const std::vector<ChannelScore>* ranking) {
  if (spec == "all20") return Montage::standard20().names();
  if (spec == "ref8") return in_montage_order({kReferenceEightElectrodes.begin(), kReferenceEightElectrodes.end()});
  if (spec.starts_with("topk:")) {
    const auto digits = spec.substr(5);
    std::size_t n = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || n == 0 || n > Montage::kSize) {
      throw ConfigError("electrode set '" + std::string(spec) + "' needs topk:<n> with 1 <= n <= 20");
    }
    if (!ranking) throw ConfigError("electrode set '" + std::string(spec) + "' needs a channel ranking (run select first)");
    if (ranking->size() < n) throw ConfigError("channel ranking has fewer than " + std::to_string(n) + " entries");
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back((*ranking)[i].channel);
    return in_montage_order(names);
  }
  std::vector<std::string> names;
  std::stringstream ss{std::string(spec)};
  for (std::string tok; std::getline(ss, tok, ',');) {
    tok = std::string(trim(tok));
    if (!tok.empty()) names.push_back(tok);
  }
  if (names.empty()) throw ConfigError("empty electrode set");
  return in_montage_order(names);
}

json to_json(const Provenance& p) {
  json j = {{"subject_id", p.subject_id}, {"band", p.band}};
  j["gender"] = p.gender ? json(to_string(*p.gender)) : json(nullptr);
  j["task"] = p.task ? json(to_string(*p.task)) : json(nullptr);
  j["difficulty"] = p.difficulty ? json(*p.difficulty) : json(nullptr);
  if (!p.mode.empty()) j["mode"] = p.mode;
  return j;
}

json to_json(const ConnectivityMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.size(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return {{"kind", "connectivity_matrix"}, {"channels", m.channels}, {"values", rows}, {"provenance", to_json(m.provenance)}};
}

ConnectivityMatrix matrix_from_json(const json& j) {
  try {
    ConnectivityMatrix m;
    m.channels = j.at("channels").get<std::vector<std::string>>();
    const auto& rows = j.at("values");
    if (rows.size() != m.size()) throw DataError("matrix row count does not match channel count");
    for (const auto& row : rows) {
      if (row.size() != m.size()) throw DataError("matrix is not square");
      for (const auto& v : row) m.values.push_back(v.get<double>());
    }
    const auto& p = j.at("provenance");
    m.provenance.subject_id = p.value("subject_id", "");
    m.provenance.band = p.value("band", "broadband");
    m.provenance.mode = p.value("mode", "");
    if (p.contains("gender") && !p["gender"].is_null()) m.provenance.gender = parse_gender(p["gender"].get<std::string>());
    if (p.contains("task") && !p["task"].is_null()) m.provenance.task = parse_task(p["task"].get<std::string>());
    if (p.contains("difficulty") && !p["difficulty"].is_null()) m.provenance.difficulty = p["difficulty"].get<int>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed connectivity matrix: ") + e.what());
  }
}

std::string matrix_to_csv(const ConnectivityMatrix& m) {
  std::string out = "channel";
  for (const auto& c : m.channels) out += "," + c;
  out += "\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += m.channels[i];
    for (std::size_t j = 0; j < m.size(); ++j) out += "," + format_double(m(i, j));
    out += "\n";
  }
  return out;
}

json to_json(const EdgeSet& edges) {
  json arr = json::array();
  for (const auto& e : edges) {
    arr.push_back({{"a", e.a}, {"b", e.b}, {"weight", e.weight}, {"sign", e.sign == EdgeSign::positive ? "positive" : "negative"}});
  }
  return arr;
}

}  // namespace eegconn

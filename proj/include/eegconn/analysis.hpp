#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "eegconn/connectivity.hpp"
#include "eegconn/recording.hpp"
#include "json.hpp"

namespace eegconn {

enum class AggregationMode { overall_sum, mean, weighted };

std::string_view to_string(AggregationMode m);
AggregationMode parse_aggregation_mode(std::string_view s);  // throws ConfigError

// One matrix per annotated round, provenance filled from the recording.
std::vector<ConnectivityMatrix> round_matrices(const Recording& rec, const std::string& band = "broadband");

/// Mean performance per difficulty level (levels ascending) over every
/// round of every recording.
std::vector<double> mean_performance_by_difficulty(const std::vector<Recording>& recordings);

ConnectivityMatrix aggregate(const std::vector<ConnectivityMatrix>& matrices, AggregationMode mode,
                             const std::vector<double>& difficulty_weights = {});

struct ChannelSelection {
  std::size_t top_k_edges = 0;
  EdgeSet edges;
  std::vector<ChannelScore> ranking;
  std::vector<std::string> selected;  // first n of ranking
};

/// Top-k edges by value, weighted-degree ranking, first n channels.
ChannelSelection select_channels(const ConnectivityMatrix& agg, std::size_t k_edges, std::size_t n_channels);

/// "all20", "ref8", "topk:<n>" (needs a ranking) or a comma-separated
/// channel list. Result is in montage order. Throws ConfigError.
std::vector<std::string> resolve_electrodes(std::string_view spec, const std::vector<ChannelScore>* ranking = nullptr);

nlohmann::json to_json(const ConnectivityMatrix& m);
ConnectivityMatrix matrix_from_json(const nlohmann::json& j);  // throws DataError
std::string matrix_to_csv(const ConnectivityMatrix& m);
nlohmann::json to_json(const EdgeSet& edges);
nlohmann::json to_json(const Provenance& p);

}  // namespace eegconn

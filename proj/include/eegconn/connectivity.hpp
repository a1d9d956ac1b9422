#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eegconn/recording.hpp"
#include "eegconn/types.hpp"

namespace eegconn {

/// Pearson correlation of two equal-length series.
/// Throws NumericalError when either input is constant, DataError on a length mismatch.
double pcc(std::span<const double> x, std::span<const double> y);

struct Provenance {
  std::string subject_id;
  std::optional<Gender> gender;
  std::optional<Task> task;
  std::optional<int> difficulty;
  std::string band = "broadband";
  std::string mode;  // aggregation mode for aggregates, empty for raw matrices
};

// Symmetric C x C matrix, row-major.
struct ConnectivityMatrix {
  std::vector<std::string> channels;
  std::vector<double> values;
  Provenance provenance;

  std::size_t size() const { return channels.size(); }
  double operator()(std::size_t i, std::size_t j) const { return values[i * channels.size() + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * channels.size() + j]; }
};

/// Entry (i, j) is the Pearson correlation of rows i and j. The diagonal is
/// exactly 1 and the result is exactly symmetric.
ConnectivityMatrix connectivity_matrix(const SignalMatrix& signals, const std::vector<std::string>& channels,
                                       Provenance provenance = {});

struct Edge {
  std::string a;  // a precedes b in channel order
  std::string b;
  double weight = 0.0;
  bool operator==(const Edge&) const = default;
};

// Lexicographic order on (a, b); the tie-break rule everywhere in this module.
bool pair_less(const Edge& x, const Edge& y);

struct EdgeList {
  Provenance provenance;
  std::vector<Edge> edges;  // descending weight
};

struct CorrelationEmbedding {
  std::vector<std::string> channels;
  std::vector<EdgeList> lists;  // one per input matrix, same order
};

/// Upper-triangle extraction sorted by correlation descending, ties broken
/// by channel-pair order. Throws DataError on inconsistent channel sets.
CorrelationEmbedding build_embedding(const std::vector<ConnectivityMatrix>& matrices);

/// w_i = P_i / sum_j P_j. Throws ConfigError on non-positive or empty input.
std::vector<double> difficulty_weights(std::span<const double> mean_performance);

// Aggregates are entrywise sums (not clamped). Summation uses a pairwise
// tree over the input order so results do not depend on chunking.
ConnectivityMatrix aggregate_sum(const std::vector<ConnectivityMatrix>& matrices);
ConnectivityMatrix aggregate_mean(const std::vector<ConnectivityMatrix>& matrices);
/// Weighted sum grouped by difficulty level: matrix m contributes
/// weights[level_index(m)], where levels are the sorted distinct difficulties.
ConnectivityMatrix aggregate_weighted(const std::vector<ConnectivityMatrix>& matrices,
                                      std::span<const double> weights);
std::map<Gender, ConnectivityMatrix> aggregate_by_cohort(const std::vector<ConnectivityMatrix>& matrices);

enum class EdgeSign { positive, negative };

struct SignedEdge {
  std::string a;
  std::string b;
  double weight = 0.0;
  EdgeSign sign = EdgeSign::positive;
};

using EdgeSet = std::vector<SignedEdge>;

struct SignSplit {
  EdgeSet positive;
  EdgeSet negative;
};

// Off-diagonal edges by sign, each sorted by |weight| descending; exact zeros dropped.
SignSplit split_by_sign(const ConnectivityMatrix& agg);

/// The k largest-valued edges, ties by channel-pair order.
/// Throws ConfigError unless 1 <= k <= C(C-1)/2.
EdgeSet top_k_edges(const ConnectivityMatrix& agg, std::size_t k);

struct ChannelScore {
  std::string channel;
  double score = 0.0;
};

/// Weighted degree: sum of |weight| over incident edges. Channels incident
/// to an edge come first (descending score, ties by name), then the remaining
/// `universe` channels with zero score in name order.
std::vector<ChannelScore> rank_channels(const EdgeSet& edges, const std::vector<std::string>& universe);

std::size_t edge_count(std::size_t channels);

}  // namespace eegconn

#include "eegconn/connectivity.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "eegconn/errors.hpp"

namespace eegconn {

double pcc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("pcc: inputs differ in length");
  if (x.size() < 2) throw DataError("pcc: need at least 2 samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericalError("pcc: correlation undefined for a constant input");
  return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

ConnectivityMatrix connectivity_matrix(const SignalMatrix& signals, const std::vector<std::string>& channels,
                                       Provenance provenance) {
  const std::size_t c = signals.channels();
  const std::size_t t = signals.samples();
  if (channels.size() != c) throw DataError("connectivity_matrix: channel names do not match rows");
  if (t < 2) throw DataError("connectivity_matrix: need at least 2 samples");

  Eigen::MatrixXd z(c, t);
  for (std::size_t i = 0; i < c; ++i) {
    auto row = signals.row(i);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(t);
    double ss = 0.0;
    for (std::size_t k = 0; k < t; ++k) {
      const double d = row[k] - mean;
      z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = d;
      ss += d * d;
    }
    if (ss == 0.0) throw NumericalError("connectivity_matrix: channel " + channels[i] + " is constant");
    z.row(static_cast<Eigen::Index>(i)) /= std::sqrt(ss);
  }
  const Eigen::MatrixXd gram = z * z.transpose();

  ConnectivityMatrix out{channels, std::vector<double>(c * c, 0.0), std::move(provenance)};
  for (std::size_t i = 0; i < c; ++i) {
    out(i, i) = 1.0;
    for (std::size_t j = i + 1; j < c; ++j) {
      const double r = std::clamp(gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), -1.0, 1.0);
      out(i, j) = r;
      out(j, i) = r;
    }
  }
  return out;
}

bool pair_less(const Edge& x, const Edge& y) {
  if (x.a != y.a) return x.a < y.a;
  return x.b < y.b;
}

std::size_t edge_count(std::size_t channels) { return channels * (channels - 1) / 2; }

namespace {

std::vector<Edge> upper_triangle(const ConnectivityMatrix& m) {
  std::vector<Edge> out;
  out.reserve(edge_count(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = i + 1; j < m.size(); ++j) out.push_back({m.channels[i], m.channels[j], m(i, j)});
  }
  return out;
}

void sort_descending(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    if (x.weight != y.weight) return x.weight > y.weight;
    return pair_less(x, y);
  });
}

void require_same_channels(const std::vector<ConnectivityMatrix>& matrices, const char* what) {
  if (matrices.empty()) throw ConfigError(std::string(what) + ": empty input");
  for (const auto& m : matrices) {
    if (m.channels != matrices.front().channels) throw DataError(std::string(what) + ": inconsistent channel sets");
    if (m.values.size() != m.size() * m.size()) throw DataError(std::string(what) + ": malformed matrix");
  }
}

// Pairwise tree reduction over [first, last) of the scaled inputs.
std::vector<double> tree_sum(const std::vector<ConnectivityMatrix>& m, std::span<const double> scale,
                             std::size_t first, std::size_t last) {
  if (last - first == 1) {
    std::vector<double> v = m[first].values;
    if (!scale.empty()) {
      for (double& x : v) x *= scale[first];
    }
    return v;
  }
  const std::size_t mid = first + (last - first) / 2;
  auto left = tree_sum(m, scale, first, mid);
  const auto right = tree_sum(m, scale, mid, last);
  for (std::size_t i = 0; i < left.size(); ++i) left[i] += right[i];
  return left;
}

ConnectivityMatrix make_aggregate(const std::vector<ConnectivityMatrix>& matrices, std::vector<double> values,
                                  std::string mode) {
  ConnectivityMatrix out;
  out.channels = matrices.front().channels;
  out.values = std::move(values);
  out.provenance.mode = std::move(mode);
  out.provenance.band = matrices.front().provenance.band;
  // keep fields that all inputs agree on
  const auto& p0 = matrices.front().provenance;
  bool same_task = true, same_gender = true, same_subject = true;
  for (const auto& m : matrices) {
    same_task = same_task && m.provenance.task == p0.task;
    same_gender = same_gender && m.provenance.gender == p0.gender;
    same_subject = same_subject && m.provenance.subject_id == p0.subject_id;
  }
  if (same_task) out.provenance.task = p0.task;
  if (same_gender) out.provenance.gender = p0.gender;
  out.provenance.subject_id = same_subject ? p0.subject_id : "*";
  return out;
}

}  // namespace

CorrelationEmbedding build_embedding(const std::vector<ConnectivityMatrix>& matrices) {
  CorrelationEmbedding emb;
  if (matrices.empty()) return emb;
  require_same_channels(matrices, "build_embedding");
  emb.channels = matrices.front().channels;
  for (const auto& m : matrices) {
    EdgeList list{m.provenance, upper_triangle(m)};
    sort_descending(list.edges);
    emb.lists.push_back(std::move(list));
  }
  return emb;
}

std::vector<double> difficulty_weights(std::span<const double> mean_performance) {
  if (mean_performance.empty()) throw ConfigError("difficulty_weights: no difficulty levels");
  double total = 0.0;
  for (double p : mean_performance) {
    if (!(p > 0.0)) throw ConfigError("difficulty_weights: performance must be positive");
    total += p;
  }
  std::vector<double> w;
  w.reserve(mean_performance.size());
  for (double p : mean_performance) w.push_back(p / total);
  return w;
}

ConnectivityMatrix aggregate_sum(const std::vector<ConnectivityMatrix>& matrices) {
  require_same_channels(matrices, "aggregate");
  return make_aggregate(matrices, tree_sum(matrices, {}, 0, matrices.size()), "overall_sum");
}

ConnectivityMatrix aggregate_mean(const std::vector<ConnectivityMatrix>& matrices) {
  require_same_channels(matrices, "aggregate");
  auto v = tree_sum(matrices, {}, 0, matrices.size());
  for (double& x : v) x /= static_cast<double>(matrices.size());
  return make_aggregate(matrices, std::move(v), "mean");
}

ConnectivityMatrix aggregate_weighted(const std::vector<ConnectivityMatrix>& matrices,
                                      std::span<const double> weights) {
  require_same_channels(matrices, "aggregate");
  std::set<int> levels;
  for (const auto& m : matrices) {
    if (!m.provenance.difficulty) throw ConfigError("aggregate: weighted mode needs difficulty provenance");
    levels.insert(*m.provenance.difficulty);
  }
  if (levels.size() != weights.size()) {
    throw ConfigError("aggregate: " + std::to_string(weights.size()) + " weights for " +
                      std::to_string(levels.size()) + " difficulty groups");
  }
  const std::vector<int> ordered(levels.begin(), levels.end());
  std::vector<double> scale;
  for (const auto& m : matrices) {
    const auto it = std::lower_bound(ordered.begin(), ordered.end(), *m.provenance.difficulty);
    scale.push_back(weights[static_cast<std::size_t>(it - ordered.begin())]);
  }
  auto out = make_aggregate(matrices, tree_sum(matrices, scale, 0, matrices.size()), "weighted");
  return out;
}

std::map<Gender, ConnectivityMatrix> aggregate_by_cohort(const std::vector<ConnectivityMatrix>& matrices) {
  require_same_channels(matrices, "aggregate");
  std::map<Gender, std::vector<ConnectivityMatrix>> groups;
  for (const auto& m : matrices) {
    if (!m.provenance.gender) throw ConfigError("aggregate: cohort mode needs gender provenance");
    groups[*m.provenance.gender].push_back(m);
  }
  std::map<Gender, ConnectivityMatrix> out;
  for (auto& [g, list] : groups) {
    auto agg = make_aggregate(list, tree_sum(list, {}, 0, list.size()), "cohort:" + std::string(to_string(g)));
    agg.provenance.gender = g;
    out.emplace(g, std::move(agg));
  }
  return out;
}

namespace {

SignedEdge to_signed(const Edge& e) {
  return {e.a, e.b, e.weight, e.weight < 0.0 ? EdgeSign::negative : EdgeSign::positive};
}

}  // namespace

SignSplit split_by_sign(const ConnectivityMatrix& agg) {
  auto edges = upper_triangle(agg);
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    if (std::abs(x.weight) != std::abs(y.weight)) return std::abs(x.weight) > std::abs(y.weight);
    return pair_less(x, y);
  });
  SignSplit out;
  for (const auto& e : edges) {
    if (e.weight > 0.0) out.positive.push_back(to_signed(e));
    if (e.weight < 0.0) out.negative.push_back(to_signed(e));
  }
  return out;
}

EdgeSet top_k_edges(const ConnectivityMatrix& agg, std::size_t k) {
  const std::size_t total = edge_count(agg.size());
  if (k < 1 || k > total) {
    throw ConfigError("top_k_edges: k=" + std::to_string(k) + " outside [1, " + std::to_string(total) + "]");
  }
  auto edges = upper_triangle(agg);
  sort_descending(edges);
  EdgeSet out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(to_signed(edges[i]));
  return out;
}

std::vector<ChannelScore> rank_channels(const EdgeSet& edges, const std::vector<std::string>& universe) {
  std::map<std::string, double> score;
  for (const auto& e : edges) {
    score[e.a] += std::abs(e.weight);
    score[e.b] += std::abs(e.weight);
  }
  std::vector<ChannelScore> out;
  for (const auto& [name, s] : score) out.push_back({name, s});
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.score > y.score; });
  std::vector<std::string> rest;
  for (const auto& name : universe) {
    if (!score.contains(name)) rest.push_back(name);
  }
  std::sort(rest.begin(), rest.end());
  for (auto& name : rest) out.push_back({name, 0.0});
  return out;
}

}  // namespace eegconn

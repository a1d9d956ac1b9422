#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eegconn/dataset.hpp"
#include "eegconn/nn/model.hpp"
#include "json.hpp"

namespace eegconn {

enum class SplitMode { subject, epoch };
std::string_view to_string(SplitMode m);
SplitMode parse_split_mode(std::string_view s);  // throws ConfigError

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  SplitMode mode = SplitMode::epoch;
  std::vector<Fold> folds;

  // Partition and disjointness checks against a dataset of n samples; DataError.
  void validate(std::size_t n) const;
  nlohmann::json to_json() const;
};

/// Per class: seeded shuffle, then round-robin over folds, continuing where
/// the previous class stopped so fold sizes stay within one of each other.
/// ConfigError when k < 2 or a class has fewer than k members.
FoldPlan stratified_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed, int num_classes = 3);

/// Subject-independent plan: whole groups are assigned greedily (largest
/// first, seeded tie order) to the fold that keeps per-class counts closest
/// to the k-th share. ConfigError when k < 2 or there are fewer than k groups.
FoldPlan grouped_stratified_folds(std::span<const int> labels, std::span<const std::string> groups, std::size_t k,
                                  std::uint64_t seed, int num_classes = 3);

FoldPlan make_fold_plan(const EpochDataset& data, std::size_t k, SplitMode mode, std::uint64_t seed);

// Rows are true classes, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 3);
  void add(int truth, int predicted);  // DataError when out of range
  std::size_t classes() const { return n_; }
  std::size_t operator()(std::size_t t, std::size_t p) const { return counts_[t * n_ + p]; }
  std::size_t& operator()(std::size_t t, std::size_t p) { return counts_[t * n_ + p]; }
  std::size_t total() const;
  std::size_t correct() const;
  nlohmann::json to_json() const;

 private:
  std::size_t n_;
  std::vector<std::size_t> counts_;
};

struct BinaryCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

BinaryCounts one_vs_rest(const ConfusionMatrix& cm, std::size_t positive);

struct MetricSet {
  double precision = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double npv = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::vector<std::string> degenerate;  // metric names whose denominator was zero (reported as 0)

  nlohmann::json to_json() const;
};

MetricSet binary_metrics(const BinaryCounts& c);
MetricSet binary_metrics(const ConfusionMatrix& cm, std::size_t positive);
// Unweighted mean of the one-vs-rest metrics; flags carry the class name.
MetricSet macro_metrics(const ConfusionMatrix& cm);

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::string id() const = 0;
  virtual void fit(const nn::Dataset& train, std::uint64_t seed) = 0;
  virtual std::vector<int> predict(const nn::Dataset& test) = 0;
};

using ClassifierFactory = std::function<std::unique_ptr<Classifier>()>;

struct NeuralOptions {
  std::string model = "mha-eegnet";
  std::size_t kernel = 62;  // temporal kernel, half the (decimated) sampling rate
  nn::TrainConfig train;
  bool standardize = true;  // per-channel z-scoring from the training split
};

/// Builds the named architecture for the training data's shape and trains it.
class NeuralClassifier : public Classifier {
 public:
  explicit NeuralClassifier(NeuralOptions options);
  std::string id() const override { return options_.model; }
  void fit(const nn::Dataset& train, std::uint64_t seed) override;
  std::vector<int> predict(const nn::Dataset& test) override;

  const nn::TrainResult& history() const { return history_; }
  nn::Model& model();

 private:
  NeuralOptions options_;
  std::unique_ptr<nn::Model> model_;
  ChannelScaler scaler_;
  nn::TrainResult history_;
};

struct FoldResult {
  std::size_t fold = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  ConfusionMatrix confusion;
  std::vector<MetricSet> per_class;
  MetricSet macro;
  double accuracy_top1 = 0.0;
};

struct EvaluationReport {
  std::string model_id;
  std::string electrode_set;
  std::vector<std::string> channels;
  SplitMode split = SplitMode::subject;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<FoldResult> folds;
  MetricSet aggregate;  // mean over folds of the macro metrics
  double accuracy_top1 = 0.0;

  nlohmann::json to_json() const;
};

std::string report_csv_header();
std::string report_csv_row(const EvaluationReport& r);

using FoldCallback = std::function<void(const FoldResult&)>;

/// Trains a fresh classifier per fold (seed derived from the plan seed and
/// fold index) and scores the held-out split. A NumericalError raised while
/// training is rethrown with the fold number.
EvaluationReport evaluate_cv(const ClassifierFactory& factory, const EpochDataset& data, const FoldPlan& plan,
                             const std::string& electrode_set = "custom", const FoldCallback& on_fold = {});

struct ElectrodeSet {
  std::string id;
  std::vector<std::string> channels;
};

struct NamedFactory {
  std::string id;
  ClassifierFactory make;
};

/// Same fold plan for every (model, set) cell; rows ordered model-major.
std::vector<EvaluationReport> compare_electrode_sets(const EpochDataset& data, const std::vector<ElectrodeSet>& sets,
                                                     const std::vector<NamedFactory>& models, const FoldPlan& plan);

}  // namespace eegconn

#include "eegconn/eval.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "eegconn/errors.hpp"
#include "eegconn/io_util.hpp"
#include "eegconn/rng.hpp"
#include "eegconn/types.hpp"

namespace eegconn {

using nlohmann::json;

std::string_view to_string(SplitMode m) { return m == SplitMode::subject ? "subject" : "epoch"; }

SplitMode parse_split_mode(std::string_view s) {
  if (s == "subject") return SplitMode::subject;
  if (s == "epoch") return SplitMode::epoch;
  throw ConfigError("unknown split mode '" + std::string(s) + "' (expected subject or epoch)");
}

namespace {

template <class T>
void shuffle_with(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

void check_labels(std::span<const int> labels, int num_classes) {
  for (int l : labels) {
    if (l < 0 || l >= num_classes) throw DataError("label " + std::to_string(l) + " out of range");
  }
}

}  // namespace

void FoldPlan::validate(std::size_t n) const {
  if (folds.size() != k) throw DataError("fold plan lists " + std::to_string(folds.size()) + " folds, expected " + std::to_string(k));
  std::vector<int> seen(n, 0);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<char> in_train(n, 0);
    for (std::size_t i : folds[f].train) {
      if (i >= n) throw DataError("fold plan index out of range for a dataset of " + std::to_string(n));
      in_train[i] = 1;
    }
    for (std::size_t i : folds[f].test) {
      if (i >= n) throw DataError("fold plan index out of range for a dataset of " + std::to_string(n));
      if (in_train[i]) throw DataError("fold " + std::to_string(f) + " uses a sample for training and testing");
      ++seen[i];
    }
    if (folds[f].train.size() + folds[f].test.size() != n) throw DataError("fold " + std::to_string(f) + " does not cover the dataset");
  }
  for (int s : seen) {
    if (s != 1) throw DataError("test sets do not partition the dataset");
  }
}

json FoldPlan::to_json() const {
  json fs = json::array();
  for (const auto& f : folds) fs.push_back({{"train", f.train}, {"test", f.test}});
  return {{"k", k}, {"seed", seed}, {"mode", to_string(mode)}, {"folds", fs}};
}

namespace {

FoldPlan plan_from_assignment(const std::vector<std::size_t>& fold_of, std::size_t k, std::uint64_t seed, SplitMode mode) {
  FoldPlan plan{k, seed, mode, std::vector<Fold>(k)};
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) (f == fold_of[i] ? plan.folds[f].test : plan.folds[f].train).push_back(i);
  }
  return plan;
}

}  // namespace

FoldPlan stratified_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed, int num_classes) {
  if (k < 2) throw ConfigError("stratified CV needs k >= 2 (k = " + std::to_string(k) + " leaves no training split)");
  check_labels(labels, num_classes);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
  for (int c = 0; c < num_classes; ++c) {
    if (members[c].size() < k) {
      throw ConfigError("class " + std::to_string(c) + " has " + std::to_string(members[c].size()) +
                        " members, fewer than k = " + std::to_string(k));
    }
  }
  std::vector<std::size_t> fold_of(labels.size());
  std::size_t next = 0;
  for (int c = 0; c < num_classes; ++c) {
    Rng rng = make_rng(seed, "folds.class", static_cast<std::uint64_t>(c));
    shuffle_with(members[c], rng);
    for (std::size_t i : members[c]) {
      fold_of[i] = next;
      next = (next + 1) % k;
    }
  }
  return plan_from_assignment(fold_of, k, seed, SplitMode::epoch);
}

FoldPlan grouped_stratified_folds(std::span<const int> labels, std::span<const std::string> groups, std::size_t k,
                                  std::uint64_t seed, int num_classes) {
  if (k < 2) throw ConfigError("stratified CV needs k >= 2 (k = " + std::to_string(k) + " leaves no training split)");
  if (labels.size() != groups.size()) throw DataError("labels and groups differ in length");
  check_labels(labels, num_classes);
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[groups[i]].push_back(i);
  if (members.size() < k) {
    throw ConfigError("subject-independent CV needs at least k = " + std::to_string(k) + " subjects, got " +
                      std::to_string(members.size()));
  }
  const auto nc = static_cast<std::size_t>(num_classes);
  std::vector<double> target(nc, 0.0);
  for (int l : labels) target[static_cast<std::size_t>(l)] += 1.0 / static_cast<double>(k);

  struct Group {
    std::vector<std::size_t> idx;
    std::vector<double> counts;
  };
  std::vector<Group> gs;
  for (auto& [name, idx] : members) {
    Group g{idx, std::vector<double>(nc, 0.0)};
    for (std::size_t i : idx) g.counts[static_cast<std::size_t>(labels[i])] += 1.0;
    gs.push_back(std::move(g));
  }
  Rng rng = make_rng(seed, "folds.groups");
  shuffle_with(gs, rng);
  std::stable_sort(gs.begin(), gs.end(), [](const Group& a, const Group& b) { return a.idx.size() > b.idx.size(); });

  std::vector<std::vector<double>> load(k, std::vector<double>(nc, 0.0));
  std::vector<std::size_t> fold_groups(k, 0);
  std::vector<std::size_t> fold_of(labels.size());
  std::size_t remaining = gs.size();
  for (const auto& g : gs) {
    const std::size_t empty = static_cast<std::size_t>(std::count(fold_groups.begin(), fold_groups.end(), 0));
    std::size_t best = k;
    double best_cost = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      // Every fold must end up with a group.
      if (empty == remaining && fold_groups[f] != 0) continue;
      double cost = 0.0;
      for (std::size_t c = 0; c < nc; ++c) {
        const double after = load[f][c] + g.counts[c] - target[c];
        const double before = load[f][c] - target[c];
        cost += after * after - before * before;
      }
      if (best == k || cost < best_cost - 1e-12) {
        best = f;
        best_cost = cost;
      }
    }
    for (std::size_t c = 0; c < nc; ++c) load[best][c] += g.counts[c];
    ++fold_groups[best];
    for (std::size_t i : g.idx) fold_of[i] = best;
    --remaining;
  }
  return plan_from_assignment(fold_of, k, seed, SplitMode::subject);
}

FoldPlan make_fold_plan(const EpochDataset& data, std::size_t k, SplitMode mode, std::uint64_t seed) {
  return mode == SplitMode::subject ? grouped_stratified_folds(data.data.labels, data.groups, k, seed)
                                    : stratified_folds(data.data.labels, k, seed);
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : n_(classes), counts_(classes * classes, 0) {
  if (classes < 2) throw ConfigError("confusion matrix needs at least 2 classes");
}

void ConfusionMatrix::add(int truth, int predicted) {
  const auto n = static_cast<int>(n_);
  if (truth < 0 || truth >= n || predicted < 0 || predicted >= n) throw DataError("class index out of range");
  ++counts_[static_cast<std::size_t>(truth) * n_ + static_cast<std::size_t>(predicted)];
}

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::correct() const {
  std::size_t s = 0;
  for (std::size_t i = 0; i < n_; ++i) s += (*this)(i, i);
  return s;
}

json ConfusionMatrix::to_json() const {
  json rows = json::array();
  for (std::size_t t = 0; t < n_; ++t) {
    json row = json::array();
    for (std::size_t p = 0; p < n_; ++p) row.push_back((*this)(t, p));
    rows.push_back(row);
  }
  return rows;
}

BinaryCounts one_vs_rest(const ConfusionMatrix& cm, std::size_t positive) {
  if (positive >= cm.classes()) throw ConfigError("positive class out of range");
  BinaryCounts c;
  for (std::size_t t = 0; t < cm.classes(); ++t) {
    for (std::size_t p = 0; p < cm.classes(); ++p) {
      const std::size_t v = cm(t, p);
      if (t == positive && p == positive) c.tp += v;
      else if (t == positive) c.fn += v;
      else if (p == positive) c.fp += v;
      else c.tn += v;
    }
  }
  return c;
}

MetricSet binary_metrics(const BinaryCounts& c) {
  MetricSet m;
  auto ratio = [&](double num, double den, const char* name) {
    if (den == 0.0) {
      m.degenerate.emplace_back(name);
      return 0.0;
    }
    return num / den;
  };
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);
  m.accuracy = ratio(tp + tn, tp + tn + fp + fn, "accuracy");
  m.precision = ratio(tp, tp + fp, "precision");
  m.recall = ratio(tp, tp + fn, "recall");
  m.specificity = ratio(tn, tn + fp, "specificity");
  m.npv = ratio(tn, tn + fn, "npv");
  m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall, "f1");
  return m;
}

MetricSet binary_metrics(const ConfusionMatrix& cm, std::size_t positive) { return binary_metrics(one_vs_rest(cm, positive)); }

MetricSet macro_metrics(const ConfusionMatrix& cm) {
  MetricSet out;
  const double n = static_cast<double>(cm.classes());
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const auto m = binary_metrics(cm, c);
    out.precision += m.precision / n;
    out.recall += m.recall / n;
    out.specificity += m.specificity / n;
    out.npv += m.npv / n;
    out.f1 += m.f1 / n;
    out.accuracy += m.accuracy / n;
    const std::string cls = cm.classes() == 3 ? std::string(to_string(kAllStates[c])) : std::to_string(c);
    for (const auto& d : m.degenerate) out.degenerate.push_back(cls + ":" + d);
  }
  return out;
}

json MetricSet::to_json() const {
  return {{"accuracy", accuracy}, {"precision", precision}, {"recall", recall}, {"specificity", specificity},
          {"npv", npv},           {"f1", f1},               {"degenerate", degenerate}};
}

NeuralClassifier::NeuralClassifier(NeuralOptions options) : options_(std::move(options)) {}

void NeuralClassifier::fit(const nn::Dataset& train, std::uint64_t seed) {
  nn::Dataset data = train;
  if (data.sample_shape.size() != 3) throw ConfigError("neural classifier expects (1, C, W) samples");
  if (options_.standardize) {
    scaler_ = ChannelScaler::fit(data);
    scaler_.apply(data);
  }
  const auto spec = nn::model_spec_by_name(options_.model, data.sample_shape[1], data.sample_shape[2], options_.kernel,
                                           derive_seed(seed, "init"));
  model_ = std::make_unique<nn::Model>(nn::Model::build(spec));
  auto cfg = options_.train;
  cfg.seed = derive_seed(seed, "train");
  history_ = nn::train(*model_, data, nullptr, cfg);
}

std::vector<int> NeuralClassifier::predict(const nn::Dataset& test) {
  if (!model_) throw ConfigError("classifier used before fit");
  nn::Dataset data = test;
  if (options_.standardize) scaler_.apply(data);
  return nn::predict(*model_, data);
}

nn::Model& NeuralClassifier::model() {
  if (!model_) throw ConfigError("classifier used before fit");
  return *model_;
}

namespace {

MetricSet mean_of(const std::vector<MetricSet>& sets) {
  MetricSet out;
  const double n = static_cast<double>(sets.size());
  for (const auto& m : sets) {
    out.precision += m.precision / n;
    out.recall += m.recall / n;
    out.specificity += m.specificity / n;
    out.npv += m.npv / n;
    out.f1 += m.f1 / n;
    out.accuracy += m.accuracy / n;
  }
  return out;
}

}  // namespace

EvaluationReport evaluate_cv(const ClassifierFactory& factory, const EpochDataset& data, const FoldPlan& plan,
                             const std::string& electrode_set, const FoldCallback& on_fold) {
  plan.validate(data.size());
  EvaluationReport report;
  report.electrode_set = electrode_set;
  report.channels = data.channels;
  report.split = plan.mode;
  report.k = plan.k;
  report.seed = plan.seed;

  std::vector<MetricSet> macros;
  for (std::size_t f = 0; f < plan.k; ++f) {
    const auto& fold = plan.folds[f];
    const auto train = data.subset(fold.train);
    const auto test = data.subset(fold.test);
    auto clf = factory();
    report.model_id = clf->id();
    try {
      clf->fit(train.data, derive_seed(plan.seed, "fold", f));
    } catch (const NumericalError& e) {
      throw NumericalError("fold " + std::to_string(f) + ": " + e.what());
    }
    const auto pred = clf->predict(test.data);
    FoldResult r;
    r.fold = f;
    r.train_size = train.size();
    r.test_size = test.size();
    for (std::size_t i = 0; i < pred.size(); ++i) r.confusion.add(test.data.labels[i], pred[i]);
    for (std::size_t c = 0; c < r.confusion.classes(); ++c) r.per_class.push_back(binary_metrics(r.confusion, c));
    r.macro = macro_metrics(r.confusion);
    r.accuracy_top1 = static_cast<double>(r.confusion.correct()) / static_cast<double>(r.confusion.total());
    macros.push_back(r.macro);
    report.accuracy_top1 += r.accuracy_top1 / static_cast<double>(plan.k);
    if (on_fold) on_fold(r);
    report.folds.push_back(std::move(r));
  }
  report.aggregate = mean_of(macros);
  for (const auto& r : report.folds) {
    for (const auto& d : r.macro.degenerate) report.aggregate.degenerate.push_back("fold" + std::to_string(r.fold) + ":" + d);
  }
  return report;
}

json EvaluationReport::to_json() const {
  json folds_j = json::array();
  for (const auto& r : folds) {
    json pc = json::object();
    for (std::size_t c = 0; c < r.per_class.size(); ++c) pc[std::string(to_string(kAllStates[c]))] = r.per_class[c].to_json();
    folds_j.push_back({{"fold", r.fold},
                       {"train_size", r.train_size},
                       {"test_size", r.test_size},
                       {"confusion_matrix", r.confusion.to_json()},
                       {"per_class", pc},
                       {"macro", r.macro.to_json()},
                       {"accuracy_top1", r.accuracy_top1}});
  }
  return {{"kind", "evaluation_report"},
          {"model", model_id},
          {"electrode_set", electrode_set},
          {"channels", channels},
          {"split", to_string(split)},
          {"k", k},
          {"seed", seed},
          {"class_order", {"low", "transition", "high"}},
          {"folds", folds_j},
          {"aggregate", aggregate.to_json()},
          {"accuracy_top1", accuracy_top1}};
}

std::string report_csv_header() {
  return "model,electrode_set,channels,split,k,accuracy,precision,recall,specificity,npv,f1,accuracy_top1\n";
}

std::string report_csv_row(const EvaluationReport& r) {
  std::string out = r.model_id + "," + r.electrode_set + "," + std::to_string(r.channels.size()) + "," +
                    std::string(to_string(r.split)) + "," + std::to_string(r.k);
  for (double v : {r.aggregate.accuracy, r.aggregate.precision, r.aggregate.recall, r.aggregate.specificity,
                   r.aggregate.npv, r.aggregate.f1, r.accuracy_top1}) {
    out += "," + format_double(v);
  }
  return out + "\n";
}

std::vector<EvaluationReport> compare_electrode_sets(const EpochDataset& data, const std::vector<ElectrodeSet>& sets,
                                                     const std::vector<NamedFactory>& models, const FoldPlan& plan) {
  std::vector<EpochDataset> sliced;
  for (const auto& s : sets) sliced.push_back(data.select_channels(s.channels));
  std::vector<EvaluationReport> out;
  for (const auto& m : models) {
    for (std::size_t i = 0; i < sets.size(); ++i) {
      auto r = evaluate_cv(m.make, sliced[i], plan, sets[i].id);
      r.model_id = m.id;
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace eegconn

#include "eegconn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "eegconn/connectivity.hpp"
#include "eegconn/errors.hpp"
#include "eegconn/filter.hpp"

namespace eegconn {

std::string_view to_string(InputKind k) { return k == InputKind::raw ? "raw" : "connectivity"; }

InputKind parse_input_kind(std::string_view s) {
  if (s == "raw") return InputKind::raw;
  if (s == "connectivity") return InputKind::connectivity;
  throw ConfigError("unknown classifier input '" + std::string(s) + "' (expected raw or connectivity)");
}

void DatasetOptions::validate() const {
  if (!(window_s > 0.0)) throw ConfigError("epoch window must be positive");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("epoch overlap must be in [0, 1)");
  if (decimation == 0) throw ConfigError("decimation factor must be >= 1");
}

Recording decimate(const Recording& rec, std::size_t factor) {
  if (factor == 0) throw ConfigError("decimation factor must be >= 1");
  if (factor == 1) return rec;
  Recording out = rec;
  const double fs_new = rec.sampling_rate / static_cast<double>(factor);
  const auto lp = design_filter({FilterKind::bandpass, 0.0, 0.4 * fs_new, 6, true}, rec.sampling_rate);
  const std::size_t n = rec.samples.samples();
  const std::size_t m = (n + factor - 1) / factor;
  out.samples = SignalMatrix(rec.samples.channels(), m);
  for (std::size_t c = 0; c < rec.samples.channels(); ++c) {
    const auto y = apply_filter(lp, rec.samples.row(c));
    auto row = out.samples.row(c);
    for (std::size_t i = 0; i < m; ++i) row[i] = y[i * factor];
  }
  out.sampling_rate = fs_new;
  return out;
}

namespace {

std::vector<std::size_t> spread(std::size_t available, std::size_t wanted) {
  std::vector<std::size_t> idx;
  if (wanted == 0 || wanted >= available) {
    for (std::size_t i = 0; i < available; ++i) idx.push_back(i);
    return idx;
  }
  for (std::size_t j = 0; j < wanted; ++j) idx.push_back((2 * j + 1) * available / (2 * wanted));
  return idx;
}

}  // namespace

EpochDataset build_epoch_dataset(const std::vector<Recording>& recordings, const std::vector<LabeledTrial>& trials,
                                 const DatasetOptions& options) {
  options.validate();
  if (recordings.empty()) throw DataError("no recordings to epoch");

  std::map<std::string, std::vector<std::size_t>> trials_of;
  for (std::size_t i = 0; i < trials.size(); ++i) trials_of[trials[i].subject_id].push_back(i);

  EpochDataset ds;
  ds.input = options.input;
  ds.channels = options.channels.empty() ? recordings.front().channels : options.channels;
  std::size_t window = 0;

  for (const auto& raw : recordings) {
    const auto it = trials_of.find(raw.subject_id);
    if (it == trials_of.end()) throw DataError("no labeled trials for subject " + raw.subject_id);
    if (it->second.size() != raw.annotations.size()) {
      throw DataError("subject " + raw.subject_id + " has " + std::to_string(raw.annotations.size()) + " rounds but " +
                      std::to_string(it->second.size()) + " labeled trials");
    }
    std::vector<std::size_t> rows;
    for (const auto& name : ds.channels) {
      const auto pos = std::find(raw.channels.begin(), raw.channels.end(), name);
      if (pos == raw.channels.end()) throw ConfigError("channel '" + name + "' not in recording " + raw.subject_id);
      rows.push_back(static_cast<std::size_t>(pos - raw.channels.begin()));
    }
    const Recording rec = decimate(raw, options.decimation);
    const double fs = rec.sampling_rate;
    if (ds.sampling_rate == 0.0) ds.sampling_rate = fs;
    if (fs != ds.sampling_rate) throw DataError("recordings disagree on sampling rate");

    const auto ranges = epoch_ranges(rec, options.window_s, options.overlap);
    for (std::size_t r = 0; r < rec.annotations.size(); ++r) {
      const std::size_t t = it->second[r];
      const auto& trial = trials[t];
      if (trial.task != rec.annotations[r].task || trial.difficulty != rec.annotations[r].difficulty) {
        throw DataError("labeled trial " + std::to_string(r) + " of " + rec.subject_id + " does not match its round");
      }
      std::vector<EpochRange> mine;
      for (const auto& e : ranges) {
        if (e.round_index == r) mine.push_back(e);
      }
      for (std::size_t k : spread(mine.size(), options.epochs_per_round)) {
        const auto& e = mine[k];
        window = e.length;
        if (options.input == InputKind::raw) {
          for (std::size_t row : rows) {
            const auto src = rec.samples.row(row).subspan(e.start, e.length);
            ds.data.features.insert(ds.data.features.end(), src.begin(), src.end());
          }
        } else {
          const auto cm = connectivity_matrix(rec.samples.select_rows(rows).slice(e.start, e.length), ds.channels);
          for (std::size_t i = 0; i < cm.size(); ++i) {
            for (std::size_t j = i + 1; j < cm.size(); ++j) ds.data.features.push_back(cm(i, j));
          }
        }
        ds.data.labels.push_back(static_cast<int>(trial.state));
        ds.groups.push_back(rec.subject_id);
        ds.trial.push_back(t);
      }
    }
  }
  if (ds.data.labels.empty()) throw DataError("no epochs fit inside the annotated rounds");
  const std::size_t c = ds.channels.size();
  ds.data.sample_shape = options.input == InputKind::raw ? nn::Shape{1, c, window} : nn::Shape{1, 1, c * (c - 1) / 2};
  return ds;
}

EpochDataset EpochDataset::subset(const std::vector<std::size_t>& indices) const {
  EpochDataset out;
  out.channels = channels;
  out.sampling_rate = sampling_rate;
  out.input = input;
  out.data.sample_shape = data.sample_shape;
  const std::size_t s = data.sample_size();
  for (std::size_t i : indices) {
    if (i >= size()) throw DataError("subset index out of range");
    out.data.features.insert(out.data.features.end(), data.features.begin() + static_cast<std::ptrdiff_t>(i * s),
                             data.features.begin() + static_cast<std::ptrdiff_t>((i + 1) * s));
    out.data.labels.push_back(data.labels[i]);
    out.groups.push_back(groups[i]);
    out.trial.push_back(trial[i]);
  }
  return out;
}

EpochDataset EpochDataset::select_channels(const std::vector<std::string>& names) const {
  if (input != InputKind::raw) throw ConfigError("channel selection needs raw epoch input");
  std::vector<std::size_t> rows;
  for (const auto& n : names) {
    const auto pos = std::find(channels.begin(), channels.end(), n);
    if (pos == channels.end()) throw ConfigError("unknown channel '" + n + "' in electrode set");
    rows.push_back(static_cast<std::size_t>(pos - channels.begin()));
  }
  EpochDataset out = *this;
  const std::size_t c = channels.size();
  const std::size_t w = data.sample_shape[2];
  out.channels = names;
  out.data.sample_shape = {1, names.size(), w};
  out.data.features.clear();
  out.data.features.reserve(size() * names.size() * w);
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t r : rows) {
      const auto first = data.features.begin() + static_cast<std::ptrdiff_t>((i * c + r) * w);
      out.data.features.insert(out.data.features.end(), first, first + static_cast<std::ptrdiff_t>(w));
    }
  }
  return out;
}

ChannelScaler ChannelScaler::fit(const nn::Dataset& data) {
  if (data.sample_shape.size() != 3) throw ConfigError("scaler expects (1, C, W) samples");
  const std::size_t c = data.sample_shape[1], w = data.sample_shape[2];
  ChannelScaler s;
  s.mean.assign(c, 0.0);
  s.scale.assign(c, 1.0);
  const double count = static_cast<double>(data.size() * w);
  if (count == 0.0) throw DataError("cannot fit a scaler on an empty dataset");
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double* p = data.features.data() + (i * c + ch) * w;
      for (std::size_t t = 0; t < w; ++t) sum += p[t];
    }
    const double mu = sum / count;
    double ss = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double* p = data.features.data() + (i * c + ch) * w;
      for (std::size_t t = 0; t < w; ++t) ss += (p[t] - mu) * (p[t] - mu);
    }
    const double sd = std::sqrt(ss / count);
    s.mean[ch] = mu;
    s.scale[ch] = sd > 0.0 ? 1.0 / sd : 1.0;
  }
  return s;
}

void ChannelScaler::apply(nn::Dataset& data) const {
  const std::size_t c = data.sample_shape.at(1), w = data.sample_shape.at(2);
  if (c != mean.size()) throw DataError("scaler fitted on a different channel count");
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double* p = data.features.data() + (i * c + ch) * w;
      for (std::size_t t = 0; t < w; ++t) p[t] = (p[t] - mean[ch]) * scale[ch];
    }
  }
}

}  // namespace eegconn

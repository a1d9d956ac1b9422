#include "eegconn/labeling.hpp"

#include <algorithm>
#include <sstream>

#include "eegconn/errors.hpp"
#include "eegconn/io_util.hpp"

namespace eegconn {

double combined_score(double performance, double nasa_tlx, bool invert_tlx) {
  if (!(performance >= 0.0 && performance <= 1.0)) throw DataError("combined_score: performance outside [0,1]");
  if (!(nasa_tlx >= 0.0 && nasa_tlx <= 1.0)) throw DataError("combined_score: nasa_tlx outside [0,1]");
  return (performance + (invert_tlx ? 1.0 - nasa_tlx : nasa_tlx)) / 2.0;
}

Quartiles cohort_quartiles(std::span<const double> scores) {
  if (scores.size() < 4) throw ConfigError("quartile labeling needs at least 4 scores");
  std::vector<double> s(scores.begin(), scores.end());
  std::sort(s.begin(), s.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= s.size()) return s.back();
    return s[lo] + frac * (s[lo + 1] - s[lo]);
  };
  return {at(0.25), at(0.75)};
}

std::vector<CognitiveState> quartile_label(std::span<const double> scores) {
  const auto q = cohort_quartiles(scores);
  std::vector<CognitiveState> out;
  out.reserve(scores.size());
  for (double s : scores) {
    if (s < q.q1) {
      out.push_back(CognitiveState::low);
    } else if (s > q.q3) {
      out.push_back(CognitiveState::high);
    } else {
      out.push_back(CognitiveState::transition);
    }
  }
  return out;
}

std::vector<LabeledTrial> label_rounds(const std::vector<Recording>& recordings, const LabelingOptions& options) {
  std::vector<LabeledTrial> trials;
  for (const auto& rec : recordings) {
    for (const auto& r : rec.annotations) {
      trials.push_back({rec.subject_id, r.task, r.difficulty, r.performance, r.nasa_tlx,
                        combined_score(r.performance, r.nasa_tlx, options.invert_tlx), CognitiveState::transition});
    }
  }
  auto assign = [&](const std::vector<std::size_t>& idx) {
    std::vector<double> scores;
    for (auto i : idx) scores.push_back(trials[i].score);
    const auto states = quartile_label(scores);
    for (std::size_t k = 0; k < idx.size(); ++k) trials[idx[k]].state = states[k];
  };
  if (options.per_task_quartiles) {
    for (Task t : kAllTasks) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < trials.size(); ++i) {
        if (trials[i].task == t) idx.push_back(i);
      }
      if (!idx.empty()) assign(idx);
    }
  } else {
    std::vector<std::size_t> idx(trials.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    assign(idx);
  }
  return trials;
}

std::string labels_to_csv(const std::vector<LabeledTrial>& trials) {
  std::string out = "subject_id,task,difficulty,performance,nasa_tlx,score,state\n";
  for (const auto& t : trials) {
    out += t.subject_id + "," + std::string(to_string(t.task)) + "," + std::to_string(t.difficulty) + ",";
    append_double(out, t.performance);
    out += ',';
    append_double(out, t.nasa_tlx);
    out += ',';
    append_double(out, t.score);
    out += "," + std::string(to_string(t.state)) + "\n";
  }
  return out;
}

std::vector<LabeledTrial> labels_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<LabeledTrial> out;
  if (!std::getline(in, line) || line.rfind("subject_id,task,difficulty", 0) != 0) {
    throw DataError("label file: unexpected header");
  }
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw DataError("label file: row " + std::to_string(row) + " needs 7 fields");
    LabeledTrial t;
    t.subject_id = cells[0];
    t.task = parse_task(cells[1]);
    t.difficulty = std::stoi(cells[2]);
    auto num = [&](const std::string& s) {
      auto v = parse_double(s);
      if (!v) throw DataError("label file: row " + std::to_string(row) + " has a non-numeric field");
      return *v;
    };
    t.performance = num(cells[3]);
    t.nasa_tlx = num(cells[4]);
    t.score = num(cells[5]);
    t.state = parse_state(cells[6]);
    out.push_back(t);
  }
  return out;
}

}  // namespace eegconn

#include "eegconn/recording.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "eegconn/errors.hpp"
#include "eegconn/io_util.hpp"
#include "json.hpp"

namespace eegconn {

using nlohmann::json;

SignalMatrix SignalMatrix::slice(std::size_t start, std::size_t length) const {
  if (start + length > samples_) throw DataError("slice out of range");
  SignalMatrix out(channels_, length);
  for (std::size_t c = 0; c < channels_; ++c) {
    auto src = row(c).subspan(start, length);
    std::copy(src.begin(), src.end(), out.row(c).begin());
  }
  return out;
}

SignalMatrix SignalMatrix::select_rows(std::span<const std::size_t> rows) const {
  SignalMatrix out(rows.size(), samples_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= channels_) throw DataError("row index out of range");
    auto src = row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::size_t Recording::channel_index(std::string_view name) const {
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] == name) return i;
  }
  throw DataError("recording " + subject_id + " has no channel " + std::string(name));
}

void validate(const Recording& rec) {
  if (!(rec.sampling_rate > 0.0)) throw DataError("sampling_rate must be positive");
  if (rec.channels.size() != rec.samples.channels()) {
    throw DataError("channel list does not match sample matrix rows");
  }
  const double duration = rec.duration_s();
  std::vector<TaskRound> sorted = rec.annotations;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start_s < b.start_s; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& r = sorted[i];
    if (!(r.start_s < r.end_s)) throw DataError("round start_s must precede end_s");
    if (r.start_s < 0.0 || r.end_s > duration + 1e-9) throw DataError("round interval outside recording");
    if (r.performance < 0.0 || r.performance > 1.0) throw DataError("round performance outside [0,1]");
    if (r.nasa_tlx < 0.0 || r.nasa_tlx > 1.0) throw DataError("round nasa_tlx outside [0,1]");
    if (r.difficulty < 1 || r.difficulty > 3) throw DataError("round difficulty outside 1..3");
    if (i > 0 && r.start_s < sorted[i - 1].end_s) throw DataError("overlapping annotations");
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension();
  p += ".meta.json";
  return p;
}

namespace {

json round_to_json(const TaskRound& r) {
  return json{{"task", to_string(r.task)}, {"difficulty", r.difficulty}, {"start_s", r.start_s},
              {"end_s", r.end_s},          {"performance", r.performance}, {"nasa_tlx", r.nasa_tlx}};
}

template <typename T>
T field(const json& j, const char* key, std::size_t round) {
  if (!j.contains(key)) {
    throw ParseError(std::string("sidecar field '") + key + "' missing", round, key);
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("sidecar field '") + key + "' has the wrong type", round, key);
  }
}

void parse_sidecar(const std::filesystem::path& path, Recording& rec) {
  std::ifstream in(path);
  if (!in) throw ParseError("sidecar " + path.string() + " not found", 0, "");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("sidecar " + path.string() + " is not valid JSON: " + e.what(), 0, "");
  }
  rec.subject_id = field<std::string>(j, "subject_id", 0);
  rec.gender = parse_gender(field<std::string>(j, "gender", 0));
  rec.sampling_rate = field<double>(j, "sampling_rate_hz", 0);
  if (!(rec.sampling_rate > 0.0)) {
    throw ParseError("sampling_rate_hz must be positive", 0, "sampling_rate_hz");
  }
  if (j.contains("pipeline_stage")) rec.pipeline_stage = j.at("pipeline_stage").get<std::string>();
  const auto& rounds = j.contains("rounds") ? j.at("rounds") : json::array();
  std::size_t k = 0;
  for (const auto& r : rounds) {
    ++k;
    TaskRound tr;
    tr.task = parse_task(field<std::string>(r, "task", k));
    tr.difficulty = field<int>(r, "difficulty", k);
    tr.start_s = field<double>(r, "start_s", k);
    tr.end_s = field<double>(r, "end_s", k);
    tr.performance = field<double>(r, "performance", k);
    tr.nasa_tlx = field<double>(r, "nasa_tlx", k);
    if (!(tr.start_s < tr.end_s)) throw ParseError("round start_s must precede end_s", k, "start_s");
    if (tr.difficulty < 1 || tr.difficulty > 3) throw ParseError("difficulty outside 1..3", k, "difficulty");
    if (tr.performance < 0.0 || tr.performance > 1.0) {
      throw ParseError("performance outside [0,1]", k, "performance");
    }
    if (tr.nasa_tlx < 0.0 || tr.nasa_tlx > 1.0) throw ParseError("nasa_tlx outside [0,1]", k, "nasa_tlx");
    rec.annotations.push_back(tr);
  }
  std::vector<std::size_t> order(rec.annotations.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](auto a, auto b) { return rec.annotations[a].start_s < rec.annotations[b].start_s; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (rec.annotations[order[i]].start_s < rec.annotations[order[i - 1]].end_s) {
      throw ParseError("overlapping annotations: round " + std::to_string(order[i] + 1) + " overlaps round " +
                           std::to_string(order[i - 1] + 1),
                       order[i] + 1, "start_s");
    }
  }
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

Recording load_recording(const std::filesystem::path& csv, const Montage& montage) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw ParseError("recording " + csv.string() + " not found", 0, "");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  Recording rec;
  parse_sidecar(sidecar_path(csv), rec);
  rec.channels = montage.names();

  std::string_view rest(text);
  auto next_line = [&rest]() -> std::optional<std::string_view> {
    while (!rest.empty()) {
      auto nl = rest.find('\n');
      auto line = rest.substr(0, nl);
      rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
      line = trim(line);
      if (!line.empty()) return line;
    }
    return std::nullopt;
  };

  auto header_line = next_line();
  if (!header_line) throw ParseError("recording " + csv.string() + " is empty", 1, "");
  auto header = split_commas(*header_line);
  if (header.empty() || trim(header[0]) != "t") throw ParseError("first column must be 't'", 1, "t");

  // column_for[c] = CSV column holding montage channel c
  std::vector<std::size_t> column_for(montage.size(), 0);
  std::vector<bool> seen(montage.size(), false);
  for (std::size_t col = 1; col < header.size(); ++col) {
    const auto name = trim(header[col]);
    auto idx = montage.index_of(name);
    if (!idx) throw ParseError("unexpected column '" + std::string(name) + "'", 1, std::string(name));
    if (seen[*idx]) throw ParseError("duplicate column '" + std::string(name) + "'", 1, std::string(name));
    seen[*idx] = true;
    column_for[*idx] = col;
  }
  for (std::size_t c = 0; c < montage.size(); ++c) {
    if (!seen[c]) throw ParseError("channel " + montage.channel(c).name + " absent", 1, montage.channel(c).name);
  }

  std::vector<std::vector<double>> columns(header.size());
  const double dt = 1.0 / rec.sampling_rate;
  std::size_t row = 1;
  double prev_t = 0.0;
  while (auto line = next_line()) {
    ++row;
    auto cells = split_commas(*line);
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " fields, expected " +
                           std::to_string(header.size()),
                       row, "");
    }
    for (std::size_t col = 0; col < cells.size(); ++col) {
      auto cell = trim(cells[col]);
      auto v = parse_double(cell);
      if (!v) {
        const std::string name = col == 0 ? "t" : std::string(trim(header[col]));
        throw ParseError("row " + std::to_string(row) + " field " + name + ": non-numeric value '" +
                             std::string(cell) + "'",
                         row, name);
      }
      columns[col].push_back(*v);
    }
    const double t = columns[0].back();
    if (row > 2) {
      if (!(t > prev_t) || std::abs((t - prev_t) - dt) > 1e-6 * dt + 1e-9) {
        throw ParseError("row " + std::to_string(row) + " field t: time stamps must advance by 1/fs", row, "t");
      }
    }
    prev_t = t;
  }

  const std::size_t n = columns[0].size();
  rec.samples = SignalMatrix(montage.size(), n);
  for (std::size_t c = 0; c < montage.size(); ++c) {
    std::copy(columns[column_for[c]].begin(), columns[column_for[c]].end(), rec.samples.row(c).begin());
  }
  for (std::size_t k = 0; k < rec.annotations.size(); ++k) {
    if (rec.annotations[k].end_s > rec.duration_s() + 1e-9 || rec.annotations[k].start_s < 0.0) {
      throw ParseError("round " + std::to_string(k + 1) + " lies outside the recording", k + 1, "end_s");
    }
  }
  return rec;
}

Recording load_recording_meta(const std::filesystem::path& csv, const Montage& montage) {
  Recording rec;
  parse_sidecar(sidecar_path(csv), rec);
  rec.channels = montage.names();
  return rec;
}

void save_recording(const Recording& rec, const std::filesystem::path& csv) {
  validate(rec);
  if (csv.has_parent_path()) std::filesystem::create_directories(csv.parent_path());
  {
    std::ofstream out(csv, std::ios::binary);
    if (!out) throw DataError("cannot write " + csv.string());
    std::string line = "t";
    for (const auto& c : rec.channels) line += "," + c;
    line += '\n';
    out << line;
    const std::size_t n = rec.samples.samples();
    std::string buf;
    buf.reserve(1 << 16);
    for (std::size_t i = 0; i < n; ++i) {
      append_double(buf, static_cast<double>(i) / rec.sampling_rate);
      for (std::size_t c = 0; c < rec.samples.channels(); ++c) {
        buf += ',';
        append_double(buf, rec.samples(c, i));
      }
      buf += '\n';
      if (buf.size() > (1 << 16) - 1024) {
        out << buf;
        buf.clear();
      }
    }
    out << buf;
  }
  json meta{{"subject_id", rec.subject_id},
            {"gender", to_string(rec.gender)},
            {"sampling_rate_hz", rec.sampling_rate},
            {"rounds", json::array()}};
  for (const auto& r : rec.annotations) meta["rounds"].push_back(round_to_json(r));
  if (rec.pipeline_stage) meta["pipeline_stage"] = *rec.pipeline_stage;
  write_text(sidecar_path(csv), meta.dump(2) + "\n");
}

std::pair<std::size_t, std::size_t> round_sample_range(const Recording& rec, const TaskRound& round) {
  const auto n = rec.samples.samples();
  auto first = static_cast<std::size_t>(std::max(0.0, std::round(round.start_s * rec.sampling_rate)));
  auto last = static_cast<std::size_t>(std::max(0.0, std::round(round.end_s * rec.sampling_rate)));
  first = std::min(first, n);
  last = std::min(last, n);
  return {first, last};
}

std::vector<EpochRange> epoch_ranges(const Recording& rec, double window_s, double overlap) {
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("overlap must lie in [0, 1)");
  if (!(window_s * rec.sampling_rate >= 2.0)) throw ConfigError("window must span at least 2 samples");
  const auto window = static_cast<std::size_t>(std::llround(window_s * rec.sampling_rate));
  const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(window * (1.0 - overlap))));

  std::string offending;
  for (std::size_t k = 0; k < rec.annotations.size(); ++k) {
    auto [first, last] = round_sample_range(rec, rec.annotations[k]);
    if (last - first < window) {
      offending += (offending.empty() ? "" : ", ") + std::to_string(k + 1) + " (" +
                   std::string(to_string(rec.annotations[k].task)) + " level " +
                   std::to_string(rec.annotations[k].difficulty) + ")";
    }
  }
  if (!offending.empty()) {
    throw ConfigError("window of " + std::to_string(window_s) + " s is longer than round(s) " + offending +
                      " of recording " + rec.subject_id);
  }

  std::vector<EpochRange> out;
  for (std::size_t k = 0; k < rec.annotations.size(); ++k) {
    auto [first, last] = round_sample_range(rec, rec.annotations[k]);
    for (std::size_t s = first; s + window <= last; s += stride) out.push_back({k, s, window});
  }
  return out;
}

std::vector<Epoch> epoch_recording(const Recording& rec, double window_s, double overlap) {
  std::vector<Epoch> out;
  for (const auto& r : epoch_ranges(rec, window_s, overlap)) {
    out.push_back(Epoch{rec.subject_id, r.round_index, r.start, rec.samples.slice(r.start, r.length), std::nullopt});
  }
  return out;
}

}  // namespace eegconn

#include "eegconn/montage.hpp"

#include <cctype>
#include <cmath>
#include <numbers>

#include "eegconn/errors.hpp"

namespace eegconn {

namespace {

struct PolarPosition {
  const char* name;
  double azimuth_deg;  // clockwise from the nose
  double radius;       // 1 = the Fpz-T7-Oz-T8 ring
};

// Standard 10-20 azimuthal positions; the equator ring is drawn at
// kEquatorRadius of the unit head circle.
constexpr PolarPosition kPositions[] = {
    {"Fp1", -18.0, 1.0},    {"Fpz", 0.0, 1.0},     {"Fp2", 18.0, 1.0},    {"F7", -54.0, 1.0},
    {"F3", -39.9, 0.673},   {"Fz", 0.0, 0.501},    {"F4", 39.9, 0.673},   {"F8", 54.0, 1.0},
    {"T7", -90.0, 1.0},     {"C3", -90.0, 0.501},  {"Cz", 0.0, 0.0},      {"C4", 90.0, 0.501},
    {"T8", 90.0, 1.0},      {"P7", -126.0, 1.0},   {"P3", -140.1, 0.673}, {"Pz", 180.0, 0.501},
    {"P4", 140.1, 0.673},   {"P8", 126.0, 1.0},    {"O1", -162.0, 1.0},   {"O2", 162.0, 1.0},
};
constexpr double kEquatorRadius = 0.85;

}  // namespace

std::string_view to_string(Hemisphere h) {
  switch (h) {
    case Hemisphere::left: return "left";
    case Hemisphere::right: return "right";
    case Hemisphere::midline: return "midline";
  }
  return "?";
}

std::string_view to_string(Lobe l) {
  switch (l) {
    case Lobe::prefrontal: return "prefrontal";
    case Lobe::frontal: return "frontal";
    case Lobe::temporal: return "temporal";
    case Lobe::central: return "central";
    case Lobe::parietal: return "parietal";
    case Lobe::occipital: return "occipital";
  }
  return "?";
}

Hemisphere hemisphere_from_name(std::string_view name) {
  if (name.empty()) throw ConfigError("empty channel name");
  const char last = name.back();
  if (last == 'z' || last == 'Z') return Hemisphere::midline;
  if (!std::isdigit(static_cast<unsigned char>(last))) {
    throw ConfigError("channel name '" + std::string(name) + "' has no hemisphere suffix");
  }
  return ((last - '0') % 2 == 1) ? Hemisphere::left : Hemisphere::right;
}

Lobe lobe_from_name(std::string_view name) {
  if (name.starts_with("Fp")) return Lobe::prefrontal;
  if (name.starts_with("F")) return Lobe::frontal;
  if (name.starts_with("T")) return Lobe::temporal;
  if (name.starts_with("C")) return Lobe::central;
  if (name.starts_with("P")) return Lobe::parietal;
  if (name.starts_with("O")) return Lobe::occipital;
  throw ConfigError("channel name '" + std::string(name) + "' has no known lobe prefix");
}

Montage::Montage() {
  for (const auto& p : kPositions) {
    const double a = p.azimuth_deg * std::numbers::pi / 180.0;
    const double r = kEquatorRadius * p.radius;
    channels_.push_back(Channel{p.name, r * std::sin(a), r * std::cos(a), hemisphere_from_name(p.name),
                                lobe_from_name(p.name)});
  }
  neighbors_.resize(channels_.size());
  for (std::size_t i = 0; i < channels_.size(); ++i) {
    for (std::size_t j = 0; j < channels_.size(); ++j) {
      if (i == j) continue;
      const double d = std::hypot(channels_[i].x - channels_[j].x, channels_[i].y - channels_[j].y);
      if (d <= kNeighborRadius) neighbors_[i].push_back(j);
    }
  }
}

const Montage& Montage::standard20() {
  static const Montage montage;
  return montage;
}

std::vector<std::string> Montage::names() const {
  std::vector<std::string> out;
  out.reserve(channels_.size());
  for (const auto& c : channels_) out.push_back(c.name);
  return out;
}

std::optional<std::size_t> Montage::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < channels_.size(); ++i) {
    if (channels_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Montage::require_index(std::string_view name) const {
  auto idx = index_of(name);
  if (!idx) throw ConfigError("unknown channel name '" + std::string(name) + "'");
  return *idx;
}

}  // namespace eegconn

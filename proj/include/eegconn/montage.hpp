#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eegconn {

enum class Hemisphere { left, right, midline };
enum class Lobe { prefrontal, frontal, temporal, central, parietal, occipital };

std::string_view to_string(Hemisphere h);
std::string_view to_string(Lobe l);

struct Channel {
  std::string name;
  double x = 0.0;  // head-plane projection, nose towards +y, unit head circle
  double y = 0.0;
  Hemisphere hemisphere = Hemisphere::midline;
  Lobe lobe = Lobe::central;
};

// Name-derived classification: trailing digit parity gives the hemisphere,
// the letter prefix gives the lobe.
Hemisphere hemisphere_from_name(std::string_view name);
Lobe lobe_from_name(std::string_view name);

/// The fixed 20-lead 10-20 montage.
///
/// Channel order is Fp1, Fpz, Fp2, F7, F3, Fz, F4, F8, T7, C3, Cz, C4, T8,
/// P7, P3, Pz, P4, P8, O1, O2. Two channels are neighbors when their
/// projected coordinates are at most `kNeighborRadius` apart.
class Montage {
 public:
  static constexpr std::size_t kSize = 20;
  static constexpr double kNeighborRadius = 0.45;

  static const Montage& standard20();

  std::size_t size() const { return channels_.size(); }
  const std::vector<Channel>& channels() const { return channels_; }
  const Channel& channel(std::size_t i) const { return channels_.at(i); }
  std::vector<std::string> names() const;

  std::optional<std::size_t> index_of(std::string_view name) const;
  std::size_t require_index(std::string_view name) const;  // throws ConfigError

  std::span<const std::size_t> neighbors(std::size_t i) const { return neighbors_.at(i); }

 private:
  Montage();
  std::vector<Channel> channels_;
  std::vector<std::vector<std::size_t>> neighbors_;
};

// Electrode subset reported by the original study as carrying the
// cross-subject association changes; kept for comparison with our ranking.
inline constexpr std::array<std::string_view, 8> kReferenceEightElectrodes = {
    "Fp1", "Fpz", "Fp2", "F7", "F3", "Fz", "T7", "P7"};

}  // namespace eegconn

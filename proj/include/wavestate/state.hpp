#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>

#include "wavestate/errors.hpp"

namespace wavestate {

inline constexpr std::array<int, 5> kDamageLevels{0, 1, 2, 3, 4};
inline constexpr std::array<int, 5> kLoadsKn{0, 5, 10, 15, 20};
inline constexpr int kLoadStepKn = 5;
inline constexpr std::size_t kPathCount = 9;

inline bool is_valid_level(int level) { return level >= 0 && level <= 4; }
inline bool is_valid_load(int load_kn) { return load_kn >= 0 && load_kn <= 20 && load_kn % kLoadStepKn == 0; }
inline int load_index(int load_kn) { return load_kn / kLoadStepKn; }

// Actuator (1-3) to receiver (4-6) pair. Index 1..9 runs actuator-major:
// 1-4, 1-5, 1-6, 2-4, ..., 3-6.
struct SensorPath {
  int actuator = 1;
  int receiver = 4;

  static SensorPath from_index(int index) {
    if (index < 1 || index > 9) throw InvalidArgument("path index must be in 1..9, got " + std::to_string(index));
    return {(index - 1) / 3 + 1, (index - 1) % 3 + 4};
  }
  int index() const { return (actuator - 1) * 3 + (receiver - 4) + 1; }
  bool valid() const { return actuator >= 1 && actuator <= 3 && receiver >= 4 && receiver <= 6; }
  std::string label() const { return std::to_string(actuator) + "-" + std::to_string(receiver); }

  friend auto operator<=>(const SensorPath&, const SensorPath&) = default;
};

// Damage level index k1 and applied load k2 (kN); the path is carried only
// where single-path rows are modelled.
struct StateVector {
  int level = 0;
  int load_kn = 0;
  std::optional<int> path;

  bool on_grid() const {
    return is_valid_level(level) && is_valid_load(load_kn) && (!path || (*path >= 1 && *path <= 9));
  }
  StateVector without_path() const { return {level, load_kn, std::nullopt}; }

  friend auto operator<=>(const StateVector&, const StateVector&) = default;
};

inline std::string to_string(const StateVector& s) {
  std::string out = "(" + std::to_string(s.level) + ", " + std::to_string(s.load_kn) + " kN";
  if (s.path) out += ", path " + SensorPath::from_index(*s.path).label();
  return out + ")";
}

}  // namespace wavestate

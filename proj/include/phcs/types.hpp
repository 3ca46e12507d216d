#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>

namespace phcs {

/// Simulation time in integer ticks. One tick is the simulation step.
using Tick = std::int64_t;

/// Opaque, totally ordered entity identifier.
///
/// Traffic entities use a one-letter origin tag as the first character
/// ('m' mainline, 'r' ramp) followed by a zero-padded serial number.
struct EntityId {
  std::string value;

  EntityId() = default;
  explicit EntityId(std::string v) : value(std::move(v)) {}

  auto operator<=>(const EntityId&) const = default;
  bool operator==(const EntityId&) const = default;
};

inline std::ostream& operator<<(std::ostream& os, const EntityId& id) {
  return os << id.value;
}

/// Discrete spatial resource: one cell of one lane.
struct ResourceId {
  int lane = 0;
  std::int64_t cell = 0;

  auto operator<=>(const ResourceId&) const = default;
  bool operator==(const ResourceId&) const = default;
};

inline std::ostream& operator<<(std::ostream& os, const ResourceId& r) {
  return os << "L" << r.lane << ":" << r.cell;
}

}  // namespace phcs

template <>
struct std::hash<phcs::EntityId> {
  std::size_t operator()(const phcs::EntityId& id) const noexcept {
    return std::hash<std::string>{}(id.value);
  }
};

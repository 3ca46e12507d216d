#pragma once

// Temporal-zone geometry of preemptive collaboration.
//
// The (system time t, action time tau) plane is split by four parallel
// lines into five zones:
//
//   tau <= t                               History
//   t < tau <= t + frozen                  Frozen
//   t + frozen < tau <= t + frozen + crit  Critical
//   ...            <= ... + planning       Planning
//   beyond                                 Intention
//
// Each boundary point belongs to the zone nearer the present.

#include <string_view>

#include "phcs/types.hpp"

namespace phcs::temporal {

struct TemporalConfig {
  Tick t_frozen = 100;
  Tick t_critical = 30;
  Tick t_planning = 170;

  /// Throws std::invalid_argument unless all three widths are positive.
  void validate() const;

  bool operator==(const TemporalConfig&) const = default;
};

enum class ZoneLabel { History, Frozen, Critical, Planning, Intention };

std::string_view to_string(ZoneLabel z);

struct PlanningDeadlines {
  Tick start_planning;
  Tick planning_start_deadline;
  Tick planning_finish_deadline;
  Tick execution;

  bool operator==(const PlanningDeadlines&) const = default;
};

ZoneLabel classify_zone(Tick t, Tick tau, const TemporalConfig& cfg);

/// True iff a task executing at `tau` may still be shared at `t`,
/// i.e. tau >= t + t_frozen + t_critical.
bool is_submittable(Tick t, Tick tau, const TemporalConfig& cfg);

/// Deadlines for a task executing at `tau`. Throws std::domain_error when
/// any of them would be negative.
PlanningDeadlines deadlines_for(Tick tau, const TemporalConfig& cfg);

}  // namespace phcs::temporal

#include "phcs/temporal.hpp"

#include <stdexcept>
#include <string>

namespace phcs::temporal {

void TemporalConfig::validate() const {
  if (t_frozen <= 0 || t_critical <= 0 || t_planning <= 0) {
    throw std::invalid_argument("temporal zone widths must be positive (got " +
                                std::to_string(t_frozen) + ", " + std::to_string(t_critical) +
                                ", " + std::to_string(t_planning) + ")");
  }
}

std::string_view to_string(ZoneLabel z) {
  switch (z) {
    case ZoneLabel::History: return "history";
    case ZoneLabel::Frozen: return "frozen";
    case ZoneLabel::Critical: return "critical";
    case ZoneLabel::Planning: return "planning";
    case ZoneLabel::Intention: return "intention";
  }
  return "?";
}

ZoneLabel classify_zone(Tick t, Tick tau, const TemporalConfig& cfg) {
  const Tick lead = tau - t;
  if (lead <= 0) return ZoneLabel::History;
  if (lead <= cfg.t_frozen) return ZoneLabel::Frozen;
  if (lead <= cfg.t_frozen + cfg.t_critical) return ZoneLabel::Critical;
  if (lead <= cfg.t_frozen + cfg.t_critical + cfg.t_planning) return ZoneLabel::Planning;
  return ZoneLabel::Intention;
}

bool is_submittable(Tick t, Tick tau, const TemporalConfig& cfg) {
  return tau >= t + cfg.t_frozen + cfg.t_critical;
}

PlanningDeadlines deadlines_for(Tick tau, const TemporalConfig& cfg) {
  PlanningDeadlines d{};
  d.execution = tau;
  d.planning_finish_deadline = tau - cfg.t_frozen;
  d.planning_start_deadline = d.planning_finish_deadline - cfg.t_critical;
  d.start_planning = d.planning_start_deadline - cfg.t_planning;
  if (d.start_planning < 0) {
    throw std::domain_error("task at tick " + std::to_string(tau) +
                            " is too imminent to have ever been plannable");
  }
  return d;
}

}  // namespace phcs::temporal

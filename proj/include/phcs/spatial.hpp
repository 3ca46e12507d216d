#pragma once

// Spatial jurisdiction over a 1-D road: manager domains, discretization of
// vehicle footprints into lane cells, intention routing and handover.

#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "phcs/coordination.hpp"
#include "phcs/temporal.hpp"
#include "phcs/types.hpp"

namespace phcs::spatial {

/// Half-open extent [x_lo, x_hi) owned by one manager.
struct SpatialDomain {
  std::string manager_id;
  double x_lo = 0.0;
  double x_hi = 0.0;
  std::set<std::string> neighbors;
};

class OutOfWorld : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Checks that the domains tile a contiguous extent without gaps or
/// overlaps and that the neighbor relation is symmetric and matches shared
/// boundaries. Throws std::invalid_argument otherwise.
void validate_layout(std::span<const SpatialDomain> domains);

/// Builds a chain of `count` equal domains over [x_lo, x_hi).
std::vector<SpatialDomain> chain_layout(double x_lo, double x_hi, int count);

/// Manager owning `position`. Throws OutOfWorld outside every extent.
const std::string& locate_manager(double position, std::span<const SpatialDomain> domains);

/// Cells touched by the footprint [x_a, x_b]. The footprint is treated as
/// half-open at its front, so a front exactly on a cell edge does not claim
/// the next cell; a zero-length footprint claims the cell containing it.
std::vector<ResourceId> cells_for_span(int lane, double x_a, double x_b, double cell_length);

/// One claim per cell of the span, each over the full interval [t_a, t_b].
std::vector<coord::Task> discretize_claim(const EntityId& entity, int lane, double x_a, double x_b,
                                          Tick t_a, Tick t_b, double cell_length);

/// Footprint of a vehicle at one tick.
struct Footprint {
  Tick tick = 0;
  int lane = 0;
  double rear = 0.0;
  double front = 0.0;
};

/// Per-cell claims from a moving footprint: each cell is claimed from the
/// first to the last tick it is touched. Output sorted by (start, location).
std::vector<coord::Task> claims_from_footprints(const EntityId& entity,
                                                std::span<const Footprint> footprints,
                                                double cell_length);

/// A set of managers tiling the road, with joint approval of intentions that
/// cross domain boundaries and entity handover between neighbors.
class ManagerNetwork {
 public:
  ManagerNetwork(std::vector<SpatialDomain> domains, temporal::TemporalConfig cfg,
                 double cell_length);

  const std::vector<SpatialDomain>& domains() const { return domains_; }
  coord::Manager& manager(const std::string& id);
  const coord::Manager& manager(const std::string& id) const;

  /// Manager owning the lower edge of the resource's cell.
  const std::string& owner_of(const ResourceId& r) const;

  void register_entity(const EntityId& entity, const std::string& manager_id);
  std::optional<std::string> registration_of(const EntityId& entity) const;

  /// Splits an intention into per-owner fragments, preserving task order.
  std::map<std::string, coord::Intention> split(const coord::Intention& intention) const;

  struct SubmitResult {
    bool approved = false;
    std::map<std::string, coord::ApprovalOutcome> fragments;
    std::optional<coord::Rejection> rejection;
    std::string rejected_by;
  };

  /// Joint approval: every fragment must be approved by its owner, or none
  /// is committed.
  SubmitResult submit(const coord::Intention& intention, Tick now);

  struct HandoverAck {
    EntityId entity;
    std::string from;
    std::string to;
    std::size_t transferred = 0;  // tasks now held by `to` for the entity
    std::size_t retained = 0;     // tasks staying with `from`
  };

  /// Moves the entity's registration from `from` to its neighbor `to`. The
  /// entity's tasks located in `to`'s extent end up in `to`'s schedule
  /// unchanged; tasks in `from`'s extent stay. `pending` lists the tasks the
  /// entity holds as approved. Throws std::invalid_argument for a
  /// non-neighbor or when the entity is not registered with `from`.
  HandoverAck handover(const EntityId& entity, const std::string& from, const std::string& to,
                       std::span<const coord::Task> pending);

  std::vector<coord::Task> all_tasks() const;

 private:
  const SpatialDomain& domain(const std::string& id) const;

  std::vector<SpatialDomain> domains_;
  double cell_length_;
  std::map<std::string, coord::Manager> managers_;
  std::map<EntityId, std::string> registration_;
};

}  // namespace phcs::spatial

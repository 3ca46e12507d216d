#pragma once

// On-ramp merge scenario: road geometry, vehicle kinematics, the Krauss
// car-following baseline with gap-acceptance merging, and preemptive
// trajectory scheduling on top of the coordination kernel.
//
// All longitudinal positions are measured along the mainline. The ramp lane
// runs alongside it over [merge_point - ramp_length, merge_point); a ramp
// vehicle becomes a mainline vehicle when it merges. A vehicle's position is
// its front bumper; its body covers [position - length, position].

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phcs/coordination.hpp"
#include "phcs/temporal.hpp"
#include "phcs/types.hpp"

namespace phcs::traffic {

inline constexpr int kMainLane = 0;
inline constexpr int kRampLane = 1;

enum class Origin { Mainline, Ramp };

char origin_tag(Origin o);
/// Origin from the first character of the id; nullopt for any other tag.
std::optional<Origin> origin_of(const EntityId& id);
EntityId make_vehicle_id(Origin origin, int serial);

struct RoadGeometry {
  double mainline_length = 1000.0;
  double ramp_length = 300.0;
  double merge_point = 700.0;
  double detection_boundary = 300.0;
  /// Stretch before the merge point where baseline ramp vehicles may change
  /// lanes (the acceleration lane).
  double merge_zone_length = 100.0;

  double ramp_start() const { return merge_point - ramp_length; }
  double entry_position(Origin o) const { return o == Origin::Ramp ? ramp_start() : 0.0; }
  void validate() const;
};

struct KraussParams {
  double v_max = 33.3;
  double a_accel = 2.6;
  double b_decel = 4.5;
  double reaction_time = 1.0;
  double sigma = 0.5;
  double min_gap = 2.5;

  void validate() const;
};

struct VehicleState {
  EntityId id;
  Origin origin = Origin::Mainline;
  int lane = kMainLane;
  double position = 0.0;
  double speed = 0.0;
  double acceleration = 0.0;
  double length = 5.0;
  Tick entered_at = 0;

  double rear() const { return position - length; }
};

/// One Krauss update. `noise` is a uniform draw in [0, 1).
double krauss_step(const VehicleState& follower, const VehicleState* leader,
                   const KraussParams& params, double dt, double noise);

/// Gap acceptance standing in for a full lane-change model.
struct GapAcceptance {
  double gap_lead_min = 10.0;
  double gap_lag_min = 15.0;
  bool forced_merge = true;
};

enum class MergeDecision { Accept, Wait, ForcedAccept };

std::string to_string(MergeDecision d);

/// True when the ramp vehicle has come to rest at the end of the ramp.
bool at_ramp_end(const VehicleState& ramp_vehicle, const RoadGeometry& geometry,
                 const KraussParams& params);

MergeDecision baseline_merge_decision(const VehicleState& ramp_vehicle, double mainline_lead_gap,
                                      double mainline_lag_gap, const RoadGeometry& geometry,
                                      const KraussParams& params, const GapAcceptance& gaps);

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectorySample {
  Tick tick = 0;
  double position = 0.0;
  double speed = 0.0;
};

struct Trajectory {
  EntityId vehicle;
  std::vector<TrajectorySample> samples;
  bool complete = false;

  Tick first_tick() const { return samples.front().tick; }
  Tick last_tick() const { return samples.back().tick; }
  /// Sample at `tick`, or nullptr outside the trajectory.
  const TrajectorySample* at(Tick tick) const;
  /// First tick whose position reaches `x`.
  std::optional<Tick> crossing_tick(double x) const;
};

/// Describes the first kinematic inconsistency, or nullopt when the
/// trajectory is valid: consecutive ticks, non-decreasing positions,
/// 0 <= speed <= v_max, acceleration within [-b_decel, a_accel], and
/// |dx - mean speed * dt| <= tol.
std::optional<std::string> check_kinematics(const Trajectory& trajectory,
                                            const KraussParams& params, double dt,
                                            double tol = 1e-6);

struct PlanContext {
  RoadGeometry geometry;
  KraussParams params;
  double dt = 0.1;
};

/// Unimpeded profile from the vehicle's state at `from_time` to the end of
/// the mainline: accelerate at a_accel to v_max, then cruise. Positions use
/// the trapezoidal update so every step is exactly kinematically consistent.
Trajectory compose_trajectory(const VehicleState& vehicle, Tick from_time, const PlanContext& ctx);

/// Delayed-approach profile: before the merge point the speed is capped at
/// `v_cap` (braking at b_decel if needed), after it the vehicle resumes the
/// unimpeded profile.
Trajectory capped_trajectory(const VehicleState& vehicle, Tick from_time, double v_cap,
                             const PlanContext& ctx);

/// Capped profile crossing the merge point exactly at `crossing`, found by
/// bisection on the cap below `cap_hi`. nullopt if no cap hits that tick.
std::optional<Trajectory> trajectory_crossing_at(const VehicleState& vehicle, Tick from_time,
                                                 Tick crossing, const PlanContext& ctx,
                                                 double cap_hi, double* cap_used = nullptr);

/// Ticks needed to pass `space_len` metres at `speed`, floored at 5 m/s.
Tick headway_ticks(double space_len, double speed, double dt);

inline constexpr double kMinHeadwaySpeed = 5.0;

// ---------------------------------------------------------------------------
// Merge list

struct MergeEntry {
  EntityId vehicle;
  Tick crossing = 0;
  double crossing_speed = 0.0;
  double length = 5.0;
  std::shared_ptr<const Trajectory> trajectory;
};

/// Scheduled merge-point crossings in ascending crossing order.
class MergeList {
 public:
  const std::vector<MergeEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  void insert(MergeEntry entry);
  void erase(const EntityId& vehicle);

  /// Last entry crossing at or before `tick`, and first entry after it.
  const MergeEntry* predecessor(Tick tick) const;
  const MergeEntry* successor(Tick tick) const;

  /// True when consecutive crossings respect the headway implied by
  /// leader length + additional_space at the follower's crossing speed.
  bool separated(double additional_space, double dt) const;

 private:
  std::vector<MergeEntry> entries_;
};

class MergeInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MergeSearch {
  double additional_space = 2.5;
  /// Crossing may not precede this tick (e.g. the same-lane leader).
  Tick min_crossing = 0;
  /// Largest accepted delay over the desired crossing.
  Tick max_delay = 3000;
  /// Extra acceptance test for a candidate (claims against reservations).
  std::function<bool(const Trajectory&)> feasible;
};

struct ScheduledTrajectory {
  Trajectory trajectory;
  Tick crossing = 0;
  double crossing_speed = 0.0;
};

/// Earliest crossing at or after the desired one that keeps the headway to
/// both neighbours in the merge list and passes `search.feasible`. The
/// approach phase is stretched to arrive exactly at that tick. Inserts the
/// result into `merge_list`. Throws MergeInfeasible.
ScheduledTrajectory merge_into(const VehicleState& vehicle, const Trajectory& desired,
                               MergeList& merge_list, const PlanContext& ctx,
                               const MergeSearch& search);

// ---------------------------------------------------------------------------
// Preemptive controller

struct PreemptiveConfig {
  PlanContext plan;
  temporal::TemporalConfig temporal{10, 3, 17};
  double additional_space = 2.5;
  double cell_length = 5.0;
  Tick max_delay = 3000;
};

struct Registration {
  bool ok = false;
  std::optional<coord::RejectReason> reason;  // set on protocol rejections
  std::string detail;
  std::shared_ptr<const Trajectory> trajectory;
  /// Ticks before this are tracked as near-term occupancy; from it on the
  /// vehicle's cells are approved claims.
  Tick claim_cutoff = 0;
};

/// Road-section manager for the merge: builds conflict-free trajectories for
/// newly detected vehicles and commits their cell claims through the
/// coordination kernel.
class PreemptiveController {
 public:
  explicit PreemptiveController(PreemptiveConfig cfg);

  /// Registers a vehicle that has just been detected. On failure nothing is
  /// committed.
  Registration check_new_vehicle(const VehicleState& vehicle, Tick now);

  /// Forgets vehicles that left and drops reservations that ended.
  void release(const EntityId& vehicle);
  void prune(Tick now);

  const MergeList& merge_list() const { return merge_list_; }
  coord::Manager& manager() { return manager_; }
  const coord::Manager& manager() const { return manager_; }
  /// Occupancy inside the frozen and critical windows at registration time.
  const coord::ApprovedSchedule& near_term() const { return near_term_; }
  const std::map<EntityId, std::shared_ptr<const Trajectory>>& scheduled_trajectories() const {
    return scheduled_;
  }
  const PreemptiveConfig& config() const { return cfg_; }

  /// Cells occupied by a vehicle footprint at one tick.
  std::vector<coord::Task> footprint_claims(const EntityId& vehicle, Origin origin, double length,
                                            const Trajectory& trajectory) const;

 private:
  bool reservations_free(const std::vector<coord::Task>& claims) const;
  bool stop_profile_blocked(const VehicleState& vehicle, Tick now) const;

  PreemptiveConfig cfg_;
  coord::Manager manager_;
  coord::ApprovedSchedule near_term_;
  MergeList merge_list_;
  std::map<EntityId, std::shared_ptr<const Trajectory>> scheduled_;
  std::map<Origin, std::vector<EntityId>> origin_lists_;
  std::map<EntityId, Tick> crossings_;
};

}  // namespace phcs::traffic

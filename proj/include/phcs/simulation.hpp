#pragma once

// Tick-driven simulation of the two-lane merge under either strategy.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "phcs/traffic.hpp"

namespace phcs::traffic {

enum class Strategy { Baseline, Preemptive };

std::string to_string(Strategy s);
/// Accepts "baseline" or "preemptive"; throws std::invalid_argument.
Strategy parse_strategy(const std::string& text);

struct WorldConfig {
  RoadGeometry geometry;
  KraussParams krauss;
  double dt = 0.1;
  Strategy strategy = Strategy::Baseline;
  GapAcceptance gaps;
  temporal::TemporalConfig temporal{10, 3, 17};
  double additional_space = 2.5;
  double cell_length = 5.0;
  Tick max_delay = 3000;
  double vehicle_length = 5.0;
  std::uint64_t seed = 1;
  bool record_trajectories = false;
  /// Per-tick claim agreement and per-plan kinematic checks.
  bool check_invariants = true;
};

struct Arrival {
  Tick tick = 0;
  Origin origin = Origin::Mainline;
};

struct SimVehicle {
  VehicleState state;
  Tick demand_tick = 0;
  /// Unimpeded traversal time from the entry point, in ticks.
  Tick free_ticks = 0;
  bool registered = false;
  bool fallback = false;
  bool merged = false;
  std::shared_ptr<const Trajectory> plan;
};

struct Event {
  Tick tick = 0;
  std::string event;
  EntityId vehicle;
  std::string detail;
};

struct ExitRecord {
  EntityId vehicle;
  Origin origin = Origin::Mainline;
  Tick demand_tick = 0;
  Tick entered_tick = 0;
  Tick exit_tick = 0;
  Tick free_ticks = 0;

  double delay_seconds(double dt) const {
    return static_cast<double>(exit_tick - demand_tick - free_ticks) * dt;
  }
};

struct TrajectoryRow {
  EntityId vehicle;
  Origin origin = Origin::Mainline;
  Tick tick = 0;
  double position = 0.0;
  double speed = 0.0;
  int lane = 0;
};

struct Diagnostics {
  std::size_t plans_checked = 0;
  std::size_t kinematic_violations = 0;
  std::size_t claim_violations = 0;
  std::size_t separation_violations = 0;
  std::string first_error;

  bool clean() const {
    return kinematic_violations == 0 && claim_violations == 0 && separation_violations == 0;
  }
};

class World {
 public:
  World(WorldConfig cfg, std::vector<Arrival> arrivals);

  void advance_tick();
  void run_until(Tick end);

  /// Places a vehicle directly on the road, bypassing injection. Under the
  /// preemptive strategy it is registered if it is inside the detection area.
  const SimVehicle& place(VehicleState state, Tick demand_tick);

  Tick now() const { return now_; }
  const WorldConfig& config() const { return cfg_; }
  const std::map<EntityId, SimVehicle>& vehicles() const { return vehicles_; }
  const std::vector<Event>& events() const { return events_; }
  const std::vector<ExitRecord>& exits() const { return exits_; }
  const std::vector<TrajectoryRow>& rows() const { return rows_; }
  /// Ticks at which a vehicle front crossed the merge point on the mainline.
  const std::vector<Tick>& merge_crossings() const { return crossings_; }
  const Diagnostics& diagnostics() const { return diag_; }
  const PreemptiveController* controller() const { return controller_.get(); }

  std::size_t injected() const { return injected_; }
  std::size_t collisions() const { return collisions_; }
  std::size_t protocol_failures() const { return protocol_failures_; }
  std::size_t forced_merges() const { return forced_merges_; }
  /// Arrivals not yet on the road.
  std::size_t waiting(Origin o) const;

 private:
  std::deque<Arrival>& queue(Origin o) { return o == Origin::Ramp ? ramp_queue_ : main_queue_; }
  Tick free_ticks_from(Origin o) const;
  void inject();
  void register_detected();
  void fall_back(SimVehicle& v, const std::string& detail);
  void record_rows();
  void check_claims();
  void step();
  void merge_ramp_vehicles();
  void detect_crossings(const std::map<EntityId, double>& previous);
  void remove_exited();
  void detect_collisions();
  void note_plan(const Trajectory& plan);
  void emit(Tick tick, std::string event, const EntityId& id, std::string detail = {});
  std::vector<const SimVehicle*> lane_order(int lane) const;
  double uniform();

  WorldConfig cfg_;
  Tick now_ = 0;
  std::deque<Arrival> main_queue_;
  std::deque<Arrival> ramp_queue_;
  std::map<EntityId, SimVehicle> vehicles_;
  std::unique_ptr<PreemptiveController> controller_;
  std::mt19937_64 rng_;
  int serial_ = 0;
  Tick free_main_ = 0;
  Tick free_ramp_ = 0;

  std::vector<Event> events_;
  std::vector<ExitRecord> exits_;
  std::vector<TrajectoryRow> rows_;
  std::vector<Tick> crossings_;
  Diagnostics diag_;
  std::size_t injected_ = 0;
  std::size_t collisions_ = 0;
  std::size_t protocol_failures_ = 0;
  std::size_t forced_merges_ = 0;
};

}  // namespace phcs::traffic

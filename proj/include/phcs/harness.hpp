#pragma once

// Experiment runner: demand generation, scenario runs, metrics, strategy
// comparison, capacity sweeps and output files.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phcs/simulation.hpp"

namespace phcs::harness {

using traffic::Strategy;

struct ScenarioConfig {
  traffic::RoadGeometry geometry;
  traffic::KraussParams krauss;
  temporal::TemporalConfig temporal{10, 3, 17};
  double demand_main = 1200.0;  // veh/h
  double demand_ramp = 600.0;   // veh/h
  Tick duration = 6000;
  std::uint64_t seed = 1;
  Strategy strategy = Strategy::Baseline;
  double additional_space = 2.5;
  double cell_length = 5.0;
  bool forced_merge = true;
  double dt = 0.1;
  double gap_lead_min = 10.0;
  double gap_lag_min = 15.0;
  double vehicle_length = 5.0;
  Tick max_delay = 3000;
  double warmup_fraction = 0.1;
  bool check_invariants = true;

  /// Throws std::invalid_argument describing the first bad field.
  void validate() const;
  traffic::WorldConfig world(bool record_trajectories) const;
  Tick warmup_ticks() const;
  /// Shortest admissible headway between injections, in seconds.
  double min_headway() const;
};

struct MetricsReport {
  double mean_delay = 0.0;  // s
  double throughput = 0.0;  // veh/h over the steady-state window
  std::size_t collisions = 0;
  std::size_t vehicles_completed = 0;
  std::size_t protocol_failures = 0;

  std::size_t vehicles_demanded = 0;
  std::size_t vehicles_injected = 0;
  std::size_t vehicles_waiting = 0;  // never entered the road
  std::size_t forced_merges = 0;
  double offered_flow = 0.0;  // veh/h reaching the merge point in the window if unimpeded
  std::size_t plans_checked = 0;
  std::size_t kinematic_violations = 0;
  std::size_t claim_violations = 0;
  std::size_t separation_violations = 0;
};

struct RunOutput {
  ScenarioConfig config;
  MetricsReport metrics;
  std::vector<traffic::Event> events;
  std::vector<traffic::TrajectoryRow> rows;
  std::string first_violation;
};

/// Arrival ticks in [0, duration): exponential headways shifted by
/// `min_headway` seconds so the mean rate is kept. Deterministic per seed.
std::vector<Tick> generate_demand(double rate_per_hour, Tick duration, std::uint64_t seed,
                                  double min_headway, double dt);

std::vector<traffic::Arrival> scenario_arrivals(const ScenarioConfig& cfg);

RunOutput run_scenario(const ScenarioConfig& cfg, bool record_trajectories = false);

struct ComparisonResult {
  MetricsReport baseline;
  MetricsReport preemptive;
  /// 1 - preemptive/baseline mean delay; empty when the baseline delay is 0.
  std::optional<double> delay_reduction;
  /// preemptive/baseline throughput; empty when the baseline throughput is 0.
  std::optional<double> capacity_ratio;
};

ComparisonResult assemble(const MetricsReport& baseline, const MetricsReport& preemptive);

struct ComparisonRun {
  ComparisonResult result;
  RunOutput baseline;
  RunOutput preemptive;
};

ComparisonRun compare(const ScenarioConfig& cfg, bool record_trajectories = false);

struct CapacityPoint {
  double demand = 0.0;
  MetricsReport metrics;
  bool stable = false;
};

struct CapacityResult {
  std::vector<CapacityPoint> points;
  std::optional<double> capacity;
};

/// Runs every combined demand level of the ascending grid, split between
/// mainline and ramp in the proportion of cfg's demands. Capacity is the
/// highest level whose throughput reaches 95% of the offered flow.
CapacityResult measure_capacity(const ScenarioConfig& cfg, std::span<const double> rate_grid);

std::string to_json(const MetricsReport& m, int indent = 0);
std::string to_json(const ComparisonResult& c);
std::string to_json(const CapacityResult& baseline, const CapacityResult& preemptive);

void write_trajectories_csv(std::ostream& os, const std::vector<traffic::TrajectoryRow>& rows);
void write_events_csv(std::ostream& os, const std::vector<traffic::Event>& events);

}  // namespace phcs::harness

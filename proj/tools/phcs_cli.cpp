#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "phcs/coordination.hpp"
#include "phcs/harness.hpp"
#include "phcs/temporal.hpp"

namespace fs = std::filesystem;
using namespace phcs;
using harness::ScenarioConfig;

namespace {

constexpr int kConfigError = 1;
constexpr int kInvariantViolation = 2;

void add_scenario_options(CLI::App& app, ScenarioConfig& c, std::string& strategy) {
  app.add_option("--mainline_length", c.geometry.mainline_length, "m");
  app.add_option("--ramp_length", c.geometry.ramp_length, "m");
  app.add_option("--merge_point", c.geometry.merge_point, "m");
  app.add_option("--detection_boundary", c.geometry.detection_boundary, "m");
  app.add_option("--merge_zone_length", c.geometry.merge_zone_length, "m");
  app.add_option("--v_max", c.krauss.v_max, "m/s");
  app.add_option("--a_accel", c.krauss.a_accel, "m/s^2");
  app.add_option("--b_decel", c.krauss.b_decel, "m/s^2");
  app.add_option("--reaction_time", c.krauss.reaction_time, "s");
  app.add_option("--sigma", c.krauss.sigma, "driver imperfection");
  app.add_option("--min_gap", c.krauss.min_gap, "m");
  app.add_option("--t_frozen", c.temporal.t_frozen, "ticks");
  app.add_option("--t_critical", c.temporal.t_critical, "ticks");
  app.add_option("--t_planning", c.temporal.t_planning, "ticks");
  app.add_option("--demand_main", c.demand_main, "veh/h");
  app.add_option("--demand_ramp", c.demand_ramp, "veh/h");
  app.add_option("--duration", c.duration, "ticks");
  app.add_option("--seed", c.seed);
  app.add_option("--strategy", strategy, "baseline | preemptive");
  app.add_option("--additional_space", c.additional_space, "m");
  app.add_option("--cell_length", c.cell_length, "m");
  app.add_option("--forced_merge", c.forced_merge, "true | false");
  app.add_option("--dt", c.dt, "s per tick");
  app.add_option("--gap_lead_min", c.gap_lead_min, "m");
  app.add_option("--gap_lag_min", c.gap_lag_min, "m");
  app.add_option("--vehicle_length", c.vehicle_length, "m");
  app.add_option("--max_delay", c.max_delay, "ticks");
  app.add_option("--warmup_fraction", c.warmup_fraction);
  app.add_option("--check_invariants", c.check_invariants, "true | false");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
}

void write_run(const fs::path& dir, const harness::RunOutput& run) {
  fs::create_directories(dir);
  write_text(dir / "metrics.json", harness::to_json(run.metrics) + "\n");
  std::ofstream tr(dir / "trajectories.csv", std::ios::binary);
  harness::write_trajectories_csv(tr, run.rows);
  std::ofstream ev(dir / "events.csv", std::ios::binary);
  harness::write_events_csv(ev, run.events);
}

void print_metrics(const char* label, const harness::MetricsReport& m) {
  std::printf("%-10s delay %.3f s  throughput %.1f veh/h  collisions %zu  completed %zu  failures %zu\n",
              label, m.mean_delay, m.throughput, m.collisions, m.vehicles_completed,
              m.protocol_failures);
}

// Small self-checks: the zone example, random approval sequences and a
// short preemptive run. Returns the number of violations.
int validate(const ScenarioConfig& base) {
  int violations = 0;
  auto fail = [&](const std::string& what) {
    ++violations;
    std::printf("VIOLATION %s\n", what.c_str());
  };

  const temporal::TemporalConfig fig{10, 3, 17};
  if (temporal::classify_zone(5, 40, fig) != temporal::ZoneLabel::Intention ||
      temporal::classify_zone(20, 40, fig) != temporal::ZoneLabel::Planning ||
      !(temporal::deadlines_for(40, fig) == temporal::PlanningDeadlines{10, 27, 30, 40})) {
    fail("temporal zone example");
  }

  std::mt19937_64 rng(base.seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  for (int round = 0; round < 200; ++round) {
    coord::ApprovedSchedule schedule;
    for (int e = 0; e < pick(1, 5); ++e) {
      coord::Intention in{EntityId{"e" + std::to_string(e)}, {}, 0};
      for (int k = 0; k < pick(1, 4); ++k) {
        const int start = pick(0, 60);
        in.tasks.push_back({in.entity, ResourceId{0, pick(0, 2)}, start, start + pick(0, 10)});
      }
      (void)coord::try_approve(in, schedule, 0, {1, 1, 1});
    }
    const auto tasks = schedule.all_tasks();
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      for (std::size_t j = i + 1; j < tasks.size(); ++j) {
        if (coord::is_conflicting(tasks[i], tasks[j])) fail("conflicting tasks committed");
      }
    }
  }

  ScenarioConfig c = base;
  c.strategy = harness::Strategy::Preemptive;
  c.duration = std::min<Tick>(c.duration, 3000);
  c.check_invariants = true;
  const auto run = harness::run_scenario(c);
  const auto& m = run.metrics;
  if (m.protocol_failures == 0 && m.collisions != 0) fail("collision under the preemptive strategy");
  if (m.kinematic_violations) fail("kinematically inconsistent plan: " + run.first_violation);
  if (m.claim_violations) fail("vehicle outside its claims: " + run.first_violation);
  if (m.separation_violations) fail("merge list separation: " + run.first_violation);
  print_metrics("preemptive", m);
  std::printf("%s (%d violations)\n", violations ? "FAILED" : "OK", violations);
  return violations;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preemptive merge coordination simulator"};
  app.set_config("--config", "", "plain-text key=value scenario file");
  app.require_subcommand(1);

  ScenarioConfig cfg;
  std::string strategy = "baseline";
  std::string out = "out";
  std::vector<double> grid{600, 1200, 1800, 2400, 3000, 3600, 4200};
  add_scenario_options(app, cfg, strategy);
  app.add_option("--out", out, "output directory");

  auto* run_cmd = app.add_subcommand("run", "run one scenario");
  auto* compare_cmd = app.add_subcommand("compare", "run baseline and preemptive on the same demand");
  auto* capacity_cmd = app.add_subcommand("capacity", "sweep combined demand for both strategies");
  capacity_cmd->add_option("--grid", grid, "ascending combined demand levels, veh/h")->delimiter(',');
  auto* validate_cmd = app.add_subcommand("validate", "invariant checks on small instances");
  for (auto* sub : {run_cmd, compare_cmd, capacity_cmd, validate_cmd}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    cfg.strategy = traffic::parse_strategy(strategy);
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (*validate_cmd) return validate(cfg) ? kInvariantViolation : 0;

    const fs::path dir(out);
    fs::create_directories(dir);
    if (*run_cmd) {
      const auto run = harness::run_scenario(cfg, true);
      write_run(dir, run);
      print_metrics(traffic::to_string(cfg.strategy).c_str(), run.metrics);
    } else if (*compare_cmd) {
      const auto cmp = harness::compare(cfg, true);
      write_run(dir / "baseline", cmp.baseline);
      write_run(dir / "preemptive", cmp.preemptive);
      write_text(dir / "metrics.json", harness::to_json(cmp.result));
      print_metrics("baseline", cmp.result.baseline);
      print_metrics("preemptive", cmp.result.preemptive);
      if (cmp.result.delay_reduction) {
        std::printf("delay reduction %.3f\n", *cmp.result.delay_reduction);
      } else {
        std::printf("delay reduction n/a (baseline delay is zero)\n");
      }
    } else if (*capacity_cmd) {
      ScenarioConfig b = cfg;
      b.strategy = harness::Strategy::Baseline;
      ScenarioConfig p = cfg;
      p.strategy = harness::Strategy::Preemptive;
      const auto cb = harness::measure_capacity(b, grid);
      const auto cp = harness::measure_capacity(p, grid);
      const std::string json = harness::to_json(cb, cp);
      write_text(dir / "metrics.json", json);
      std::cout << json;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  }
  return 0;
}

#include "phcs/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>

namespace phcs::harness {

using traffic::Origin;

void ScenarioConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  geometry.validate();
  krauss.validate();
  temporal.validate();
  require(std::isfinite(demand_main) && demand_main >= 0.0, "demand_main must be >= 0");
  require(std::isfinite(demand_ramp) && demand_ramp >= 0.0, "demand_ramp must be >= 0");
  require(duration > 0, "duration must be positive");
  require(dt > 0.0, "dt must be positive");
  require(additional_space >= 0.0, "additional_space must be >= 0");
  require(cell_length > 0.0, "cell_length must be positive");
  require(gap_lead_min >= 0.0 && gap_lag_min >= 0.0, "gap thresholds must be >= 0");
  require(vehicle_length > 0.0, "vehicle_length must be positive");
  require(max_delay > 0, "max_delay must be positive");
  require(warmup_fraction >= 0.0 && warmup_fraction < 1.0, "warmup_fraction must lie in [0, 1)");
}

traffic::WorldConfig ScenarioConfig::world(bool record_trajectories) const {
  traffic::WorldConfig w;
  w.geometry = geometry;
  w.krauss = krauss;
  w.dt = dt;
  w.strategy = strategy;
  w.gaps = {gap_lead_min, gap_lag_min, forced_merge};
  w.temporal = temporal;
  w.additional_space = additional_space;
  w.cell_length = cell_length;
  w.max_delay = max_delay;
  w.vehicle_length = vehicle_length;
  w.seed = seed;
  w.record_trajectories = record_trajectories;
  w.check_invariants = check_invariants;
  return w;
}

Tick ScenarioConfig::warmup_ticks() const {
  return static_cast<Tick>(std::floor(warmup_fraction * static_cast<double>(duration)));
}

double ScenarioConfig::min_headway() const {
  return (vehicle_length + krauss.min_gap) / krauss.v_max;
}

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
  return std::mt19937_64(seq);
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double hours(Tick ticks, double dt) { return static_cast<double>(ticks) * dt / 3600.0; }

Tick ticks_to(double from, double x, const ScenarioConfig& cfg) {
  traffic::VehicleState probe;
  probe.position = from;
  probe.speed = cfg.krauss.v_max;
  const traffic::PlanContext ctx{cfg.geometry, cfg.krauss, cfg.dt};
  return *traffic::compose_trajectory(probe, 0, ctx).crossing_tick(x);
}

}  // namespace

std::vector<Tick> generate_demand(double rate_per_hour, Tick duration, std::uint64_t seed,
                                  double min_headway, double dt) {
  if (!(rate_per_hour >= 0.0)) throw std::invalid_argument("demand rate must be >= 0");
  std::vector<Tick> out;
  if (rate_per_hour == 0.0 || duration <= 0) return out;
  const double mean = 3600.0 / rate_per_hour;
  const double spread = std::max(0.0, mean - min_headway);
  const double floor_h = std::min(min_headway, mean);
  auto rng = stream(seed, 0);
  double t = 0.0;
  for (;;) {
    t += floor_h - spread * std::log1p(-unit(rng));
    const auto tick = static_cast<Tick>(std::floor(t / dt));
    if (tick >= duration) break;
    out.push_back(tick);
  }
  return out;
}

std::vector<traffic::Arrival> scenario_arrivals(const ScenarioConfig& cfg) {
  std::vector<traffic::Arrival> out;
  const double h = cfg.min_headway();
  for (Tick t : generate_demand(cfg.demand_main, cfg.duration, cfg.seed * 2 + 1, h, cfg.dt)) {
    out.push_back({t, Origin::Mainline});
  }
  for (Tick t : generate_demand(cfg.demand_ramp, cfg.duration, cfg.seed * 2 + 2, h, cfg.dt)) {
    out.push_back({t, Origin::Ramp});
  }
  return out;
}

RunOutput run_scenario(const ScenarioConfig& cfg, bool record_trajectories) {
  cfg.validate();
  const auto arrivals = scenario_arrivals(cfg);
  traffic::World world(cfg.world(record_trajectories), arrivals);
  world.run_until(cfg.duration);

  const Tick warmup = cfg.warmup_ticks();
  const double window_h = hours(cfg.duration - warmup, cfg.dt);
  MetricsReport m;

  double delay_sum = 0.0;
  for (const auto& e : world.exits()) {
    if (e.exit_tick < warmup) continue;
    delay_sum += e.delay_seconds(cfg.dt);
    ++m.vehicles_completed;
  }
  m.mean_delay = m.vehicles_completed ? delay_sum / static_cast<double>(m.vehicles_completed) : 0.0;

  const auto crossed = std::count_if(world.merge_crossings().begin(), world.merge_crossings().end(),
                                     [&](Tick t) { return t >= warmup && t < cfg.duration; });
  m.throughput = static_cast<double>(crossed) / window_h;

  const Tick main_lag = ticks_to(0.0, cfg.geometry.merge_point, cfg);
  const Tick ramp_lag = ticks_to(cfg.geometry.ramp_start(), cfg.geometry.merge_point, cfg);
  std::size_t offered = 0;
  for (const auto& a : arrivals) {
    const Tick at = a.tick + (a.origin == Origin::Ramp ? ramp_lag : main_lag);
    if (at >= warmup && at < cfg.duration) ++offered;
  }
  m.offered_flow = static_cast<double>(offered) / window_h;

  m.collisions = world.collisions();
  m.protocol_failures = world.protocol_failures();
  m.vehicles_demanded = arrivals.size();
  m.vehicles_injected = world.injected();
  m.vehicles_waiting = world.waiting(Origin::Mainline) + world.waiting(Origin::Ramp);
  m.forced_merges = world.forced_merges();
  const auto& d = world.diagnostics();
  m.plans_checked = d.plans_checked;
  m.kinematic_violations = d.kinematic_violations;
  m.claim_violations = d.claim_violations;
  m.separation_violations = d.separation_violations;

  RunOutput out;
  out.config = cfg;
  out.metrics = m;
  out.events = world.events();
  out.rows = world.rows();
  out.first_violation = d.first_error;
  return out;
}

ComparisonResult assemble(const MetricsReport& baseline, const MetricsReport& preemptive) {
  ComparisonResult c{baseline, preemptive, std::nullopt, std::nullopt};
  if (baseline.mean_delay > 0.0) c.delay_reduction = 1.0 - preemptive.mean_delay / baseline.mean_delay;
  if (baseline.throughput > 0.0) c.capacity_ratio = preemptive.throughput / baseline.throughput;
  return c;
}

ComparisonRun compare(const ScenarioConfig& cfg, bool record_trajectories) {
  ScenarioConfig b = cfg;
  b.strategy = Strategy::Baseline;
  ScenarioConfig p = cfg;
  p.strategy = Strategy::Preemptive;
  ComparisonRun run;
  run.baseline = run_scenario(b, record_trajectories);
  run.preemptive = run_scenario(p, record_trajectories);
  run.result = assemble(run.baseline.metrics, run.preemptive.metrics);
  return run;
}

CapacityResult measure_capacity(const ScenarioConfig& cfg, std::span<const double> rate_grid) {
  if (!std::is_sorted(rate_grid.begin(), rate_grid.end())) {
    throw std::invalid_argument("rate grid must be ascending");
  }
  const double total = cfg.demand_main + cfg.demand_ramp;
  if (!(total > 0.0)) throw std::invalid_argument("capacity sweep needs a non-zero demand split");
  const double ramp_share = cfg.demand_ramp / total;

  CapacityResult result;
  for (double level : rate_grid) {
    ScenarioConfig c = cfg;
    c.demand_ramp = level * ramp_share;
    c.demand_main = level - c.demand_ramp;
    CapacityPoint p;
    p.demand = level;
    p.metrics = run_scenario(c).metrics;
    p.stable = p.metrics.throughput >= 0.95 * p.metrics.offered_flow;
    if (p.stable) result.capacity = level;
    result.points.push_back(p);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::string fixed(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string optional_number(const std::optional<double>& x) { return x ? fixed(*x) : "null"; }

}  // namespace

std::string to_json(const MetricsReport& m, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) + 2, ' ');
  const std::string close(static_cast<std::size_t>(indent), ' ');
  std::string s = "{\n";
  auto field = [&](const char* key, const std::string& value, bool last = false) {
    s += pad + "\"" + key + "\": " + value + (last ? "\n" : ",\n");
  };
  field("mean_delay", fixed(m.mean_delay));
  field("throughput", fixed(m.throughput));
  field("collisions", std::to_string(m.collisions));
  field("vehicles_completed", std::to_string(m.vehicles_completed));
  field("protocol_failures", std::to_string(m.protocol_failures));
  field("vehicles_demanded", std::to_string(m.vehicles_demanded));
  field("vehicles_injected", std::to_string(m.vehicles_injected));
  field("vehicles_waiting", std::to_string(m.vehicles_waiting));
  field("forced_merges", std::to_string(m.forced_merges));
  field("offered_flow", fixed(m.offered_flow));
  field("plans_checked", std::to_string(m.plans_checked));
  field("kinematic_violations", std::to_string(m.kinematic_violations));
  field("claim_violations", std::to_string(m.claim_violations));
  field("separation_violations", std::to_string(m.separation_violations), true);
  return s + close + "}";
}

std::string to_json(const ComparisonResult& c) {
  std::string s = "{\n";
  s += "  \"baseline\": " + to_json(c.baseline, 2) + ",\n";
  s += "  \"preemptive\": " + to_json(c.preemptive, 2) + ",\n";
  s += "  \"delay_reduction\": " + optional_number(c.delay_reduction) + ",\n";
  s += "  \"capacity_ratio\": " + optional_number(c.capacity_ratio) + "\n";
  return s + "}\n";
}

std::string to_json(const CapacityResult& baseline, const CapacityResult& preemptive) {
  auto sweep = [](const CapacityResult& r) {
    std::string s = "{\n    \"capacity\": " + optional_number(r.capacity) + ",\n    \"points\": [";
    for (std::size_t i = 0; i < r.points.size(); ++i) {
      const auto& p = r.points[i];
      s += i ? ",\n" : "\n";
      s += "      {\"demand\": " + fixed(p.demand) + ", \"throughput\": " + fixed(p.metrics.throughput) +
           ", \"offered_flow\": " + fixed(p.metrics.offered_flow) +
           ", \"mean_delay\": " + fixed(p.metrics.mean_delay) +
           ", \"collisions\": " + std::to_string(p.metrics.collisions) +
           ", \"stable\": " + (p.stable ? "true" : "false") + "}";
    }
    return s + (r.points.empty() ? "]\n  }" : "\n    ]\n  }");
  };
  std::optional<double> ratio;
  if (baseline.capacity && preemptive.capacity && *baseline.capacity > 0.0) {
    ratio = *preemptive.capacity / *baseline.capacity;
  }
  std::string s = "{\n";
  s += "  \"baseline\": " + sweep(baseline) + ",\n";
  s += "  \"preemptive\": " + sweep(preemptive) + ",\n";
  s += "  \"capacity_ratio\": " + optional_number(ratio) + "\n";
  return s + "}\n";
}

void write_trajectories_csv(std::ostream& os, const std::vector<traffic::TrajectoryRow>& rows) {
  os << "vehicle_id,origin,tick,position_m,speed_mps,lane\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%c,%lld,%.6f,%.6f,%d\n", r.vehicle.value.c_str(),
                  traffic::origin_tag(r.origin), static_cast<long long>(r.tick), r.position,
                  r.speed, r.lane);
    os << buf;
  }
}

void write_events_csv(std::ostream& os, const std::vector<traffic::Event>& events) {
  os << "tick,event,vehicle_id,detail\n";
  for (const auto& e : events) {
    std::string detail = e.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    os << e.tick << ',' << e.event << ',' << e.vehicle.value << ',' << detail << '\n';
  }
}

}  // namespace phcs::harness

#include <pybind11/pybind11.h>
#include <pybind11/operators.h>
#include <pybind11/stl.h>

#include <sstream>

#include "phcs/harness.hpp"

namespace py = pybind11;
using namespace phcs;

namespace {

py::dict metrics_dict(const harness::MetricsReport& m) {
  py::dict d;
  d["mean_delay"] = m.mean_delay;
  d["throughput"] = m.throughput;
  d["collisions"] = m.collisions;
  d["vehicles_completed"] = m.vehicles_completed;
  d["protocol_failures"] = m.protocol_failures;
  d["vehicles_demanded"] = m.vehicles_demanded;
  d["vehicles_injected"] = m.vehicles_injected;
  d["vehicles_waiting"] = m.vehicles_waiting;
  d["forced_merges"] = m.forced_merges;
  d["offered_flow"] = m.offered_flow;
  d["plans_checked"] = m.plans_checked;
  d["kinematic_violations"] = m.kinematic_violations;
  d["claim_violations"] = m.claim_violations;
  d["separation_violations"] = m.separation_violations;
  return d;
}

py::dict run_dict(const harness::RunOutput& run, bool record) {
  py::dict d;
  d["metrics"] = metrics_dict(run.metrics);
  d["metrics_json"] = harness::to_json(run.metrics);
  std::ostringstream events;
  harness::write_events_csv(events, run.events);
  d["events_csv"] = events.str();
  if (record) {
    std::ostringstream rows;
    harness::write_trajectories_csv(rows, run.rows);
    d["trajectories_csv"] = rows.str();
  }
  d["first_violation"] = run.first_violation;
  return d;
}

}  // namespace

PYBIND11_MODULE(_phcs, m) {
  m.doc() = "Preemptive merge coordination: scheduling kernel and traffic harness";

  py::enum_<temporal::ZoneLabel>(m, "ZoneLabel")
      .value("History", temporal::ZoneLabel::History)
      .value("Frozen", temporal::ZoneLabel::Frozen)
      .value("Critical", temporal::ZoneLabel::Critical)
      .value("Planning", temporal::ZoneLabel::Planning)
      .value("Intention", temporal::ZoneLabel::Intention);

  py::class_<temporal::TemporalConfig>(m, "TemporalConfig")
      .def(py::init([](Tick f, Tick c, Tick p) { return temporal::TemporalConfig{f, c, p}; }),
           py::arg("t_frozen") = 100, py::arg("t_critical") = 30, py::arg("t_planning") = 170)
      .def_readwrite("t_frozen", &temporal::TemporalConfig::t_frozen)
      .def_readwrite("t_critical", &temporal::TemporalConfig::t_critical)
      .def_readwrite("t_planning", &temporal::TemporalConfig::t_planning)
      .def("validate", &temporal::TemporalConfig::validate);

  m.def("classify_zone", &temporal::classify_zone, py::arg("t"), py::arg("tau"), py::arg("cfg"));
  m.def("is_submittable", &temporal::is_submittable, py::arg("t"), py::arg("tau"), py::arg("cfg"));
  m.def(
      "deadlines_for",
      [](Tick tau, const temporal::TemporalConfig& cfg) {
        const auto d = temporal::deadlines_for(tau, cfg);
        return py::make_tuple(d.start_planning, d.planning_start_deadline, d.planning_finish_deadline,
                              d.execution);
      },
      py::arg("tau"), py::arg("cfg"));

  py::class_<coord::Task>(m, "Task")
      .def(py::init([](const std::string& entity, int lane, std::int64_t cell, Tick start, Tick end) {
             return coord::Task{EntityId{entity}, ResourceId{lane, cell}, start, end};
           }),
           py::arg("entity"), py::arg("lane"), py::arg("cell"), py::arg("start"), py::arg("end"))
      .def_property_readonly("entity", [](const coord::Task& t) { return t.entity.value; })
      .def_property_readonly("lane", [](const coord::Task& t) { return t.location.lane; })
      .def_property_readonly("cell", [](const coord::Task& t) { return t.location.cell; })
      .def_readonly("start", &coord::Task::start_time)
      .def_readonly("end", &coord::Task::end_time)
      .def(py::self == py::self)
      .def("__repr__", [](const coord::Task& t) {
        std::ostringstream os;
        os << "Task(" << t.entity << ", " << t.location << ", " << t.start_time << ", " << t.end_time << ")";
        return os.str();
      });

  m.def("is_conflicting", &coord::is_conflicting);

  py::class_<coord::ApprovedSchedule>(m, "Schedule")
      .def(py::init<>())
      .def("__len__", &coord::ApprovedSchedule::size)
      .def("tasks", &coord::ApprovedSchedule::all_tasks)
      .def("contains", &coord::ApprovedSchedule::contains);

  m.def(
      "try_approve",
      [](const std::string& entity, const std::vector<coord::Task>& tasks, coord::ApprovedSchedule& schedule,
         Tick now, const temporal::TemporalConfig& cfg) -> py::object {
        auto r = coord::try_approve(coord::Intention{EntityId{entity}, tasks, now}, schedule, now, cfg);
        if (!r.approved()) return py::none();
        return py::cast(r.outcome().altered_intention.tasks);
      },
      py::arg("entity"), py::arg("tasks"), py::arg("schedule"), py::arg("now"), py::arg("cfg"),
      "Approved (possibly shifted) tasks, or None when rejected.");

  py::class_<harness::ScenarioConfig>(m, "ScenarioConfig")
      .def(py::init<>())
      .def_readwrite("demand_main", &harness::ScenarioConfig::demand_main)
      .def_readwrite("demand_ramp", &harness::ScenarioConfig::demand_ramp)
      .def_readwrite("duration", &harness::ScenarioConfig::duration)
      .def_readwrite("seed", &harness::ScenarioConfig::seed)
      .def_property(
          "strategy", [](const harness::ScenarioConfig& c) { return traffic::to_string(c.strategy); },
          [](harness::ScenarioConfig& c, const std::string& s) { c.strategy = traffic::parse_strategy(s); })
      .def_readwrite("additional_space", &harness::ScenarioConfig::additional_space)
      .def_readwrite("cell_length", &harness::ScenarioConfig::cell_length)
      .def_readwrite("forced_merge", &harness::ScenarioConfig::forced_merge)
      .def_readwrite("dt", &harness::ScenarioConfig::dt)
      .def_readwrite("gap_lead_min", &harness::ScenarioConfig::gap_lead_min)
      .def_readwrite("gap_lag_min", &harness::ScenarioConfig::gap_lag_min)
      .def_readwrite("vehicle_length", &harness::ScenarioConfig::vehicle_length)
      .def_readwrite("max_delay", &harness::ScenarioConfig::max_delay)
      .def_readwrite("warmup_fraction", &harness::ScenarioConfig::warmup_fraction)
      .def_readwrite("temporal", &harness::ScenarioConfig::temporal)
      .def_property(
          "v_max", [](const harness::ScenarioConfig& c) { return c.krauss.v_max; },
          [](harness::ScenarioConfig& c, double v) { c.krauss.v_max = v; })
      .def_property(
          "sigma", [](const harness::ScenarioConfig& c) { return c.krauss.sigma; },
          [](harness::ScenarioConfig& c, double v) { c.krauss.sigma = v; })
      .def_property(
          "mainline_length", [](const harness::ScenarioConfig& c) { return c.geometry.mainline_length; },
          [](harness::ScenarioConfig& c, double v) { c.geometry.mainline_length = v; })
      .def_property(
          "ramp_length", [](const harness::ScenarioConfig& c) { return c.geometry.ramp_length; },
          [](harness::ScenarioConfig& c, double v) { c.geometry.ramp_length = v; })
      .def_property(
          "merge_point", [](const harness::ScenarioConfig& c) { return c.geometry.merge_point; },
          [](harness::ScenarioConfig& c, double v) { c.geometry.merge_point = v; })
      .def("validate", &harness::ScenarioConfig::validate)
      .def("warmup_ticks", &harness::ScenarioConfig::warmup_ticks);

  m.def("generate_demand", &harness::generate_demand, py::arg("rate_per_hour"), py::arg("duration"),
        py::arg("seed"), py::arg("min_headway") = 0.0, py::arg("dt") = 0.1);

  m.def(
      "run_scenario",
      [](const harness::ScenarioConfig& cfg, bool record) {
        return run_dict(harness::run_scenario(cfg, record), record);
      },
      py::arg("cfg"), py::arg("record_trajectories") = false);

  m.def(
      "compare",
      [](const harness::ScenarioConfig& cfg) {
        const auto c = harness::compare(cfg);
        py::dict d;
        d["baseline"] = metrics_dict(c.result.baseline);
        d["preemptive"] = metrics_dict(c.result.preemptive);
        d["delay_reduction"] = c.result.delay_reduction ? py::cast(*c.result.delay_reduction) : py::none();
        d["capacity_ratio"] = c.result.capacity_ratio ? py::cast(*c.result.capacity_ratio) : py::none();
        d["json"] = harness::to_json(c.result);
        return d;
      },
      py::arg("cfg"));

  m.def(
      "measure_capacity",
      [](const harness::ScenarioConfig& cfg, const std::vector<double>& grid) {
        const auto r = harness::measure_capacity(cfg, grid);
        py::list points;
        for (const auto& p : r.points) {
          py::dict d;
          d["demand"] = p.demand;
          d["stable"] = p.stable;
          d["metrics"] = metrics_dict(p.metrics);
          points.append(d);
        }
        py::dict d;
        d["points"] = points;
        d["capacity"] = r.capacity ? py::cast(*r.capacity) : py::none();
        return d;
      },
      py::arg("cfg"), py::arg("grid"));
}

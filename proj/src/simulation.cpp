#include "phcs/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <stdexcept>

#include "phcs/spatial.hpp"

namespace phcs::traffic {

std::string to_string(Strategy s) {
  return s == Strategy::Preemptive ? "preemptive" : "baseline";
}

Strategy parse_strategy(const std::string& text) {
  if (text == "baseline") return Strategy::Baseline;
  if (text == "preemptive") return Strategy::Preemptive;
  throw std::invalid_argument("unknown strategy '" + text + "' (expected baseline or preemptive)");
}

World::World(WorldConfig cfg, std::vector<Arrival> arrivals)
    : cfg_(std::move(cfg)), rng_(cfg_.seed) {
  cfg_.geometry.validate();
  cfg_.krauss.validate();
  if (!(cfg_.dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(cfg_.vehicle_length > 0.0)) throw std::invalid_argument("vehicle length must be positive");
  std::stable_sort(arrivals.begin(), arrivals.end(),
                   [](const Arrival& a, const Arrival& b) { return a.tick < b.tick; });
  for (const Arrival& a : arrivals) queue(a.origin).push_back(a);

  if (cfg_.strategy == Strategy::Preemptive) {
    PreemptiveConfig pc;
    pc.plan = {cfg_.geometry, cfg_.krauss, cfg_.dt};
    pc.temporal = cfg_.temporal;
    pc.additional_space = cfg_.additional_space;
    pc.cell_length = cfg_.cell_length;
    pc.max_delay = cfg_.max_delay;
    controller_ = std::make_unique<PreemptiveController>(pc);
  }
  free_main_ = free_ticks_from(Origin::Mainline);
  free_ramp_ = free_ticks_from(Origin::Ramp);
}

Tick World::free_ticks_from(Origin o) const {
  VehicleState probe;
  probe.position = cfg_.geometry.entry_position(o);
  probe.speed = cfg_.krauss.v_max;
  const PlanContext ctx{cfg_.geometry, cfg_.krauss, cfg_.dt};
  return *compose_trajectory(probe, 0, ctx).crossing_tick(cfg_.geometry.mainline_length);
}

std::size_t World::waiting(Origin o) const {
  return o == Origin::Ramp ? ramp_queue_.size() : main_queue_.size();
}

double World::uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

void World::emit(Tick tick, std::string event, const EntityId& id, std::string detail) {
  events_.push_back({tick, std::move(event), id, std::move(detail)});
}

std::vector<const SimVehicle*> World::lane_order(int lane) const {
  std::vector<const SimVehicle*> out;
  for (const auto& [_, v] : vehicles_) {
    if (v.state.lane == lane) out.push_back(&v);
  }
  std::sort(out.begin(), out.end(), [](const SimVehicle* a, const SimVehicle* b) {
    if (a->state.position != b->state.position) return a->state.position > b->state.position;
    return a->state.id < b->state.id;
  });
  return out;
}

void World::note_plan(const Trajectory& plan) {
  if (!cfg_.check_invariants) return;
  ++diag_.plans_checked;
  if (auto err = check_kinematics(plan, cfg_.krauss, cfg_.dt)) {
    ++diag_.kinematic_violations;
    if (diag_.first_error.empty()) diag_.first_error = plan.vehicle.value + ": " + *err;
  }
  if (!controller_->merge_list().separated(cfg_.additional_space, cfg_.dt)) {
    ++diag_.separation_violations;
    if (diag_.first_error.empty()) diag_.first_error = "merge list separation after " + plan.vehicle.value;
  }
}

const SimVehicle& World::place(VehicleState state, Tick demand_tick) {
  SimVehicle v;
  v.state = std::move(state);
  v.state.entered_at = now_;
  v.demand_tick = demand_tick;
  VehicleState probe = v.state;
  probe.speed = cfg_.krauss.v_max;
  const PlanContext ctx{cfg_.geometry, cfg_.krauss, cfg_.dt};
  v.free_ticks = *compose_trajectory(probe, 0, ctx).crossing_tick(cfg_.geometry.mainline_length);
  if (controller_ && (v.state.origin == Origin::Ramp ||
                      v.state.position >= cfg_.geometry.detection_boundary)) {
    Registration reg = controller_->check_new_vehicle(v.state, now_);
    if (reg.ok) {
      v.registered = true;
      v.plan = reg.trajectory;
      note_plan(*v.plan);
    }
  }
  ++injected_;
  emit(now_, "entered", v.state.id, std::to_string(demand_tick));
  auto [it, _] = vehicles_.insert_or_assign(v.state.id, std::move(v));
  return it->second;
}

void World::inject() {
  for (Origin o : {Origin::Mainline, Origin::Ramp}) {
    auto& q = queue(o);
    if (q.empty() || q.front().tick > now_) continue;
    const int lane = o == Origin::Ramp ? kRampLane : kMainLane;
    const double entry = cfg_.geometry.entry_position(o);

    const SimVehicle* leader = nullptr;
    for (const auto& [_, v] : vehicles_) {
      if (v.state.lane != lane || v.state.position < entry) continue;
      if (!leader || v.state.position < leader->state.position) leader = &v;
    }
    VehicleState s;
    s.id = make_vehicle_id(o, serial_ + 1);
    s.origin = o;
    s.lane = lane;
    s.position = entry;
    s.length = cfg_.vehicle_length;
    s.entered_at = now_;
    s.speed = cfg_.krauss.v_max;
    if (leader) {
      const double gap = leader->state.rear() - entry - cfg_.krauss.min_gap;
      if (gap < 0.0) continue;
      const double v_safe = krauss_step(s, &leader->state, cfg_.krauss, 0.0, 0.0);
      s.speed = std::clamp(v_safe, 0.0, cfg_.krauss.v_max);
    }

    SimVehicle v;
    v.state = s;
    v.demand_tick = q.front().tick;
    v.free_ticks = o == Origin::Ramp ? free_ramp_ : free_main_;
    if (controller_ && o == Origin::Ramp) {
      // Ramp vehicles enter inside the detection area; they wait at the
      // ramp entrance until the manager can schedule them.
      Registration reg = controller_->check_new_vehicle(s, now_);
      if (!reg.ok) continue;
      v.registered = true;
      v.plan = reg.trajectory;
      note_plan(*v.plan);
    }
    ++serial_;
    ++injected_;
    q.pop_front();
    emit(now_, "entered", s.id, std::to_string(v.demand_tick));
    vehicles_.emplace(s.id, std::move(v));
  }
}

void World::fall_back(SimVehicle& v, const std::string& detail) {
  v.fallback = true;
  ++protocol_failures_;
  emit(now_, "protocol_failure", v.state.id, detail);
}

void World::register_detected() {
  std::vector<SimVehicle*> candidates;
  for (auto& [_, v] : vehicles_) {
    if (!v.registered && !v.fallback && v.state.lane == kMainLane &&
        v.state.position >= cfg_.geometry.detection_boundary) {
      candidates.push_back(&v);
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const SimVehicle* a, const SimVehicle* b) {
    if (a->state.position != b->state.position) return a->state.position > b->state.position;
    return a->state.id < b->state.id;
  });
  for (SimVehicle* v : candidates) {
    bool unplanned_ahead = false;
    for (const auto& [id, o] : vehicles_) {
      if (id != v->state.id && o.state.lane == kMainLane && !o.registered &&
          o.state.position >= v->state.position) {
        unplanned_ahead = true;
        break;
      }
    }
    if (unplanned_ahead) {
      fall_back(*v, "unscheduled vehicle ahead");
      continue;
    }
    Registration reg = controller_->check_new_vehicle(v->state, now_);
    if (!reg.ok) {
      std::string detail = reg.reason ? coord::to_string(*reg.reason) + ": " + reg.detail
                                      : reg.detail;
      fall_back(*v, detail);
      continue;
    }
    v->registered = true;
    v->plan = reg.trajectory;
    note_plan(*v->plan);
  }
}

void World::record_rows() {
  for (const auto& [id, v] : vehicles_) {
    rows_.push_back({id, v.state.origin, now_, v.state.position, v.state.speed, v.state.lane});
  }
}

void World::check_claims() {
  const auto& approved = controller_->manager().schedule();
  const auto& near = controller_->near_term();
  for (const auto& [id, v] : vehicles_) {
    if (!v.registered) continue;
    for (const ResourceId& cell : spatial::cells_for_span(v.state.lane, v.state.rear(),
                                                          v.state.position, cfg_.cell_length)) {
      const coord::Task probe{id, cell, now_, now_};
      auto owned = [&](const coord::ApprovedSchedule& s) {
        for (const coord::Task& t : s.conflicts_with(probe)) {
          if (t.entity == id) return true;
        }
        return false;
      };
      if (!owned(approved) && !owned(near)) {
        ++diag_.claim_violations;
        if (diag_.first_error.empty()) {
          diag_.first_error = id.value + " occupies unclaimed cell at tick " + std::to_string(now_);
        }
      }
    }
  }
}

void World::step() {
  // Leaders are taken from the state at the current tick so that every
  // vehicle reacts to the same snapshot.
  std::map<EntityId, const VehicleState*> leader_of;
  for (int lane : {kMainLane, kRampLane}) {
    const auto order = lane_order(lane);
    for (std::size_t i = 0; i < order.size(); ++i) {
      leader_of[order[i]->state.id] = i > 0 ? &order[i - 1]->state : nullptr;
    }
  }
  VehicleState ramp_end;
  ramp_end.id = EntityId{"ramp-end"};
  ramp_end.position = cfg_.geometry.merge_point;
  ramp_end.length = 0.0;
  ramp_end.speed = 0.0;

  std::map<EntityId, VehicleState> next;
  for (const auto& [id, v] : vehicles_) {
    VehicleState s = v.state;
    if (v.registered) {
      const TrajectorySample* sample = v.plan->at(now_ + 1);
      if (sample) {
        s.acceleration = (sample->speed - s.speed) / cfg_.dt;
        s.position = sample->position;
        s.speed = sample->speed;
      }
      if (s.origin == Origin::Ramp && s.position >= cfg_.geometry.merge_point) s.lane = kMainLane;
    } else {
      const VehicleState* leader = leader_of[id];
      if (!leader && s.lane == kRampLane) leader = &ramp_end;
      // The car-following rule may ask for more than the vehicle can brake.
      const double v_next = std::max(krauss_step(s, leader, cfg_.krauss, cfg_.dt, uniform()),
                                     std::max(0.0, s.speed - cfg_.krauss.b_decel * cfg_.dt));
      s.acceleration = (v_next - s.speed) / cfg_.dt;
      s.speed = v_next;
      s.position += v_next * cfg_.dt;
    }
    next.emplace(id, s);
  }
  for (auto& [id, v] : vehicles_) v.state = next.at(id);
}

void World::merge_ramp_vehicles() {
  std::vector<SimVehicle*> waiting;
  for (auto& [_, v] : vehicles_) {
    if (!v.registered && v.state.lane == kRampLane &&
        v.state.position >= cfg_.geometry.merge_point - cfg_.geometry.merge_zone_length) {
      waiting.push_back(&v);
    }
  }
  std::sort(waiting.begin(), waiting.end(), [](const SimVehicle* a, const SimVehicle* b) {
    return a->state.position > b->state.position;
  });
  constexpr double kOpen = std::numeric_limits<double>::infinity();
  for (SimVehicle* v : waiting) {
    double lead_gap = kOpen;
    double lag_gap = kOpen;
    for (const SimVehicle* o : lane_order(kMainLane)) {
      if (o->state.position >= v->state.position) {
        lead_gap = o->state.rear() - v->state.position;
      } else {
        lag_gap = v->state.rear() - o->state.position;
        break;
      }
    }
    const MergeDecision d =
        baseline_merge_decision(v->state, lead_gap, lag_gap, cfg_.geometry, cfg_.krauss, cfg_.gaps);
    if (d == MergeDecision::Wait) continue;
    v->state.lane = kMainLane;
    v->merged = true;
    if (d == MergeDecision::ForcedAccept) ++forced_merges_;
    emit(now_, "merged", v->state.id, to_string(d));
  }
}

void World::detect_crossings(const std::map<EntityId, double>& previous) {
  const double mp = cfg_.geometry.merge_point;
  for (auto& [id, v] : vehicles_) {
    const double before = previous.at(id);
    if (!(before < mp && v.state.position >= mp) || v.state.lane != kMainLane) continue;
    crossings_.push_back(now_);
    if (v.state.origin == Origin::Ramp && !v.merged) {
      v.merged = true;
      emit(now_, "merged", id, "scheduled");
    }
  }
}

void World::remove_exited() {
  for (auto it = vehicles_.begin(); it != vehicles_.end();) {
    const SimVehicle& v = it->second;
    if (v.state.position < cfg_.geometry.mainline_length) {
      ++it;
      continue;
    }
    ExitRecord rec{v.state.id, v.state.origin, v.demand_tick, v.state.entered_at, now_,
                   v.free_ticks};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", rec.delay_seconds(cfg_.dt));
    emit(now_, "exited", v.state.id, buf);
    exits_.push_back(rec);
    if (controller_) controller_->release(v.state.id);
    it = vehicles_.erase(it);
  }
}

void World::detect_collisions() {
  std::set<EntityId> crashed;
  for (int lane : {kMainLane, kRampLane}) {
    const auto order = lane_order(lane);
    for (std::size_t i = 1; i < order.size(); ++i) {
      const VehicleState& lead = order[i - 1]->state;
      const VehicleState& follow = order[i]->state;
      if (follow.position > lead.rear()) {
        ++collisions_;
        emit(now_, "collision", follow.id, lead.id.value);
        crashed.insert(follow.id);
        crashed.insert(lead.id);
      }
    }
  }
  for (const EntityId& id : crashed) {
    if (controller_) controller_->release(id);
    vehicles_.erase(id);
  }
}

void World::advance_tick() {
  inject();
  if (controller_) register_detected();
  if (cfg_.record_trajectories) record_rows();
  if (controller_ && cfg_.check_invariants) check_claims();

  std::map<EntityId, double> previous;
  for (const auto& [id, v] : vehicles_) previous.emplace(id, v.state.position);
  step();
  ++now_;
  merge_ramp_vehicles();
  detect_crossings(previous);
  remove_exited();
  detect_collisions();
  if (controller_ && now_ % 50 == 0) controller_->prune(now_);
}

void World::run_until(Tick end) {
  while (now_ < end) advance_tick();
}

}  // namespace phcs::traffic

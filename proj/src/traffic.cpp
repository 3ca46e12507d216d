#include "phcs/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "phcs/spatial.hpp"

namespace phcs::traffic {

char origin_tag(Origin o) { return o == Origin::Ramp ? 'r' : 'm'; }

std::optional<Origin> origin_of(const EntityId& id) {
  if (id.value.empty()) return std::nullopt;
  switch (id.value.front()) {
    case 'm': return Origin::Mainline;
    case 'r': return Origin::Ramp;
    default: return std::nullopt;
  }
}

EntityId make_vehicle_id(Origin origin, int serial) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%06d", origin_tag(origin), serial);
  return EntityId{buf};
}

void RoadGeometry::validate() const {
  if (!(0.0 < detection_boundary && detection_boundary < merge_point &&
        merge_point < mainline_length)) {
    throw std::invalid_argument(
        "geometry requires 0 < detection_boundary < merge_point < mainline_length");
  }
  if (!(ramp_length > 0.0 && ramp_length <= merge_point)) {
    throw std::invalid_argument("ramp_length must be positive and fit before the merge point");
  }
  if (!(merge_zone_length > 0.0 && merge_zone_length <= ramp_length)) {
    throw std::invalid_argument("merge_zone_length must lie in (0, ramp_length]");
  }
}

void KraussParams::validate() const {
  if (!(v_max > 0 && a_accel > 0 && b_decel > 0 && reaction_time > 0 && min_gap > 0)) {
    throw std::invalid_argument("Krauss parameters must be positive");
  }
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw std::invalid_argument("sigma must lie in [0, 1]");
}

double krauss_step(const VehicleState& follower, const VehicleState* leader,
                   const KraussParams& p, double dt, double noise) {
  const double v = follower.speed;
  double v_safe = std::numeric_limits<double>::infinity();
  if (leader != nullptr) {
    const double gap = leader->rear() - follower.position - p.min_gap;
    const double v_lead = leader->speed;
    const double v_mean = 0.5 * (v + v_lead);
    v_safe = v_lead + (gap - v_lead * p.reaction_time) / (v_mean / p.b_decel + p.reaction_time);
  }
  const double v_des = std::min({v + p.a_accel * dt, p.v_max, v_safe});
  return std::max(0.0, v_des - p.sigma * p.a_accel * dt * noise);
}

std::string to_string(MergeDecision d) {
  switch (d) {
    case MergeDecision::Accept: return "accept";
    case MergeDecision::Wait: return "wait";
    case MergeDecision::ForcedAccept: return "forced";
  }
  return "?";
}

bool at_ramp_end(const VehicleState& v, const RoadGeometry& g, const KraussParams& p) {
  return v.position >= g.merge_point - p.min_gap - 1.0 && v.speed <= 0.5;
}

MergeDecision baseline_merge_decision(const VehicleState& ramp_vehicle, double lead_gap,
                                      double lag_gap, const RoadGeometry& geometry,
                                      const KraussParams& params, const GapAcceptance& gaps) {
  if (lead_gap >= gaps.gap_lead_min && lag_gap >= gaps.gap_lag_min) return MergeDecision::Accept;
  if (gaps.forced_merge && at_ramp_end(ramp_vehicle, geometry, params) && lead_gap >= 0.0 &&
      lag_gap >= 0.0) {
    return MergeDecision::ForcedAccept;
  }
  return MergeDecision::Wait;
}

// ---------------------------------------------------------------------------
// Trajectories

const TrajectorySample* Trajectory::at(Tick tick) const {
  if (samples.empty() || tick < first_tick() || tick > last_tick()) return nullptr;
  return &samples[static_cast<std::size_t>(tick - first_tick())];
}

std::optional<Tick> Trajectory::crossing_tick(double x) const {
  auto it = std::partition_point(samples.begin(), samples.end(),
                                 [x](const TrajectorySample& s) { return s.position < x; });
  if (it == samples.end()) return std::nullopt;
  return it->tick;
}

std::optional<std::string> check_kinematics(const Trajectory& tr, const KraussParams& p, double dt,
                                            double tol) {
  constexpr double kSpeedEps = 1e-9;
  char buf[200];
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    const auto& s = tr.samples[i];
    if (s.speed < -kSpeedEps || s.speed > p.v_max + kSpeedEps) {
      std::snprintf(buf, sizeof buf, "speed %.9f out of range at tick %lld", s.speed,
                    static_cast<long long>(s.tick));
      return std::string(buf);
    }
    if (i == 0) continue;
    const auto& prev = tr.samples[i - 1];
    if (s.tick != prev.tick + 1) {
      std::snprintf(buf, sizeof buf, "ticks not consecutive at %lld", static_cast<long long>(s.tick));
      return std::string(buf);
    }
    if (s.position < prev.position) {
      std::snprintf(buf, sizeof buf, "position decreases at tick %lld",
                    static_cast<long long>(s.tick));
      return std::string(buf);
    }
    const double accel = (s.speed - prev.speed) / dt;
    if (accel > p.a_accel + 1e-6 || accel < -p.b_decel - 1e-6) {
      std::snprintf(buf, sizeof buf, "acceleration %.9f out of bounds at tick %lld", accel,
                    static_cast<long long>(s.tick));
      return std::string(buf);
    }
    const double mismatch = std::abs((s.position - prev.position) - 0.5 * (s.speed + prev.speed) * dt);
    if (mismatch > tol) {
      std::snprintf(buf, sizeof buf, "displacement mismatch %.3e at tick %lld", mismatch,
                    static_cast<long long>(s.tick));
      return std::string(buf);
    }
  }
  return std::nullopt;
}

namespace {

constexpr std::size_t kMaxSamples = 500000;

double approach(double v, double target, const KraussParams& p, double dt) {
  if (v > target) return std::max(v - p.b_decel * dt, target);
  return std::min(v + p.a_accel * dt, target);
}

// Speed target of the capped profile at position x.
double capped_target(double x, double v_cap, const PlanContext& ctx) {
  return x < ctx.geometry.merge_point ? std::min(v_cap, ctx.params.v_max) : ctx.params.v_max;
}

Trajectory build(const VehicleState& vehicle, Tick from_time, double v_cap,
                 const PlanContext& ctx) {
  Trajectory tr;
  tr.vehicle = vehicle.id;
  double x = vehicle.position;
  double v = std::min(vehicle.speed, ctx.params.v_max);
  Tick t = from_time;
  tr.samples.push_back({t, x, v});
  while (x < ctx.geometry.mainline_length) {
    const double v_next = approach(v, capped_target(x, v_cap, ctx), ctx.params, ctx.dt);
    x += 0.5 * (v + v_next) * ctx.dt;
    v = v_next;
    ++t;
    tr.samples.push_back({t, x, v});
    if (tr.samples.size() > kMaxSamples) {
      throw std::logic_error("trajectory does not reach the end of the road");
    }
  }
  tr.complete = true;
  return tr;
}

// Tick at which the capped profile reaches the merge point, or limit + 1
// if it has not by `limit`.
Tick crossing_with_cap(const VehicleState& vehicle, Tick from_time, double v_cap, Tick limit,
                       const PlanContext& ctx) {
  double x = vehicle.position;
  double v = std::min(vehicle.speed, ctx.params.v_max);
  Tick t = from_time;
  const double mp = ctx.geometry.merge_point;
  while (x < mp) {
    if (t >= limit) return limit + 1;
    const double v_next = approach(v, capped_target(x, v_cap, ctx), ctx.params, ctx.dt);
    x += 0.5 * (v + v_next) * ctx.dt;
    v = v_next;
    ++t;
  }
  return t;
}

}  // namespace

Trajectory compose_trajectory(const VehicleState& vehicle, Tick from_time, const PlanContext& ctx) {
  return build(vehicle, from_time, ctx.params.v_max, ctx);
}

Trajectory capped_trajectory(const VehicleState& vehicle, Tick from_time, double v_cap,
                             const PlanContext& ctx) {
  if (!(v_cap > 0.0)) throw std::invalid_argument("speed cap must be positive");
  return build(vehicle, from_time, v_cap, ctx);
}

std::optional<Trajectory> trajectory_crossing_at(const VehicleState& vehicle, Tick from_time,
                                                 Tick crossing, const PlanContext& ctx,
                                                 double cap_hi, double* cap_used) {
  double lo = 0.0;
  double hi = std::min(cap_hi, ctx.params.v_max);
  if (crossing_with_cap(vehicle, from_time, hi, crossing, ctx) == crossing) {
    if (cap_used) *cap_used = hi;
    return build(vehicle, from_time, hi, ctx);
  }
  for (int iter = 0; iter < 80; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > 0.0)) break;
    const Tick c = crossing_with_cap(vehicle, from_time, mid, crossing, ctx);
    if (c == crossing) {
      if (cap_used) *cap_used = mid;
      return build(vehicle, from_time, mid, ctx);
    }
    if (c > crossing) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::nullopt;
}

Tick headway_ticks(double space_len, double speed, double dt) {
  const double v = std::max(speed, kMinHeadwaySpeed);
  return static_cast<Tick>(std::ceil(space_len / v / dt - 1e-9));
}

// ---------------------------------------------------------------------------
// Merge list

void MergeList::insert(MergeEntry entry) {
  auto it = std::upper_bound(entries_.begin(), entries_.end(), entry.crossing,
                             [](Tick t, const MergeEntry& e) { return t < e.crossing; });
  entries_.insert(it, std::move(entry));
}

void MergeList::erase(const EntityId& vehicle) {
  std::erase_if(entries_, [&](const MergeEntry& e) { return e.vehicle == vehicle; });
}

const MergeEntry* MergeList::predecessor(Tick tick) const {
  auto it = std::upper_bound(entries_.begin(), entries_.end(), tick,
                             [](Tick t, const MergeEntry& e) { return t < e.crossing; });
  if (it == entries_.begin()) return nullptr;
  return &*std::prev(it);
}

const MergeEntry* MergeList::successor(Tick tick) const {
  auto it = std::upper_bound(entries_.begin(), entries_.end(), tick,
                             [](Tick t, const MergeEntry& e) { return t < e.crossing; });
  if (it == entries_.end()) return nullptr;
  return &*it;
}

bool MergeList::separated(double additional_space, double dt) const {
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    const auto& lead = entries_[i - 1];
    const auto& follow = entries_[i];
    if (follow.crossing - lead.crossing <
        headway_ticks(lead.length + additional_space, follow.crossing_speed, dt)) {
      return false;
    }
  }
  return true;
}

ScheduledTrajectory merge_into(const VehicleState& vehicle, const Trajectory& desired,
                               MergeList& merge_list, const PlanContext& ctx,
                               const MergeSearch& search) {
  const double mp = ctx.geometry.merge_point;
  const auto desired_crossing = desired.crossing_tick(mp);
  if (!desired_crossing || vehicle.position >= mp) {
    throw MergeInfeasible(vehicle.id.value + " has no merge-point crossing ahead");
  }
  const Tick from = desired.first_tick();
  const Tick t_free = *desired_crossing;
  const Tick t_last = t_free + search.max_delay;
  const double space_len = vehicle.length + search.additional_space;

  Tick target = std::max(t_free, search.min_crossing);
  double cap_hi = ctx.params.v_max;
  while (target <= t_last) {
    std::optional<Trajectory> candidate;
    if (target == t_free) {
      candidate = desired;
    } else {
      candidate = trajectory_crossing_at(vehicle, from, target, ctx, cap_hi, &cap_hi);
    }
    if (!candidate) {
      ++target;
      continue;
    }
    const TrajectorySample* at_cross = candidate->at(target);
    const double v_cross = at_cross->speed;

    if (const MergeEntry* pred = merge_list.predecessor(target)) {
      const Tick need = headway_ticks(pred->length + search.additional_space, v_cross, ctx.dt);
      if (target - pred->crossing < need) {
        target = pred->crossing + need;
        continue;
      }
    }
    if (const MergeEntry* succ = merge_list.successor(target)) {
      const Tick need = headway_ticks(space_len, succ->crossing_speed, ctx.dt);
      if (succ->crossing - target < need) {
        target = succ->crossing +
                 headway_ticks(succ->length + search.additional_space, v_cross, ctx.dt);
        continue;
      }
    }
    if (search.feasible && !search.feasible(*candidate)) {
      ++target;
      continue;
    }
    auto shared = std::make_shared<const Trajectory>(*candidate);
    merge_list.insert({vehicle.id, target, v_cross, vehicle.length, shared});
    return {std::move(*candidate), target, v_cross};
  }
  throw MergeInfeasible("no feasible merge slot for " + vehicle.id.value + " within " +
                        std::to_string(search.max_delay) + " ticks of its desired crossing");
}

// ---------------------------------------------------------------------------
// PreemptiveController

PreemptiveController::PreemptiveController(PreemptiveConfig cfg)
    : cfg_(std::move(cfg)), manager_("rsmu1", cfg_.temporal) {
  cfg_.plan.geometry.validate();
  cfg_.plan.params.validate();
  if (!(cfg_.cell_length > 0.0)) throw std::invalid_argument("cell length must be positive");
}

std::vector<coord::Task> PreemptiveController::footprint_claims(const EntityId& vehicle,
                                                                Origin origin, double length,
                                                                const Trajectory& tr) const {
  std::vector<spatial::Footprint> prints;
  prints.reserve(tr.samples.size());
  const double mp = cfg_.plan.geometry.merge_point;
  for (const auto& s : tr.samples) {
    const int lane = (origin == Origin::Ramp && s.position < mp) ? kRampLane : kMainLane;
    prints.push_back({s.tick, lane, s.position - length, s.position});
  }
  return spatial::claims_from_footprints(vehicle, prints, cfg_.cell_length);
}

bool PreemptiveController::reservations_free(const std::vector<coord::Task>& claims) const {
  for (const auto& c : claims) {
    if (manager_.schedule().first_conflict(c) || near_term_.first_conflict(c)) return false;
  }
  return true;
}

bool PreemptiveController::stop_profile_blocked(const VehicleState& vehicle, Tick now) const {
  Trajectory stop;
  stop.vehicle = vehicle.id;
  double x = vehicle.position;
  double v = vehicle.speed;
  Tick t = now;
  stop.samples.push_back({t, x, v});
  while (v > 0.0) {
    const double v_next = std::max(0.0, v - cfg_.plan.params.b_decel * cfg_.plan.dt);
    x += 0.5 * (v + v_next) * cfg_.plan.dt;
    v = v_next;
    stop.samples.push_back({++t, x, v});
  }
  return !reservations_free(footprint_claims(vehicle.id, vehicle.origin, vehicle.length, stop));
}

Registration PreemptiveController::check_new_vehicle(const VehicleState& vehicle, Tick now) {
  Registration reg;
  const auto origin = origin_of(vehicle.id);
  if (!origin) {
    reg.reason = coord::RejectReason::UnknownEntity;
    reg.detail = "unparseable origin tag in " + vehicle.id.value;
    return reg;
  }
  if (scheduled_.contains(vehicle.id)) {
    reg.detail = vehicle.id.value + " is already registered";
    return reg;
  }
  if (stop_profile_blocked(vehicle, now)) {
    reg.detail = "entry blocked by reserved cells";
    return reg;
  }

  const PlanContext& ctx = cfg_.plan;
  const double mp = ctx.geometry.merge_point;
  Trajectory desired = compose_trajectory(vehicle, now, ctx);
  auto feasible = [&](const Trajectory& tr) {
    return reservations_free(footprint_claims(vehicle.id, *origin, vehicle.length, tr));
  };

  Trajectory plan;
  bool in_merge_list = false;
  Tick crossing = 0;
  if (vehicle.position >= mp) {
    if (!feasible(desired)) {
      reg.detail = "free trajectory past the merge point conflicts";
      return reg;
    }
    plan = std::move(desired);
  } else {
    Tick min_crossing = 0;
    if (auto it = origin_lists_.find(*origin); it != origin_lists_.end() && !it->second.empty()) {
      if (auto c = crossings_.find(it->second.back()); c != crossings_.end()) {
        min_crossing = c->second + 1;
      }
    }
    const Tick t_free = *desired.crossing_tick(mp);
    if (merge_list_.empty() && min_crossing <= t_free && feasible(desired)) {
      crossing = t_free;
      auto shared = std::make_shared<const Trajectory>(desired);
      merge_list_.insert({vehicle.id, t_free, desired.at(t_free)->speed, vehicle.length, shared});
      plan = std::move(desired);
    } else {
      MergeSearch search;
      search.additional_space = cfg_.additional_space;
      search.min_crossing = min_crossing;
      search.max_delay = cfg_.max_delay;
      search.feasible = feasible;
      try {
        ScheduledTrajectory s = merge_into(vehicle, desired, merge_list_, ctx, search);
        crossing = s.crossing;
        plan = std::move(s.trajectory);
      } catch (const MergeInfeasible& e) {
        reg.detail = e.what();
        return reg;
      }
    }
    in_merge_list = true;
  }

  // Cells first touched inside the frozen and critical windows cannot be
  // shared any more; they are tracked as near-term occupancy. The rest goes
  // through the manager as an intention.
  const Tick cutoff = now + cfg_.temporal.t_frozen + cfg_.temporal.t_critical;
  std::vector<coord::Task> near;
  std::vector<coord::Task> shared;
  for (auto& c : footprint_claims(vehicle.id, *origin, vehicle.length, plan)) {
    (c.start_time < cutoff ? near : shared).push_back(std::move(c));
  }

  manager_.register_entity(vehicle.id);
  if (!shared.empty()) {
    const coord::Intention intention =
        coord::entity_submit(vehicle.id, std::move(shared), now, cfg_.temporal);
    const coord::ApprovalResult result = manager_.try_approve(intention, now);
    bool failed = !result.approved();
    if (!failed && result.outcome().altered()) {
      // The claims no longer match the trajectory; withdraw them.
      for (const auto& t : result.outcome().altered_intention.tasks) manager_.schedule().erase(t);
      reg.reason = coord::RejectReason::ResolutionFailure;
      reg.detail = "approved claims were shifted away from the trajectory";
      failed = true;
    } else if (failed) {
      reg.reason = result.rejection().reason;
      reg.detail = result.rejection().detail;
    }
    if (failed) {
      manager_.unregister_entity(vehicle.id);
      (void)manager_.drain_outbox();
      if (in_merge_list) merge_list_.erase(vehicle.id);
      return reg;
    }
  }
  for (const auto& c : near) near_term_.insert(c);

  auto stored = std::make_shared<const Trajectory>(std::move(plan));
  scheduled_[vehicle.id] = stored;
  origin_lists_[*origin].push_back(vehicle.id);
  if (in_merge_list) crossings_[vehicle.id] = crossing;

  reg.ok = true;
  reg.trajectory = std::move(stored);
  reg.claim_cutoff = cutoff;
  return reg;
}

void PreemptiveController::release(const EntityId& vehicle) {
  if (auto o = origin_of(vehicle)) {
    auto& ids = origin_lists_[*o];
    std::erase(ids, vehicle);
  }
  merge_list_.erase(vehicle);
  scheduled_.erase(vehicle);
  crossings_.erase(vehicle);
  manager_.unregister_entity(vehicle);
}

void PreemptiveController::prune(Tick now) {
  manager_.schedule().prune_before(now);
  near_term_.prune_before(now);
}

}  // namespace phcs::traffic

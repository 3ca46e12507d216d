#include <algorithm>
#include <random>

#include "doctest.h"
#include "oracle.hpp"
#include "phcs/simulation.hpp"
#include "phcs/spatial.hpp"

using namespace phcs;
using coord::Task;

namespace {

int pick(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

temporal::TemporalConfig random_config(std::mt19937_64& rng) {
  return {pick(rng, 1, 20), pick(rng, 1, 10), pick(rng, 1, 30)};
}

}  // namespace

TEST_CASE("every future tick has exactly one zone and zones only age") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 200; ++round) {
    const auto cfg = random_config(rng);
    const Tick tau = pick(rng, 0, 200);
    int previous = static_cast<int>(temporal::ZoneLabel::Intention);
    for (Tick now = 0; now <= tau + 5; ++now) {
      const auto z = temporal::classify_zone(now, tau, cfg);
      const Tick ahead = tau - now;
      // Independent restatement of the partition.
      temporal::ZoneLabel expected = temporal::ZoneLabel::Intention;
      if (ahead <= 0) expected = temporal::ZoneLabel::History;
      else if (ahead <= cfg.t_frozen) expected = temporal::ZoneLabel::Frozen;
      else if (ahead <= cfg.t_frozen + cfg.t_critical) expected = temporal::ZoneLabel::Critical;
      else if (ahead <= cfg.t_frozen + cfg.t_critical + cfg.t_planning) expected = temporal::ZoneLabel::Planning;
      CHECK(z == expected);
      CHECK(static_cast<int>(z) <= previous);
      previous = static_cast<int>(z);
      CHECK(temporal::is_submittable(now, tau, cfg) == (ahead >= cfg.t_frozen + cfg.t_critical));
    }
  }
}

TEST_CASE("approved schedules never hold conflicting tasks") {
  std::mt19937_64 rng(12);
  for (int round = 0; round < 300; ++round) {
    const auto inst = oracle::random_instance(rng);
    coord::ApprovedSchedule s;
    const Tick now = pick(rng, 0, 5);
    for (const auto& [id, tasks] : inst.submissions) {
      (void)coord::try_approve(coord::Intention{id, tasks, now}, s, now,
                               temporal::TemporalConfig{1, 1, 1});
    }
    const auto all = s.all_tasks();
    for (std::size_t i = 0; i < all.size(); ++i) {
      for (std::size_t j = i + 1; j < all.size(); ++j) CHECK_FALSE(oracle::overlaps(all[i], all[j]));
    }
  }
}

TEST_CASE("approval conserves intent") {
  std::mt19937_64 rng(13);
  for (int round = 0; round < 300; ++round) {
    const auto inst = oracle::random_instance(rng);
    coord::ApprovedSchedule s;
    for (const auto& [id, tasks] : inst.submissions) {
      auto r = coord::try_approve(coord::Intention{id, tasks, 0}, s, 0, temporal::TemporalConfig{1, 1, 1});
      if (!r.approved()) continue;
      const auto& out = r.outcome().altered_intention.tasks;
      REQUIRE(out.size() == tasks.size());
      for (std::size_t k = 0; k < tasks.size(); ++k) {
        CHECK(out[k].entity == tasks[k].entity);
        CHECK(out[k].location == tasks[k].location);
        CHECK(out[k].duration() == tasks[k].duration());
        CHECK(out[k].start_time >= tasks[k].start_time);
      }
    }
  }
}

TEST_CASE("handover conserves the union of schedules") {
  std::mt19937_64 rng(14);
  for (int round = 0; round < 100; ++round) {
    spatial::ManagerNetwork net(spatial::chain_layout(0.0, 300.0, 3), temporal::TemporalConfig{1, 1, 1}, 5.0);
    const EntityId a{"a"};
    net.register_entity(a, "rsmu1");
    std::vector<Task> pending;
    for (int k = 0; k < 6; ++k) {
      Task t{a, ResourceId{0, pick(rng, 0, 39)}, 10 + 20 * k, 15 + 20 * k};
      net.manager(net.split(coord::Intention{a, {t}, 0}).begin()->first).schedule().insert(t);
      if (t.location.cell < 20) pending.push_back(t);  // held by rsmu1
    }
    auto before = net.all_tasks();
    net.handover(a, "rsmu1", "rsmu2", pending);
    auto after = net.all_tasks();
    CHECK(oracle::sorted(before) == oracle::sorted(after));
    CHECK(net.registration_of(a) == "rsmu2");
  }
}

TEST_CASE("merge list stays separated for random arrivals") {
  std::mt19937_64 rng(15);
  for (int round = 0; round < 40; ++round) {
    traffic::PlanContext ctx;
    traffic::MergeList list;
    traffic::MergeSearch search;
    for (int k = 0; k < 8; ++k) {
      traffic::VehicleState v;
      const bool ramp = pick(rng, 0, 1) == 1;
      v.origin = ramp ? traffic::Origin::Ramp : traffic::Origin::Mainline;
      v.id = traffic::make_vehicle_id(v.origin, k + 1);
      v.lane = ramp ? traffic::kRampLane : traffic::kMainLane;
      v.position = ramp ? 400.0 + pick(rng, 0, 100) : 300.0 + pick(rng, 0, 200);
      v.speed = pick(rng, 5, 33);
      const auto plan = traffic::merge_into(v, traffic::compose_trajectory(v, 0, ctx), list, ctx, search);
      CHECK_FALSE(traffic::check_kinematics(plan.trajectory, ctx.params, ctx.dt));
      CHECK(list.separated(search.additional_space, ctx.dt));
    }
    const auto& e = list.entries();
    for (std::size_t i = 1; i < e.size(); ++i) {
      CHECK(e[i].crossing - e[i - 1].crossing >=
            traffic::headway_ticks(e[i - 1].length + search.additional_space, e[i].crossing_speed, ctx.dt));
    }
  }
}

TEST_CASE("preemptive worlds stay clean across seeds") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    traffic::WorldConfig cfg;
    cfg.strategy = traffic::Strategy::Preemptive;
    cfg.seed = seed;
    std::mt19937_64 rng(seed);
    std::vector<traffic::Arrival> arrivals;
    for (Tick t = 0; t < 2000; ++t) {
      if (pick(rng, 0, 14) == 0) arrivals.push_back({t, traffic::Origin::Mainline});
      if (pick(rng, 0, 29) == 0) arrivals.push_back({t, traffic::Origin::Ramp});
    }
    traffic::World w(cfg, arrivals);
    w.run_until(3000);
    CHECK(w.collisions() == 0);
    CHECK(w.diagnostics().clean());
  }
}

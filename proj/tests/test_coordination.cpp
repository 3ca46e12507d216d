#include <random>

#include "doctest.h"
#include "oracle.hpp"
#include "phcs/coordination.hpp"

using namespace phcs;
using namespace phcs::coord;

namespace {

const ResourceId R1{0, 1};
const ResourceId R2{0, 2};
const temporal::TemporalConfig fig{10, 3, 17};

Task task(const char* who, ResourceId r, Tick s, Tick e) { return Task{EntityId{who}, r, s, e}; }

}  // namespace

TEST_CASE("conflict test over closed intervals") {
  CHECK(is_conflicting(task("a", R1, 5, 10), task("b", R1, 8, 12)));
  CHECK_FALSE(is_conflicting(task("a", R1, 5, 10), task("b", R2, 8, 12)));
  CHECK(is_conflicting(task("a", R1, 5, 10), task("b", R1, 10, 15)));
  CHECK(is_conflicting(task("a", R1, 0, 100), task("b", R1, 40, 41)));
  CHECK_FALSE(is_conflicting(task("a", R1, 5, 10), task("b", R1, 11, 15)));
}

TEST_CASE("shifting a task past a conflict") {
  const Task t = task("a", R1, 5, 15);
  const Task shifted = modify_task(t, task("b", R1, 2, 12));
  CHECK(shifted == task("a", R1, 13, 23));
  CHECK(modify_task(task("a", R1, 5, 5), task("b", R1, 5, 5)) == task("a", R1, 6, 6));

  // Chained: the shifted task meets a third one and moves again.
  ApprovedSchedule s;
  s.insert(task("b", R1, 2, 12));
  s.insert(task("c", R1, 20, 25));
  const auto out = alter(Intention{EntityId{"a"}, {t}, 0}, s);
  CHECK(out.altered_intention.tasks.front() == task("a", R1, 26, 36));
  CHECK(out.influenced_entities == std::set<EntityId>{EntityId{"a"}, EntityId{"b"}, EntityId{"c"}});
}

TEST_CASE("alter against an empty schedule changes nothing") {
  ApprovedSchedule s;
  const Intention in{EntityId{"a"}, {task("a", R1, 40, 50), task("a", R2, 41, 42)}, 0};
  const auto out = alter(in, s);
  CHECK(out.altered_intention.tasks == in.tasks);
  CHECK(out.influenced_entities.empty());
  CHECK_FALSE(out.altered());
}

TEST_CASE("alter shifts behind a scheduled task") {
  ApprovedSchedule s;
  s.insert(task("E1", R1, 40, 50));
  const auto out = alter(Intention{EntityId{"E2"}, {task("E2", R1, 45, 55)}, 0}, s);
  CHECK(out.altered_intention.tasks.front() == task("E2", R1, 51, 61));
  CHECK(out.influenced_entities == std::set<EntityId>{EntityId{"E1"}, EntityId{"E2"}});
  REQUIRE(out.deltas.size() == 1);
  CHECK(out.deltas[0].original_start == 45);
  CHECK(out.deltas[0].approved_start == 51);
}

TEST_CASE("tasks of one intention are separated from each other") {
  ApprovedSchedule s;
  const auto out = alter(Intention{EntityId{"a"}, {task("a", R1, 40, 45), task("a", R1, 42, 44)}, 0}, s);
  CHECK(out.altered_intention.tasks[1] == task("a", R1, 46, 48));
  CHECK(out.influenced_entities == std::set<EntityId>{EntityId{"a"}});
}

TEST_CASE("resolution failure on the iteration guard and on the frozen horizon") {
  ApprovedSchedule s;
  for (Tick k = 0; k < 20; ++k) s.insert(task("b", R1, 40 + 2 * k, 40 + 2 * k));
  AlterOptions tight;
  tight.max_alter_iterations = 5;
  CHECK_THROWS_AS(alter(Intention{EntityId{"a"}, {task("a", R1, 40, 41)}, 0}, s, tight),
                  ResolutionFailure);

  AlterOptions frozen;
  frozen.now = 0;
  frozen.cfg = temporal::TemporalConfig{100, 3, 17};
  CHECK_THROWS_AS(alter(Intention{EntityId{"a"}, {task("a", R1, 40, 41)}, 0}, s, frozen),
                  ResolutionFailure);
}

TEST_CASE("try_approve timing, shifting and notifications") {
  ApprovedSchedule s;
  auto ok = try_approve(Intention{EntityId{"A"}, {task("A", R1, 40, 50)}, 5}, s, 5, fig);
  REQUIRE(ok.approved());
  CHECK_FALSE(ok.outcome().altered());
  CHECK(s.contains(task("A", R1, 40, 50)));
  REQUIRE(ok.notifications.size() == 1);
  CHECK(ok.notifications[0].recipient == EntityId{"A"});

  auto late = try_approve(Intention{EntityId{"B"}, {task("B", R1, 40, 50)}, 35}, s, 35, fig);
  REQUIRE_FALSE(late.approved());
  CHECK(late.rejection().reason == RejectReason::TooLate);
  CHECK(s.size() == 1);

  auto second = try_approve(Intention{EntityId{"B"}, {task("B", R1, 40, 50)}, 5}, s, 5, fig);
  REQUIRE(second.approved());
  CHECK(second.outcome().altered_intention.tasks.front() == task("B", R1, 51, 61));
  CHECK(second.notifications.size() == 2);
  for (const auto& n : second.notifications) CHECK(n.approved == s.tasks_of(n.recipient));
}

TEST_CASE("try_approve is all or nothing") {
  ApprovedSchedule s;
  s.insert(task("b", R1, 20, 200));
  ApprovedSchedule before = s;
  const Intention in{EntityId{"a"}, {task("a", R2, 40, 41), task("a", R1, 40, 41)}, 0};
  auto r = try_approve(in, s, 0, fig, 1000);
  REQUIRE(r.approved());  // shifted to 201
  CHECK(s.size() == 3);

  ApprovedSchedule t = before;
  auto rejected = try_approve(in, t, 0, fig, 0);
  REQUIRE_FALSE(rejected.approved());
  CHECK(rejected.rejection().reason == RejectReason::ResolutionFailure);
  CHECK(t == before);
}

TEST_CASE("freeze check") {
  ApprovedSchedule s;
  const temporal::TemporalConfig cfg{10, 3, 17};
  s.insert(task("a", R1, 5, 8));
  s.insert(task("a", R2, 11, 20));
  s.insert(task("b", R2, 9, 10));
  CHECK_FALSE(freeze_check(s, 0, cfg, task("a", R1, 5, 8)));
  CHECK(freeze_check(s, 0, cfg, task("a", R2, 11, 20)));
  s.insert(task("c", R1, 9, 12));
  CHECK_FALSE(freeze_check(s, 0, cfg, task("c", R1, 9, 12)));
  CHECK_THROWS_AS(freeze_check(s, 0, cfg, task("z", R1, 50, 60)), std::invalid_argument);
}

TEST_CASE("schedule index queries") {
  ApprovedSchedule s;
  s.insert(task("a", R1, 0, 5));
  s.insert(task("b", R1, 10, 20));
  s.insert(task("c", R2, 3, 4));
  CHECK_THROWS_AS(s.insert(task("d", R1, 5, 9)), std::logic_error);
  CHECK(s.first_conflict(task("x", R1, 6, 9)) == std::nullopt);
  CHECK(s.first_conflict(task("x", R1, 4, 12)) == task("a", R1, 0, 5));
  CHECK(s.conflicts_with(task("x", R1, 4, 12)).size() == 2);
  CHECK(s.prune_before(6) == 2);
  CHECK(s.size() == 1);
  CHECK(s.entities() == std::vector<EntityId>{EntityId{"b"}});
  CHECK(s.erase(task("b", R1, 10, 20)));
  CHECK_FALSE(s.erase(task("b", R1, 10, 20)));
  CHECK(s.empty());
}

TEST_CASE("managers only accept registered entities") {
  Manager m("m1", fig);
  const Intention in{EntityId{"a"}, {task("a", R1, 40, 50)}, 0};
  auto r = m.try_approve(in, 0);
  REQUIRE_FALSE(r.approved());
  CHECK(r.rejection().reason == RejectReason::UnknownEntity);
  m.register_entity(EntityId{"a"});
  CHECK(m.try_approve(in, 0).approved());
  CHECK(m.drain_outbox().size() == 1);
  CHECK(m.drain_outbox().empty());
}

TEST_CASE("entity finds its current action") {
  const std::vector<Task> tasks{task("a", R1, 0, 5), task("a", R1, 10, 20)};
  CHECK(find_action(tasks, 12) == tasks[1]);
  CHECK(find_action(tasks, 7) == std::nullopt);
  const std::vector<Task> adjacent{task("a", R1, 0, 5), task("a", R1, 6, 20)};
  CHECK(find_action(adjacent, 6) == adjacent[1]);
  CHECK(find_action(adjacent, 5) == adjacent[0]);
  CHECK(find_action(adjacent, 21) == std::nullopt);
}

TEST_CASE("entity submission validation") {
  const EntityId a{"a"};
  auto in = entity_submit(a, {task("a", R1, 40, 50)}, 5, fig);
  CHECK(in.shared_at == 5);
  CHECK_THROWS_AS(entity_submit(a, {}, 5, fig), std::invalid_argument);
  CHECK_THROWS_AS(entity_submit(a, {task("a", R1, 3, 4)}, 5, fig), std::invalid_argument);
  CHECK_THROWS_AS(entity_submit(a, {task("b", R1, 40, 50)}, 5, fig), std::invalid_argument);
}

TEST_CASE("entity applies updates at the tick boundary") {
  Manager m("m1", fig);
  Entity e(EntityId{"a"});
  m.register_entity(e.id());
  m.register_entity(EntityId{"b"});
  (void)m.try_approve(Intention{e.id(), {task("a", R1, 40, 50)}, 0}, 0);
  for (auto& n : m.drain_outbox()) e.receive(n);
  CHECK(e.find_action(45) == std::nullopt);
  CHECK(e.apply_updates());
  CHECK(e.find_action(45) == task("a", R1, 40, 50));
  CHECK_FALSE(e.apply_updates());
  e.receive(Notification{EntityId{"b"}, "m1", {}});
  CHECK_FALSE(e.apply_updates());
}

TEST_CASE("try_approve matches the brute-force oracle") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 300; ++round) {
    const auto inst = oracle::random_instance(rng);
    ApprovedSchedule s;
    std::vector<Task> committed;
    for (const auto& [id, tasks] : inst.submissions) {
      auto r = try_approve(Intention{id, tasks, 0}, s, 0, temporal::TemporalConfig{1, 1, 1});
      auto o = oracle::resolve(committed, tasks, 0, 1, 1);
      REQUIRE(r.approved() == o.approved);
      if (o.approved) {
        CHECK(r.outcome().altered_intention.tasks == o.tasks);
        committed.insert(committed.end(), o.tasks.begin(), o.tasks.end());
      }
    }
    CHECK(oracle::sorted(s.all_tasks()) == oracle::sorted(committed));
  }
}

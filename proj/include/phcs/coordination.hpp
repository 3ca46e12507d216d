#pragma once

// Manager-side conflict resolution and the entity-side execution contract.
//
// A Task claims one spatial resource over the closed tick interval
// [start_time, end_time]. Managers keep an ApprovedSchedule in which no two
// tasks conflict; a new Intention is shifted (never advanced, never
// rerouted) until it fits, then committed atomically.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "phcs/temporal.hpp"
#include "phcs/types.hpp"

namespace phcs::coord {

struct Task {
  EntityId entity;
  ResourceId location;
  Tick start_time = 0;
  Tick end_time = 0;

  Tick duration() const { return end_time - start_time; }

  bool operator==(const Task&) const = default;
};

/// Throws std::invalid_argument when duration is negative.
Task make_task(EntityId entity, ResourceId location, Tick start, Tick duration);

/// Ordering used wherever the kernel must scan tasks deterministically:
/// ascending start, then entity, then location, then end.
struct ScanOrder {
  bool operator()(const Task& a, const Task& b) const;
};

struct Intention {
  EntityId entity;
  std::vector<Task> tasks;
  Tick shared_at = 0;
};

/// Closed-interval overlap on the same location. Touching endpoints conflict.
bool is_conflicting(const Task& a, const Task& b);

/// Delay `task` to start one tick after `conflicting` ends.
Task modify_task(const Task& task, const Task& conflicting);

class ApprovedSchedule {
 public:
  /// Throws std::logic_error if `task` conflicts with a scheduled task.
  void insert(const Task& task);

  /// Lowest-ScanOrder scheduled task conflicting with `task`, if any.
  std::optional<Task> first_conflict(const Task& task) const;

  /// All scheduled tasks conflicting with `task`, in ScanOrder.
  std::vector<Task> conflicts_with(const Task& task) const;

  bool contains(const Task& task) const;

  /// Removes one exact task. Returns false if absent.
  bool erase(const Task& task);

  /// Drops every task that ended before `now`. Returns the number removed.
  std::size_t prune_before(Tick now);

  std::vector<Task> tasks_of(const EntityId& entity) const;
  std::vector<EntityId> entities() const;

  /// Every task, sorted by (entity, start, location).
  std::vector<Task> all_tasks() const;

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  bool operator==(const ApprovedSchedule& other) const;

 private:
  // Per location, tasks keyed by start time. Tasks at one location never
  // overlap, so ordering by start also orders by end.
  std::map<ResourceId, std::map<Tick, Task>> by_location_;
  std::map<EntityId, std::set<Task, ScanOrder>> by_entity_;
  std::size_t size_ = 0;
};

struct TaskDelta {
  std::size_t index = 0;
  Tick original_start = 0;
  Tick approved_start = 0;
};

struct ApprovalOutcome {
  Intention altered_intention;
  std::set<EntityId> influenced_entities;
  std::vector<TaskDelta> deltas;

  bool altered() const;
};

class ResolutionFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AlterOptions {
  /// Upper bound on the number of single-task shifts per intention.
  int max_alter_iterations = 1000;
  /// When set, a shift landing inside the frozen horizon of `now` fails.
  std::optional<Tick> now;
  temporal::TemporalConfig cfg{};
};

/// Shifts the intention's tasks until each is conflict-free against the
/// schedule and against the intention's earlier tasks. Throws
/// ResolutionFailure when no fixed point is reached.
ApprovalOutcome alter(const Intention& intention, const ApprovedSchedule& schedule,
                      const AlterOptions& options = {});

enum class RejectReason { TooLate, ResolutionFailure, UnknownEntity };

std::string to_string(RejectReason r);

struct Rejection {
  RejectReason reason;
  std::string detail;
};

/// Approved tasks sent back to one entity after a commit.
struct Notification {
  EntityId recipient;
  std::string source;  // sending manager
  std::vector<Task> approved;
};

struct ApprovalResult {
  std::variant<ApprovalOutcome, Rejection> value;
  std::vector<Notification> notifications;

  bool approved() const { return std::holds_alternative<ApprovalOutcome>(value); }
  const ApprovalOutcome& outcome() const { return std::get<ApprovalOutcome>(value); }
  const Rejection& rejection() const { return std::get<Rejection>(value); }
};

/// Validates timing, resolves conflicts and commits. A rejected intention
/// leaves `schedule` untouched.
ApprovalResult try_approve(const Intention& intention, ApprovedSchedule& schedule, Tick now,
                           const temporal::TemporalConfig& cfg, int max_alter_iterations = 1000,
                           const std::string& source = "manager");

/// True iff the scheduled `target` may still be changed at `now`, i.e. it
/// starts after the frozen horizon. Throws std::invalid_argument if
/// `target` is not in the schedule.
bool freeze_check(const ApprovedSchedule& schedule, Tick now, const temporal::TemporalConfig& cfg,
                  const Task& target);

/// A sub-system manager: a serial decision point over one schedule.
class Manager {
 public:
  Manager(std::string id, temporal::TemporalConfig cfg);

  const std::string& id() const { return id_; }
  const temporal::TemporalConfig& config() const { return cfg_; }

  void register_entity(const EntityId& entity);
  void unregister_entity(const EntityId& entity);
  bool is_registered(const EntityId& entity) const;
  const std::set<EntityId>& registered() const { return registered_; }

  /// Rejects with UnknownEntity when the submitter is not registered.
  ApprovalResult try_approve(const Intention& intention, Tick now);

  ApprovedSchedule& schedule() { return schedule_; }
  const ApprovedSchedule& schedule() const { return schedule_; }

  /// Notifications accumulated since the last drain, in send order.
  std::vector<Notification> drain_outbox();

  int max_alter_iterations = 1000;

 private:
  std::string id_;
  temporal::TemporalConfig cfg_;
  ApprovedSchedule schedule_;
  std::set<EntityId> registered_;
  std::vector<Notification> outbox_;
};

/// The approved task active at `t`, if any. `approved` must be sorted by
/// start time.
std::optional<Task> find_action(std::span<const Task> approved, Tick t);

/// Builds an intention shared at `now`. Throws std::invalid_argument when
/// the task list is empty, owned by another entity, or not submittable.
Intention entity_submit(const EntityId& entity, std::vector<Task> tasks, Tick now,
                        const temporal::TemporalConfig& cfg);

/// Entity-side view: approved tasks plus an inbox of pending updates that
/// take effect at the next tick boundary.
class Entity {
 public:
  explicit Entity(EntityId id) : id_(std::move(id)) {}

  const EntityId& id() const { return id_; }

  void receive(Notification update);
  /// Applies queued updates. Returns true if anything changed.
  bool apply_updates();

  std::optional<Task> find_action(Tick t) const;
  const std::vector<Task>& approved() const { return approved_; }

 private:
  EntityId id_;
  std::map<std::string, std::vector<Task>> by_source_;
  std::vector<Task> approved_;
  std::vector<Notification> inbox_;
};

}  // namespace phcs::coord

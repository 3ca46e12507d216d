#include "phcs/coordination.hpp"

#include <algorithm>
#include <iterator>
#include <tuple>

namespace phcs::coord {

Task make_task(EntityId entity, ResourceId location, Tick start, Tick duration) {
  if (duration < 0) throw std::invalid_argument("task duration must be non-negative");
  return Task{std::move(entity), location, start, start + duration};
}

bool ScanOrder::operator()(const Task& a, const Task& b) const {
  return std::tie(a.start_time, a.entity, a.location, a.end_time) <
         std::tie(b.start_time, b.entity, b.location, b.end_time);
}

namespace {

bool within(Tick x, Tick lo, Tick hi) { return lo <= x && x <= hi; }

}  // namespace

bool is_conflicting(const Task& a, const Task& b) {
  const bool temporal = within(a.start_time, b.start_time, b.end_time) ||
                        within(a.end_time, b.start_time, b.end_time) ||
                        within(b.start_time, a.start_time, a.end_time) ||
                        within(b.end_time, a.start_time, a.end_time);
  return temporal && a.location == b.location;
}

Task modify_task(const Task& task, const Task& conflicting) {
  Task shifted = task;
  shifted.start_time = conflicting.end_time + 1;
  shifted.end_time = shifted.start_time + task.duration();
  return shifted;
}

// ---------------------------------------------------------------------------
// ApprovedSchedule

void ApprovedSchedule::insert(const Task& task) {
  if (task.end_time < task.start_time) throw std::logic_error("task ends before it starts");
  if (first_conflict(task)) throw std::logic_error("inserting a conflicting task");
  by_location_[task.location].emplace(task.start_time, task);
  by_entity_[task.entity].insert(task);
  ++size_;
}

std::optional<Task> ApprovedSchedule::first_conflict(const Task& task) const {
  auto loc = by_location_.find(task.location);
  if (loc == by_location_.end()) return std::nullopt;
  const auto& slots = loc->second;
  // First interval (by start) whose end reaches task.start_time.
  auto it = slots.lower_bound(task.start_time);
  if (it != slots.begin()) {
    auto prev = std::prev(it);
    if (prev->second.end_time >= task.start_time) return prev->second;
  }
  if (it != slots.end() && it->second.start_time <= task.end_time) return it->second;
  return std::nullopt;
}

std::vector<Task> ApprovedSchedule::conflicts_with(const Task& task) const {
  std::vector<Task> out;
  auto loc = by_location_.find(task.location);
  if (loc == by_location_.end()) return out;
  const auto& slots = loc->second;
  auto it = slots.lower_bound(task.start_time);
  if (it != slots.begin() && std::prev(it)->second.end_time >= task.start_time) --it;
  for (; it != slots.end() && it->second.start_time <= task.end_time; ++it) {
    out.push_back(it->second);
  }
  return out;
}

bool ApprovedSchedule::contains(const Task& task) const {
  auto loc = by_location_.find(task.location);
  if (loc == by_location_.end()) return false;
  auto it = loc->second.find(task.start_time);
  return it != loc->second.end() && it->second == task;
}

bool ApprovedSchedule::erase(const Task& task) {
  if (!contains(task)) return false;
  auto loc = by_location_.find(task.location);
  loc->second.erase(task.start_time);
  if (loc->second.empty()) by_location_.erase(loc);
  auto ent = by_entity_.find(task.entity);
  ent->second.erase(task);
  if (ent->second.empty()) by_entity_.erase(ent);
  --size_;
  return true;
}

std::size_t ApprovedSchedule::prune_before(Tick now) {
  std::size_t removed = 0;
  for (auto loc = by_location_.begin(); loc != by_location_.end();) {
    auto& slots = loc->second;
    while (!slots.empty() && slots.begin()->second.end_time < now) {
      const Task& t = slots.begin()->second;
      auto ent = by_entity_.find(t.entity);
      ent->second.erase(t);
      if (ent->second.empty()) by_entity_.erase(ent);
      slots.erase(slots.begin());
      ++removed;
    }
    loc = slots.empty() ? by_location_.erase(loc) : std::next(loc);
  }
  size_ -= removed;
  return removed;
}

std::vector<Task> ApprovedSchedule::tasks_of(const EntityId& entity) const {
  auto it = by_entity_.find(entity);
  if (it == by_entity_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

std::vector<EntityId> ApprovedSchedule::entities() const {
  std::vector<EntityId> out;
  out.reserve(by_entity_.size());
  for (const auto& [id, _] : by_entity_) out.push_back(id);
  return out;
}

std::vector<Task> ApprovedSchedule::all_tasks() const {
  std::vector<Task> out;
  out.reserve(size_);
  for (const auto& [_, tasks] : by_entity_) out.insert(out.end(), tasks.begin(), tasks.end());
  return out;
}

bool ApprovedSchedule::operator==(const ApprovedSchedule& other) const {
  return size_ == other.size_ && by_location_ == other.by_location_;
}

// ---------------------------------------------------------------------------
// Resolution

bool ApprovalOutcome::altered() const {
  return std::any_of(deltas.begin(), deltas.end(),
                     [](const TaskDelta& d) { return d.original_start != d.approved_start; });
}

ApprovalOutcome alter(const Intention& intention, const ApprovedSchedule& schedule,
                      const AlterOptions& options) {
  ApprovalOutcome out;
  out.altered_intention = intention;
  auto& tasks = out.altered_intention.tasks;
  int shifts = 0;

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    // Blockers for task i: the schedule plus the intention's earlier
    // tasks. Shifting i cannot break tasks before it, so resolving in index
    // order reaches the same fixed point as restarting the whole pass.
    for (;;) {
      std::optional<Task> blocker = schedule.first_conflict(tasks[i]);
      for (std::size_t k = 0; k < i; ++k) {
        if (is_conflicting(tasks[i], tasks[k]) && (!blocker || ScanOrder{}(tasks[k], *blocker))) {
          blocker = tasks[k];
        }
      }
      if (!blocker) break;
      if (++shifts > options.max_alter_iterations) {
        throw ResolutionFailure("no conflict-free fixed point within " +
                                std::to_string(options.max_alter_iterations) + " shifts");
      }
      tasks[i] = modify_task(tasks[i], *blocker);
      out.influenced_entities.insert(blocker->entity);
      out.influenced_entities.insert(intention.entity);
      if (options.now && tasks[i].start_time <= *options.now + options.cfg.t_frozen) {
        throw ResolutionFailure("shift lands inside the frozen horizon");
      }
    }
  }

  out.deltas.reserve(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    out.deltas.push_back({i, intention.tasks[i].start_time, tasks[i].start_time});
  }
  return out;
}

std::string to_string(RejectReason r) {
  switch (r) {
    case RejectReason::TooLate: return "too-late";
    case RejectReason::ResolutionFailure: return "resolution-failure";
    case RejectReason::UnknownEntity: return "unknown-entity";
  }
  return "?";
}

ApprovalResult try_approve(const Intention& intention, ApprovedSchedule& schedule, Tick now,
                           const temporal::TemporalConfig& cfg, int max_alter_iterations,
                           const std::string& source) {
  for (const Task& t : intention.tasks) {
    if (t.entity != intention.entity) {
      return {Rejection{RejectReason::UnknownEntity,
                        "task owned by " + t.entity.value + " inside intention of " +
                            intention.entity.value},
              {}};
    }
    if (!temporal::is_submittable(now, t.start_time, cfg)) {
      return {Rejection{RejectReason::TooLate, "task at tick " + std::to_string(t.start_time) +
                                                   " shared at tick " + std::to_string(now)},
              {}};
    }
  }

  AlterOptions opts;
  opts.max_alter_iterations = max_alter_iterations;
  opts.now = now;
  opts.cfg = cfg;
  ApprovalOutcome outcome;
  try {
    outcome = alter(intention, schedule, opts);
  } catch (const ResolutionFailure& e) {
    return {Rejection{RejectReason::ResolutionFailure, e.what()}, {}};
  }

  for (const Task& t : outcome.altered_intention.tasks) schedule.insert(t);

  std::set<EntityId> recipients = outcome.influenced_entities;
  recipients.insert(intention.entity);
  std::vector<Notification> notes;
  notes.reserve(recipients.size());
  for (const EntityId& id : recipients) notes.push_back({id, source, schedule.tasks_of(id)});
  return {std::move(outcome), std::move(notes)};
}

bool freeze_check(const ApprovedSchedule& schedule, Tick now, const temporal::TemporalConfig& cfg,
                  const Task& target) {
  if (!schedule.contains(target)) throw std::invalid_argument("target task is not scheduled");
  return target.start_time > now + cfg.t_frozen;
}

// ---------------------------------------------------------------------------
// Manager

Manager::Manager(std::string id, temporal::TemporalConfig cfg) : id_(std::move(id)), cfg_(cfg) {
  cfg_.validate();
}

void Manager::register_entity(const EntityId& entity) { registered_.insert(entity); }
void Manager::unregister_entity(const EntityId& entity) { registered_.erase(entity); }
bool Manager::is_registered(const EntityId& entity) const { return registered_.contains(entity); }

ApprovalResult Manager::try_approve(const Intention& intention, Tick now) {
  if (!is_registered(intention.entity)) {
    return {Rejection{RejectReason::UnknownEntity,
                      intention.entity.value + " is not registered with " + id_},
            {}};
  }
  ApprovalResult result =
      coord::try_approve(intention, schedule_, now, cfg_, max_alter_iterations, id_);
  outbox_.insert(outbox_.end(), result.notifications.begin(), result.notifications.end());
  return result;
}

std::vector<Notification> Manager::drain_outbox() {
  std::vector<Notification> out;
  out.swap(outbox_);
  return out;
}

// ---------------------------------------------------------------------------
// Entity side

std::optional<Task> find_action(std::span<const Task> approved, Tick t) {
  auto it = std::partition_point(approved.begin(), approved.end(),
                                 [t](const Task& task) { return task.start_time <= t; });
  while (it != approved.begin()) {
    --it;
    if (it->end_time >= t) return *it;
  }
  return std::nullopt;
}

Intention entity_submit(const EntityId& entity, std::vector<Task> tasks, Tick now,
                        const temporal::TemporalConfig& cfg) {
  if (tasks.empty()) throw std::invalid_argument("intention has no tasks");
  for (const Task& t : tasks) {
    if (t.entity != entity) throw std::invalid_argument("task not owned by " + entity.value);
    if (!temporal::is_submittable(now, t.start_time, cfg)) {
      throw std::invalid_argument("task at tick " + std::to_string(t.start_time) +
                                  " is not submittable at tick " + std::to_string(now));
    }
  }
  return Intention{entity, std::move(tasks), now};
}

void Entity::receive(Notification update) {
  if (update.recipient != id_) return;
  inbox_.push_back(std::move(update));
}

bool Entity::apply_updates() {
  if (inbox_.empty()) return false;
  for (Notification& n : inbox_) by_source_[n.source] = std::move(n.approved);
  inbox_.clear();
  std::vector<Task> merged;
  for (const auto& [_, tasks] : by_source_) merged.insert(merged.end(), tasks.begin(), tasks.end());
  std::sort(merged.begin(), merged.end(), ScanOrder{});
  const bool changed = merged != approved_;
  approved_ = std::move(merged);
  return changed;
}

std::optional<Task> Entity::find_action(Tick t) const { return coord::find_action(approved_, t); }

}  // namespace phcs::coord

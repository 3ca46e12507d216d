#include "phcs/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace phcs::spatial {

void validate_layout(std::span<const SpatialDomain> domains) {
  if (domains.empty()) throw std::invalid_argument("no spatial domains");
  std::vector<const SpatialDomain*> sorted;
  std::set<std::string> ids;
  for (const auto& d : domains) {
    if (!(d.x_lo < d.x_hi)) throw std::invalid_argument("empty extent for " + d.manager_id);
    if (!ids.insert(d.manager_id).second) {
      throw std::invalid_argument("duplicate manager id " + d.manager_id);
    }
    sorted.push_back(&d);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const SpatialDomain* a, const SpatialDomain* b) { return a->x_lo < b->x_lo; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i - 1]->x_hi != sorted[i]->x_lo) {
      throw std::invalid_argument("domains " + sorted[i - 1]->manager_id + " and " +
                                  sorted[i]->manager_id + " leave a gap or overlap");
    }
  }
  for (const auto& d : domains) {
    for (const auto& n : d.neighbors) {
      auto it = std::find_if(domains.begin(), domains.end(),
                             [&](const SpatialDomain& o) { return o.manager_id == n; });
      if (it == domains.end()) throw std::invalid_argument("unknown neighbor " + n);
      if (!it->neighbors.contains(d.manager_id)) {
        throw std::invalid_argument("asymmetric neighbors " + d.manager_id + " / " + n);
      }
      if (it->x_lo != d.x_hi && it->x_hi != d.x_lo) {
        throw std::invalid_argument("neighbors " + d.manager_id + " / " + n +
                                    " share no boundary");
      }
    }
  }
}

std::vector<SpatialDomain> chain_layout(double x_lo, double x_hi, int count) {
  if (count < 1) throw std::invalid_argument("domain count must be positive");
  std::vector<SpatialDomain> out(static_cast<std::size_t>(count));
  const double width = (x_hi - x_lo) / count;
  for (int i = 0; i < count; ++i) {
    auto& d = out[static_cast<std::size_t>(i)];
    d.manager_id = "rsmu" + std::to_string(i + 1);
    d.x_lo = x_lo + width * i;
    d.x_hi = (i + 1 == count) ? x_hi : x_lo + width * (i + 1);
    if (i > 0) d.neighbors.insert("rsmu" + std::to_string(i));
    if (i + 1 < count) d.neighbors.insert("rsmu" + std::to_string(i + 2));
  }
  return out;
}

const std::string& locate_manager(double position, std::span<const SpatialDomain> domains) {
  for (const auto& d : domains) {
    if (d.x_lo <= position && position < d.x_hi) return d.manager_id;
  }
  throw OutOfWorld("position " + std::to_string(position) + " lies outside every domain");
}

std::vector<ResourceId> cells_for_span(int lane, double x_a, double x_b, double cell_length) {
  if (!(cell_length > 0.0)) throw std::invalid_argument("cell length must be positive");
  if (x_b < x_a) throw std::invalid_argument("span end precedes span start");
  const auto lo = static_cast<std::int64_t>(std::floor(x_a / cell_length));
  auto hi = static_cast<std::int64_t>(std::ceil(x_b / cell_length)) - 1;
  hi = std::max(hi, lo);
  std::vector<ResourceId> out;
  out.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (auto c = lo; c <= hi; ++c) out.push_back({lane, c});
  return out;
}

std::vector<coord::Task> discretize_claim(const EntityId& entity, int lane, double x_a, double x_b,
                                          Tick t_a, Tick t_b, double cell_length) {
  if (t_b < t_a) throw std::invalid_argument("interval end precedes interval start");
  std::vector<coord::Task> out;
  for (const ResourceId& r : cells_for_span(lane, x_a, x_b, cell_length)) {
    out.push_back({entity, r, t_a, t_b});
  }
  return out;
}

std::vector<coord::Task> claims_from_footprints(const EntityId& entity,
                                                std::span<const Footprint> footprints,
                                                double cell_length) {
  std::map<ResourceId, std::pair<Tick, Tick>> spans;
  for (const Footprint& f : footprints) {
    for (const ResourceId& r : cells_for_span(f.lane, f.rear, f.front, cell_length)) {
      auto [it, fresh] = spans.try_emplace(r, f.tick, f.tick);
      if (!fresh) {
        it->second.first = std::min(it->second.first, f.tick);
        it->second.second = std::max(it->second.second, f.tick);
      }
    }
  }
  std::vector<coord::Task> out;
  out.reserve(spans.size());
  for (const auto& [r, span] : spans) out.push_back({entity, r, span.first, span.second});
  std::sort(out.begin(), out.end(), [](const coord::Task& a, const coord::Task& b) {
    return std::tie(a.start_time, a.location) < std::tie(b.start_time, b.location);
  });
  return out;
}

// ---------------------------------------------------------------------------
// ManagerNetwork

ManagerNetwork::ManagerNetwork(std::vector<SpatialDomain> domains, temporal::TemporalConfig cfg,
                               double cell_length)
    : domains_(std::move(domains)), cell_length_(cell_length) {
  validate_layout(domains_);
  if (!(cell_length_ > 0.0)) throw std::invalid_argument("cell length must be positive");
  for (const auto& d : domains_) managers_.emplace(d.manager_id, coord::Manager(d.manager_id, cfg));
}

coord::Manager& ManagerNetwork::manager(const std::string& id) {
  auto it = managers_.find(id);
  if (it == managers_.end()) throw std::invalid_argument("unknown manager " + id);
  return it->second;
}

const coord::Manager& ManagerNetwork::manager(const std::string& id) const {
  auto it = managers_.find(id);
  if (it == managers_.end()) throw std::invalid_argument("unknown manager " + id);
  return it->second;
}

const SpatialDomain& ManagerNetwork::domain(const std::string& id) const {
  for (const auto& d : domains_) {
    if (d.manager_id == id) return d;
  }
  throw std::invalid_argument("unknown manager " + id);
}

const std::string& ManagerNetwork::owner_of(const ResourceId& r) const {
  return locate_manager(static_cast<double>(r.cell) * cell_length_, domains_);
}

void ManagerNetwork::register_entity(const EntityId& entity, const std::string& manager_id) {
  if (auto prev = registration_.find(entity); prev != registration_.end()) {
    manager(prev->second).unregister_entity(entity);
  }
  manager(manager_id).register_entity(entity);
  registration_[entity] = manager_id;
}

std::optional<std::string> ManagerNetwork::registration_of(const EntityId& entity) const {
  auto it = registration_.find(entity);
  if (it == registration_.end()) return std::nullopt;
  return it->second;
}

std::map<std::string, coord::Intention> ManagerNetwork::split(
    const coord::Intention& intention) const {
  std::map<std::string, coord::Intention> out;
  for (const coord::Task& t : intention.tasks) {
    auto& frag = out[owner_of(t.location)];
    frag.entity = intention.entity;
    frag.shared_at = intention.shared_at;
    frag.tasks.push_back(t);
  }
  return out;
}

ManagerNetwork::SubmitResult ManagerNetwork::submit(const coord::Intention& intention, Tick now) {
  SubmitResult result;
  if (!registration_.contains(intention.entity)) {
    result.rejection =
        coord::Rejection{coord::RejectReason::UnknownEntity,
                         intention.entity.value + " is not registered with any manager"};
    return result;
  }
  const auto fragments = split(intention);

  // Dry run every fragment first so that a rejection anywhere commits
  // nothing anywhere.
  for (const auto& [owner, frag] : fragments) {
    const coord::Manager& m = manager(owner);
    for (const coord::Task& t : frag.tasks) {
      if (t.entity != frag.entity) {
        result.rejection = coord::Rejection{coord::RejectReason::UnknownEntity,
                                            "task owned by another entity"};
        result.rejected_by = owner;
        return result;
      }
      if (!temporal::is_submittable(now, t.start_time, m.config())) {
        result.rejection = coord::Rejection{coord::RejectReason::TooLate,
                                            "task at tick " + std::to_string(t.start_time)};
        result.rejected_by = owner;
        return result;
      }
    }
    coord::AlterOptions opts;
    opts.max_alter_iterations = m.max_alter_iterations;
    opts.now = now;
    opts.cfg = m.config();
    try {
      (void)coord::alter(frag, m.schedule(), opts);
    } catch (const coord::ResolutionFailure& e) {
      result.rejection = coord::Rejection{coord::RejectReason::ResolutionFailure, e.what()};
      result.rejected_by = owner;
      return result;
    }
  }

  for (const auto& [owner, frag] : fragments) {
    coord::Manager& m = manager(owner);
    auto approval = coord::try_approve(frag, m.schedule(), now, m.config(),
                                       m.max_alter_iterations, m.id());
    result.fragments.emplace(owner, approval.outcome());
  }
  result.approved = true;
  return result;
}

ManagerNetwork::HandoverAck ManagerNetwork::handover(const EntityId& entity,
                                                     const std::string& from,
                                                     const std::string& to,
                                                     std::span<const coord::Task> pending) {
  const SpatialDomain& src = domain(from);
  if (!src.neighbors.contains(to)) {
    throw std::invalid_argument("handover from " + from + " to non-neighbor " + to);
  }
  auto reg = registration_.find(entity);
  if (reg == registration_.end() || reg->second != from) {
    throw std::invalid_argument(entity.value + " is not registered with " + from);
  }

  coord::Manager& src_mgr = manager(from);
  coord::Manager& dst_mgr = manager(to);
  HandoverAck ack{entity, from, to, 0, 0};

  for (const coord::Task& t : src_mgr.schedule().tasks_of(entity)) {
    if (owner_of(t.location) == to) {
      src_mgr.schedule().erase(t);
      dst_mgr.schedule().insert(t);
    }
  }
  for (const coord::Task& t : pending) {
    if (t.entity != entity) continue;
    const std::string& owner = owner_of(t.location);
    if (owner == to && dst_mgr.schedule().contains(t)) ++ack.transferred;
    if (owner == from && src_mgr.schedule().contains(t)) ++ack.retained;
  }

  src_mgr.unregister_entity(entity);
  dst_mgr.register_entity(entity);
  reg->second = to;
  return ack;
}

std::vector<coord::Task> ManagerNetwork::all_tasks() const {
  std::vector<coord::Task> out;
  for (const auto& [_, m] : managers_) {
    auto tasks = m.schedule().all_tasks();
    out.insert(out.end(), tasks.begin(), tasks.end());
  }
  return out;
}

}  // namespace phcs::spatial

#include <algorithm>

#include "doctest.h"
#include "phcs/spatial.hpp"

using namespace phcs;
using namespace phcs::spatial;
using coord::Task;

namespace {

std::vector<SpatialDomain> two_halves() { return chain_layout(0.0, 1000.0, 2); }

Task claim(const char* who, std::int64_t cell, Tick s, Tick e) {
  return Task{EntityId{who}, ResourceId{0, cell}, s, e};
}

}  // namespace

TEST_CASE("locating the owning manager") {
  const auto d = two_halves();
  CHECK(locate_manager(499.9, d) == "rsmu1");
  CHECK(locate_manager(500.0, d) == "rsmu2");
  CHECK(locate_manager(0.0, d) == "rsmu1");
  CHECK_THROWS_AS(locate_manager(1000.0, d), OutOfWorld);
  CHECK_THROWS_AS(locate_manager(-0.1, d), OutOfWorld);
}

TEST_CASE("layout validation") {
  CHECK_NOTHROW(validate_layout(chain_layout(0, 900, 3)));
  auto gap = two_halves();
  gap[1].x_lo = 510.0;
  CHECK_THROWS_AS(validate_layout(gap), std::invalid_argument);
  auto asym = two_halves();
  asym[1].neighbors.clear();
  CHECK_THROWS_AS(validate_layout(asym), std::invalid_argument);
  auto far = chain_layout(0, 900, 3);
  far[0].neighbors.insert("rsmu3");
  far[2].neighbors.insert("rsmu1");
  CHECK_THROWS_AS(validate_layout(far), std::invalid_argument);
}

TEST_CASE("discretizing a static span") {
  auto one = discretize_claim(EntityId{"a"}, 0, 0.0, 4.9, 3, 8, 5.0);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == claim("a", 0, 3, 8));
  auto two = discretize_claim(EntityId{"a"}, 0, 4.9, 5.1, 3, 8, 5.0);
  REQUIRE(two.size() == 2);
  CHECK(two[0].location.cell == 0);
  CHECK(two[1].location.cell == 1);
  // A front exactly on a cell edge does not reach into the next cell.
  CHECK(cells_for_span(0, 0.0, 5.0, 5.0).size() == 1);
  CHECK(cells_for_span(1, 7.0, 7.0, 5.0) == std::vector<ResourceId>{ResourceId{1, 1}});
  CHECK_THROWS_AS(discretize_claim(EntityId{"a"}, 0, 5, 4, 0, 1, 5.0), std::invalid_argument);
}

TEST_CASE("claims of a moving vehicle follow its entry and exit ticks") {
  // 5 m vehicle, rear from 0 to 10 m (body sweeps [0, 15]) over ticks 0..30.
  std::vector<Footprint> prints;
  for (Tick t = 0; t <= 30; ++t) {
    const double rear = static_cast<double>(t) / 3.0;
    prints.push_back({t, 0, rear, rear + 5.0});
  }
  const auto claims = claims_from_footprints(EntityId{"v"}, prints, 5.0);
  // Hand-derived: cell 1 is entered once the front passes 5 m (tick 1) and
  // left when the rear reaches 10 m (tick 30); cell 0 is left when the rear
  // reaches 5 m (tick 15); cell 2 is entered when the front passes 10 m.
  REQUIRE(claims.size() == 3);
  CHECK(claims[0] == claim("v", 0, 0, 14));
  CHECK(claims[1] == claim("v", 1, 1, 29));
  CHECK(claims[2] == claim("v", 2, 16, 30));
}

TEST_CASE("joint approval across domains") {
  ManagerNetwork net(two_halves(), temporal::TemporalConfig{10, 3, 17}, 5.0);
  const EntityId a{"a"};
  net.register_entity(a, "rsmu1");
  const coord::Intention in{a, {claim("a", 99, 40, 45), claim("a", 100, 44, 50)}, 0};
  const auto parts = net.split(in);
  REQUIRE(parts.size() == 2);
  CHECK(parts.at("rsmu1").tasks.size() == 1);
  CHECK(parts.at("rsmu2").tasks.size() == 1);

  auto r = net.submit(in, 0);
  REQUIRE(r.approved);
  CHECK(net.manager("rsmu1").schedule().size() == 1);
  CHECK(net.manager("rsmu2").schedule().size() == 1);

  // A fragment that is too late in one domain blocks the whole intention.
  const EntityId b{"b"};
  net.register_entity(b, "rsmu1");
  auto late = net.submit(coord::Intention{b, {claim("b", 10, 40, 41), claim("b", 150, 5, 6)}, 0}, 0);
  CHECK_FALSE(late.approved);
  CHECK(late.rejected_by == "rsmu2");
  CHECK(net.manager("rsmu1").schedule().size() == 1);

  auto stranger = net.submit(coord::Intention{EntityId{"z"}, {claim("z", 1, 40, 41)}, 0}, 0);
  CHECK_FALSE(stranger.approved);
  CHECK(stranger.rejection->reason == coord::RejectReason::UnknownEntity);
}

TEST_CASE("handover") {
  ManagerNetwork net(chain_layout(0.0, 900.0, 3), temporal::TemporalConfig{10, 3, 17}, 5.0);
  const EntityId a{"a"};
  net.register_entity(a, "rsmu1");
  const std::vector<Task> pending{claim("a", 50, 40, 45), claim("a", 70, 50, 60)};
  net.manager("rsmu1").schedule().insert(pending[0]);
  net.manager("rsmu1").schedule().insert(pending[1]);  // cell 70 lies in rsmu2

  auto before = net.all_tasks();
  auto ack = net.handover(a, "rsmu1", "rsmu2", pending);
  CHECK(ack.transferred == 1);
  CHECK(ack.retained == 1);
  CHECK(net.registration_of(a) == "rsmu2");
  CHECK(net.manager("rsmu2").schedule().contains(pending[1]));
  CHECK_FALSE(net.manager("rsmu1").schedule().contains(pending[1]));
  auto after = net.all_tasks();
  std::sort(before.begin(), before.end(), coord::ScanOrder{});
  std::sort(after.begin(), after.end(), coord::ScanOrder{});
  CHECK(before == after);

  const EntityId idle{"idle"};
  net.register_entity(idle, "rsmu2");
  auto bare = net.handover(idle, "rsmu2", "rsmu3", {});
  CHECK(bare.transferred == 0);
  CHECK(net.manager("rsmu3").is_registered(idle));
  CHECK_FALSE(net.manager("rsmu2").is_registered(idle));

  CHECK_THROWS_AS(net.handover(a, "rsmu2", "rsmu2", {}), std::invalid_argument);
  net.register_entity(EntityId{"c"}, "rsmu1");
  CHECK_THROWS_AS(net.handover(EntityId{"c"}, "rsmu1", "rsmu3", {}), std::invalid_argument);
  CHECK_THROWS_AS(net.handover(EntityId{"c"}, "rsmu2", "rsmu3", {}), std::invalid_argument);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aido/amod.hpp"
#include "aido/error.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>

using namespace aido;
using namespace aido::amod;

namespace {

RoadGraph two_nodes(double t) {
  RoadGraph g;
  g.nodes = {{0, 0}, {1, 0}};
  g.edges = {{0, 1, t, 50}, {1, 0, t, 50}};
  return g;
}

// Line of nodes 0 - 1 - ... - (n-1), two-way, 10 s and 100 m per hop.
RoadGraph line_graph(int n) {
  RoadGraph g;
  for (int i = 0; i < n; ++i) g.nodes.push_back({100.0 * i, 0});
  for (int i = 0; i + 1 < n; ++i) {
    g.edges.push_back({i, i + 1, 10, 100});
    g.edges.push_back({i + 1, i, 10, 100});
  }
  return g;
}

FleetOptions fleet(int size, std::vector<int> start = {}, double horizon = 600) {
  FleetOptions o;
  o.fleet_size = size;
  o.start_nodes = std::move(start);
  o.horizon = horizon;
  return o;
}

} // namespace

TEST_CASE("shortest travel time: trivial cases") {
  const RoadGraph g = two_nodes(5);
  const Route same = shortest_travel_time(g, 0, 0);
  CHECK(same.time == 0.0);
  CHECK(same.path == std::vector<int>{0});
  const Route r = shortest_travel_time(g, 0, 1);
  CHECK(r.time == 5.0);
  CHECK(r.path == std::vector<int>{0, 1});
  CHECK_THROWS_AS(shortest_travel_time(g, 0, 2), ValidationError);
}

TEST_CASE("shortest travel time: unreachable is reported") {
  RoadGraph g = two_nodes(5);
  g.edges.pop_back();
  const Route r = shortest_travel_time(g, 1, 0);
  CHECK(std::isinf(r.time));
  CHECK(r.path.empty());
  CHECK_THROWS_AS(validate(g), TopologyError);
}

TEST_CASE("shortest travel time: ties take the smallest node sequence") {
  // 0 -> 2 -> 3 and 0 -> 1 -> 3 both take 2 s
  RoadGraph g;
  g.nodes.resize(4);
  g.edges = {{0, 2, 1, 1}, {2, 3, 1, 1}, {0, 1, 1, 1}, {1, 3, 1, 1}, {3, 0, 1, 1}};
  const Route r = shortest_travel_time(g, 0, 3);
  CHECK(r.time == 2.0);
  CHECK(r.path == std::vector<int>{0, 1, 3});
}

TEST_CASE("shortest travel time matches path enumeration") {
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(9));
    const RoadGraph g = oracle::random_road_graph(rng, n, trial % 2 == 0);
    const TravelTimes tt(g);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        const auto [t, path] = oracle::enumerate_paths(g, a, b);
        const Route r = shortest_travel_time(g, a, b);
        CHECK(r.time == t);
        CHECK(r.path == path);
        CHECK(tt.time(a, b) == t);
        CHECK(tt.path(a, b) == path);
      }
    }
  }
}

TEST_CASE("graph validation") {
  RoadGraph g = two_nodes(5);
  CHECK_NOTHROW(validate(g));
  g.edges[0].travel_time = 0;
  CHECK_THROWS_AS(validate(g), ValidationError);
  g = two_nodes(5);
  g.edges[0].to = 7;
  CHECK_THROWS_AS(validate(g), ValidationError);
  CHECK_NOTHROW(validate(grid_graph(3, 4)));
  CHECK(grid_graph(3, 4).edges.size() == 2u * (3 * 3 + 2 * 4));
}

TEST_CASE("hungarian examples") {
  CHECK(hungarian({}).empty());
  CHECK(hungarian({{4.0}}) == std::vector<int>{0});
  const std::vector<std::vector<double>> m{{1, 10}, {10, 1}};
  CHECK(hungarian(m) == std::vector<int>{0, 1});
  CHECK(assignment_cost(m, hungarian(m)) == 2.0);
  // rectangular both ways
  CHECK(hungarian({{5, 1, 9}}) == std::vector<int>{1});
  CHECK(hungarian({{5}, {1}, {9}}) == std::vector<int>{1});
  // all equal: the identity is the smallest vector
  CHECK(hungarian({{3, 3, 3}, {3, 3, 3}, {3, 3, 3}}) == std::vector<int>{0, 1, 2});
  CHECK_THROWS_AS(hungarian({{1, -1}}), ValidationError);
  CHECK_THROWS_AS(hungarian({{1, 2}, {1}}), ValidationError);
  CHECK_THROWS_AS(hungarian({{std::nan("")}}), ValidationError);
}

TEST_CASE("hungarian matches brute force on random matrices") {
  Rng rng(202);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = 1 + rng.below(6);
    const std::size_t m = 1 + rng.below(6);
    const bool ties = trial % 2 == 0;
    std::vector<std::vector<double>> c(n, std::vector<double>(m));
    for (auto& row : c) {
      for (double& x : row) x = ties ? static_cast<double>(rng.below(4)) : rng.uniform(0, 100);
    }
    const auto [best, vec] = oracle::brute_force_assignment(c);
    const std::vector<int> a = hungarian(c);
    CHECK(assignment_cost(c, a) == best);
    // integer costs sum exactly, so the tie-break is checkable too
    if (ties) CHECK(a == vec);
  }
}

TEST_CASE("greedy dispatcher examples") {
  const RoadGraph g = line_graph(4);
  const TravelTimes tt(g);
  EpochView view;
  view.travel = &tt;
  view.vehicles = {{0, VehicleStatus::idle, 3, 0.0}, {1, VehicleStatus::idle, 1, 0.0}};
  view.requests = {{7, 0, 2, 0.0}};
  const auto cmds = greedy_dispatcher(view);
  REQUIRE(cmds.size() == 2);
  CHECK(cmds[0].action == DispatchAction::hold);
  CHECK(cmds[1] == DispatchCommand{1, DispatchAction::assign, 7});

  // equal pickup times go to the smaller id
  view.vehicles = {{0, VehicleStatus::idle, 2, 0.0}, {1, VehicleStatus::idle, 0, 0.0}};
  view.requests = {{7, 1, 2, 0.0}};
  CHECK(greedy_dispatcher(view)[0].action == DispatchAction::assign);

  view.vehicles = {{0, VehicleStatus::to_pickup, 2, 0.0}, {1, VehicleStatus::with_customer, 0, 0.0}};
  for (const auto& c : greedy_dispatcher(view)) CHECK(c.action == DispatchAction::hold);
  for (const auto& c : matching_dispatcher(view)) CHECK(c.action == DispatchAction::hold);
}

TEST_CASE("matching dispatcher un-crosses assignments") {
  // Greedy serves the earlier request first with the vehicle that suits the
  // second one better.
  const RoadGraph g = line_graph(6);
  const TravelTimes tt(g);
  EpochView view;
  view.travel = &tt;
  view.vehicles = {{0, VehicleStatus::idle, 2, 0.0}, {1, VehicleStatus::idle, 5, 0.0}};
  view.requests = {{1, 3, 0, 0.0}, {2, 1, 0, 1.0}};
  const auto greedy = greedy_dispatcher(view);
  const auto matched = matching_dispatcher(view);
  CHECK(greedy[0].target == 1);
  CHECK(matched[0].target == 2);
  CHECK(matched[1].target == 1);
  CHECK(epoch_cost(view, matched) == 30.0);
  CHECK(epoch_cost(view, greedy) == 50.0);
}

TEST_CASE("matching equals greedy with a single request") {
  Rng rng(5);
  const RoadGraph g = oracle::random_road_graph(rng, 8, false);
  const TravelTimes tt(g);
  for (int trial = 0; trial < 50; ++trial) {
    EpochView view = oracle::random_epoch(rng, tt);
    if (view.requests.size() > 1) view.requests.resize(1);
    CHECK(matching_dispatcher(view) == greedy_dispatcher(view));
  }
}

TEST_CASE("matching epoch cost never exceeds greedy") {
  Rng rng(303);
  for (int trial = 0; trial < 200; ++trial) {
    const RoadGraph g = oracle::random_road_graph(rng, 3 + static_cast<int>(rng.below(8)), trial % 3 == 0);
    const TravelTimes tt(g);
    const EpochView view = oracle::random_epoch(rng, tt);
    const auto greedy = greedy_dispatcher(view);
    const auto matched = matching_dispatcher(view);
    const auto assigns = [](const std::vector<DispatchCommand>& cs) {
      return std::count_if(cs.begin(), cs.end(), [](const DispatchCommand& c) { return c.action == DispatchAction::assign; });
    };
    CHECK(assigns(greedy) == assigns(matched));
    CHECK(epoch_cost(view, matched) <= epoch_cost(view, greedy) + 1e-9);
  }
}

TEST_CASE("fleet: no requests, hold only") {
  const FleetResult r = simulate_fleet(grid_graph(3, 3), {}, fleet(4), hold_dispatcher);
  CHECK(r.metrics == FleetMetrics{});
}

TEST_CASE("fleet: vehicle already at the origin picks up immediately") {
  const RoadGraph g = line_graph(3);
  const std::vector<Request> reqs{{1, 0, 2, 0.0, {}, {}}};
  const FleetResult r = simulate_fleet(g, reqs, fleet(1, {0}), greedy_dispatcher);
  CHECK(r.metrics.mean_wait == 0.0);
  CHECK(r.metrics.served == 1);
  CHECK(r.metrics.completed == 1);
  CHECK(r.requests[0].t_dropoff == 20.0);
  CHECK(r.metrics.empty_distance == 0.0);
  CHECK(r.metrics.total_distance == 200.0);

  // a request between epochs waits for the next boundary
  const std::vector<Request> late{{1, 0, 2, 3.0, {}, {}}};
  const FleetResult l = simulate_fleet(g, late, fleet(1, {0}), greedy_dispatcher);
  CHECK(l.metrics.mean_wait == 7.0);
  CHECK(l.metrics.mean_wait <= 10.0);
}

TEST_CASE("fleet: travel, empty distance and partial edges") {
  const RoadGraph g = line_graph(4);
  // vehicle at 3 drives 2 hops empty, then 1 loaded
  const std::vector<Request> reqs{{1, 1, 0, 0.0, {}, {}}};
  const FleetResult r = simulate_fleet(g, reqs, fleet(1, {3}), greedy_dispatcher);
  CHECK(r.requests[0].t_pickup == 20.0);
  CHECK(r.requests[0].t_dropoff == 30.0);
  CHECK(r.metrics.empty_distance == 200.0);
  CHECK(r.metrics.total_distance == 300.0);

  // horizon cuts the trip mid-edge: 15 s = 1.5 hops
  const FleetResult cut = simulate_fleet(g, reqs, fleet(1, {3}, 15.0), greedy_dispatcher);
  CHECK(cut.metrics.served == 0);
  CHECK(cut.metrics.unserved == 1);
  CHECK(cut.metrics.total_distance == doctest::Approx(150.0));
}

TEST_CASE("fleet: bad commands are ignored and counted") {
  const RoadGraph g = line_graph(3);
  const std::vector<Request> reqs{{1, 0, 2, 0.0, {}, {}}};
  int calls = 0;
  const Dispatcher bad = [&](const EpochView&) {
    ++calls;
    return std::vector<DispatchCommand>{{0, DispatchAction::assign, 99},
                                        {5, DispatchAction::hold, 0},
                                        {0, DispatchAction::hold, 0},
                                        {1, DispatchAction::rebalance, 42}};
  };
  const FleetResult r = simulate_fleet(g, reqs, fleet(2, {0, 1}, 20.0), bad);
  CHECK(calls == 2);
  CHECK(r.metrics.warnings == 8);
  CHECK(r.metrics.unserved == 1);

  // assigning an already assigned request
  const Dispatcher twice = [](const EpochView& v) {
    std::vector<DispatchCommand> out;
    for (const auto& veh : v.vehicles) out.push_back({veh.id, DispatchAction::assign, 1});
    return out;
  };
  const FleetResult t = simulate_fleet(g, reqs, fleet(2, {0, 1}, 10.0), twice);
  CHECK(t.metrics.warnings == 1);
  CHECK(t.metrics.served == 1);
}

TEST_CASE("fleet: rebalancing moves empty") {
  const RoadGraph g = line_graph(3);
  const Dispatcher go = [](const EpochView& v) {
    return std::vector<DispatchCommand>{{0, v.time == 0.0 ? DispatchAction::rebalance : DispatchAction::hold, 2}};
  };
  const FleetResult r = simulate_fleet(g, {}, fleet(1, {0}, 60.0), go);
  CHECK(r.metrics.empty_distance == 200.0);
  CHECK(r.metrics.total_distance == 200.0);
}

TEST_CASE("fleet: deterministic, conserving, and blind to request ids") {
  const RoadGraph g = grid_graph(4, 4);
  const std::vector<Request> reqs = poisson_requests(g, 0.05, 1800, 9);
  REQUIRE(reqs.size() > 20);
  for (const char* name : {"greedy", "matching"}) {
    CAPTURE(name);
    const FleetOptions o = fleet(4, {}, 2400);
    const FleetResult a = simulate_fleet(g, reqs, o, make_dispatcher(name));
    const FleetResult b = simulate_fleet(g, reqs, o, make_dispatcher(name));
    CHECK(a.metrics == b.metrics);
    CHECK(a.metrics.served + a.metrics.unserved == static_cast<int>(reqs.size()));
    CHECK(a.metrics.empty_distance <= a.metrics.total_distance);
    CHECK(a.metrics.warnings == 0);

    std::vector<Request> relabeled = reqs;
    for (auto& r : relabeled) r.id = 1000 - 7 * r.id;
    CHECK(simulate_fleet(g, relabeled, o, make_dispatcher(name)).metrics == a.metrics);
  }
}

TEST_CASE("fleet: more vehicles rarely wait longer") {
  // Myopic matching is not guaranteed monotone; report, do not fail.
  Rng rng(404);
  int violations = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const RoadGraph g = oracle::random_road_graph(rng, 8, false);
    const auto reqs = poisson_requests(g, 0.02, 1200, rng.next());
    double prev = std::numeric_limits<double>::infinity();
    for (int f = 1; f <= 4; ++f) {
      const auto m = simulate_fleet(g, reqs, fleet(f, {}, 3000), matching_dispatcher).metrics;
      if (m.mean_wait > prev + 1e-9) ++violations;
      prev = m.mean_wait;
    }
  }
  MESSAGE("fleet-size monotonicity violations: " << violations << " of 60");
  CHECK(violations <= 30);
}

TEST_CASE("request validation") {
  const RoadGraph g = line_graph(3);
  CHECK_THROWS_AS(simulate_fleet(g, {{1, 0, 0, 0.0, {}, {}}}, fleet(1), greedy_dispatcher), ValidationError);
  CHECK_THROWS_AS(simulate_fleet(g, {{1, 0, 1, 5.0, {}, {}}, {2, 0, 1, 1.0, {}, {}}}, fleet(1), greedy_dispatcher),
                  ValidationError);
  CHECK_THROWS_AS(simulate_fleet(g, {{1, 0, 1, 0.0, {}, {}}, {1, 0, 1, 1.0, {}, {}}}, fleet(1), greedy_dispatcher),
                  ValidationError);
  CHECK_THROWS_AS(simulate_fleet(g, {}, fleet(2, {0}), greedy_dispatcher), ValidationError);
}

TEST_CASE("poisson requests") {
  const RoadGraph g = grid_graph(3, 3);
  const auto a = poisson_requests(g, 0.1, 1000, 1);
  CHECK(a == poisson_requests(g, 0.1, 1000, 1));
  CHECK(a.size() > 60);
  CHECK(a.size() < 140);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].origin != a[k].destination);
    CHECK(a[k].t_request < 1000.0);
    if (k > 0) CHECK(a[k].t_request >= a[k - 1].t_request);
  }
}

TEST_CASE("score examples") {
  const ScoreRefs refs{60, 1000, 300};
  CHECK(score_amod({}, ScoreMode::service_quality, 3, refs).value == 0.0);
  CHECK(score_amod({}, ScoreMode::efficiency, 3, refs).value == 0.0);

  FleetMetrics a;  // waits a lot, drives little empty
  a.mean_wait = 60;
  FleetMetrics b;  // the reverse
  b.empty_distance = 1000;
  const auto sa = score_amod(a, ScoreMode::service_quality, 3, refs);
  const auto sb = score_amod(b, ScoreMode::service_quality, 3, refs);
  CHECK(better(sb, sa));
  const auto ea = score_amod(a, ScoreMode::efficiency, 3, refs);
  const auto eb = score_amod(b, ScoreMode::efficiency, 3, refs);
  CHECK(better(ea, eb));

  FleetMetrics edge;
  edge.p95_wait = 300;
  CHECK(score_amod(edge, ScoreMode::fleet_size, 5, refs).pass);
  edge.p95_wait = std::nextafter(300.0, 400.0);
  CHECK_FALSE(score_amod(edge, ScoreMode::fleet_size, 5, refs).pass);
  edge.p95_wait = 0;
  edge.unserved = 1;
  CHECK_FALSE(score_amod(edge, ScoreMode::fleet_size, 5, refs).pass);

  const AmodScore small_fail{ScoreMode::fleet_size, 2, false};
  const AmodScore big_pass{ScoreMode::fleet_size, 8, true};
  const AmodScore small_pass{ScoreMode::fleet_size, 4, true};
  CHECK(better(big_pass, small_fail));
  CHECK(better(small_pass, big_pass));
  CHECK_THROWS_AS(better(sa, big_pass), ValidationError);
  CHECK_THROWS_AS(score_amod({}, ScoreMode::efficiency, 1, {0, 1, 1}), ValidationError);
}

TEST_CASE("scenario documents") {
  const Scenario s = parse_scenario(R"({
    "graph": {"grid": {"rows": 3, "cols": 3, "spacing": 100, "speed": 10}},
    "requests": [{"id": 2, "origin": 0, "destination": 8, "t_request": 5},
                 {"id": 1, "origin": 8, "destination": 0, "t_request": 0}],
    "fleet_size": 2, "horizon_s": 600, "mode": "efficiency", "dispatcher": "greedy",
    "refs": {"wait_ref_s": 30, "distance_ref_m": 500}
  })");
  CHECK(s.graph.node_count() == 9);
  REQUIRE(s.requests.size() == 2);
  CHECK(s.requests[0].id == 1);
  CHECK(s.mode == ScoreMode::efficiency);
  CHECK(s.refs.wait_ref == 30.0);
  CHECK(s.refs.wait_sla == 300.0);
  const ScenarioResult r = run_scenario(s);
  CHECK(r.metrics.served == 2);
  const Json j = to_json(r);
  CHECK(j["score"]["mode"] == "efficiency");
  CHECK(j["metrics"]["served"] == 2);

  const Scenario p = parse_scenario(R"({
    "graph": {"nodes": [{"x": 0, "y": 0}, {"x": 1, "y": 0}],
              "edges": [{"from": 0, "to": 1, "travel_time": 5, "length": 50},
                        {"from": 1, "to": 0, "travel_time": 5, "length": 50}]},
    "poisson": {"rate_per_s": 0.1, "horizon_s": 100, "seed": 4},
    "fleet_size": 1, "mode": "fleet_size"})");
  CHECK(p.requests == poisson_requests(p.graph, 0.1, 100, 4));
  CHECK(run_scenario(p).score.mode == ScoreMode::fleet_size);

  CHECK_THROWS_AS(parse_scenario("{"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"graph": {"grid": {"rows": 2, "cols": 2}}, "fleet_size": 1})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"graph": {"grid": {"rows": 2, "cols": 2}}, "requests": [], "fleet_size": 1,
                                    "mode": "fastest"})"),
                  ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"graph": {"grid": {"rows": 2, "cols": 2}}, "requests": [], "fleet_size": 1,
                                    "colour": 1})"),
                  ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"graph": {"nodes": [{"x": 0, "y": 0}, {"x": 1, "y": 0}],
                                    "edges": [{"from": 0, "to": 1, "travel_time": 5, "length": 50}]},
                                    "requests": [], "fleet_size": 1})"),
                  TopologyError);
}

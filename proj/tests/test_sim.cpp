#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aido/error.hpp"
#include "aido/sim.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>

using namespace aido;
using namespace aido::sim;
using dynamics::Command;
using world::TileMap;

namespace {

EpisodeConfig ring_config() {
  EpisodeConfig c;
  c.map = world::load_map(world::canonical_ring_document());
  return c;
}

EpisodeConfig long_ring_config() {
  EpisodeConfig c;
  c.map = oracle::ring(3, 8);
  return c;
}

std::map<Label, int> label_counts(const SemanticImage& img) {
  std::map<Label, int> m;
  for (Label l : img.labels) ++m[l];
  return m;
}

} // namespace

TEST_CASE("reset is deterministic per seed") {
  EpisodeConfig c = ring_config();
  c.seed = 42;
  c.randomization = parse_randomization(
      R"({"wheel_gain_left":{"min":0.9,"max":1.1},"start_d_noise":{"min":-0.02,"max":0.02},"start_phi_noise":{"min":-0.1,"max":0.1}})");
  Simulation a(c);
  Simulation b(c);
  CHECK(a.state() == b.state());
  CHECK(a.drawn() == b.drawn());
  for (int i = 0; i < 50; ++i) {
    a.step({0.3, 0.5});
    b.step({0.3, 0.5});
  }
  CHECK(a.trajectory() == b.trajectory());

  c.seed = 43;
  Simulation other(c);
  CHECK_FALSE(other.drawn() == a.drawn());
}

TEST_CASE("default start is the lane origin") {
  Simulation s(ring_config());
  CHECK(std::abs(s.lane_pose().d) < 1e-12);
  CHECK(std::abs(s.lane_pose().phi) < 1e-12);
  CHECK(s.lane_pose().s == 0.0);
  CHECK(s.zone() == world::Zone::right_lane);
}

TEST_CASE("invalid configurations are rejected") {
  EpisodeConfig c = ring_config();
  c.start_pose = StartPose{-1.0, -1.0, 0.0};
  CHECK_THROWS_AS(Simulation{c}, ValidationError);
  c = ring_config();
  c.start_pose = StartPose{0.9, 0.9, 0.0};  // empty center tile
  CHECK_THROWS_AS(Simulation{c}, ValidationError);
  c = ring_config();
  c.dt = 0.0;
  CHECK_THROWS_AS(Simulation{c}, ValidationError);
  c = ring_config();
  c.max_duration = -1.0;
  CHECK_THROWS_AS(Simulation{c}, ValidationError);
  c = ring_config();
  c.map.set(0, 1, world::Tile{});
  CHECK_THROWS_AS(Simulation{c}, ValidationError);
}

TEST_CASE("drawn wheel gains are uniform") {
  const RandomizationConfig r = parse_randomization(R"({"wheel_gain_left":{"min":0.9,"max":1.1}})");
  std::vector<double> u;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const double g = draw_params(r, seed).gain_left;
    CHECK(g >= 0.9);
    CHECK(g <= 1.1);
    u.push_back((g - 0.9) / 0.2);
  }
  std::sort(u.begin(), u.end());
  double ks = 0.0;
  const double n = static_cast<double>(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) ks = std::max({ks, (i + 1) / n - u[i], u[i] - i / n});
  CHECK(ks < 0.15);
}

TEST_CASE("drawn delays are integers in range") {
  const RandomizationConfig r = parse_randomization(R"({"action_delay_steps":{"min":0,"max":2}})");
  std::map<int, int> seen;
  for (std::uint64_t seed = 0; seed < 300; ++seed) ++seen[draw_params(r, seed).action_delay];
  CHECK(seen.size() == 3);
  CHECK(seen.begin()->first == 0);
  CHECK(seen.rbegin()->first == 2);
}

TEST_CASE("randomization document parsing") {
  CHECK_THROWS_AS(parse_randomization(R"({"gravity":{"min":0,"max":1}})"), ParseError);
  CHECK_THROWS_AS(parse_randomization(R"({"wheel_gain_left":{"min":1.1,"max":0.9}})"), ValidationError);
  CHECK_THROWS_AS(parse_randomization(R"({"action_delay_steps":{"min":0.5,"max":1}})"), ValidationError);
  CHECK_THROWS_AS(parse_randomization(R"({"action_delay_steps":{"min":-1,"max":1}})"), ValidationError);
  CHECK_THROWS_AS(parse_randomization(R"({"wheel_gain_left":{"min":0.9}})"), ParseError);
  CHECK_THROWS_AS(parse_randomization("[1,2]"), ParseError);
  const RandomizationConfig r =
      parse_randomization(R"({"wheel_gain_left":{"min":0.9,"max":1.1},"label_intensity_jitter":{"min":-20,"max":20}})");
  CHECK(parse_randomization(to_json(r)) == r);
}

TEST_CASE("driving at the map edge goes off road in time") {
  EpisodeConfig c = ring_config();
  c.start_pose = StartPose{0.9, 0.15, -kPi / 2.0};
  Simulation s(c);
  const double v = c.kinematics.v_max;
  while (!s.terminated()) s.step({v, 0.0});
  CHECK(s.events() == std::vector<Event>{Event::off_road});
  CHECK(s.state().t <= 0.15 / v + 2.0 * c.dt);
  CHECK(s.state().y < 0.0);
}

TEST_CASE("obstacle on the centerline collides on the first overlapping step") {
  EpisodeConfig c = long_ring_config();
  c.start_pose = StartPose{0.9, 0.15, 0.0};
  c.obstacles.push_back({{1.5, 0.15}, 0.05, ObstacleKind::cone});
  Simulation s(c);
  const double v = 0.5;
  int expected = 0;
  while (!(1.5 - (0.9 + v * c.dt * expected) < 0.09 + 0.05)) ++expected;
  int steps = 0;
  while (!s.terminated()) {
    s.step({v, 0.0});
    ++steps;
  }
  CHECK(steps == expected);
  CHECK(s.events().front() == Event::collision);
}

TEST_CASE("collision test is strict and matches a pairwise scan") {
  CHECK_FALSE(check_collision({0, 0}, {}));
  CHECK_FALSE(check_collision({0, 0}, {{{0.25, 0.0}, 0.125}}, 0.125));
  CHECK(check_collision({0, 0}, {{{0.2499, 0.0}, 0.125}}, 0.125));

  Rng rng(12);
  for (int scene = 0; scene < 1000; ++scene) {
    std::vector<Obstacle> obs;
    const int n = static_cast<int>(rng.below(6));
    for (int i = 0; i < n; ++i) obs.push_back({{rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(0.01, 0.3)});
    const Vec2 p{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    bool hit = false;
    for (const auto& o : obs) hit = hit || std::hypot(p.x - o.center.x, p.y - o.center.y) < kRobotRadius + o.radius;
    CHECK(check_collision(p, obs) == hit);
  }
}

TEST_CASE("stepping a terminated episode is an error") {
  EpisodeConfig c = ring_config();
  c.max_duration = 0.1;
  Simulation s(c);
  while (!s.terminated()) s.step({0.2, 0.0});
  CHECK(s.events() == std::vector<Event>{Event::timeout});
  CHECK(s.step_count() == 3);
  const auto before = s.trajectory();
  CHECK_THROWS_AS(s.step({0.2, 0.0}), StateError);
  CHECK(s.trajectory() == before);
}

TEST_CASE("samples are spaced by dt") {
  Simulation s(long_ring_config());
  for (int i = 0; i < 100 && !s.terminated(); ++i) s.step({0.3, 0.0});
  CHECK(s.step_count() > 50);
  const auto& samples = s.trajectory().samples;
  for (std::size_t i = 0; i < samples.size(); ++i) CHECK(samples[i].state.t == doctest::Approx((i + 1) * s.config().dt));
}

TEST_CASE("action delay shifts the trajectory") {
  std::vector<Command> actions;
  Rng rng(5);
  for (int i = 0; i < 60; ++i) actions.push_back({rng.uniform(0.0, 0.4), rng.uniform(-1.0, 1.0)});

  for (int k : {1, 2, 3}) {
    EpisodeConfig delayed_cfg = long_ring_config();
    delayed_cfg.randomization.action_delay_steps = {double(k), double(k)};
    Simulation delayed(delayed_cfg);
    Simulation shifted(long_ring_config());
    for (int i = 0; i < 60; ++i) {
      delayed.step(actions[i]);
      shifted.step(i < k ? Command{} : actions[i - k]);
      if (delayed.terminated() || shifted.terminated()) break;
    }
    CHECK(delayed.trajectory() == shifted.trajectory());
  }
}

TEST_CASE("ground truth observation is consistent") {
  EpisodeConfig c = ring_config();
  c.obstacles.push_back({{0.9, 0.15}, 0.05, ObstacleKind::duckie});
  Simulation s(c);
  for (int i = 0; i < 30; ++i) {
    const auto r = s.step({0.2, 0.8});
    REQUIRE(r.observation.ground_truth);
    const auto& gt = *r.observation.ground_truth;
    CHECK(std::abs(gt.heading_dot - std::cos(gt.pose.phi)) < 1e-12);
    CHECK(gt.lane_cross_sign == (gt.pose.d > 0 ? 1 : (gt.pose.d < 0 ? -1 : 0)));
    REQUIRE(gt.obstacles.size() == 1);
    const double dist = std::hypot(gt.obstacles[0].forward, gt.obstacles[0].left);
    CHECK(dist == doctest::Approx(std::hypot(0.9 - s.state().x, 0.15 - s.state().y)));
    CHECK_FALSE(r.observation.semantic);
    if (s.terminated()) break;
  }
}

TEST_CASE("semantic raster of a centered robot on a straight") {
  const TileMap m = oracle::ring(3, 8);
  const RasterConfig raster;
  const SemanticImage img = render_semantic(m, {}, {1.5, 0.15, 0.0, 0.0}, raster);
  CHECK(img.width == 64);
  CHECK(img.height == 48);
  std::map<int, int> yellow_cols;
  std::map<int, int> white_cols;
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      if (img.at(r, c) == Label::yellow) ++yellow_cols[c];
      if (img.at(r, c) == Label::white) ++white_cols[c];
    }
  }
  REQUIRE(yellow_cols.size() == 2);
  CHECK(yellow_cols.rbegin()->first < 32);
  CHECK(yellow_cols.rbegin()->first == yellow_cols.begin()->first + 1);
  // dashed: roughly half of the rows
  CHECK(yellow_cols.begin()->second > 15);
  CHECK(yellow_cols.begin()->second < 33);
  // a solid white column at the right road edge and one at the left
  REQUIRE(white_cols.size() == 2);
  CHECK(white_cols.rbegin()->first > 32);
  CHECK(white_cols.rbegin()->second == 48);
  CHECK(white_cols.begin()->first < yellow_cols.begin()->first);
}

TEST_CASE("semantic raster facing away from the road is empty") {
  const TileMap m = world::load_map(world::canonical_ring_document());
  const SemanticImage img = render_semantic(m, {}, {-0.5, 0.9, kPi, 0.0}, RasterConfig{});
  CHECK(label_counts(img)[Label::background] == 64 * 48);
}

TEST_CASE("semantic label counts repeat with the dash period") {
  const TileMap m = oracle::ring(3, 8);
  for (double x0 : {1.3, 1.5, 1.62}) {
    const auto a = label_counts(render_semantic(m, {}, {x0, 0.15, 0.0, 0.0}, RasterConfig{}));
    const auto b = label_counts(render_semantic(m, {}, {x0 + 0.12, 0.15, 0.0, 0.0}, RasterConfig{}));
    CHECK(a == b);
  }
}

TEST_CASE("obstacles are painted over markings") {
  const TileMap m = oracle::ring(3, 8);
  const std::vector<Obstacle> obs{{{2.0, 0.0}, 0.1, ObstacleKind::cone}};
  const SemanticImage img = render_semantic(m, obs, {1.5, 0.15, 0.0, 0.0}, RasterConfig{});
  CHECK(label_counts(img)[Label::obstacle] > 0);
}

TEST_CASE("semantic observations honour the jitter draw") {
  EpisodeConfig c = ring_config();
  c.semantic = true;
  c.randomization.label_intensity_jitter = {-20.0, 20.0};
  c.seed = 9;
  Simulation s(c);
  const auto obs = s.observe();
  REQUIRE(obs.semantic);
  CHECK(obs.semantic->intensity_shift == s.drawn().intensity_shift);
  CHECK(std::abs(obs.semantic->intensity_shift) <= 20);
}

TEST_CASE("reward") {
  CHECK(compute_reward(0.5, 0.0) == doctest::Approx(0.5));
  CHECK(std::abs(compute_reward(0.5, kPi / 2.0)) < 1e-12);
  CHECK(compute_reward(0.3, kPi) == doctest::Approx(-0.3));
}

TEST_CASE("lap budget ends the episode as a timeout") {
  EpisodeConfig c = ring_config();
  c.max_laps = 1;
  c.start_pose = StartPose{0.9, 0.15, 0.0};
  c.max_duration = 1.0;
  Simulation s(c);
  while (!s.terminated()) s.step({0.3, 0.0});
  CHECK(s.events() == std::vector<Event>{Event::timeout});
}

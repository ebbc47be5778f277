#include "aido/sim.hpp"

#include "aido/error.hpp"
#include "aido/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace aido::sim {

using dynamics::Command;
using dynamics::RobotState;

std::string_view to_string(ObstacleKind k) {
  switch (k) {
  case ObstacleKind::cone: return "cone";
  case ObstacleKind::divider: return "divider";
  case ObstacleKind::parked_vehicle: return "parked_vehicle";
  case ObstacleKind::duckie: return "duckie";
  }
  return "cone";
}

ObstacleKind obstacle_kind_from_string(std::string_view name) {
  for (auto k : {ObstacleKind::cone, ObstacleKind::divider, ObstacleKind::parked_vehicle, ObstacleKind::duckie}) {
    if (to_string(k) == name) return k;
  }
  throw ParseError("unknown obstacle kind '" + std::string(name) + "'");
}

namespace {

struct RangeField {
  const char* key;
  Range RandomizationConfig::*member;
};

constexpr std::array<RangeField, 6> kRangeFields{{
    {"wheel_gain_left", &RandomizationConfig::wheel_gain_left},
    {"wheel_gain_right", &RandomizationConfig::wheel_gain_right},
    {"action_delay_steps", &RandomizationConfig::action_delay_steps},
    {"start_d_noise", &RandomizationConfig::start_d_noise},
    {"start_phi_noise", &RandomizationConfig::start_phi_noise},
    {"label_intensity_jitter", &RandomizationConfig::label_intensity_jitter},
}};

void validate(const RandomizationConfig& c) {
  for (const auto& f : kRangeFields) {
    const Range& r = c.*(f.member);
    if (!std::isfinite(r.min) || !std::isfinite(r.max) || r.min > r.max)
      throw ValidationError(std::string("randomization range '") + f.key + "' needs finite min <= max");
  }
  const Range& delay = c.action_delay_steps;
  if (delay.min < 0.0 || delay.min != std::floor(delay.min) || delay.max != std::floor(delay.max))
    throw ValidationError("action_delay_steps must be non-negative integers");
  for (const Range* g : {&c.wheel_gain_left, &c.wheel_gain_right}) {
    if (!(g->min > 0.0) || g->max > 2.0) throw ValidationError("wheel gains must lie in (0, 2]");
  }
}

} // namespace

RandomizationConfig parse_randomization(const Json& doc) {
  if (!doc.is_object()) throw ParseError("randomization document must be an object");
  RandomizationConfig config;
  for (const auto& [key, value] : doc.items()) {
    const auto field = std::find_if(kRangeFields.begin(), kRangeFields.end(),
                                    [&](const RangeField& f) { return key == f.key; });
    if (field == kRangeFields.end()) throw ParseError("unknown randomization parameter '" + key + "'");
    if (!value.is_object() || !value.contains("min") || !value.contains("max") || value.size() != 2 ||
        !value["min"].is_number() || !value["max"].is_number())
      throw ParseError("randomization parameter '" + key + "' must be {\"min\":..,\"max\":..}");
    config.*(field->member) = {value["min"].get<double>(), value["max"].get<double>()};
  }
  validate(config);
  return config;
}

RandomizationConfig parse_randomization(std::string_view document) {
  try {
    return parse_randomization(Json::parse(document));
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("randomization document is not valid JSON: ") + e.what());
  }
}

Json to_json(const RandomizationConfig& config) {
  Json j = Json::object();
  for (const auto& f : kRangeFields) {
    const Range& r = config.*(f.member);
    j[f.key] = {{"min", r.min}, {"max", r.max}};
  }
  return j;
}

DrawnParams draw_params(const RandomizationConfig& config, std::uint64_t seed) {
  validate(config);
  Rng rng(seed);
  DrawnParams p;
  p.gain_left = rng.uniform(config.wheel_gain_left.min, config.wheel_gain_left.max);
  p.gain_right = rng.uniform(config.wheel_gain_right.min, config.wheel_gain_right.max);
  p.action_delay = static_cast<int>(rng.between(static_cast<std::int64_t>(config.action_delay_steps.min),
                                                static_cast<std::int64_t>(config.action_delay_steps.max)));
  p.start_d = rng.uniform(config.start_d_noise.min, config.start_d_noise.max);
  p.start_phi = rng.uniform(config.start_phi_noise.min, config.start_phi_noise.max);
  p.intensity_shift = static_cast<int>(
      std::lround(rng.uniform(config.label_intensity_jitter.min, config.label_intensity_jitter.max)));
  return p;
}

bool check_collision(Vec2 position, const std::vector<Obstacle>& obstacles, double robot_radius) {
  return std::any_of(obstacles.begin(), obstacles.end(), [&](const Obstacle& o) {
    const Vec2 d = position - o.center;
    const double reach = robot_radius + o.radius;
    return dot(d, d) < reach * reach;
  });
}

SemanticImage render_semantic(const world::TileMap& map, const std::vector<Obstacle>& obstacles,
                              const RobotState& robot, const RasterConfig& raster, int intensity_shift) {
  SemanticImage img;
  img.width = raster.cols;
  img.height = raster.rows;
  img.intensity_shift = intensity_shift;
  img.labels.resize(static_cast<std::size_t>(raster.cols * raster.rows), Label::background);

  const Vec2 origin{robot.x, robot.y};
  const Vec2 forward = unit_from_angle(robot.theta);
  const Vec2 right{forward.y, -forward.x};
  for (int r = 0; r < raster.rows; ++r) {
    const double ahead = raster.depth_m * (raster.rows - r - 0.5) / raster.rows;
    for (int c = 0; c < raster.cols; ++c) {
      const double lateral = raster.width_m * ((c + 0.5) / raster.cols - 0.5);
      const Vec2 p = origin + forward * ahead + right * lateral;
      Label label = Label::background;
      const bool on_obstacle = std::any_of(obstacles.begin(), obstacles.end(), [&](const Obstacle& o) {
        const Vec2 d = p - o.center;
        return dot(d, d) <= o.radius * o.radius;
      });
      if (on_obstacle) {
        label = Label::obstacle;
      } else {
        switch (world::marking_at(map, p)) {
        case world::Marking::white: label = Label::white; break;
        case world::Marking::yellow: label = Label::yellow; break;
        case world::Marking::red: label = Label::red; break;
        case world::Marking::none: break;
        }
      }
      img.labels[static_cast<std::size_t>(r * raster.cols + c)] = label;
    }
  }
  return img;
}

double compute_reward(double speed, double phi) { return speed * std::cos(phi); }

namespace {

world::LaneProjector make_projector(const EpisodeConfig& c) {
  world::validate_connectivity(c.map);
  return world::LaneProjector(world::lane_centerline(c.map), c.map.tile_size());
}

} // namespace

Simulation::Simulation(EpisodeConfig config) : config_(std::move(config)), projector_(make_projector(config_)) {
  if (!(config_.dt > 0.0)) throw ValidationError("dt must be positive");
  if (!(config_.max_duration > 0.0)) throw ValidationError("max_duration must be positive");
  if (config_.max_laps < 0) throw ValidationError("max_laps must be non-negative");
  for (const auto& o : config_.obstacles) {
    if (!(o.radius > 0.0)) throw ValidationError("obstacle radius must be positive");
  }
  dynamics::validate(config_.kinematics);

  drawn_ = draw_params(config_.randomization, config_.seed);
  actual_ = config_.kinematics;
  actual_.gain_left = drawn_.gain_left;
  actual_.gain_right = drawn_.gain_right;

  const auto& lane = projector_.polyline();
  Vec2 position;
  double heading = 0.0;
  if (config_.start_pose) {
    position = {config_.start_pose->x, config_.start_pose->y};
    heading = config_.start_pose->theta;
  } else {
    position = lane.point_at(0.0);
    heading = lane.tangent_at(0.0);
  }
  if (drawn_.start_d != 0.0) {
    const double tangent = lane.tangent_at(projector_.project(position, heading).s);
    position = position + unit_from_angle(tangent + kPi / 2.0) * drawn_.start_d;
  }
  heading = wrap_angle(heading + drawn_.start_phi);

  state_ = {position.x, position.y, heading, 0.0};
  pose_ = projector_.project(position, heading);
  zone_ = world::classify_zone(config_.map, pose_, position);
  if (zone_ == world::Zone::off_road) throw ValidationError("start pose is off the road");

  delay_queue_.assign(static_cast<std::size_t>(drawn_.action_delay), Command{});
  trajectory_.dt = config_.dt;
  trajectory_.start = state_;
  trajectory_.start_pose = pose_;
  max_steps_ = static_cast<long>(std::ceil(config_.max_duration / config_.dt - 1e-9));
}

StepResult Simulation::step(Command cmd) {
  if (terminated()) throw StateError("step called on a terminated episode");

  delay_queue_.push_back(dynamics::clamp(cmd, config_.kinematics));
  const Command requested = delay_queue_.front();
  delay_queue_.pop_front();

  // The controller's twist goes through the nominal inverse kinematics; the
  // wheels then respond with the randomized actuator gains.
  const dynamics::WheelCommand wheels = dynamics::inverse_kinematics(requested, config_.kinematics);
  const Command applied = dynamics::forward_kinematics(wheels, actual_);

  const double prev_s = pose_.s;
  state_ = dynamics::step(state_, applied, config_.dt);
  ++steps_;
  state_.t = static_cast<double>(steps_) * config_.dt;
  last_applied_ = applied;

  const Vec2 position{state_.x, state_.y};
  pose_ = projector_.project(position, state_.theta);
  zone_ = world::classify_zone(config_.map, pose_, position);
  trajectory_.samples.push_back({state_, applied, pose_, zone_});

  progress_ += metrics::progress_increment(prev_s, pose_, zone_, projector_.polyline().total_length,
                                           config_.kinematics.v_max * config_.dt * 1.5);

  if (check_collision(position, config_.obstacles, config_.robot_radius)) events_.push_back(Event::collision);
  if (zone_ == world::Zone::off_road) events_.push_back(Event::off_road);
  const bool lap_budget_done =
      config_.max_laps > 0 && progress_ >= config_.max_laps * projector_.polyline().total_length;
  if (steps_ >= max_steps_ || lap_budget_done) events_.push_back(Event::timeout);

  return {observe(), events_};
}

Observation Simulation::observe() const {
  Observation obs;
  obs.t = state_.t;
  if (config_.ground_truth) {
    GroundTruth gt;
    gt.pose = pose_;
    gt.heading_dot = std::cos(pose_.phi);
    gt.lane_cross_sign = pose_.d > 0.0 ? 1 : (pose_.d < 0.0 ? -1 : 0);
    const Vec2 forward = unit_from_angle(state_.theta);
    const Vec2 left{-forward.y, forward.x};
    for (const auto& o : config_.obstacles) {
      const Vec2 rel = o.center - Vec2{state_.x, state_.y};
      gt.obstacles.push_back({dot(rel, forward), dot(rel, left), o.radius, o.kind});
    }
    obs.ground_truth = std::move(gt);
  }
  if (config_.semantic) {
    obs.semantic = render_semantic(config_.map, config_.obstacles, state_, config_.raster, drawn_.intensity_shift);
  }
  return obs;
}

double Simulation::reward() const { return compute_reward(last_applied_.v, pose_.phi); }

} // namespace aido::sim

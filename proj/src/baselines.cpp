#include "aido/baselines.hpp"

#include "aido/error.hpp"

#include <algorithm>
#include <cmath>

namespace aido::baselines {

Vec2 pose_position(const world::LanePose& pose, const world::LanePolyline& lane) {
  const double tangent = lane.tangent_at(pose.s);
  return lane.point_at(pose.s) + unit_from_angle(tangent + kPi / 2.0) * pose.d;
}

double pose_heading(const world::LanePose& pose, const world::LanePolyline& lane) {
  return wrap_angle(lane.tangent_at(pose.s) + pose.phi);
}

double pursuit_bearing(const world::LanePose& pose, const world::LanePolyline& lane, double lookahead) {
  const Vec2 position = pose_position(pose, lane);
  const Vec2 target = lane.point_at(pose.s + lookahead);
  const Vec2 to = target - position;
  return wrap_angle(std::atan2(to.y, to.x) - pose_heading(pose, lane));
}

Command pure_pursuit(const world::LanePose& pose, const world::LanePolyline& lane, const PurePursuitParams& p) {
  if (!(p.lookahead > 0.0)) throw ValidationError("lookahead must be positive");
  const double alpha = pursuit_bearing(pose, lane, p.lookahead);
  const double v = p.v_cruise * std::max(0.3, std::cos(alpha));
  return {v, 2.0 * v * std::sin(alpha) / p.lookahead};
}

LookupTable default_lookup_table() {
  LookupTable t;
  t.edges = {-0.35, -0.1, 0.1, 0.35};
  // omega follows the sign of the deviation: a lane leaning left needs a
  // left turn. Sharper bins drive slower.
  t.entries = {{0.2, -3.5}, {0.35, -1.5}, {0.5, 0.0}, {0.35, 1.5}, {0.2, 3.5}};
  t.fallback = {0.1, -1.0};
  return t;
}

void validate(const LookupTable& table) {
  if (table.entries.size() != table.edges.size() + 1) throw ValidationError("lookup table needs edges + 1 entries");
  for (std::size_t i = 0; i < table.edges.size(); ++i) {
    const double e = table.edges[i];
    if (!(e > -kPi / 2.0 && e < kPi / 2.0)) throw ValidationError("lookup edges must lie in (-pi/2, pi/2)");
    if (i > 0 && !(e > table.edges[i - 1])) throw ValidationError("lookup edges must increase");
  }
}

std::size_t lookup_bin(double deviation, const LookupTable& table) {
  return static_cast<std::size_t>(std::upper_bound(table.edges.begin(), table.edges.end(), deviation) -
                                  table.edges.begin());
}

Command lookup_controller(const perception::LineFit& fit, const LookupTable& table) {
  if (!fit.yellow_visible) return table.fallback;
  return table.entries[lookup_bin(fit.deviation_angle, table)];
}

Command pid_controller(double e, const PidParams& p, PidState& state, double dt) {
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  state.integral = std::clamp(state.integral + e * dt, -p.i_max, p.i_max);
  const double derivative = state.has_prev ? (e - state.prev_error) / dt : 0.0;
  state.prev_error = e;
  state.has_prev = true;
  return {p.v_cruise, p.kp * e + p.ki * state.integral + p.kd * derivative};
}

Command heading_alignment_controller(double heading_dot, int cross_sign, const HeadingParams& p) {
  return {p.v, -p.kp * (1.0 - heading_dot) * cross_sign};
}

sim::RasterConfig fine_raster() {
  sim::RasterConfig r;
  r.cols = 192;
  r.rows = 144;
  return r;
}

Command ScriptedAgent::act(const sim::Observation&) {
  if (script_.empty()) return {};
  const Command c = script_[std::min(next_, script_.size() - 1)];
  ++next_;
  return c;
}

namespace {

const sim::GroundTruth& need_ground_truth(const sim::Observation& obs, const char* agent) {
  if (!obs.ground_truth) throw StateError(std::string(agent) + " agent needs ground-truth observations");
  return *obs.ground_truth;
}

const sim::SemanticImage& need_semantic(const sim::Observation& obs, const char* agent) {
  if (!obs.semantic) throw StateError(std::string(agent) + " agent needs semantic observations");
  return *obs.semantic;
}

} // namespace

void PurePursuitAgent::reset(const EpisodeInfo& info) {
  truth_ = world::lane_centerline(info.map);
  const world::TileMap target = reverse_ ? world::reverse_map(info.map) : info.map;
  target_.emplace(world::lane_centerline(target), target.tile_size());
  limits_ = info.limits;
}

Command PurePursuitAgent::act(const sim::Observation& obs) {
  if (!truth_) throw StateError("agent used before reset");
  const auto& gt = need_ground_truth(obs, "pure pursuit");
  world::LanePose pose = gt.pose;
  if (reverse_) {
    pose = target_->project(pose_position(gt.pose, *truth_), pose_heading(gt.pose, *truth_));
  }
  return dynamics::clamp(pure_pursuit(pose, target_->polyline(), params_), limits_);
}

LookupAgent::LookupAgent(LookupTable table) : table_(std::move(table)) { validate(table_); }

ObservationRequest LookupAgent::request() const { return {false, true, fine_raster()}; }

void LookupAgent::reset(const EpisodeInfo& info) {
  raster_ = info.raster;
  limits_ = info.limits;
}

Command LookupAgent::act(const sim::Observation& obs) {
  const auto& img = need_semantic(obs, "lookup");
  const perception::Perception p = perception::process_frame(img, raster_);
  return dynamics::clamp(lookup_controller(p.fit, table_), limits_);
}

ObservationRequest PidAgent::request() const {
  if (vision_) return {false, true, fine_raster()};
  return {};
}

void PidAgent::reset(const EpisodeInfo& info) {
  state_ = {};
  dt_ = info.dt;
  raster_ = info.raster;
  limits_ = info.limits;
}

Command PidAgent::act(const sim::Observation& obs) {
  double e = 0.0;
  if (vision_) {
    const perception::Perception p = perception::process_frame(need_semantic(obs, "pid"), raster_);
    // Without an estimate, hold the last error.
    e = p.lane_error ? *p.lane_error : state_.prev_error;
  } else {
    e = params_.setpoint_d - need_ground_truth(obs, "pid").pose.d;
  }
  return dynamics::clamp(pid_controller(e, params_, state_, dt_), limits_);
}

void HeadingAgent::reset(const EpisodeInfo& info) {
  lane_.emplace(world::lane_centerline(info.map), info.map.tile_size());
  limits_ = info.limits;
}

Command HeadingAgent::act(const sim::Observation& obs) {
  if (!lane_) throw StateError("agent used before reset");
  const auto& gt = need_ground_truth(obs, "heading alignment");
  // The reference direction points at the lane a little ahead, so aligning
  // with it also pulls the robot back toward the centerline.
  const double alpha = pursuit_bearing(gt.pose, lane_->polyline(), params_.lookahead);
  const int cross_sign = alpha > 0.0 ? -1 : (alpha < 0.0 ? 1 : 0);
  return dynamics::clamp(heading_alignment_controller(std::cos(alpha), cross_sign, params_), limits_);
}

std::vector<std::string> builtin_names() {
  return {"pure_pursuit", "lookup", "pid", "pid_vision", "heading_alignment", "spin", "straight", "stop", "wrong_lane"};
}

std::unique_ptr<Agent> make_builtin(std::string_view name) {
  if (name == "pure_pursuit") return std::make_unique<PurePursuitAgent>();
  if (name == "wrong_lane") return std::make_unique<PurePursuitAgent>(PurePursuitParams{}, true);
  if (name == "lookup") return std::make_unique<LookupAgent>();
  if (name == "pid") return std::make_unique<PidAgent>();
  if (name == "pid_vision") return std::make_unique<PidAgent>(PidParams{}, true);
  if (name == "heading_alignment") return std::make_unique<HeadingAgent>();
  if (name == "spin") return std::make_unique<ConstantAgent>("spin", Command{0.0, dynamics::KinematicParams{}.omega_max});
  if (name == "straight") return std::make_unique<ConstantAgent>("straight", Command{0.3, 0.0});
  if (name == "stop") return std::make_unique<ConstantAgent>("stop", Command{0.0, 0.0});
  throw ValidationError("unknown builtin agent '" + std::string(name) + "'");
}

sim::EpisodeConfig negotiate(sim::EpisodeConfig config, const ObservationRequest& request) {
  config.ground_truth = request.ground_truth;
  config.semantic = request.semantic;
  if (request.raster) config.raster = *request.raster;
  return config;
}

EpisodeInfo episode_info(const sim::EpisodeConfig& config) {
  return {config.map, config.dt, config.kinematics, config.raster};
}

EpisodeOutcome run_in_process(Agent& agent, const sim::EpisodeConfig& config) {
  const sim::EpisodeConfig cfg = negotiate(config, agent.request());
  sim::Simulation sim(cfg);
  agent.reset(episode_info(cfg));
  sim::Observation obs = sim.observe();
  while (!sim.terminated()) obs = sim.step(agent.act(obs)).observation;
  EpisodeOutcome out{sim.trajectory(), sim.events(), {}};
  out.metrics = metrics::evaluate_run(out.trajectory, out.events, sim.lane(), cfg.kinematics.v_max, cfg.max_duration);
  return out;
}

} // namespace aido::baselines

#pragma once

#include "aido/dynamics.hpp"
#include "aido/metrics.hpp"
#include "aido/perception.hpp"
#include "aido/sim.hpp"
#include "aido/world.hpp"

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aido::baselines {

using dynamics::Command;

struct PurePursuitParams {
  double lookahead = 0.25;
  double v_cruise = 0.5;
};

/// Robot position and heading recovered from a lane pose.
Vec2 pose_position(const world::LanePose& pose, const world::LanePolyline& lane);
double pose_heading(const world::LanePose& pose, const world::LanePolyline& lane);

/// Bearing from the robot to the centerline point `lookahead` ahead of its
/// projection, in the robot frame (positive to the left).
double pursuit_bearing(const world::LanePose& pose, const world::LanePolyline& lane, double lookahead);

Command pure_pursuit(const world::LanePose& pose, const world::LanePolyline& lane, const PurePursuitParams& p);

/// Angle-bin table. Bin i covers [edges[i-1], edges[i]) with open ends at
/// both extremes, so there is one more entry than edges.
struct LookupTable {
  std::vector<double> edges;
  std::vector<Command> entries;
  Command fallback;  // used while the yellow line is not visible
};

LookupTable default_lookup_table();

/// Throws ValidationError unless edges increase inside (-pi/2, pi/2) and
/// entries match the bins.
void validate(const LookupTable& table);

std::size_t lookup_bin(double deviation, const LookupTable& table);
Command lookup_controller(const perception::LineFit& fit, const LookupTable& table);

struct PidParams {
  double kp = 50.0;
  double ki = 0.0;
  double kd = 14.0;
  double setpoint_d = 0.0;
  double i_max = 1.0;
  double v_cruise = 0.3;
};

struct PidState {
  double integral = 0.0;
  double prev_error = 0.0;
  bool has_prev = false;
};

/// omega = kp e + ki integral + kd de/dt; the first call has no derivative.
Command pid_controller(double e, const PidParams& p, PidState& state, double dt);

struct HeadingParams {
  double kp = 30.0;
  double v = 0.5;
  double lookahead = 0.2;
};

/// omega = -kp (1 - heading_dot) cross_sign, v fixed.
Command heading_alignment_controller(double heading_dot, int cross_sign, const HeadingParams& p);

/// What an agent learns at the start of an episode.
struct EpisodeInfo {
  world::TileMap map{1, 1, 0.6};
  double dt = dynamics::kDefaultDt;
  dynamics::KinematicParams limits;
  sim::RasterConfig raster;
};

struct ObservationRequest {
  bool ground_truth = true;
  bool semantic = false;
  std::optional<sim::RasterConfig> raster;  // preferred raster, if any
};

class Agent {
public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;
  virtual ObservationRequest request() const { return {}; }
  virtual void reset(const EpisodeInfo& info) = 0;
  virtual Command act(const sim::Observation& obs) = 0;
};

/// Names accepted by make_builtin.
std::vector<std::string> builtin_names();

/// Throws ValidationError for an unknown name.
std::unique_ptr<Agent> make_builtin(std::string_view name);

/// Fixed twist every step.
class ConstantAgent : public Agent {
public:
  ConstantAgent(std::string name, Command cmd) : name_(std::move(name)), cmd_(cmd) {}
  std::string name() const override { return name_; }
  void reset(const EpisodeInfo&) override {}
  Command act(const sim::Observation&) override { return cmd_; }

private:
  std::string name_;
  Command cmd_;
};

/// Plays back a command list, then holds the last command.
class ScriptedAgent : public Agent {
public:
  explicit ScriptedAgent(std::vector<Command> script) : script_(std::move(script)) {}
  std::string name() const override { return "scripted"; }
  void reset(const EpisodeInfo&) override { next_ = 0; }
  Command act(const sim::Observation&) override;

private:
  std::vector<Command> script_;
  std::size_t next_ = 0;
};

class PurePursuitAgent : public Agent {
public:
  explicit PurePursuitAgent(PurePursuitParams p = {}, bool reverse_lane = false) : params_(p), reverse_(reverse_lane) {}
  std::string name() const override { return reverse_ ? "wrong_lane" : "pure_pursuit"; }
  void reset(const EpisodeInfo& info) override;
  Command act(const sim::Observation& obs) override;

private:
  PurePursuitParams params_;
  bool reverse_;
  std::optional<world::LanePolyline> truth_;
  std::optional<world::LaneProjector> target_;
  dynamics::KinematicParams limits_;
};

class LookupAgent : public Agent {
public:
  explicit LookupAgent(LookupTable table = default_lookup_table());
  std::string name() const override { return "lookup"; }
  ObservationRequest request() const override;
  void reset(const EpisodeInfo& info) override;
  Command act(const sim::Observation& obs) override;

private:
  LookupTable table_;
  sim::RasterConfig raster_;
  dynamics::KinematicParams limits_;
};

class PidAgent : public Agent {
public:
  explicit PidAgent(PidParams p = {}, bool vision = false) : params_(p), vision_(vision) {}
  std::string name() const override { return vision_ ? "pid_vision" : "pid"; }
  ObservationRequest request() const override;
  void reset(const EpisodeInfo& info) override;
  Command act(const sim::Observation& obs) override;

private:
  PidParams params_;
  bool vision_;
  PidState state_;
  double dt_ = dynamics::kDefaultDt;
  sim::RasterConfig raster_;
  dynamics::KinematicParams limits_;
};

class HeadingAgent : public Agent {
public:
  explicit HeadingAgent(HeadingParams p = {}) : params_(p) {}
  std::string name() const override { return "heading_alignment"; }
  void reset(const EpisodeInfo& info) override;
  Command act(const sim::Observation& obs) override;

private:
  HeadingParams params_;
  std::optional<world::LaneProjector> lane_;
  dynamics::KinematicParams limits_;
};

/// Applies the agent's observation request to the episode config.
sim::EpisodeConfig negotiate(sim::EpisodeConfig config, const ObservationRequest& request);

EpisodeInfo episode_info(const sim::EpisodeConfig& config);

struct EpisodeOutcome {
  Trajectory trajectory;
  std::vector<Event> events;
  metrics::RunMetrics metrics;
};

/// Runs one episode with the agent in this process.
EpisodeOutcome run_in_process(Agent& agent, const sim::EpisodeConfig& config);

/// Raster the vision agents prefer: fine enough for a 3x3 opening to keep
/// the lane lines.
sim::RasterConfig fine_raster();

} // namespace aido::baselines

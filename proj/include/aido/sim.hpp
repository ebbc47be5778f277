#pragma once

#include "aido/dynamics.hpp"
#include "aido/json_fwd.hpp"
#include "aido/rng.hpp"
#include "aido/trajectory.hpp"
#include "aido/world.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aido::sim {

enum class ObstacleKind { cone, divider, parked_vehicle, duckie };

std::string_view to_string(ObstacleKind k);
ObstacleKind obstacle_kind_from_string(std::string_view name);

struct Obstacle {
  Vec2 center;
  double radius = 0.05;
  ObstacleKind kind = ObstacleKind::cone;

  bool operator==(const Obstacle&) const = default;
};

struct Range {
  double min = 0.0;
  double max = 0.0;

  bool operator==(const Range&) const = default;
};

/// Per-episode perturbation ranges. Each value is drawn uniformly from its
/// range with the episode seed; the defaults are the nominal robot.
struct RandomizationConfig {
  Range wheel_gain_left{1.0, 1.0};
  Range wheel_gain_right{1.0, 1.0};
  Range action_delay_steps{0.0, 0.0};
  Range start_d_noise{0.0, 0.0};
  Range start_phi_noise{0.0, 0.0};
  Range label_intensity_jitter{0.0, 0.0};

  bool operator==(const RandomizationConfig&) const = default;
};

/// Parses the randomization document; unknown keys are rejected.
RandomizationConfig parse_randomization(const Json& doc);
RandomizationConfig parse_randomization(std::string_view document);
inline RandomizationConfig parse_randomization(const char* document) {
  return parse_randomization(std::string_view(document));
}
inline RandomizationConfig parse_randomization(const std::string& document) {
  return parse_randomization(std::string_view(document));
}
Json to_json(const RandomizationConfig& config);

/// Ego-frame orthographic raster window. Row 0 is the far edge; column 0 is
/// the left edge.
struct RasterConfig {
  int cols = 64;
  int rows = 48;
  double width_m = 1.2;
  double depth_m = 1.8;

  double cell_width() const { return width_m / cols; }
  double cell_depth() const { return depth_m / rows; }

  bool operator==(const RasterConfig&) const = default;
};

enum class Label : std::uint8_t { background = 0, white = 1, yellow = 2, red = 3, obstacle = 4 };

struct SemanticImage {
  int width = 0;
  int height = 0;
  std::vector<Label> labels;  // row-major
  int intensity_shift = 0;    // lighting offset applied when converting to gray

  Label at(int row, int col) const { return labels[static_cast<std::size_t>(row * width + col)]; }

  bool operator==(const SemanticImage&) const = default;
};

struct EgoObstacle {
  double forward = 0.0;
  double left = 0.0;
  double radius = 0.0;
  ObstacleKind kind = ObstacleKind::cone;

  bool operator==(const EgoObstacle&) const = default;
};

struct GroundTruth {
  world::LanePose pose;
  double heading_dot = 1.0;  // cos(phi)
  int lane_cross_sign = 0;   // sign of d
  std::vector<EgoObstacle> obstacles;

  bool operator==(const GroundTruth&) const = default;
};

struct Observation {
  double t = 0.0;
  std::optional<GroundTruth> ground_truth;
  std::optional<SemanticImage> semantic;

  bool operator==(const Observation&) const = default;
};

struct StartPose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

inline constexpr double kRobotRadius = 0.09;

struct EpisodeConfig {
  world::TileMap map{1, 1, 0.6};
  double max_duration = 60.0;
  double dt = dynamics::kDefaultDt;
  std::vector<Obstacle> obstacles;
  std::optional<StartPose> start_pose;
  std::uint64_t seed = 0;
  RandomizationConfig randomization;
  dynamics::KinematicParams kinematics;
  bool ground_truth = true;
  bool semantic = false;
  RasterConfig raster;
  /// Ends the episode (as a timeout) once this many laps of progress are
  /// made; 0 disables the budget.
  int max_laps = 0;
  double robot_radius = kRobotRadius;
};

/// Values drawn from the randomization table at reset.
struct DrawnParams {
  double gain_left = 1.0;
  double gain_right = 1.0;
  int action_delay = 0;
  double start_d = 0.0;
  double start_phi = 0.0;
  int intensity_shift = 0;

  bool operator==(const DrawnParams&) const = default;
};

DrawnParams draw_params(const RandomizationConfig& config, std::uint64_t seed);

bool check_collision(Vec2 position, const std::vector<Obstacle>& obstacles, double robot_radius = kRobotRadius);

SemanticImage render_semantic(const world::TileMap& map, const std::vector<Obstacle>& obstacles,
                              const dynamics::RobotState& robot, const RasterConfig& raster, int intensity_shift = 0);

/// Speed times the cosine of the heading error.
double compute_reward(double speed, double phi);

struct StepResult {
  Observation observation;
  std::vector<Event> events;
};

/// One episode. Single-threaded; distinct instances are independent.
class Simulation {
public:
  explicit Simulation(EpisodeConfig config);

  StepResult step(dynamics::Command cmd);
  Observation observe() const;

  bool terminated() const { return !events_.empty(); }
  const std::vector<Event>& events() const { return events_; }
  const Trajectory& trajectory() const { return trajectory_; }
  const dynamics::RobotState& state() const { return state_; }
  const world::LanePose& lane_pose() const { return pose_; }
  world::Zone zone() const { return zone_; }
  const DrawnParams& drawn() const { return drawn_; }
  const EpisodeConfig& config() const { return config_; }
  const world::LanePolyline& lane() const { return projector_.polyline(); }
  double progress() const { return progress_; }
  long step_count() const { return steps_; }
  double reward() const;

private:
  EpisodeConfig config_;
  world::LaneProjector projector_;
  dynamics::KinematicParams actual_;
  DrawnParams drawn_;
  dynamics::RobotState state_;
  world::LanePose pose_;
  world::Zone zone_ = world::Zone::right_lane;
  std::deque<dynamics::Command> delay_queue_;
  dynamics::Command last_applied_;
  Trajectory trajectory_;
  std::vector<Event> events_;
  double progress_ = 0.0;
  long steps_ = 0;
  long max_steps_ = 0;
};

} // namespace aido::sim

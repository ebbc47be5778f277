#pragma once

namespace aido::dynamics {

struct RobotState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // wrapped to (-pi, pi]
  double t = 0.0;

  bool operator==(const RobotState&) const = default;
};

/// Body twist command: forward speed and yaw rate.
struct Command {
  double v = 0.0;
  double omega = 0.0;

  bool operator==(const Command&) const = default;
};

struct WheelCommand {
  double left = 0.0;
  double right = 0.0;

  bool operator==(const WheelCommand&) const = default;
};

struct KinematicParams {
  double baseline = 0.1;
  double v_max = 0.8;
  double omega_max = 8.0;
  double wheel_max = 1.2;
  double gain_left = 1.0;
  double gain_right = 1.0;

  bool operator==(const KinematicParams&) const = default;
};

inline constexpr double kDefaultDt = 1.0 / 30.0;

/// Throws ValidationError unless baseline > 0 and both gains lie in (0, 2].
void validate(const KinematicParams& p);

Command clamp(Command cmd, const KinematicParams& p);

WheelCommand inverse_kinematics(Command cmd, const KinematicParams& p);
Command forward_kinematics(WheelCommand w, const KinematicParams& p);

/// Exact constant-twist integration over dt.
RobotState step(const RobotState& state, Command cmd, double dt);

} // namespace aido::dynamics

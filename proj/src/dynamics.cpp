#include "aido/dynamics.hpp"

#include "aido/error.hpp"
#include "aido/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace aido::dynamics {

void validate(const KinematicParams& p) {
  if (!(p.baseline > 0.0)) throw ValidationError("baseline must be positive");
  if (!(p.gain_left > 0.0 && p.gain_left <= 2.0) || !(p.gain_right > 0.0 && p.gain_right <= 2.0))
    throw ValidationError("wheel gains must lie in (0, 2]");
}

Command clamp(Command cmd, const KinematicParams& p) {
  return {std::clamp(cmd.v, -p.v_max, p.v_max), std::clamp(cmd.omega, -p.omega_max, p.omega_max)};
}

WheelCommand inverse_kinematics(Command cmd, const KinematicParams& p) {
  const double half = cmd.omega * p.baseline / 2.0;
  const double left = (cmd.v - half) / p.gain_left;
  const double right = (cmd.v + half) / p.gain_right;
  return {std::clamp(left, -p.wheel_max, p.wheel_max), std::clamp(right, -p.wheel_max, p.wheel_max)};
}

Command forward_kinematics(WheelCommand w, const KinematicParams& p) {
  const double l = p.gain_left * w.left;
  const double r = p.gain_right * w.right;
  return {(l + r) / 2.0, (r - l) / p.baseline};
}

namespace {

double sinc(double x) { return std::abs(x) < 1e-9 ? 1.0 : std::sin(x) / x; }

} // namespace

RobotState step(const RobotState& state, Command cmd, double dt) {
  // sin(a + w dt) - sin(a) = 2 cos(a + w dt / 2) sin(w dt / 2), so the
  // chord of the arc is v dt sinc(w dt / 2) along the mid-step heading.
  // This form has no v / w singularity. Below 1e-9 the update is the
  // straight line and the heading is left alone, which keeps composition
  // exact in that regime.
  const bool straight = std::abs(cmd.omega) < 1e-9;
  const double half_turn = straight ? 0.0 : cmd.omega * dt / 2.0;
  const double chord = cmd.v * dt * sinc(half_turn);
  const double mid = state.theta + half_turn;
  RobotState next;
  next.x = state.x + chord * std::cos(mid);
  next.y = state.y + chord * std::sin(mid);
  next.theta = wrap_angle(state.theta + 2.0 * half_turn);
  next.t = state.t + dt;
  return next;
}

} // namespace aido::dynamics

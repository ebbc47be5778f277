#pragma once

#include "aido/dynamics.hpp"
#include "aido/world.hpp"

#include <string_view>
#include <vector>

namespace aido {

/// Terminal causes, in precedence order (collision wins a same-step tie).
enum class Event { none, collision, off_road, timeout, disconnect };

std::string_view to_string(Event e);
Event event_from_string(std::string_view name);

struct TrajectorySample {
  dynamics::RobotState state;   // after the step
  dynamics::Command command;    // twist actually applied during the step
  world::LanePose pose;
  world::Zone zone = world::Zone::right_lane;

  bool operator==(const TrajectorySample&) const = default;
};

struct Trajectory {
  double dt = dynamics::kDefaultDt;
  dynamics::RobotState start;
  world::LanePose start_pose;
  std::vector<TrajectorySample> samples;

  bool operator==(const Trajectory&) const = default;
};

} // namespace aido

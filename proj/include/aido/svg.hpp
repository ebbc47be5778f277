#pragma once

#include "aido/sim.hpp"
#include "aido/trajectory.hpp"
#include "aido/world.hpp"

#include <string>
#include <vector>

namespace aido::harness {

/// Top-down view of the map with lane markings, obstacles and the driven
/// path colored by zone. Byte-identical for identical inputs. Throws
/// ValidationError for an empty trajectory.
std::string trajectory_svg(const world::TileMap& map, const Trajectory& traj,
                           const std::vector<sim::Obstacle>& obstacles = {});

} // namespace aido::harness

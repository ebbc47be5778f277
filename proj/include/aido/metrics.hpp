#pragma once

#include "aido/trajectory.hpp"
#include "aido/world.hpp"

#include "aido/json_fwd.hpp"

#include <string>
#include <vector>

namespace aido::metrics {

struct RunMetrics {
  double distance = 0.0;        // m, progress along the right lane
  double survival = 0.0;        // s
  double lateral_median = 0.0;  // m
  double infraction_time = 0.0; // s
  Event terminal_event = Event::none;

  bool operator==(const RunMetrics&) const = default;
};

struct SubmissionScore {
  double distance = 0.0;
  double survival = 0.0;
  double lateral = 0.0;
  double infraction = 0.0;
  int runs = 0;

  bool operator==(const SubmissionScore&) const = default;
};

/// Gated arclength gain of one step: counted only in the right lane,
/// heading within 90 degrees of the lane tangent, and moving forward by at
/// most `max_step` (1.5 v_max dt). Everything else scores zero.
double progress_increment(double prev_s, const world::LanePose& pose, world::Zone zone, double lane_length,
                          double max_step);

double accumulate_progress(const Trajectory& traj, const world::LanePolyline& polyline, double v_max);

/// First terminal event by precedence among those fired on the last step.
Event first_event(const std::vector<Event>& events);

double survival_time(const Trajectory& traj, const std::vector<Event>& events, double max_duration);

/// Median |d| over right-lane samples (lower median); lane half-width if none.
double lateral_deviation_stats(const Trajectory& traj, double lane_half_width);

double infraction_time(const Trajectory& traj);

RunMetrics evaluate_run(const Trajectory& traj, const std::vector<Event>& events, const world::LanePolyline& polyline,
                        double v_max, double max_duration);

/// Lower median of a non-empty sample.
double lower_median(std::vector<double> values);

SubmissionScore aggregate_runs(const std::vector<RunMetrics>& runs);

struct RankEntry {
  std::string id;
  SubmissionScore score;
};

/// Finals-style record: tiles traversed and seconds driven.
RankEntry finals_record(std::string id, double tiles, double seconds);

/// Stable sort by (distance desc, survival desc, lateral asc, infraction asc).
std::vector<RankEntry> rank(std::vector<RankEntry> entries);

bool ranks_before(const SubmissionScore& a, const SubmissionScore& b);

Json score_record(const std::string& id, const SubmissionScore& s);
SubmissionScore score_from_record(const Json& j);

Json to_json(const RunMetrics& m);
RunMetrics run_metrics_from_json(const Json& j);

} // namespace aido::metrics

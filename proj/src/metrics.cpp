#include "aido/metrics.hpp"

#include "aido/error.hpp"
#include "aido/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace aido {

std::string_view to_string(Event e) {
  switch (e) {
  case Event::none: return "none";
  case Event::collision: return "collision";
  case Event::off_road: return "off_road";
  case Event::timeout: return "timeout";
  case Event::disconnect: return "disconnect";
  }
  return "none";
}

Event event_from_string(std::string_view name) {
  for (Event e : {Event::none, Event::collision, Event::off_road, Event::timeout, Event::disconnect}) {
    if (to_string(e) == name) return e;
  }
  throw ParseError("unknown event '" + std::string(name) + "'");
}

} // namespace aido

namespace aido::metrics {

using world::Zone;

double progress_increment(double prev_s, const world::LanePose& pose, Zone zone, double lane_length,
                          double max_step) {
  if (zone != Zone::right_lane || !(std::abs(pose.phi) < kPi / 2.0)) return 0.0;
  double ds = pose.s - prev_s;
  if (ds > lane_length / 2.0) ds -= lane_length;
  else if (ds <= -lane_length / 2.0) ds += lane_length;
  return (ds > 0.0 && ds <= max_step) ? ds : 0.0;
}

double accumulate_progress(const Trajectory& traj, const world::LanePolyline& polyline, double v_max) {
  const double max_step = v_max * traj.dt * 1.5;
  double prev_s = world::project_to_lane(polyline, {traj.start.x, traj.start.y}, traj.start.theta).s;
  double total = 0.0;
  for (const auto& sample : traj.samples) {
    const world::LanePose pose = world::project_to_lane(polyline, {sample.state.x, sample.state.y}, sample.state.theta);
    total += progress_increment(prev_s, pose, sample.zone, polyline.total_length, max_step);
    prev_s = pose.s;
  }
  return total;
}

Event first_event(const std::vector<Event>& events) {
  Event first = Event::none;
  for (Event e : events) {
    if (e == Event::none) continue;
    if (first == Event::none || static_cast<int>(e) < static_cast<int>(first)) first = e;
  }
  return first;
}

double survival_time(const Trajectory& traj, const std::vector<Event>& events, double max_duration) {
  if (first_event(events) == Event::none) return max_duration;
  return traj.samples.empty() ? traj.start.t : traj.samples.back().state.t;
}

double lower_median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty sample");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

double lateral_deviation_stats(const Trajectory& traj, double lane_half_width) {
  if (traj.samples.empty()) throw ValidationError("lateral deviation of an empty trajectory");
  std::vector<double> offsets;
  offsets.reserve(traj.samples.size());
  for (const auto& s : traj.samples) {
    if (s.zone == Zone::right_lane) offsets.push_back(std::abs(s.pose.d));
  }
  return offsets.empty() ? lane_half_width : lower_median(std::move(offsets));
}

double infraction_time(const Trajectory& traj) {
  const auto bad = std::count_if(traj.samples.begin(), traj.samples.end(),
                                 [](const TrajectorySample& s) { return s.zone != Zone::right_lane; });
  return traj.dt * static_cast<double>(bad);
}

RunMetrics evaluate_run(const Trajectory& traj, const std::vector<Event>& events, const world::LanePolyline& polyline,
                        double v_max, double max_duration) {
  RunMetrics m;
  m.distance = accumulate_progress(traj, polyline, v_max);
  m.survival = survival_time(traj, events, max_duration);
  m.lateral_median = traj.samples.empty() ? polyline.lane_half_width
                                          : lateral_deviation_stats(traj, polyline.lane_half_width);
  m.infraction_time = infraction_time(traj);
  m.terminal_event = first_event(events);
  return m;
}

SubmissionScore aggregate_runs(const std::vector<RunMetrics>& runs) {
  if (runs.empty()) throw ValidationError("cannot aggregate zero runs");
  auto median_of = [&](auto field) {
    std::vector<double> v;
    v.reserve(runs.size());
    for (const auto& r : runs) v.push_back(r.*field);
    return lower_median(std::move(v));
  };
  return {median_of(&RunMetrics::distance), median_of(&RunMetrics::survival), median_of(&RunMetrics::lateral_median),
          median_of(&RunMetrics::infraction_time), static_cast<int>(runs.size())};
}

RankEntry finals_record(std::string id, double tiles, double seconds) {
  return {std::move(id), {tiles, seconds, 0.0, 0.0, 1}};
}

bool ranks_before(const SubmissionScore& a, const SubmissionScore& b) {
  if (a.distance != b.distance) return a.distance > b.distance;
  if (a.survival != b.survival) return a.survival > b.survival;
  if (a.lateral != b.lateral) return a.lateral < b.lateral;
  return a.infraction < b.infraction;
}

std::vector<RankEntry> rank(std::vector<RankEntry> entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const RankEntry& a, const RankEntry& b) { return ranks_before(a.score, b.score); });
  return entries;
}

Json score_record(const std::string& id, const SubmissionScore& s) {
  Json j;
  j["id"] = id;
  j["distance_m"] = s.distance;
  j["survival_s"] = s.survival;
  j["lateral_m"] = s.lateral;
  j["infraction_s"] = s.infraction;
  j["runs"] = s.runs;
  return j;
}

SubmissionScore score_from_record(const Json& j) {
  return {j.at("distance_m").get<double>(), j.at("survival_s").get<double>(), j.at("lateral_m").get<double>(),
          j.at("infraction_s").get<double>(), j.at("runs").get<int>()};
}

Json to_json(const RunMetrics& m) {
  Json j;
  j["distance_m"] = m.distance;
  j["survival_s"] = m.survival;
  j["lateral_m"] = m.lateral_median;
  j["infraction_s"] = m.infraction_time;
  j["terminal_event"] = std::string(to_string(m.terminal_event));
  return j;
}

RunMetrics run_metrics_from_json(const Json& j) {
  return {j.at("distance_m").get<double>(), j.at("survival_s").get<double>(), j.at("lateral_m").get<double>(),
          j.at("infraction_s").get<double>(), event_from_string(j.at("terminal_event").get<std::string>())};
}

} // namespace aido::metrics

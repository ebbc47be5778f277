#pragma once

#include "aido/geometry.hpp"
#include "aido/json_fwd.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aido::amod {

struct RoadEdge {
  int from = 0;
  int to = 0;
  double travel_time = 0.0;  // s
  double length = 0.0;       // m

  bool operator==(const RoadEdge&) const = default;
};

/// Nodes are identified by their index.
struct RoadGraph {
  std::vector<Vec2> nodes;
  std::vector<RoadEdge> edges;

  int node_count() const { return static_cast<int>(nodes.size()); }
  bool operator==(const RoadGraph&) const = default;
};

/// Throws ValidationError for bad endpoints or non-positive weights and
/// TopologyError unless the graph is strongly connected.
void validate(const RoadGraph& g);

/// rows x cols grid with two-way streets between 4-neighbors.
RoadGraph grid_graph(int rows, int cols, double spacing = 200.0, double speed = 10.0);

struct Route {
  double time = 0.0;       // +inf when unreachable
  std::vector<int> path;   // empty when unreachable
};

/// Minimal travel time; ties go to the lexicographically smallest node
/// sequence. Times are summed from `a` along the path.
Route shortest_travel_time(const RoadGraph& g, int a, int b);

/// All-pairs routes. Every prefix of a chosen path is itself the chosen path
/// to its end node, so one predecessor tree per source suffices.
class TravelTimes {
public:
  explicit TravelTimes(const RoadGraph& g);

  int size() const { return n_; }
  double time(int a, int b) const { return time_[index(a, b)]; }
  std::vector<int> path(int a, int b) const;
  /// Edge used between consecutive path nodes (fastest, then lowest index).
  int edge(int a, int b) const;

private:
  std::size_t index(int a, int b) const { return static_cast<std::size_t>(a) * static_cast<std::size_t>(n_) + b; }

  int n_ = 0;
  std::vector<double> time_;
  std::vector<int> parent_;
  std::vector<int> edge_;
};

struct Request {
  std::int64_t id = 0;
  int origin = 0;
  int destination = 0;
  double t_request = 0.0;
  std::optional<double> t_pickup;
  std::optional<double> t_dropoff;

  bool operator==(const Request&) const = default;
};

enum class VehicleStatus { idle, to_pickup, with_customer, rebalancing };

std::string_view to_string(VehicleStatus s);

/// A vehicle as the dispatcher sees it: the next node it will stand on and
/// how long until it gets there (0 when already at a node).
struct VehicleView {
  int id = 0;
  VehicleStatus status = VehicleStatus::idle;
  int node = 0;
  double eta = 0.0;
};

struct OpenRequest {
  std::int64_t id = 0;
  int origin = 0;
  int destination = 0;
  double t_request = 0.0;
};

struct EpochView {
  double time = 0.0;
  const TravelTimes* travel = nullptr;
  std::vector<OpenRequest> requests;  // visible and unassigned, in time order
  std::vector<VehicleView> vehicles;  // by id

  /// Time for a vehicle to reach a node.
  double pickup_time(const VehicleView& v, int node) const { return v.eta + travel->time(v.node, node); }
};

enum class DispatchAction { hold, assign, rebalance };

struct DispatchCommand {
  int vehicle = 0;
  DispatchAction action = DispatchAction::hold;
  std::int64_t target = 0;  // request id for assign, node for rebalance

  bool operator==(const DispatchCommand&) const = default;
};

using Dispatcher = std::function<std::vector<DispatchCommand>(const EpochView&)>;

/// Requests in time order, each to the nearest idle vehicle by pickup time;
/// ties go to the smaller vehicle id.
std::vector<DispatchCommand> greedy_dispatcher(const EpochView& view);

/// Optimal assignment of open requests to idle vehicles by pickup time.
std::vector<DispatchCommand> matching_dispatcher(const EpochView& view);

std::vector<DispatchCommand> hold_dispatcher(const EpochView& view);

/// Sum of pickup times over the assign commands.
double epoch_cost(const EpochView& view, const std::vector<DispatchCommand>& commands);

/// Minimum-cost assignment of the smaller side. For n <= m, result[i] is the
/// column of row i; for n > m, result[j] is the row of column j. Among
/// optima the lexicographically smallest vector wins. Throws ValidationError
/// for negative or non-finite costs or ragged rows.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

/// Total cost of an assignment returned by hungarian, summed in order.
double assignment_cost(const std::vector<std::vector<double>>& cost, const std::vector<int>& assignment);

struct FleetMetrics {
  double mean_wait = 0.0;       // s, over picked-up requests
  double p95_wait = 0.0;        // s, nearest rank
  double empty_distance = 0.0;  // m
  double total_distance = 0.0;  // m
  int served = 0;               // picked up by the horizon
  int unserved = 0;
  int completed = 0;            // dropped off by the horizon
  int warnings = 0;             // ignored dispatcher commands

  bool operator==(const FleetMetrics&) const = default;
};

struct FleetOptions {
  int fleet_size = 1;
  double horizon = 3600.0;  // s
  double epoch = 10.0;      // s
  std::vector<int> start_nodes;  // per vehicle; default spreads over the nodes
};

struct FleetResult {
  FleetMetrics metrics;
  std::vector<Request> requests;  // with pickup and dropoff times filled in
};

/// Requests must be sorted by t_request with unique ids.
FleetResult simulate_fleet(const RoadGraph& graph, const std::vector<Request>& requests, const FleetOptions& options,
                           const Dispatcher& dispatcher);

std::vector<Request> poisson_requests(const RoadGraph& graph, double rate_per_s, double horizon, std::uint64_t seed);

enum class ScoreMode { service_quality, efficiency, fleet_size };

std::string_view to_string(ScoreMode m);
ScoreMode score_mode_from_string(std::string_view name);

struct ScoreRefs {
  double wait_ref = 60.0;       // s
  double distance_ref = 10000.0; // m
  double wait_sla = 300.0;      // s, p95
};

struct AmodScore {
  ScoreMode mode = ScoreMode::service_quality;
  double value = 0.0;  // lower is better
  bool pass = true;    // fleet_size mode only

  bool operator==(const AmodScore&) const = default;
};

AmodScore score_amod(const FleetMetrics& m, ScoreMode mode, int fleet_size, const ScoreRefs& refs = {});

/// True when a ranks strictly ahead of b. In fleet_size mode passing
/// entries beat failing ones, then the smaller fleet wins.
bool better(const AmodScore& a, const AmodScore& b);

struct Scenario {
  RoadGraph graph;
  std::vector<Request> requests;
  FleetOptions fleet;
  ScoreMode mode = ScoreMode::service_quality;
  ScoreRefs refs;
  std::string dispatcher = "matching";
};

Dispatcher make_dispatcher(std::string_view name);

/// Throws ParseError for malformed documents and ValidationError for bad
/// values.
Scenario parse_scenario(const Json& doc);
Scenario parse_scenario(std::string_view document);
inline Scenario parse_scenario(const char* document) { return parse_scenario(std::string_view(document)); }
inline Scenario parse_scenario(const std::string& document) { return parse_scenario(std::string_view(document)); }

Json to_json(const FleetMetrics& m);
Json to_json(const AmodScore& s);

struct ScenarioResult {
  FleetMetrics metrics;
  AmodScore score;
};

ScenarioResult run_scenario(const Scenario& s);
Json to_json(const ScenarioResult& r);

} // namespace aido::amod

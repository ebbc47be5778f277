#include "aido/amod.hpp"

#include "aido/error.hpp"
#include "aido/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <queue>
#include <set>

namespace aido::amod {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Fastest edge for each ordered node pair, lowest index on ties; -1 if none.
std::vector<int> best_edges(const RoadGraph& g) {
  const auto n = static_cast<std::size_t>(g.node_count());
  std::vector<int> best(n * n, -1);
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const RoadEdge& e = g.edges[k];
    int& slot = best[static_cast<std::size_t>(e.from) * n + static_cast<std::size_t>(e.to)];
    if (slot < 0 || e.travel_time < g.edges[static_cast<std::size_t>(slot)].travel_time) slot = static_cast<int>(k);
  }
  return best;
}

struct Adjacent {
  int to;
  int edge;
};

std::vector<std::vector<Adjacent>> adjacency(const RoadGraph& g, const std::vector<int>& best) {
  const int n = g.node_count();
  std::vector<std::vector<Adjacent>> adj(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const int e = best[static_cast<std::size_t>(a) * static_cast<std::size_t>(n) + static_cast<std::size_t>(b)];
      if (e >= 0 && a != b) adj[static_cast<std::size_t>(a)].push_back({b, e});
    }
  }
  return adj;
}

std::vector<int> trace(const std::vector<int>& parent, int source, int v) {
  std::vector<int> path;
  for (int x = v; x != source; x = parent[static_cast<std::size_t>(x)]) path.push_back(x);
  path.push_back(source);
  std::reverse(path.begin(), path.end());
  return path;
}

// Single-source times and predecessor tree with lexicographic tie-breaks.
// A node is settled only after every equal-time predecessor, so its path is
// final before it relaxes anything.
void dijkstra(const RoadGraph& g, const std::vector<std::vector<Adjacent>>& adj, int source, std::vector<double>& dist,
              std::vector<int>& parent) {
  const auto n = static_cast<std::size_t>(g.node_count());
  dist.assign(n, kInf);
  parent.assign(n, -1);
  std::vector<char> done(n, 0);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[static_cast<std::size_t>(source)] = 0.0;
  pq.push({0.0, source});
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (done[static_cast<std::size_t>(u)] || d > dist[static_cast<std::size_t>(u)]) continue;
    done[static_cast<std::size_t>(u)] = 1;
    for (const Adjacent& a : adj[static_cast<std::size_t>(u)]) {
      const auto v = static_cast<std::size_t>(a.to);
      if (done[v]) continue;
      const double t = d + g.edges[static_cast<std::size_t>(a.edge)].travel_time;
      if (t < dist[v]) {
        dist[v] = t;
        parent[v] = u;
        pq.push({t, a.to});
      } else if (t == dist[v] && parent[v] != u) {
        std::vector<int> via_u = trace(parent, source, u);
        std::vector<int> via_old = trace(parent, source, parent[v]);
        via_u.push_back(a.to);
        via_old.push_back(a.to);
        if (via_u < via_old) parent[v] = u;
      }
    }
  }
}

void check_node(const RoadGraph& g, int v) {
  if (v < 0 || v >= g.node_count()) throw ValidationError("node " + std::to_string(v) + " does not exist");
}

} // namespace

void validate(const RoadGraph& g) {
  if (g.nodes.empty()) throw ValidationError("road graph has no nodes");
  for (const RoadEdge& e : g.edges) {
    check_node(g, e.from);
    check_node(g, e.to);
    if (e.from == e.to) throw ValidationError("road graph has a self loop");
    if (!(e.travel_time > 0.0) || !std::isfinite(e.travel_time)) throw ValidationError("edge travel time must be positive");
    if (!(e.length > 0.0) || !std::isfinite(e.length)) throw ValidationError("edge length must be positive");
  }
  const int n = g.node_count();
  // reachability forward and backward from node 0
  for (int dir = 0; dir < 2; ++dir) {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
    for (const RoadEdge& e : g.edges) {
      if (dir == 0) out[static_cast<std::size_t>(e.from)].push_back(e.to);
      else out[static_cast<std::size_t>(e.to)].push_back(e.from);
    }
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : out[static_cast<std::size_t>(u)]) {
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    if (count != n) throw TopologyError("road graph is not strongly connected");
  }
}

RoadGraph grid_graph(int rows, int cols, double spacing, double speed) {
  if (rows < 1 || cols < 1 || rows * cols < 2) throw ValidationError("grid needs at least two nodes");
  if (!(spacing > 0.0) || !(speed > 0.0)) throw ValidationError("grid spacing and speed must be positive");
  RoadGraph g;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) g.nodes.push_back({c * spacing, r * spacing});
  }
  const double t = spacing / speed;
  auto link = [&](int a, int b) {
    g.edges.push_back({a, b, t, spacing});
    g.edges.push_back({b, a, t, spacing});
  };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int id = r * cols + c;
      if (c + 1 < cols) link(id, id + 1);
      if (r + 1 < rows) link(id, id + cols);
    }
  }
  return g;
}

Route shortest_travel_time(const RoadGraph& g, int a, int b) {
  check_node(g, a);
  check_node(g, b);
  if (a == b) return {0.0, {a}};
  const auto best = best_edges(g);
  std::vector<double> dist;
  std::vector<int> parent;
  dijkstra(g, adjacency(g, best), a, dist, parent);
  const double t = dist[static_cast<std::size_t>(b)];
  if (t == kInf) return {kInf, {}};
  return {t, trace(parent, a, b)};
}

TravelTimes::TravelTimes(const RoadGraph& g) : n_(g.node_count()) {
  edge_ = best_edges(g);
  const auto adj = adjacency(g, edge_);
  const auto n = static_cast<std::size_t>(n_);
  time_.resize(n * n);
  parent_.resize(n * n);
  std::vector<double> dist;
  std::vector<int> parent;
  for (int s = 0; s < n_; ++s) {
    dijkstra(g, adj, s, dist, parent);
    std::copy(dist.begin(), dist.end(), time_.begin() + static_cast<std::ptrdiff_t>(index(s, 0)));
    std::copy(parent.begin(), parent.end(), parent_.begin() + static_cast<std::ptrdiff_t>(index(s, 0)));
  }
}

std::vector<int> TravelTimes::path(int a, int b) const {
  if (a == b) return {a};
  if (time(a, b) == kInf) return {};
  std::vector<int> p;
  for (int x = b; x != a; x = parent_[index(a, x)]) p.push_back(x);
  p.push_back(a);
  std::reverse(p.begin(), p.end());
  return p;
}

int TravelTimes::edge(int a, int b) const { return edge_[index(a, b)]; }

std::string_view to_string(VehicleStatus s) {
  switch (s) {
    case VehicleStatus::idle: return "idle";
    case VehicleStatus::to_pickup: return "to_pickup";
    case VehicleStatus::with_customer: return "with_customer";
    case VehicleStatus::rebalancing: return "rebalancing";
  }
  return "idle";
}

// ---------------------------------------------------------------- assignment

namespace {

using Matrix = std::vector<std::vector<double>>;

// Square Hungarian method with potentials (rows i, columns j, 1-based
// internally). Returns row -> column and the final potentials.
void solve_square(const Matrix& a, std::vector<int>& row_to_col, std::vector<double>& u, std::vector<double>& v) {
  const std::size_t n = a.size();
  u.assign(n + 1, 0.0);
  v.assign(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  row_to_col.assign(n, -1);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
}

// Rows <= columns. Optimal assignment, then the lexicographically smallest
// one among all optima: every optimum uses only edges of zero reduced cost,
// so rows are fixed in order to their smallest column that still leaves a
// perfect matching on the tight edges.
std::vector<int> assign_rows(const Matrix& cost) {
  const std::size_t rows = cost.size();
  const std::size_t cols = cost[0].size();
  const std::size_t n = cols;
  Matrix a(n, std::vector<double>(n, 0.0));
  double scale = 1.0;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      a[i][j] = cost[i][j];
      scale = std::max(scale, cost[i][j]);
    }
  }
  std::vector<int> match;
  std::vector<double> u, v;
  solve_square(a, match, u, v);

  const double eps = 1e-9 * scale;
  auto tight = [&](std::size_t i, std::size_t j) { return a[i][j] - u[i + 1] - v[j + 1] <= eps; };
  std::vector<int> owner(n);
  for (std::size_t i = 0; i < n; ++i) owner[static_cast<std::size_t>(match[i])] = static_cast<int>(i);
  std::vector<char> fixed_col(n, 0);

  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (static_cast<int>(j) == match[i]) break;
      if (fixed_col[j] || !tight(i, j)) continue;
      // Row i takes j; its old column must be reachable from j's owner along
      // an alternating path over unfixed rows.
      const int freed = match[i];
      const std::size_t start = static_cast<std::size_t>(owner[j]);
      std::vector<int> via(n, -1);  // column -> row that reached it
      std::vector<char> seen(n, 0);
      seen[j] = 1;
      std::deque<std::size_t> queue{start};
      bool found = false;
      while (!queue.empty() && !found) {
        const std::size_t r = queue.front();
        queue.pop_front();
        for (std::size_t c = 0; c < n; ++c) {
          if (seen[c] || fixed_col[c] || !tight(r, c)) continue;
          seen[c] = 1;
          via[c] = static_cast<int>(r);
          if (static_cast<int>(c) == freed) {
            found = true;
            break;
          }
          queue.push_back(static_cast<std::size_t>(owner[c]));
        }
      }
      if (!found) continue;
      for (int c = freed; c != static_cast<int>(j);) {
        const int r = via[static_cast<std::size_t>(c)];
        const int prev = match[static_cast<std::size_t>(r)];
        match[static_cast<std::size_t>(r)] = c;
        owner[static_cast<std::size_t>(c)] = r;
        c = prev;
      }
      match[i] = static_cast<int>(j);
      owner[j] = static_cast<int>(i);
      break;
    }
    fixed_col[static_cast<std::size_t>(match[i])] = 1;
  }
  match.resize(rows);
  return match;
}

} // namespace

std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  if (cost.empty()) return {};
  const std::size_t cols = cost[0].size();
  for (const auto& row : cost) {
    if (row.size() != cols) throw ValidationError("cost matrix rows differ in length");
    for (double c : row) {
      if (!std::isfinite(c) || c < 0.0) throw ValidationError("costs must be finite and non-negative");
    }
  }
  if (cols == 0) return {};
  if (cost.size() <= cols) return assign_rows(cost);
  Matrix t(cols, std::vector<double>(cost.size()));
  for (std::size_t i = 0; i < cost.size(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) t[j][i] = cost[i][j];
  }
  return assign_rows(t);
}

double assignment_cost(const std::vector<std::vector<double>>& cost, const std::vector<int>& assignment) {
  double total = 0.0;
  const bool by_row = cost.empty() || cost.size() <= cost[0].size();
  for (std::size_t k = 0; k < assignment.size(); ++k) {
    const auto other = static_cast<std::size_t>(assignment[k]);
    total += by_row ? cost[k][other] : cost[other][k];
  }
  return total;
}

// --------------------------------------------------------------- dispatchers

namespace {

std::vector<DispatchCommand> hold_all(const EpochView& view) {
  std::vector<DispatchCommand> out;
  out.reserve(view.vehicles.size());
  for (const VehicleView& v : view.vehicles) out.push_back({v.id, DispatchAction::hold, 0});
  return out;
}

} // namespace

std::vector<DispatchCommand> hold_dispatcher(const EpochView& view) { return hold_all(view); }

std::vector<DispatchCommand> greedy_dispatcher(const EpochView& view) {
  std::vector<DispatchCommand> out = hold_all(view);
  std::vector<char> taken(view.vehicles.size(), 0);
  for (const OpenRequest& r : view.requests) {
    std::size_t best = view.vehicles.size();
    double best_time = kInf;
    for (std::size_t k = 0; k < view.vehicles.size(); ++k) {
      const VehicleView& v = view.vehicles[k];
      if (taken[k] || v.status != VehicleStatus::idle) continue;
      const double t = view.pickup_time(v, r.origin);
      if (t < best_time) {
        best_time = t;
        best = k;
      }
    }
    if (best == view.vehicles.size()) break;
    taken[best] = 1;
    out[best] = {view.vehicles[best].id, DispatchAction::assign, r.id};
  }
  return out;
}

std::vector<DispatchCommand> matching_dispatcher(const EpochView& view) {
  std::vector<DispatchCommand> out = hold_all(view);
  std::vector<std::size_t> idle;
  for (std::size_t k = 0; k < view.vehicles.size(); ++k) {
    if (view.vehicles[k].status == VehicleStatus::idle) idle.push_back(k);
  }
  if (idle.empty() || view.requests.empty()) return out;
  // rows = requests, columns = idle vehicles
  Matrix cost(view.requests.size(), std::vector<double>(idle.size()));
  for (std::size_t i = 0; i < view.requests.size(); ++i) {
    for (std::size_t j = 0; j < idle.size(); ++j) {
      cost[i][j] = view.pickup_time(view.vehicles[idle[j]], view.requests[i].origin);
    }
  }
  const std::vector<int> a = hungarian(cost);
  const bool by_row = view.requests.size() <= idle.size();
  for (std::size_t k = 0; k < a.size(); ++k) {
    const std::size_t req = by_row ? k : static_cast<std::size_t>(a[k]);
    const std::size_t veh = idle[by_row ? static_cast<std::size_t>(a[k]) : k];
    out[veh] = {view.vehicles[veh].id, DispatchAction::assign, view.requests[req].id};
  }
  return out;
}

double epoch_cost(const EpochView& view, const std::vector<DispatchCommand>& commands) {
  double total = 0.0;
  for (const DispatchCommand& c : commands) {
    if (c.action != DispatchAction::assign) continue;
    const auto r = std::find_if(view.requests.begin(), view.requests.end(),
                                [&](const OpenRequest& q) { return q.id == c.target; });
    const auto v = std::find_if(view.vehicles.begin(), view.vehicles.end(),
                                [&](const VehicleView& w) { return w.id == c.vehicle; });
    if (r == view.requests.end() || v == view.vehicles.end()) continue;
    total += view.pickup_time(*v, r->origin);
  }
  return total;
}

// ---------------------------------------------------------------- simulation

namespace {

struct Vehicle {
  VehicleStatus status = VehicleStatus::idle;
  int node = 0;              // node stood on, or origin of the current edge
  int edge = -1;             // edge being traversed
  double elapsed = 0.0;      // s spent on the current edge
  double edge_distance = 0.0;  // m already counted on the current edge
  std::deque<int> route;     // nodes still to visit after the current edge
  std::size_t request = 0;   // index while to_pickup or with_customer
};

class Fleet {
public:
  Fleet(const RoadGraph& g, const TravelTimes& tt, std::vector<Request>& requests, FleetMetrics& m)
      : g_(g), tt_(tt), requests_(requests), m_(m) {}

  int next_node(const Vehicle& v) const { return v.edge < 0 ? v.node : edge(v).to; }

  double eta(const Vehicle& v) const { return v.edge < 0 ? 0.0 : edge(v).travel_time - v.elapsed; }

  void route_to(Vehicle& v, int goal) {
    const std::vector<int> p = tt_.path(next_node(v), goal);
    v.route.assign(p.begin() + 1, p.end());
  }

  void advance(Vehicle& v, double t, double t_end) {
    for (;;) {
      if (v.edge >= 0) {
        const RoadEdge& e = edge(v);
        const double rem = e.travel_time - v.elapsed;
        if (t + rem <= t_end) {
          t += rem;
          add_distance(v, e.length - v.edge_distance);
          v.node = e.to;
          v.edge = -1;
          continue;
        }
        v.elapsed += t_end - t;
        const double d = e.length * (v.elapsed / e.travel_time);
        add_distance(v, d - v.edge_distance);
        v.edge_distance = d;
        return;
      }
      if (!v.route.empty()) {
        v.edge = tt_.edge(v.node, v.route.front());
        v.route.pop_front();
        v.elapsed = 0.0;
        v.edge_distance = 0.0;
        continue;
      }
      if (v.status == VehicleStatus::to_pickup) {
        Request& r = requests_[v.request];
        r.t_pickup = std::max(t, r.t_request);
        v.status = VehicleStatus::with_customer;
        route_to(v, r.destination);
        continue;
      }
      if (v.status == VehicleStatus::with_customer) requests_[v.request].t_dropoff = t;
      v.status = VehicleStatus::idle;
      return;
    }
  }

private:
  const RoadEdge& edge(const Vehicle& v) const { return g_.edges[static_cast<std::size_t>(v.edge)]; }

  void add_distance(const Vehicle& v, double d) {
    m_.total_distance += d;
    if (v.status != VehicleStatus::with_customer) m_.empty_distance += d;
  }

  const RoadGraph& g_;
  const TravelTimes& tt_;
  std::vector<Request>& requests_;
  FleetMetrics& m_;
};

void validate_requests(const RoadGraph& g, const std::vector<Request>& requests) {
  std::set<std::int64_t> ids;
  for (std::size_t k = 0; k < requests.size(); ++k) {
    const Request& r = requests[k];
    check_node(g, r.origin);
    check_node(g, r.destination);
    if (r.origin == r.destination) throw ValidationError("request origin equals destination");
    if (!std::isfinite(r.t_request) || r.t_request < 0.0) throw ValidationError("request time must be finite and >= 0");
    if (k > 0 && r.t_request < requests[k - 1].t_request) throw ValidationError("requests must be sorted by time");
    if (!ids.insert(r.id).second) throw ValidationError("duplicate request id " + std::to_string(r.id));
  }
}

} // namespace

FleetResult simulate_fleet(const RoadGraph& graph, const std::vector<Request>& requests, const FleetOptions& options,
                           const Dispatcher& dispatcher) {
  validate(graph);
  validate_requests(graph, requests);
  if (options.fleet_size < 0) throw ValidationError("fleet size must be >= 0");
  if (!(options.epoch > 0.0)) throw ValidationError("epoch must be positive");
  if (!(options.horizon >= 0.0) || !std::isfinite(options.horizon)) throw ValidationError("horizon must be finite");
  if (!options.start_nodes.empty() && options.start_nodes.size() != static_cast<std::size_t>(options.fleet_size)) {
    throw ValidationError("start_nodes must list one node per vehicle");
  }

  const TravelTimes tt(graph);
  FleetResult result;
  result.requests = requests;
  for (Request& r : result.requests) {
    r.t_pickup.reset();
    r.t_dropoff.reset();
  }
  FleetMetrics& m = result.metrics;
  Fleet fleet(graph, tt, result.requests, m);

  std::vector<Vehicle> vehicles(static_cast<std::size_t>(options.fleet_size));
  for (std::size_t k = 0; k < vehicles.size(); ++k) {
    if (options.start_nodes.empty()) {
      vehicles[k].node = static_cast<int>(k * static_cast<std::size_t>(graph.node_count()) / vehicles.size());
    } else {
      check_node(graph, options.start_nodes[k]);
      vehicles[k].node = options.start_nodes[k];
    }
  }

  std::map<std::int64_t, std::size_t> by_id;
  for (std::size_t k = 0; k < requests.size(); ++k) by_id[requests[k].id] = k;
  std::vector<char> assigned(requests.size(), 0);
  std::size_t visible = 0;

  for (std::int64_t k = 0;; ++k) {
    const double now = static_cast<double>(k) * options.epoch;
    if (!(now < options.horizon)) break;
    while (visible < requests.size() && requests[visible].t_request <= now) ++visible;

    EpochView view;
    view.time = now;
    view.travel = &tt;
    for (std::size_t r = 0; r < visible; ++r) {
      if (!assigned[r]) {
        const Request& q = requests[r];
        view.requests.push_back({q.id, q.origin, q.destination, q.t_request});
      }
    }
    for (std::size_t v = 0; v < vehicles.size(); ++v) {
      view.vehicles.push_back({static_cast<int>(v), vehicles[v].status, fleet.next_node(vehicles[v]), fleet.eta(vehicles[v])});
    }

    std::vector<char> commanded(vehicles.size(), 0);
    for (const DispatchCommand& c : dispatcher(view)) {
      if (c.vehicle < 0 || static_cast<std::size_t>(c.vehicle) >= vehicles.size() ||
          commanded[static_cast<std::size_t>(c.vehicle)]) {
        ++m.warnings;
        continue;
      }
      commanded[static_cast<std::size_t>(c.vehicle)] = 1;
      Vehicle& v = vehicles[static_cast<std::size_t>(c.vehicle)];
      const bool free = v.status == VehicleStatus::idle || v.status == VehicleStatus::rebalancing;
      if (c.action == DispatchAction::hold) continue;
      if (c.action == DispatchAction::assign) {
        const auto it = by_id.find(c.target);
        if (!free || it == by_id.end() || it->second >= visible || assigned[it->second]) {
          ++m.warnings;
          continue;
        }
        assigned[it->second] = 1;
        v.status = VehicleStatus::to_pickup;
        v.request = it->second;
        fleet.route_to(v, requests[it->second].origin);
      } else {
        if (!free || c.target < 0 || c.target >= graph.node_count()) {
          ++m.warnings;
          continue;
        }
        v.status = VehicleStatus::rebalancing;
        fleet.route_to(v, static_cast<int>(c.target));
      }
    }

    const double end = std::min(now + options.epoch, options.horizon);
    for (Vehicle& v : vehicles) fleet.advance(v, now, end);
  }

  std::vector<double> waits;
  for (const Request& r : result.requests) {
    if (r.t_pickup) waits.push_back(*r.t_pickup - r.t_request);
    if (r.t_dropoff) ++m.completed;
  }
  m.served = static_cast<int>(waits.size());
  m.unserved = static_cast<int>(requests.size()) - m.served;
  if (!waits.empty()) {
    double sum = 0.0;
    for (double w : waits) sum += w;
    m.mean_wait = sum / static_cast<double>(waits.size());
    std::sort(waits.begin(), waits.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(waits.size())));
    m.p95_wait = waits[std::max<std::size_t>(rank, 1) - 1];
  }
  return result;
}

std::vector<Request> poisson_requests(const RoadGraph& graph, double rate_per_s, double horizon, std::uint64_t seed) {
  if (graph.node_count() < 2) throw ValidationError("requests need at least two nodes");
  if (!(rate_per_s > 0.0) || !std::isfinite(rate_per_s)) throw ValidationError("rate_per_s must be positive");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ValidationError("horizon_s must be finite and >= 0");
  Rng rng(seed);
  std::vector<Request> out;
  const auto n = static_cast<std::uint64_t>(graph.node_count());
  double t = 0.0;
  for (;;) {
    t += -std::log1p(-rng.unit()) / rate_per_s;
    if (!(t < horizon)) break;
    Request r;
    r.id = static_cast<std::int64_t>(out.size());
    r.origin = static_cast<int>(rng.below(n));
    r.destination = static_cast<int>(rng.below(n - 1));
    if (r.destination >= r.origin) ++r.destination;
    r.t_request = t;
    out.push_back(r);
  }
  return out;
}

// ------------------------------------------------------------------- scoring

std::string_view to_string(ScoreMode m) {
  switch (m) {
    case ScoreMode::service_quality: return "service_quality";
    case ScoreMode::efficiency: return "efficiency";
    case ScoreMode::fleet_size: return "fleet_size";
  }
  return "service_quality";
}

ScoreMode score_mode_from_string(std::string_view name) {
  if (name == "service_quality") return ScoreMode::service_quality;
  if (name == "efficiency") return ScoreMode::efficiency;
  if (name == "fleet_size") return ScoreMode::fleet_size;
  throw ParseError("unknown AMOD mode '" + std::string(name) + "'");
}

AmodScore score_amod(const FleetMetrics& m, ScoreMode mode, int fleet_size, const ScoreRefs& refs) {
  if (!(refs.wait_ref > 0.0) || !(refs.distance_ref > 0.0)) throw ValidationError("reference scales must be positive");
  if (!(refs.wait_sla >= 0.0)) throw ValidationError("wait SLA must be >= 0");
  const double w = m.mean_wait / refs.wait_ref;
  const double d = m.empty_distance / refs.distance_ref;
  switch (mode) {
    case ScoreMode::service_quality: return {mode, 0.9 * w + 0.1 * d, true};
    case ScoreMode::efficiency: return {mode, 0.1 * w + 0.9 * d, true};
    case ScoreMode::fleet_size:
      return {mode, static_cast<double>(fleet_size), m.p95_wait <= refs.wait_sla && m.unserved == 0};
  }
  return {};
}

bool better(const AmodScore& a, const AmodScore& b) {
  if (a.mode != b.mode) throw ValidationError("cannot compare scores of different modes");
  if (a.pass != b.pass) return a.pass;
  return a.value < b.value;
}

// ------------------------------------------------------------------ scenario

Dispatcher make_dispatcher(std::string_view name) {
  if (name == "matching") return matching_dispatcher;
  if (name == "greedy") return greedy_dispatcher;
  if (name == "hold") return hold_dispatcher;
  throw ParseError("unknown dispatcher '" + std::string(name) + "'");
}

namespace {

const Json& field(const Json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("missing field '") + key + "'");
  return *it;
}

double number(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_number()) throw ParseError(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

std::int64_t integer(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_number_integer()) throw ParseError(std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

int node_id(const Json& obj, const char* key) {
  const std::int64_t v = integer(obj, key);
  if (v < 0 || v > std::numeric_limits<int>::max()) throw ValidationError(std::string("bad node in '") + key + "'");
  return static_cast<int>(v);
}

void only_keys(const Json& obj, std::initializer_list<const char*> keys, const char* what) {
  if (!obj.is_object()) throw ParseError(std::string(what) + " must be an object");
  for (const auto& [k, _] : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* x) { return k == x; })) {
      throw ParseError("unknown field '" + k + "' in " + what);
    }
  }
}

RoadGraph parse_graph(const Json& j) {
  if (j.is_object() && j.contains("grid")) {
    only_keys(j, {"grid"}, "graph");
    const Json& g = j["grid"];
    only_keys(g, {"rows", "cols", "spacing", "speed"}, "grid");
    return grid_graph(static_cast<int>(integer(g, "rows")), static_cast<int>(integer(g, "cols")),
                      g.contains("spacing") ? number(g, "spacing") : 200.0,
                      g.contains("speed") ? number(g, "speed") : 10.0);
  }
  only_keys(j, {"nodes", "edges"}, "graph");
  const Json& nodes = field(j, "nodes");
  const Json& edges = field(j, "edges");
  if (!nodes.is_array() || !edges.is_array()) throw ParseError("graph nodes and edges must be arrays");
  RoadGraph g;
  for (const Json& n : nodes) {
    only_keys(n, {"id", "x", "y"}, "node");
    if (n.contains("id") && integer(n, "id") != static_cast<std::int64_t>(g.nodes.size())) {
      throw ValidationError("node ids must count up from 0");
    }
    g.nodes.push_back({number(n, "x"), number(n, "y")});
  }
  for (const Json& e : edges) {
    only_keys(e, {"from", "to", "travel_time", "length"}, "edge");
    g.edges.push_back({node_id(e, "from"), node_id(e, "to"), number(e, "travel_time"), number(e, "length")});
  }
  return g;
}

} // namespace

Scenario parse_scenario(const Json& doc) {
  only_keys(doc,
            {"graph", "requests", "poisson", "fleet_size", "horizon_s", "epoch_s", "start_nodes", "mode", "dispatcher",
             "refs"},
            "scenario");
  Scenario s;
  s.graph = parse_graph(field(doc, "graph"));
  validate(s.graph);

  const bool listed = doc.contains("requests");
  if (listed == doc.contains("poisson")) throw ParseError("scenario needs exactly one of 'requests' or 'poisson'");
  if (listed) {
    const Json& list = doc["requests"];
    if (!list.is_array()) throw ParseError("requests must be an array");
    for (const Json& r : list) {
      only_keys(r, {"id", "origin", "destination", "t_request"}, "request");
      s.requests.push_back({integer(r, "id"), node_id(r, "origin"), node_id(r, "destination"), number(r, "t_request"), {}, {}});
    }
    std::stable_sort(s.requests.begin(), s.requests.end(),
                     [](const Request& a, const Request& b) { return a.t_request < b.t_request; });
  } else {
    const Json& p = doc["poisson"];
    only_keys(p, {"rate_per_s", "horizon_s", "seed"}, "poisson");
    s.requests = poisson_requests(s.graph, number(p, "rate_per_s"), number(p, "horizon_s"),
                                  static_cast<std::uint64_t>(integer(p, "seed")));
  }

  const std::int64_t fleet = integer(doc, "fleet_size");
  if (fleet < 0 || fleet > 100000) throw ValidationError("fleet_size out of range");
  s.fleet.fleet_size = static_cast<int>(fleet);
  if (doc.contains("horizon_s")) s.fleet.horizon = number(doc, "horizon_s");
  if (doc.contains("epoch_s")) s.fleet.epoch = number(doc, "epoch_s");
  if (doc.contains("start_nodes")) {
    for (const Json& n : doc["start_nodes"]) {
      if (!n.is_number_integer()) throw ParseError("start_nodes must hold integers");
      s.fleet.start_nodes.push_back(n.get<int>());
    }
  }
  if (doc.contains("mode")) {
    if (!doc["mode"].is_string()) throw ParseError("mode must be a string");
    s.mode = score_mode_from_string(doc["mode"].get<std::string>());
  }
  if (doc.contains("dispatcher")) {
    if (!doc["dispatcher"].is_string()) throw ParseError("dispatcher must be a string");
    s.dispatcher = doc["dispatcher"].get<std::string>();
    make_dispatcher(s.dispatcher);
  }
  if (doc.contains("refs")) {
    const Json& r = doc["refs"];
    only_keys(r, {"wait_ref_s", "distance_ref_m", "wait_sla_s"}, "refs");
    if (r.contains("wait_ref_s")) s.refs.wait_ref = number(r, "wait_ref_s");
    if (r.contains("distance_ref_m")) s.refs.distance_ref = number(r, "distance_ref_m");
    if (r.contains("wait_sla_s")) s.refs.wait_sla = number(r, "wait_sla_s");
  }
  return s;
}

Scenario parse_scenario(std::string_view document) {
  try {
    return parse_scenario(Json::parse(document));
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("scenario is not valid JSON: ") + e.what());
  }
}

Json to_json(const FleetMetrics& m) {
  return Json{{"mean_wait", m.mean_wait},
              {"p95_wait", m.p95_wait},
              {"empty_distance", m.empty_distance},
              {"total_distance", m.total_distance},
              {"served", m.served},
              {"unserved", m.unserved},
              {"completed", m.completed},
              {"warnings", m.warnings}};
}

Json to_json(const AmodScore& s) {
  Json j{{"mode", to_string(s.mode)}, {"value", s.value}};
  if (s.mode == ScoreMode::fleet_size) j["pass"] = s.pass;
  return j;
}

ScenarioResult run_scenario(const Scenario& s) {
  const FleetResult r = simulate_fleet(s.graph, s.requests, s.fleet, make_dispatcher(s.dispatcher));
  return {r.metrics, score_amod(r.metrics, s.mode, s.fleet.fleet_size, s.refs)};
}

Json to_json(const ScenarioResult& r) { return Json{{"metrics", to_json(r.metrics)}, {"score", to_json(r.score)}}; }

} // namespace aido::amod

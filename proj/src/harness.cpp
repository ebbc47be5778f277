#include "aido/harness.hpp"

#include "aido/error.hpp"
#include "aido/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

namespace aido::harness {

using protocol::ErrorCode;
using protocol::Message;
using protocol::ProtocolError;
using protocol::TransportError;

std::string_view to_string(Challenge c) {
  switch (c) {
    case Challenge::LF: return "LF";
    case Challenge::LFV: return "LFV";
    case Challenge::AMOD: return "AMOD";
  }
  return "LF";
}

Challenge challenge_from_string(std::string_view name) {
  if (name == "LF") return Challenge::LF;
  if (name == "LFV") return Challenge::LFV;
  if (name == "AMOD") return Challenge::AMOD;
  throw ParseError("unknown challenge '" + std::string(name) + "'");
}

namespace {

template <class T> const T* as(const Message& m) { return std::get_if<T>(&m); }

Message must_receive(Channel& ch, std::optional<std::chrono::milliseconds> timeout = std::nullopt) {
  auto m = ch.receive(timeout);
  if (!m) throw TransportError("timed out waiting for the peer");
  if (const auto* e = as<protocol::ErrorMsg>(*m)) {
    throw ProtocolError(ErrorCode::agent_error, "peer reported " + std::string(protocol::to_string(e->code)) + ": " + e->detail);
  }
  return *m;
}

void try_send_error(Channel& ch, const ProtocolError& e) {
  try {
    ch.send(protocol::ErrorMsg{e.code(), e.what()});
  } catch (const Error&) {
  }
}

constexpr auto kHandshakeTimeout = std::chrono::seconds(30);

} // namespace

protocol::Hello accept_agent(Channel& ch, Challenge challenge, double dt, const TimingMode& timing) {
  protocol::validate(timing);
  Message m;
  try {
    m = must_receive(ch, kHandshakeTimeout);
  } catch (const ProtocolError& e) {
    try_send_error(ch, e);
    throw;
  }
  const auto* hello = as<protocol::Hello>(m);
  if (!hello) {
    const ProtocolError e(ErrorCode::bad_state, "expected hello, got " + std::string(protocol::type_name(m)));
    try_send_error(ch, e);
    throw e;
  }
  ch.send(protocol::HelloAck{std::string(to_string(challenge)), dt, timing});
  return *hello;
}

sim::EpisodeConfig negotiate(sim::EpisodeConfig config, const protocol::Hello& hello) {
  config.ground_truth = hello.observations.ground_truth;
  config.semantic = hello.observations.semantic;
  if (hello.raster) config.raster = *hello.raster;
  return config;
}

EpisodeResult run_episode(Channel& ch, const sim::EpisodeConfig& config, const TimingMode& timing) {
  protocol::validate(timing);
  sim::Simulation sim(config);
  EpisodeResult out;
  try {
    ch.send(protocol::EpisodeStart{world::serialize_map(config.map), config.seed,
                                   {config.ground_truth, config.semantic}, config.dt, config.max_duration,
                                   config.raster, config.kinematics});
    sim::Observation obs = sim.observe();
    dynamics::Command last{};
    const bool fixed = timing.kind == TimingMode::Kind::fixed_step;
    while (!sim.terminated()) {
      ch.send(protocol::ObservationMsg{obs});
      dynamics::Command cmd = last;
      const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timing.deadline_ms);
      for (;;) {
        std::optional<std::chrono::milliseconds> wait;
        if (fixed) {
          wait = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
          if (*wait < std::chrono::milliseconds(0)) wait = std::chrono::milliseconds(0);
        }
        const auto m = ch.receive(wait);
        if (!m) break;  // missed the deadline
        if (const auto* a = as<protocol::Action>(*m)) {
          if (a->t != obs.t) continue;  // reply to an older observation
          cmd = {a->v, a->omega};
          break;
        }
        if (const auto* e = as<protocol::ErrorMsg>(*m)) {
          throw ProtocolError(ErrorCode::agent_error, "agent reported " + std::string(protocol::to_string(e->code)) + ": " + e->detail);
        }
        throw ProtocolError(ErrorCode::bad_state, "expected action, got " + std::string(protocol::type_name(*m)));
      }
      obs = sim.step(cmd).observation;
      last = cmd;
    }
  } catch (const ProtocolError& e) {
    if (e.code() != ErrorCode::agent_error) try_send_error(ch, e);
    out.agent_failed = true;
    out.failure = e.what();
  } catch (const TransportError& e) {
    out.agent_failed = true;
    out.failure = e.what();
  }
  out.trajectory = sim.trajectory();
  out.events = out.agent_failed ? std::vector<Event>{Event::disconnect} : sim.events();
  out.metrics = metrics::evaluate_run(out.trajectory, out.events, sim.lane(), config.kinematics.v_max, config.max_duration);
  if (!out.agent_failed) {
    try {
      ch.send(protocol::EpisodeEnd{out.metrics});
    } catch (const TransportError&) {
      // the next episode will notice
    }
  }
  return out;
}

// ---------------------------------------------------------------------- plans

void validate(const EvaluationPlan& plan) {
  if (plan.challenge == Challenge::AMOD) throw ValidationError("AMOD plans are scored by the fleet simulator, not the driving harness");
  if (plan.runs_per_map < 1) throw ValidationError("runs_per_map must be >= 1");
  const int hidden = plan.hidden ? plan.hidden->count : 0;
  if (hidden < 0) throw ValidationError("hidden map count must be >= 0");
  if (plan.maps.empty() && hidden == 0) throw ValidationError("plan needs at least one map");
  if (!(plan.max_duration > 0.0) || !(plan.dt > 0.0)) throw ValidationError("max_duration and dt must be positive");
  if (plan.max_laps < 0) throw ValidationError("max_laps must be >= 0");
  protocol::validate(plan.timing);
  for (const PlanMap& m : plan.maps) world::load_map(m.document);
}

namespace {

const Json& need(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("plan is missing '") + key + "'");
  return *it;
}

double num(const Json& j, const char* key) {
  const Json& v = need(j, key);
  if (!v.is_number()) throw ParseError(std::string("plan field '") + key + "' must be a number");
  return v.get<double>();
}

std::int64_t whole(const Json& j, const char* key) {
  const Json& v = need(j, key);
  if (!v.is_number_integer()) throw ParseError(std::string("plan field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

void allow(const Json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) throw ParseError(std::string(what) + " must be an object");
  for (const auto& [k, _] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* x) { return k == x; })) {
      throw ParseError("unknown field '" + k + "' in " + what);
    }
  }
}

Json obstacle_json(const sim::Obstacle& o) {
  return Json{{"kind", sim::to_string(o.kind)}, {"x", o.center.x}, {"y", o.center.y}, {"radius", o.radius}};
}

sim::Obstacle obstacle_from(const Json& j) {
  allow(j, {"kind", "x", "y", "radius"}, "obstacle");
  sim::Obstacle o;
  if (j.contains("kind")) {
    if (!j["kind"].is_string()) throw ParseError("obstacle kind must be a string");
    o.kind = sim::obstacle_kind_from_string(j["kind"].get<std::string>());
  }
  o.center = {num(j, "x"), num(j, "y")};
  if (j.contains("radius")) o.radius = num(j, "radius");
  if (!(o.radius > 0.0)) throw ValidationError("obstacle radius must be positive");
  return o;
}

Json timing_json(const TimingMode& t) {
  if (t.kind == TimingMode::Kind::blocking) return Json{{"kind", "blocking"}};
  return Json{{"kind", "fixed_step"}, {"deadline_ms", t.deadline_ms}};
}

} // namespace

EvaluationPlan parse_plan(const Json& doc) {
  allow(doc, {"challenge", "maps", "hidden", "runs_per_map", "max_duration_s", "dt", "max_laps", "randomization", "timing"},
        "plan");
  EvaluationPlan p;
  if (doc.contains("challenge")) {
    if (!doc["challenge"].is_string()) throw ParseError("challenge must be a string");
    p.challenge = challenge_from_string(doc["challenge"].get<std::string>());
  }
  if (doc.contains("maps")) {
    if (!doc["maps"].is_array()) throw ParseError("maps must be an array");
    for (const Json& m : doc["maps"]) {
      allow(m, {"map", "obstacles"}, "plan map");
      const Json& map = need(m, "map");
      PlanMap pm;
      pm.document = map.is_string() ? map.get<std::string>() : map.dump();
      // normalized so formatting does not change the plan hash
      pm.document = world::serialize_map(world::load_map(pm.document));
      if (m.contains("obstacles")) {
        if (!m["obstacles"].is_array()) throw ParseError("obstacles must be an array");
        for (const Json& o : m["obstacles"]) pm.obstacles.push_back(obstacle_from(o));
      }
      p.maps.push_back(std::move(pm));
    }
  }
  if (doc.contains("hidden")) {
    const Json& h = doc["hidden"];
    allow(h, {"seed", "count", "rows", "cols"}, "hidden");
    HiddenMaps hm;
    const Json& seed = need(h, "seed");
    if (!seed.is_number_unsigned()) throw ParseError("hidden seed must be a non-negative integer");
    hm.seed = seed.get<std::uint64_t>();
    hm.count = static_cast<int>(whole(h, "count"));
    if (h.contains("rows")) hm.rows = static_cast<int>(whole(h, "rows"));
    if (h.contains("cols")) hm.cols = static_cast<int>(whole(h, "cols"));
    p.hidden = hm;
  }
  if (doc.contains("runs_per_map")) p.runs_per_map = static_cast<int>(whole(doc, "runs_per_map"));
  if (doc.contains("max_duration_s")) p.max_duration = num(doc, "max_duration_s");
  if (doc.contains("dt")) p.dt = num(doc, "dt");
  if (doc.contains("max_laps")) p.max_laps = static_cast<int>(whole(doc, "max_laps"));
  if (doc.contains("randomization")) p.randomization = sim::parse_randomization(doc["randomization"]);
  if (doc.contains("timing")) {
    const Json& t = doc["timing"];
    allow(t, {"kind", "deadline_ms"}, "timing");
    const Json& kind = need(t, "kind");
    if (kind == "blocking") p.timing = TimingMode::blocking();
    else if (kind == "fixed_step") p.timing = TimingMode::fixed_step(static_cast<int>(whole(t, "deadline_ms")));
    else throw ParseError("unknown timing kind");
  }
  validate(p);
  return p;
}

EvaluationPlan parse_plan(std::string_view document) {
  try {
    return parse_plan(Json::parse(document));
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("plan is not valid JSON: ") + e.what());
  }
}

Json to_json(const EvaluationPlan& plan) {
  Json maps = Json::array();
  for (const PlanMap& m : plan.maps) {
    Json obstacles = Json::array();
    for (const auto& o : m.obstacles) obstacles.push_back(obstacle_json(o));
    maps.push_back({{"map", Json::parse(m.document)}, {"obstacles", obstacles}});
  }
  Json j{{"challenge", to_string(plan.challenge)}, {"maps", maps}};
  if (plan.hidden) {
    j["hidden"] = {{"seed", plan.hidden->seed}, {"count", plan.hidden->count}, {"rows", plan.hidden->rows}, {"cols", plan.hidden->cols}};
  }
  j["runs_per_map"] = plan.runs_per_map;
  j["max_duration_s"] = plan.max_duration;
  j["dt"] = plan.dt;
  j["max_laps"] = plan.max_laps;
  j["randomization"] = sim::to_json(plan.randomization);
  j["timing"] = timing_json(plan.timing);
  return j;
}

std::uint64_t plan_hash(const EvaluationPlan& plan) { return fnv1a(to_json(plan).dump()); }

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<PlannedRun> expand_plan(const EvaluationPlan& plan) {
  validate(plan);
  const std::uint64_t h = plan_hash(plan);
  std::vector<world::TileMap> maps;
  std::vector<const std::vector<sim::Obstacle>*> obstacles;
  for (const PlanMap& m : plan.maps) {
    maps.push_back(world::load_map(m.document));
    obstacles.push_back(&m.obstacles);
  }
  const int hidden = plan.hidden ? plan.hidden->count : 0;
  for (int i = 0; i < hidden; ++i) {
    maps.push_back(world::generate_random_map(fnv1a_u64(static_cast<std::uint64_t>(i), plan.hidden->seed),
                                              plan.hidden->rows, plan.hidden->cols));
    obstacles.push_back(nullptr);
  }
  std::vector<PlannedRun> out;
  for (std::size_t k = 0; k < maps.size(); ++k) {
    for (int r = 0; r < plan.runs_per_map; ++r) {
      PlannedRun run;
      run.map_index = static_cast<int>(k);
      run.hidden = k >= plan.maps.size();
      run.run = r;
      sim::EpisodeConfig& c = run.config;
      c.map = maps[k];
      if (obstacles[k]) c.obstacles = *obstacles[k];
      c.max_duration = plan.max_duration;
      c.dt = plan.dt;
      c.max_laps = plan.max_laps;
      c.randomization = plan.randomization;
      c.seed = fnv1a_u64(static_cast<std::uint64_t>(r), fnv1a_u64(k, h));
      out.push_back(std::move(run));
    }
  }
  return out;
}

// ----------------------------------------------------------------- evaluation

namespace {

std::string map_label(const PlannedRun& r, std::size_t public_count) {
  if (!r.hidden) return "public:" + std::to_string(r.map_index);
  return "hidden:" + std::to_string(static_cast<std::size_t>(r.map_index) - public_count);
}

metrics::RunMetrics failed_run(const sim::EpisodeConfig& c) {
  metrics::RunMetrics m;
  m.lateral_median = world::lane_centerline(c.map).lane_half_width;
  m.terminal_event = Event::disconnect;
  return m;
}

void finish(EvaluationReport& report) {
  std::vector<metrics::RunMetrics> runs;
  for (const RunRecord& r : report.runs) runs.push_back(r.metrics);
  report.score = metrics::aggregate_runs(runs);
}

} // namespace

EvaluationReport run_evaluation(baselines::Agent& agent, const EvaluationPlan& plan) {
  EvaluationReport report;
  report.agent_name = agent.name();
  report.plan_hash = hash_hex(plan_hash(plan));
  for (const PlannedRun& run : expand_plan(plan)) {
    const auto out = baselines::run_in_process(agent, run.config);
    report.runs.push_back({map_label(run, plan.maps.size()), run.run, run.config.seed, out.metrics, false});
  }
  finish(report);
  return report;
}

EvaluationReport run_evaluation(Channel& ch, const EvaluationPlan& plan) {
  const auto runs = expand_plan(plan);
  EvaluationReport report;
  report.plan_hash = hash_hex(plan_hash(plan));
  const protocol::Hello hello = accept_agent(ch, plan.challenge, plan.dt, plan.timing);
  report.agent_name = hello.agent_name;
  bool broken = false;
  for (const PlannedRun& run : runs) {
    RunRecord rec{map_label(run, plan.maps.size()), run.run, run.config.seed, {}, false};
    if (broken) {
      rec.metrics = failed_run(run.config);
      rec.agent_failed = true;
    } else {
      const EpisodeResult res = run_episode(ch, negotiate(run.config, hello), plan.timing);
      rec.agent_failed = res.agent_failed;
      rec.metrics = res.agent_failed ? failed_run(run.config) : res.metrics;
      broken = res.agent_failed;
    }
    report.runs.push_back(std::move(rec));
  }
  finish(report);
  if (!broken) {
    try {
      ch.send(protocol::EvaluationResult{report.score});
    } catch (const TransportError&) {
    }
  }
  return report;
}

Json to_json(const EvaluationReport& r) {
  Json runs = Json::array();
  for (const RunRecord& rec : r.runs) {
    Json j{{"map", rec.map_label}, {"run", rec.run}, {"seed", rec.seed}, {"metrics", metrics::to_json(rec.metrics)}};
    if (rec.agent_failed) j["agent_failed"] = true;
    runs.push_back(std::move(j));
  }
  return Json{{"agent", r.agent_name},
              {"plan_hash", r.plan_hash},
              {"score", metrics::score_record(r.agent_name, r.score)},
              {"runs", runs}};
}

// ---------------------------------------------------------------- agent side

protocol::Hello hello_for(const baselines::Agent& agent) {
  const baselines::ObservationRequest req = agent.request();
  protocol::Hello h;
  h.agent_name = agent.name();
  h.observations = {req.ground_truth, req.semantic};
  h.raster = req.raster;
  return h;
}

AgentSession serve_agent(Channel& ch, baselines::Agent& agent) {
  AgentSession session;
  ch.send(hello_for(agent));
  const Message ack = must_receive(ch, kHandshakeTimeout);
  if (!as<protocol::HelloAck>(ack)) {
    throw ProtocolError(ErrorCode::bad_state, "expected hello_ack, got " + std::string(protocol::type_name(ack)));
  }
  bool in_episode = false;
  for (;;) {
    Message m;
    try {
      m = must_receive(ch);
    } catch (const TransportError&) {
      if (in_episode) throw;
      return session;  // harness finished without a final result
    }
    if (const auto* start = as<protocol::EpisodeStart>(m)) {
      baselines::EpisodeInfo info;
      info.map = world::load_map(start->map_document);
      info.dt = start->dt;
      info.limits = start->limits;
      info.raster = start->raster;
      agent.reset(info);
      in_episode = true;
    } else if (const auto* obs = as<protocol::ObservationMsg>(m)) {
      if (!in_episode) throw ProtocolError(ErrorCode::bad_state, "observation outside an episode");
      const dynamics::Command c = agent.act(obs->observation);
      ch.send(protocol::Action{obs->observation.t, c.v, c.omega});
    } else if (const auto* end = as<protocol::EpisodeEnd>(m)) {
      session.episodes.push_back(end->run_metrics);
      in_episode = false;
    } else if (const auto* result = as<protocol::EvaluationResult>(m)) {
      session.score = result->submission_score;
      return session;
    } else {
      throw ProtocolError(ErrorCode::bad_state, "unexpected " + std::string(protocol::type_name(m)));
    }
  }
}

} // namespace aido::harness

// engine: command-line front end for the simulator, harness and fleet tools.

#include "aido/amod.hpp"
#include "aido/baselines.hpp"
#include "aido/error.hpp"
#include "aido/harness.hpp"
#include "aido/leaderboard.hpp"
#include "aido/svg.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

using namespace aido;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error("cannot write '" + path + "'");
}

std::unique_ptr<baselines::Agent> agent_from_spec(const std::string& spec) {
  constexpr std::string_view prefix = "builtin:";
  if (spec.rfind(prefix, 0) != 0) throw ValidationError("agent must be builtin:<name>, got '" + spec + "'");
  return baselines::make_builtin(spec.substr(prefix.size()));
}

std::string env_name(const std::string& option) {
  std::string s = "ENGINE_";
  for (char c : option) s += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

// Long option name without the dashes.
std::string long_name(const CLI::Option* o) {
  const auto& names = o->get_lnames();
  return names.empty() ? std::string() : names.front();
}

// Config file values become option defaults, so the environment (which CLI11
// consults only for options missing from the command line) and then flags
// override them. Keys may sit at top level or under the subcommand's name.
void apply_config(CLI::App& app, const Json& doc, const std::string& path) {
  for (CLI::Option* o : app.get_options()) {
    const std::string name = long_name(o);
    if (name.empty() || name == "help" || name == "config") continue;
    const Json* value = nullptr;
    if (doc.contains(name)) value = &doc[name];
    if (!path.empty()) {
      const Json* section = &doc;
      std::istringstream parts(path);
      std::string part;
      while (section && std::getline(parts, part, ' ')) {
        section = section->contains(part) && (*section)[part].is_object() ? &(*section)[part] : nullptr;
      }
      if (section && section->contains(name)) value = &(*section)[name];
    }
    if (!value) continue;
    if (value->is_string()) o->default_val(value->get<std::string>());
    else if (value->is_boolean()) o->default_val(value->get<bool>() ? "true" : "false");
    else o->default_val(value->dump());
  }
  for (CLI::App* sub : app.get_subcommands({})) {
    apply_config(*sub, doc, path.empty() ? sub->get_name() : path + " " + sub->get_name());
  }
}

void add_env(CLI::App& app) {
  for (CLI::Option* o : app.get_options()) {
    const std::string name = long_name(o);
    if (name.empty() || name == "help") continue;
    o->envname(env_name(name));
  }
  for (CLI::App* sub : app.get_subcommands({})) add_env(*sub);
}

std::string config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  if (const char* env = std::getenv("ENGINE_CONFIG")) return env;
  return {};
}

void print(const Json& j) { std::cout << j.dump(2) << "\n"; }

harness::LeaderboardEntry leaderboard_entry(const harness::EvaluationPlan& plan, const harness::EvaluationReport& r,
                                            const std::string& id) {
  return {id.empty() ? r.agent_name : id, harness::utc_timestamp(), plan.challenge, r.score, r.plan_hash};
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lane-following competition engine"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_file;
  app.add_option("--config", config_file, "JSON config file; keys are option names, optionally nested by subcommand");

  // simulate
  std::string sim_map, sim_agent = "builtin:pure_pursuit", sim_svg, sim_randomization;
  std::uint64_t sim_seed = 0;
  double sim_duration = 60.0;
  int sim_laps = 0;
  auto* simulate = app.add_subcommand("simulate", "Run one episode with a builtin agent");
  simulate->add_option("--map", sim_map, "Map document (default: canonical 3x3 ring)");
  simulate->add_option("--agent", sim_agent, "builtin:<name>");
  simulate->add_option("--seed", sim_seed, "Episode seed");
  simulate->add_option("--duration", sim_duration, "Episode length in seconds")->check(CLI::PositiveNumber);
  simulate->add_option("--max-laps", sim_laps, "End after this many laps (0: no limit)")->check(CLI::NonNegativeNumber);
  simulate->add_option("--randomization", sim_randomization, "Randomization document");
  simulate->add_option("--svg", sim_svg, "Write a trajectory plot here");

  // evaluate
  std::string ev_plan, ev_connect, ev_agent, ev_board, ev_id;
  auto* evaluate = app.add_subcommand("evaluate", "Score an agent over an evaluation plan");
  evaluate->add_option("--plan", ev_plan, "Evaluation plan document")->required();
  auto* ev_connect_opt = evaluate->add_option("--connect", ev_connect, "Agent endpoint HOST:PORT");
  auto* ev_agent_opt = evaluate->add_option("--agent", ev_agent, "builtin:<name>");
  ev_connect_opt->excludes(ev_agent_opt);
  evaluate->add_option("--leaderboard", ev_board, "Append the score to this JSON-lines store");
  evaluate->add_option("--id", ev_id, "Submission id (default: agent name)");

  // serve
  int sv_port = 0, sv_max = 0;
  std::string sv_plan, sv_board;
  auto* serve = app.add_subcommand("serve", "Accept agents over TCP and evaluate each one");
  serve->add_option("--port", sv_port, "Listen port (0: pick one)")->check(CLI::Range(0, 65535));
  serve->add_option("--plan", sv_plan, "Evaluation plan document")->required();
  serve->add_option("--leaderboard", sv_board, "Append scores to this JSON-lines store");
  serve->add_option("--max-evaluations", sv_max, "Exit after this many agents (0: run forever)")
      ->check(CLI::NonNegativeNumber);

  // agent
  std::string ag_connect, ag_agent = "builtin:pure_pursuit";
  auto* agent_cmd = app.add_subcommand("agent", "Connect a builtin agent to a serving harness");
  agent_cmd->add_option("--connect", ag_connect, "Harness endpoint HOST:PORT")->required();
  agent_cmd->add_option("--agent", ag_agent, "builtin:<name>");

  // map gen
  std::uint64_t mg_seed = 0;
  int mg_rows = 5, mg_cols = 5;
  auto* map_cmd = app.add_subcommand("map", "Map utilities");
  map_cmd->require_subcommand(1);
  auto* map_gen = map_cmd->add_subcommand("gen", "Print a random closed-loop map document");
  map_gen->add_option("--seed", mg_seed, "Generator seed");
  map_gen->add_option("--rows", mg_rows, "Grid rows")->check(CLI::Range(3, 64));
  map_gen->add_option("--cols", mg_cols, "Grid columns")->check(CLI::Range(3, 64));

  // amod
  std::string am_scenario, am_mode, am_dispatcher;
  auto* amod_cmd = app.add_subcommand("amod", "Run a fleet-dispatch scenario");
  amod_cmd->add_option("--scenario", am_scenario, "Scenario document")->required();
  amod_cmd->add_option("--mode", am_mode, "service_quality | efficiency | fleet_size");
  amod_cmd->add_option("--dispatcher", am_dispatcher, "greedy | matching | hold");

  // leaderboard
  std::string lb_challenge = "LF", lb_path = "leaderboard.jsonl";
  auto* board_cmd = app.add_subcommand("leaderboard", "Print the ranked leaderboard");
  board_cmd->add_option("--challenge", lb_challenge, "LF | LFV");
  board_cmd->add_option("--leaderboard", lb_path, "JSON-lines store");

  add_env(app);
  try {
    const std::string cfg = config_path(argc, argv);
    if (!cfg.empty()) {
      const Json doc = Json::parse(read_file(cfg));
      if (!doc.is_object()) throw ParseError("config file must hold a JSON object");
      apply_config(app, doc, "");
    }
  } catch (const std::exception& e) {
    std::cerr << "engine: config: " << e.what() << "\n";
    return 2;
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      sim::EpisodeConfig cfg;
      cfg.map = world::load_map(sim_map.empty() ? world::canonical_ring_document() : read_file(sim_map));
      cfg.seed = sim_seed;
      cfg.max_duration = sim_duration;
      cfg.max_laps = sim_laps;
      if (!sim_randomization.empty()) cfg.randomization = sim::parse_randomization(read_file(sim_randomization));
      auto agent = agent_from_spec(sim_agent);
      const auto out = baselines::run_in_process(*agent, cfg);
      Json j = metrics::to_json(out.metrics);
      j["agent"] = agent->name();
      j["steps"] = out.trajectory.samples.size();
      print(j);
      if (!sim_svg.empty()) write_file(sim_svg, harness::trajectory_svg(cfg.map, out.trajectory, cfg.obstacles));
      return 0;
    }

    if (evaluate->parsed()) {
      const harness::EvaluationPlan plan = harness::parse_plan(read_file(ev_plan));
      harness::EvaluationReport report;
      if (!ev_connect.empty()) {
        const auto [host, port] = protocol::parse_endpoint(ev_connect);
        protocol::Channel ch = protocol::connect_tcp(host, port);
        report = harness::run_evaluation(ch, plan);
      } else if (!ev_agent.empty()) {
        auto agent = agent_from_spec(ev_agent);
        report = harness::run_evaluation(*agent, plan);
      } else {
        throw ValidationError("evaluate needs --connect or --agent");
      }
      if (!ev_board.empty()) harness::append_entry(ev_board, leaderboard_entry(plan, report, ev_id));
      print(harness::to_json(report));
      return 0;
    }

    if (serve->parsed()) {
      const harness::EvaluationPlan plan = harness::parse_plan(read_file(sv_plan));
      protocol::Listener listener(sv_port);
      std::cerr << "listening on 127.0.0.1:" << listener.port() << std::endl;
      std::mutex out_mutex;
      std::vector<std::thread> workers;
      for (int served = 0; sv_max == 0 || served < sv_max; ++served) {
        protocol::Channel ch = listener.accept();
        workers.emplace_back([&, ch = std::make_shared<protocol::Channel>(std::move(ch))] {
          try {
            const auto report = harness::run_evaluation(*ch, plan);
            if (!sv_board.empty()) harness::append_entry(sv_board, leaderboard_entry(plan, report, ""));
            std::lock_guard lock(out_mutex);
            print(harness::to_json(report));
          } catch (const std::exception& e) {
            std::lock_guard lock(out_mutex);
            std::cerr << "engine: evaluation failed: " << e.what() << "\n";
          }
        });
      }
      for (auto& w : workers) w.join();
      return 0;
    }

    if (agent_cmd->parsed()) {
      auto agent = agent_from_spec(ag_agent);
      const auto [host, port] = protocol::parse_endpoint(ag_connect);
      protocol::Channel ch = protocol::connect_tcp(host, port);
      const harness::AgentSession session = harness::serve_agent(ch, *agent);
      Json episodes = Json::array();
      for (const auto& m : session.episodes) episodes.push_back(metrics::to_json(m));
      Json j{{"agent", agent->name()}, {"episodes", episodes}};
      if (session.score) j["score"] = metrics::score_record(agent->name(), *session.score);
      print(j);
      return 0;
    }

    if (map_gen->parsed()) {
      std::cout << world::serialize_map(world::generate_random_map(mg_seed, mg_rows, mg_cols)) << "\n";
      return 0;
    }

    if (amod_cmd->parsed()) {
      amod::Scenario s = amod::parse_scenario(read_file(am_scenario));
      if (!am_mode.empty()) s.mode = amod::score_mode_from_string(am_mode);
      if (!am_dispatcher.empty()) {
        amod::make_dispatcher(am_dispatcher);  // validates the name
        s.dispatcher = am_dispatcher;
      }
      print(amod::to_json(amod::run_scenario(s)));
      return 0;
    }

    if (board_cmd->parsed()) {
      const auto board = harness::read_leaderboard(lb_path, harness::challenge_from_string(lb_challenge));
      if (board.skipped_lines > 0) std::cerr << "engine: skipped " << board.skipped_lines << " unreadable line(s)\n";
      Json rows = Json::array();
      for (const auto& e : board.entries) rows.push_back(harness::to_json(e));
      print(rows);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "engine: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

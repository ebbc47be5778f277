#pragma once

#include "aido/baselines.hpp"
#include "aido/metrics.hpp"
#include "aido/protocol.hpp"
#include "aido/sim.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aido::harness {

using protocol::Channel;
using protocol::TimingMode;

enum class Challenge { LF, LFV, AMOD };

std::string_view to_string(Challenge c);
Challenge challenge_from_string(std::string_view name);

struct EpisodeResult {
  metrics::RunMetrics metrics;
  Trajectory trajectory;
  std::vector<Event> events;
  bool agent_failed = false;  // disconnect or protocol violation
  std::string failure;
};

/// Server side of the handshake: reads hello, answers hello_ack. A version
/// mismatch is answered with an error message and rethrown.
protocol::Hello accept_agent(Channel& ch, Challenge challenge, double dt, const TimingMode& timing);

/// The episode config an agent will be run with, given what it asked for.
sim::EpisodeConfig negotiate(sim::EpisodeConfig config, const protocol::Hello& hello);

/// Runs one episode against a connected agent. Blocking mode waits for
/// every action; fixed_step repeats the previous command (zero at first)
/// when no current action arrives in time. Replies answering an older
/// observation are dropped. A disconnect ends the episode with the progress
/// made so far.
EpisodeResult run_episode(Channel& ch, const sim::EpisodeConfig& config, const TimingMode& timing);

struct PlanMap {
  std::string document;  // map JSON
  std::vector<sim::Obstacle> obstacles;
};

struct HiddenMaps {
  std::uint64_t seed = 0;
  int count = 0;
  int rows = 5;
  int cols = 5;
};

struct EvaluationPlan {
  Challenge challenge = Challenge::LF;
  std::vector<PlanMap> maps;
  std::optional<HiddenMaps> hidden;
  int runs_per_map = 5;
  double max_duration = 60.0;
  double dt = dynamics::kDefaultDt;
  int max_laps = 0;
  sim::RandomizationConfig randomization;
  TimingMode timing;
};

/// Throws ValidationError unless there is at least one map and one run per
/// map, and the challenge is a driving one.
void validate(const EvaluationPlan& plan);

/// Throws ParseError for malformed documents.
EvaluationPlan parse_plan(const Json& doc);
EvaluationPlan parse_plan(std::string_view document);
inline EvaluationPlan parse_plan(const char* document) { return parse_plan(std::string_view(document)); }
inline EvaluationPlan parse_plan(const std::string& document) { return parse_plan(std::string_view(document)); }
Json to_json(const EvaluationPlan& plan);

/// FNV-1a of the canonical plan document.
std::uint64_t plan_hash(const EvaluationPlan& plan);
std::string hash_hex(std::uint64_t h);

struct PlannedRun {
  sim::EpisodeConfig config;
  int map_index = 0;  // public maps first, then hidden ones
  bool hidden = false;
  int run = 0;
};

/// Every (map, run) episode of the plan with its derived seed.
std::vector<PlannedRun> expand_plan(const EvaluationPlan& plan);

struct RunRecord {
  std::string map_label;  // "public:<i>" or "hidden:<i>"
  int run = 0;
  std::uint64_t seed = 0;
  metrics::RunMetrics metrics;
  bool agent_failed = false;
};

struct EvaluationReport {
  std::string agent_name;
  std::string plan_hash;
  std::vector<RunRecord> runs;
  metrics::SubmissionScore score;
};

/// Evaluates an in-process agent.
EvaluationReport run_evaluation(baselines::Agent& agent, const EvaluationPlan& plan);

/// Evaluates an agent on the other end of the channel: handshake, every
/// planned episode, then evaluation_result. Failed runs score zero.
EvaluationReport run_evaluation(Channel& ch, const EvaluationPlan& plan);

/// Holds run metrics and the score only; never map documents.
Json to_json(const EvaluationReport& r);

/// Agent side of the protocol: hello, then episodes until the harness sends
/// evaluation_result or closes the connection.
struct AgentSession {
  std::vector<metrics::RunMetrics> episodes;
  std::optional<metrics::SubmissionScore> score;
};

AgentSession serve_agent(Channel& ch, baselines::Agent& agent);

protocol::Hello hello_for(const baselines::Agent& agent);

} // namespace aido::harness

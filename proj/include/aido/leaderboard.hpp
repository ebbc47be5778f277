#pragma once

#include "aido/harness.hpp"
#include "aido/json_fwd.hpp"
#include "aido/metrics.hpp"

#include <string>
#include <vector>

namespace aido::harness {

struct LeaderboardEntry {
  std::string id;
  std::string timestamp;  // ISO 8601, UTC
  Challenge challenge = Challenge::LF;
  metrics::SubmissionScore score;
  std::string plan_hash;

  bool operator==(const LeaderboardEntry&) const = default;
};

Json to_json(const LeaderboardEntry& e);
LeaderboardEntry leaderboard_entry_from_json(const Json& j);

std::string utc_timestamp();

/// Appends one JSON line. Safe against concurrent writers in this process
/// and in others (flock). Throws ValidationError when (id, challenge) is
/// already on the board; the file is left untouched in that case.
void append_entry(const std::string& path, const LeaderboardEntry& e);

struct Leaderboard {
  std::vector<LeaderboardEntry> entries;  // ranked best first
  int skipped_lines = 0;                  // unparsable lines
};

/// Missing file reads as an empty board.
Leaderboard read_leaderboard(const std::string& path, Challenge challenge);

} // namespace aido::harness

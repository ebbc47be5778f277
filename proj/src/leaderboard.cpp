#include "aido/leaderboard.hpp"

#include "aido/error.hpp"

#include <cerrno>
#include <cstring>
#include <ctime>
#include <fcntl.h>
#include <fstream>
#include <mutex>
#include <sstream>
#include <sys/file.h>
#include <unistd.h>

namespace aido::harness {

Json to_json(const LeaderboardEntry& e) {
  Json j = metrics::score_record(e.id, e.score);
  j["timestamp"] = e.timestamp;
  j["challenge"] = to_string(e.challenge);
  j["plan_hash"] = e.plan_hash;
  return j;
}

LeaderboardEntry leaderboard_entry_from_json(const Json& j) {
  try {
    LeaderboardEntry e;
    e.id = j.at("id").get<std::string>();
    e.timestamp = j.at("timestamp").get<std::string>();
    e.challenge = challenge_from_string(j.at("challenge").get<std::string>());
    e.score = metrics::score_from_record(j);
    e.plan_hash = j.at("plan_hash").get<std::string>();
    return e;
  } catch (const Json::exception& ex) {
    throw ParseError(std::string("bad leaderboard entry: ") + ex.what());
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

std::mutex g_board_mutex;  // flock alone does not order threads sharing a process

struct FileLock {
  int fd;
  explicit FileLock(const std::string& path, int flags) : fd(::open(path.c_str(), flags | O_CLOEXEC, 0644)) {
    if (fd < 0) throw Error("cannot open leaderboard '" + path + "': " + std::strerror(errno));
    while (::flock(fd, LOCK_EX) != 0) {
      if (errno != EINTR) {
        ::close(fd);
        throw Error("cannot lock leaderboard: " + std::string(std::strerror(errno)));
      }
    }
  }
  ~FileLock() {
    ::flock(fd, LOCK_UN);
    ::close(fd);
  }
};

std::string slurp(int fd) {
  std::string out;
  char buf[1 << 14];
  ::lseek(fd, 0, SEEK_SET);
  for (;;) {
    const ssize_t n = ::read(fd, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

template <class F> int each_entry(const std::string& text, F&& f) {
  int skipped = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(leaderboard_entry_from_json(Json::parse(line)));
    } catch (const Json::exception&) {
      ++skipped;
    } catch (const Error&) {
      ++skipped;
    }
  }
  return skipped;
}

} // namespace

void append_entry(const std::string& path, const LeaderboardEntry& e) {
  if (e.id.empty()) throw ValidationError("leaderboard id must not be empty");
  std::string line = to_json(e).dump();
  line.push_back('\n');
  std::lock_guard guard(g_board_mutex);
  FileLock lock(path, O_RDWR | O_CREAT | O_APPEND);
  const std::string existing = slurp(lock.fd);
  bool duplicate = false;
  each_entry(existing, [&](const LeaderboardEntry& old) {
    duplicate = duplicate || (old.id == e.id && old.challenge == e.challenge);
  });
  if (duplicate) throw ValidationError("'" + e.id + "' already has a " + std::string(to_string(e.challenge)) + " entry");
  // a torn last line from a crashed writer must not swallow this one
  if (!existing.empty() && existing.back() != '\n') line.insert(line.begin(), '\n');
  std::size_t done = 0;
  while (done < line.size()) {
    const ssize_t n = ::write(lock.fd, line.data() + done, line.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error("leaderboard write failed: " + std::string(std::strerror(errno)));
    }
    done += static_cast<std::size_t>(n);
  }
}

Leaderboard read_leaderboard(const std::string& path, Challenge challenge) {
  Leaderboard board;
  if (::access(path.c_str(), F_OK) != 0) return board;
  std::string text;
  {
    std::lock_guard guard(g_board_mutex);
    FileLock lock(path, O_RDONLY);
    text = slurp(lock.fd);
  }
  std::vector<LeaderboardEntry> all;
  board.skipped_lines = each_entry(text, [&](LeaderboardEntry e) {
    if (e.challenge == challenge) all.push_back(std::move(e));
  });
  std::vector<metrics::RankEntry> keys;
  for (std::size_t i = 0; i < all.size(); ++i) keys.push_back({std::to_string(i), all[i].score});
  for (const auto& k : metrics::rank(std::move(keys))) board.entries.push_back(all[std::stoul(k.id)]);
  return board;
}

} // namespace aido::harness

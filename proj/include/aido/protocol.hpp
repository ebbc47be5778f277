#pragma once

#include "aido/error.hpp"
#include "aido/json_fwd.hpp"
#include "aido/metrics.hpp"
#include "aido/sim.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace aido::protocol {

inline constexpr std::string_view kProtocolVersion = "aido-sim/1";
inline constexpr std::size_t kMaxFrame = 16u << 20;  // payload bytes

enum class ErrorCode { oversize, malformed, unknown_type, version_mismatch, agent_error, bad_state };

std::string_view to_string(ErrorCode c);
ErrorCode error_code_from_string(std::string_view name);

class ProtocolError : public Error {
public:
  ProtocolError(ErrorCode code, const std::string& detail) : Error(detail), code_(code) {}
  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

/// The peer went away or the byte stream failed.
class TransportError : public Error {
public:
  using Error::Error;
};

struct TimingMode {
  enum class Kind { blocking, fixed_step };
  Kind kind = Kind::blocking;
  int deadline_ms = 0;  // fixed_step only, > 0

  static TimingMode blocking() { return {}; }
  static TimingMode fixed_step(int deadline_ms) { return {Kind::fixed_step, deadline_ms}; }
  bool operator==(const TimingMode&) const = default;
};

void validate(const TimingMode& t);

struct ObservationKinds {
  bool ground_truth = true;
  bool semantic = false;

  bool operator==(const ObservationKinds&) const = default;
};

struct Hello {
  std::string agent_name;
  std::string protocol_version{kProtocolVersion};
  ObservationKinds observations;
  std::optional<sim::RasterConfig> raster;  // preferred raster

  bool operator==(const Hello&) const = default;
};

struct HelloAck {
  std::string challenge = "LF";
  double dt = dynamics::kDefaultDt;
  TimingMode timing;

  bool operator==(const HelloAck&) const = default;
};

struct EpisodeStart {
  std::string map_document;
  std::uint64_t seed = 0;
  ObservationKinds observations;
  double dt = dynamics::kDefaultDt;
  double max_duration = 60.0;
  sim::RasterConfig raster;
  dynamics::KinematicParams limits;  // nominal robot

  bool operator==(const EpisodeStart&) const = default;
};

struct ObservationMsg {
  sim::Observation observation;

  bool operator==(const ObservationMsg&) const = default;
};

/// `t` echoes the observation being answered so late replies can be told
/// apart from current ones.
struct Action {
  double t = 0.0;
  double v = 0.0;
  double omega = 0.0;

  bool operator==(const Action&) const = default;
};

struct EpisodeEnd {
  metrics::RunMetrics run_metrics;

  bool operator==(const EpisodeEnd&) const = default;
};

struct EvaluationResult {
  metrics::SubmissionScore submission_score;

  bool operator==(const EvaluationResult&) const = default;
};

struct ErrorMsg {
  ErrorCode code = ErrorCode::malformed;
  std::string detail;

  bool operator==(const ErrorMsg&) const = default;
};

using Message =
    std::variant<Hello, HelloAck, EpisodeStart, ObservationMsg, Action, EpisodeEnd, EvaluationResult, ErrorMsg>;

std::string_view type_name(const Message& m);

Json to_json(const Message& m);

/// Throws ProtocolError (malformed, unknown_type, version_mismatch).
Message message_from_json(const Json& j);

/// 4-byte big-endian payload length, then the UTF-8 JSON payload. Throws
/// ProtocolError(oversize) past kMaxFrame.
std::string encode_message(const Message& m);

/// Decodes exactly one complete frame.
Message decode_message(std::string_view bytes);

/// Incremental decoder for a byte stream. The first error is sticky: every
/// later call rethrows it, so a stream yields valid messages and then at
/// most one error.
class FrameDecoder {
public:
  void feed(std::string_view bytes);
  std::optional<Message> next();
  std::size_t buffered() const { return buffer_.size() - offset_; }

private:
  std::string buffer_;
  std::size_t offset_ = 0;
  std::optional<ProtocolError> failed_;
};

/// Framed messages over a connected stream socket. Owns the descriptor.
class Channel {
public:
  explicit Channel(int fd);
  Channel(Channel&& other) noexcept;
  Channel& operator=(Channel&& other) noexcept;
  Channel(const Channel&) = delete;
  Channel& operator=(const Channel&) = delete;
  ~Channel();

  void send(const Message& m);
  void send_bytes(std::string_view bytes);
  /// Waits for the next message; nullopt on timeout. Throws TransportError
  /// when the peer closes and ProtocolError on a bad frame.
  std::optional<Message> receive(std::optional<std::chrono::milliseconds> timeout = std::nullopt);
  void close();
  int fd() const { return fd_; }

private:
  int fd_ = -1;
  FrameDecoder decoder_;
};

/// Connected pair of local stream sockets.
std::pair<Channel, Channel> channel_pair();

class Listener {
public:
  /// Port 0 picks a free port.
  explicit Listener(int port, const std::string& host = "127.0.0.1");
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;
  ~Listener();

  int port() const { return port_; }
  Channel accept();

private:
  int fd_ = -1;
  int port_ = 0;
};

Channel connect_tcp(const std::string& host, int port);

/// Parses "HOST:PORT".
std::pair<std::string, int> parse_endpoint(std::string_view endpoint);

Json to_json(const sim::Observation& o);
sim::Observation observation_from_json(const Json& j);
Json to_json(const sim::RasterConfig& r);
sim::RasterConfig raster_from_json(const Json& j);

} // namespace aido::protocol

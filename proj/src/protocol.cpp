#include "aido/protocol.hpp"

#include <arpa/inet.h>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace aido::protocol {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 6> kCodes{{{ErrorCode::oversize, "oversize"},
                                                                        {ErrorCode::malformed, "malformed"},
                                                                        {ErrorCode::unknown_type, "unknown_type"},
                                                                        {ErrorCode::version_mismatch, "version_mismatch"},
                                                                        {ErrorCode::agent_error, "agent_error"},
                                                                        {ErrorCode::bad_state, "bad_state"}}};

[[noreturn]] void malformed(const std::string& what) { throw ProtocolError(ErrorCode::malformed, what); }

const Json& member(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) malformed(std::string("missing field '") + key + "'");
  return *it;
}

double number(const Json& j, const char* key) {
  const Json& v = member(j, key);
  if (!v.is_number()) malformed(std::string("field '") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) malformed(std::string("field '") + key + "' must be finite");
  return d;
}

std::int64_t integer(const Json& j, const char* key) {
  const Json& v = member(j, key);
  if (!v.is_number_integer()) malformed(std::string("field '") + key + "' must be an integer");
  if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
    malformed(std::string("field '") + key + "' out of range");
  }
  return v.get<std::int64_t>();
}

int small_int(const Json& j, const char* key, std::int64_t lo, std::int64_t hi) {
  const std::int64_t v = integer(j, key);
  if (v < lo || v > hi) malformed(std::string("field '") + key + "' out of range");
  return static_cast<int>(v);
}

std::uint64_t unsigned_integer(const Json& j, const char* key) {
  const Json& v = member(j, key);
  if (!v.is_number_unsigned()) malformed(std::string("field '") + key + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::string text(const Json& j, const char* key) {
  const Json& v = member(j, key);
  if (!v.is_string()) malformed(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

bool flag(const Json& j, const char* key) {
  const Json& v = member(j, key);
  if (!v.is_boolean()) malformed(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

const Json& object(const Json& j, const char* key) {
  const Json& v = member(j, key);
  if (!v.is_object()) malformed(std::string("field '") + key + "' must be an object");
  return v;
}

Json kinds_json(const ObservationKinds& k) {
  Json a = Json::array();
  if (k.ground_truth) a.push_back("ground_truth");
  if (k.semantic) a.push_back("semantic");
  return a;
}

ObservationKinds kinds_from(const Json& j, const char* key) {
  const Json& v = member(j, key);
  if (!v.is_array()) malformed(std::string("field '") + key + "' must be an array");
  ObservationKinds k{false, false};
  for (const Json& e : v) {
    if (e == "ground_truth") k.ground_truth = true;
    else if (e == "semantic") k.semantic = true;
    else malformed("unknown observation kind");
  }
  return k;
}

Json timing_json(const TimingMode& t) {
  if (t.kind == TimingMode::Kind::blocking) return Json{{"kind", "blocking"}};
  return Json{{"kind", "fixed_step"}, {"deadline_ms", t.deadline_ms}};
}

TimingMode timing_from(const Json& j) {
  const std::string kind = text(j, "kind");
  if (kind == "blocking") return TimingMode::blocking();
  if (kind == "fixed_step") return TimingMode::fixed_step(small_int(j, "deadline_ms", 1, 3600000));
  malformed("unknown timing mode '" + kind + "'");
}

Json limits_json(const dynamics::KinematicParams& p) {
  return Json{{"baseline", p.baseline},   {"v_max", p.v_max},         {"omega_max", p.omega_max},
              {"wheel_max", p.wheel_max}, {"gain_left", p.gain_left}, {"gain_right", p.gain_right}};
}

dynamics::KinematicParams limits_from(const Json& j) {
  dynamics::KinematicParams p;
  p.baseline = number(j, "baseline");
  p.v_max = number(j, "v_max");
  p.omega_max = number(j, "omega_max");
  p.wheel_max = number(j, "wheel_max");
  p.gain_left = number(j, "gain_left");
  p.gain_right = number(j, "gain_right");
  return p;
}

Json score_json(const metrics::SubmissionScore& s) {
  return Json{{"distance_m", s.distance},
              {"survival_s", s.survival},
              {"lateral_m", s.lateral},
              {"infraction_s", s.infraction},
              {"runs", s.runs}};
}

metrics::SubmissionScore score_from(const Json& j) {
  return {number(j, "distance_m"), number(j, "survival_s"), number(j, "lateral_m"), number(j, "infraction_s"),
          small_int(j, "runs", 0, INT32_MAX)};
}

metrics::RunMetrics run_metrics_from(const Json& j) {
  metrics::RunMetrics m;
  m.distance = number(j, "distance_m");
  m.survival = number(j, "survival_s");
  m.lateral_median = number(j, "lateral_m");
  m.infraction_time = number(j, "infraction_s");
  try {
    m.terminal_event = event_from_string(text(j, "terminal_event"));
  } catch (const Error& e) {
    malformed(e.what());
  }
  return m;
}

template <class T> struct Tag;
template <> struct Tag<Hello> { static constexpr std::string_view name = "hello"; };
template <> struct Tag<HelloAck> { static constexpr std::string_view name = "hello_ack"; };
template <> struct Tag<EpisodeStart> { static constexpr std::string_view name = "episode_start"; };
template <> struct Tag<ObservationMsg> { static constexpr std::string_view name = "observation"; };
template <> struct Tag<Action> { static constexpr std::string_view name = "action"; };
template <> struct Tag<EpisodeEnd> { static constexpr std::string_view name = "episode_end"; };
template <> struct Tag<EvaluationResult> { static constexpr std::string_view name = "evaluation_result"; };
template <> struct Tag<ErrorMsg> { static constexpr std::string_view name = "error"; };

Json body(const Hello& m) {
  Json j{{"agent_name", m.agent_name}, {"observation_kinds", kinds_json(m.observations)}};
  if (m.raster) j["raster"] = to_json(*m.raster);
  return j;
}
Json body(const HelloAck& m) {
  return Json{{"challenge", m.challenge}, {"dt", m.dt}, {"timing_mode", timing_json(m.timing)}};
}
Json body(const EpisodeStart& m) {
  return Json{{"map_document", m.map_document},
              {"seed", m.seed},
              {"observation_kinds", kinds_json(m.observations)},
              {"dt", m.dt},
              {"max_duration", m.max_duration},
              {"raster", to_json(m.raster)},
              {"limits", limits_json(m.limits)}};
}
Json body(const ObservationMsg& m) { return to_json(m.observation); }
Json body(const Action& m) { return Json{{"t", m.t}, {"v", m.v}, {"omega", m.omega}}; }
Json body(const EpisodeEnd& m) { return Json{{"run_metrics", metrics::to_json(m.run_metrics)}}; }
Json body(const EvaluationResult& m) { return Json{{"submission_score", score_json(m.submission_score)}}; }
Json body(const ErrorMsg& m) { return Json{{"code", to_string(m.code)}, {"detail", m.detail}}; }

Message parse_body(std::string_view type, const Json& j) {
  if (type == "hello") {
    Hello m;
    m.agent_name = text(j, "agent_name");
    m.protocol_version = text(j, "protocol_version");
    m.observations = kinds_from(j, "observation_kinds");
    if (j.contains("raster")) m.raster = raster_from_json(object(j, "raster"));
    return m;
  }
  if (type == "hello_ack") return HelloAck{text(j, "challenge"), number(j, "dt"), timing_from(object(j, "timing_mode"))};
  if (type == "episode_start") {
    EpisodeStart m;
    m.map_document = text(j, "map_document");
    m.seed = unsigned_integer(j, "seed");
    m.observations = kinds_from(j, "observation_kinds");
    m.dt = number(j, "dt");
    m.max_duration = number(j, "max_duration");
    m.raster = raster_from_json(object(j, "raster"));
    m.limits = limits_from(object(j, "limits"));
    return m;
  }
  if (type == "observation") return ObservationMsg{observation_from_json(j)};
  if (type == "action") return Action{number(j, "t"), number(j, "v"), number(j, "omega")};
  if (type == "episode_end") return EpisodeEnd{run_metrics_from(object(j, "run_metrics"))};
  if (type == "evaluation_result") return EvaluationResult{score_from(object(j, "submission_score"))};
  if (type == "error") {
    try {
      return ErrorMsg{error_code_from_string(text(j, "code")), text(j, "detail")};
    } catch (const ParseError& e) {
      malformed(e.what());
    }
  }
  throw ProtocolError(ErrorCode::unknown_type, "unknown message type '" + std::string(type) + "'");
}

std::uint32_t read_be32(const char* p) {
  const auto* u = reinterpret_cast<const unsigned char*>(p);
  return (std::uint32_t{u[0]} << 24) | (std::uint32_t{u[1]} << 16) | (std::uint32_t{u[2]} << 8) | std::uint32_t{u[3]};
}

Message parse_payload(std::string_view payload) {
  Json j;
  try {
    j = Json::parse(payload);
  } catch (const Json::exception& e) {
    malformed(std::string("payload is not valid JSON: ") + e.what());
  }
  return message_from_json(j);
}

} // namespace

std::string_view to_string(ErrorCode c) {
  for (const auto& [code, name] : kCodes) {
    if (code == c) return name;
  }
  return "malformed";
}

ErrorCode error_code_from_string(std::string_view name) {
  for (const auto& [code, n] : kCodes) {
    if (n == name) return code;
  }
  throw ParseError("unknown error code '" + std::string(name) + "'");
}

void validate(const TimingMode& t) {
  if (t.kind == TimingMode::Kind::fixed_step && t.deadline_ms <= 0) {
    throw ValidationError("fixed_step timing needs deadline_ms > 0");
  }
}

Json to_json(const sim::RasterConfig& r) {
  return Json{{"cols", r.cols}, {"rows", r.rows}, {"width_m", r.width_m}, {"depth_m", r.depth_m}};
}

sim::RasterConfig raster_from_json(const Json& j) {
  sim::RasterConfig r;
  r.cols = small_int(j, "cols", 1, 4096);
  r.rows = small_int(j, "rows", 1, 4096);
  r.width_m = number(j, "width_m");
  r.depth_m = number(j, "depth_m");
  if (!(r.width_m > 0.0) || !(r.depth_m > 0.0)) malformed("raster extent must be positive");
  return r;
}

Json to_json(const sim::Observation& o) {
  Json j{{"t", o.t}};
  if (o.ground_truth) {
    const sim::GroundTruth& g = *o.ground_truth;
    Json obstacles = Json::array();
    for (const auto& e : g.obstacles) obstacles.push_back({{"forward", e.forward}, {"left", e.left}, {"radius", e.radius}});
    j["ground_truth"] = {{"s", g.pose.s},
                         {"d", g.pose.d},
                         {"phi", g.pose.phi},
                         {"in_right_lane", g.pose.in_right_lane},
                         {"heading_dot", g.heading_dot},
                         {"lane_cross_sign", g.lane_cross_sign},
                         {"obstacles", obstacles}};
  }
  if (o.semantic) {
    const sim::SemanticImage& s = *o.semantic;
    std::vector<int> labels(s.labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(s.labels[i]);
    j["semantic"] = {{"width", s.width}, {"height", s.height}, {"intensity_shift", s.intensity_shift}, {"labels", labels}};
  }
  return j;
}

sim::Observation observation_from_json(const Json& j) {
  sim::Observation o;
  o.t = number(j, "t");
  if (j.contains("ground_truth")) {
    const Json& g = object(j, "ground_truth");
    sim::GroundTruth gt;
    gt.pose.s = number(g, "s");
    gt.pose.d = number(g, "d");
    gt.pose.phi = number(g, "phi");
    gt.pose.in_right_lane = flag(g, "in_right_lane");
    gt.heading_dot = number(g, "heading_dot");
    gt.lane_cross_sign = small_int(g, "lane_cross_sign", -1, 1);
    const Json& obs = member(g, "obstacles");
    if (!obs.is_array()) malformed("obstacles must be an array");
    for (const Json& e : obs) {
      if (!e.is_object()) malformed("obstacle must be an object");
      gt.obstacles.push_back({number(e, "forward"), number(e, "left"), number(e, "radius")});
    }
    o.ground_truth = std::move(gt);
  }
  if (j.contains("semantic")) {
    const Json& s = object(j, "semantic");
    sim::SemanticImage img;
    img.width = small_int(s, "width", 0, 4096);
    img.height = small_int(s, "height", 0, 4096);
    img.intensity_shift = small_int(s, "intensity_shift", -255, 255);
    const Json& labels = member(s, "labels");
    if (!labels.is_array()) malformed("labels must be an array");
    if (labels.size() != static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height)) {
      malformed("label count does not match the image size");
    }
    img.labels.reserve(labels.size());
    for (const Json& l : labels) {
      if (!l.is_number_integer()) malformed("labels must be integers");
      const auto v = l.get<std::int64_t>();
      if (v < 0 || v > 4) malformed("label out of range");
      img.labels.push_back(static_cast<sim::Label>(v));
    }
    o.semantic = std::move(img);
  }
  return o;
}

std::string_view type_name(const Message& m) {
  return std::visit([](const auto& x) { return Tag<std::decay_t<decltype(x)>>::name; }, m);
}

Json to_json(const Message& m) {
  return std::visit(
      [](const auto& x) {
        Json j{{"type", Tag<std::decay_t<decltype(x)>>::name}, {"protocol_version", kProtocolVersion}};
        const Json b = body(x);
        for (const auto& [k, v] : b.items()) j[k] = v;
        return j;
      },
      m);
}

Message message_from_json(const Json& j) {
  if (!j.is_object()) malformed("message must be a JSON object");
  const std::string type = text(j, "type");
  const std::string version = text(j, "protocol_version");
  if (version != kProtocolVersion) {
    throw ProtocolError(ErrorCode::version_mismatch,
                        "protocol version '" + version + "' is not " + std::string(kProtocolVersion));
  }
  try {
    return parse_body(type, j);
  } catch (const Json::exception& e) {
    malformed(e.what());
  }
}

std::string encode_message(const Message& m) {
  const std::string payload = to_json(m).dump();
  if (payload.size() > kMaxFrame) throw ProtocolError(ErrorCode::oversize, "message exceeds the frame limit");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out += payload;
  return out;
}

Message decode_message(std::string_view bytes) {
  if (bytes.size() < 4) malformed("truncated frame header");
  const std::uint32_t n = read_be32(bytes.data());
  if (n > kMaxFrame) throw ProtocolError(ErrorCode::oversize, "frame length exceeds the limit");
  if (bytes.size() - 4 < n) malformed("truncated frame");
  if (bytes.size() - 4 > n) malformed("trailing bytes after frame");
  return parse_payload(bytes.substr(4));
}

void FrameDecoder::feed(std::string_view bytes) {
  if (failed_) return;
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.append(bytes);
}

std::optional<Message> FrameDecoder::next() {
  if (failed_) throw *failed_;
  const std::size_t avail = buffer_.size() - offset_;
  if (avail < 4) return std::nullopt;
  const std::uint32_t n = read_be32(buffer_.data() + offset_);
  try {
    if (n > kMaxFrame) throw ProtocolError(ErrorCode::oversize, "frame length exceeds the limit");
    if (avail - 4 < n) return std::nullopt;
    const std::string_view payload(buffer_.data() + offset_ + 4, n);
    offset_ += 4 + n;
    Message m = parse_payload(payload);
    if (offset_ * 2 > buffer_.size()) {
      buffer_.erase(0, offset_);
      offset_ = 0;
    }
    return m;
  } catch (const ProtocolError& e) {
    failed_ = e;
    buffer_.clear();
    offset_ = 0;
    throw;
  }
}

// ----------------------------------------------------------------- transport

Channel::Channel(int fd) : fd_(fd) {}

Channel::Channel(Channel&& other) noexcept : fd_(other.fd_), decoder_(std::move(other.decoder_)) { other.fd_ = -1; }

Channel& Channel::operator=(Channel&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    decoder_ = std::move(other.decoder_);
    other.fd_ = -1;
  }
  return *this;
}

Channel::~Channel() { close(); }

void Channel::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Channel::send(const Message& m) { send_bytes(encode_message(m)); }

void Channel::send_bytes(std::string_view bytes) {
  if (fd_ < 0) throw TransportError("channel is closed");
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t w = ::send(fd_, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("send failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(w);
  }
}

std::optional<Message> Channel::receive(std::optional<std::chrono::milliseconds> timeout) {
  using clock = std::chrono::steady_clock;
  const auto deadline = timeout ? clock::now() + *timeout : clock::time_point::max();
  char buf[65536];
  for (;;) {
    if (auto m = decoder_.next()) return m;
    if (fd_ < 0) throw TransportError("channel is closed");
    int wait_ms = -1;
    if (timeout) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
      if (left <= 0) {
        // drain whatever already arrived without blocking
        wait_ms = 0;
      } else {
        wait_ms = static_cast<int>(left);
      }
    }
    pollfd p{fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, wait_ms);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("poll failed: ") + std::strerror(errno));
    }
    if (r == 0) return std::nullopt;
    const ssize_t got = ::recv(fd_, buf, sizeof buf, 0);
    if (got < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("recv failed: ") + std::strerror(errno));
    }
    if (got == 0) throw TransportError("peer closed the connection");
    decoder_.feed(std::string_view(buf, static_cast<std::size_t>(got)));
  }
}

std::pair<Channel, Channel> channel_pair() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
    throw TransportError(std::string("socketpair failed: ") + std::strerror(errno));
  }
  return {Channel(fds[0]), Channel(fds[1])};
}

Listener::Listener(int port, const std::string& host) {
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) throw TransportError(std::string("socket failed: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw ValidationError("listen address must be a dotted IPv4 address: " + host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 16) != 0) {
    const std::string err = std::strerror(errno);
    ::close(fd_);
    throw TransportError("cannot listen on " + host + ":" + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Listener::~Listener() {
  if (fd_ >= 0) ::close(fd_);
}

Channel Listener::accept() {
  for (;;) {
    const int c = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (c >= 0) {
      const int one = 1;
      ::setsockopt(c, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return Channel(c);
    }
    if (errno != EINTR) throw TransportError(std::string("accept failed: ") + std::strerror(errno));
  }
}

Channel connect_tcp(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw TransportError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  std::string err = "no addresses";
  for (addrinfo* a = res; a; a = a->ai_next) {
    const int fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return Channel(fd);
    }
    err = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(res);
  throw TransportError("cannot connect to " + host + ":" + service + ": " + err);
}

std::pair<std::string, int> parse_endpoint(std::string_view endpoint) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string_view::npos || colon == 0) throw ValidationError("endpoint must be HOST:PORT");
  const std::string port_text(endpoint.substr(colon + 1));
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    if (used != port_text.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ValidationError("bad port in endpoint '" + std::string(endpoint) + "'");
  }
  if (port < 1 || port > 65535) throw ValidationError("port out of range");
  return {std::string(endpoint.substr(0, colon)), port};
}

} // namespace aido::protocol

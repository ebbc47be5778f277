#pragma once

// Random protocol messages and frame mutations, shared by the protocol
// tests and the acceptance suite.

#include "aido/protocol.hpp"
#include "aido/rng.hpp"

#include <string>

namespace fuzz {

using namespace aido;
using namespace aido::protocol;

inline double real(Rng& rng) {
  switch (rng.below(4)) {
    case 0: return 0.0;
    case 1: return static_cast<double>(static_cast<std::int64_t>(rng.below(2000)) - 1000);
    case 2: return rng.uniform(-1e-6, 1e-6);
    default: return rng.uniform(-1e6, 1e6);
  }
}

inline std::string word(Rng& rng) {
  static constexpr char kChars[] = "abcXYZ019 _-\"\\/\n\t{}[]:,\xc3\xa9";
  std::string s;
  const auto n = rng.below(12);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto c = rng.below(sizeof kChars - 1);
    if (kChars[c] == '\xc3') {
      s += "\xc3\xa9";  // keep UTF-8 valid
    } else if (kChars[c] != '\xa9') {
      s += kChars[c];
    }
  }
  return s;
}

inline sim::RasterConfig raster(Rng& rng) {
  return {static_cast<int>(1 + rng.below(100)), static_cast<int>(1 + rng.below(100)), rng.uniform(0.1, 3),
          rng.uniform(0.1, 3)};
}

inline sim::Observation observation(Rng& rng) {
  sim::Observation o;
  o.t = real(rng);
  if (rng.below(2)) {
    sim::GroundTruth g;
    g.pose = {real(rng), real(rng), real(rng), rng.below(2) == 1};
    g.heading_dot = real(rng);
    g.lane_cross_sign = static_cast<int>(rng.below(3)) - 1;
    const auto n = rng.below(4);
    for (std::uint64_t i = 0; i < n; ++i) g.obstacles.push_back({real(rng), real(rng), real(rng)});
    o.ground_truth = g;
  }
  if (rng.below(2)) {
    sim::SemanticImage img;
    img.width = static_cast<int>(rng.below(9));
    img.height = static_cast<int>(rng.below(7));
    img.intensity_shift = static_cast<int>(rng.below(101)) - 50;
    for (int i = 0; i < img.width * img.height; ++i) img.labels.push_back(static_cast<sim::Label>(rng.below(5)));
    o.semantic = img;
  }
  return o;
}

inline Message message(Rng& rng) {
  switch (rng.below(8)) {
    case 0: {
      Hello h;
      h.agent_name = word(rng);
      h.observations = {rng.below(2) == 1, rng.below(2) == 1};
      if (rng.below(2)) h.raster = raster(rng);
      return h;
    }
    case 1:
      return HelloAck{word(rng), rng.uniform(0.001, 1),
                      rng.below(2) ? TimingMode::blocking() : TimingMode::fixed_step(static_cast<int>(1 + rng.below(500)))};
    case 2: {
      EpisodeStart s;
      s.map_document = word(rng);
      s.seed = rng.next();
      s.observations = {rng.below(2) == 1, rng.below(2) == 1};
      s.dt = rng.uniform(0.001, 1);
      s.max_duration = rng.uniform(1, 100);
      s.raster = raster(rng);
      s.limits.baseline = rng.uniform(0.05, 0.2);
      s.limits.gain_left = rng.uniform(0.5, 1.5);
      return s;
    }
    case 3: return ObservationMsg{observation(rng)};
    case 4: return Action{real(rng), real(rng), real(rng)};
    case 5: {
      metrics::RunMetrics m{real(rng), real(rng), real(rng), real(rng), static_cast<Event>(rng.below(5))};
      return EpisodeEnd{m};
    }
    case 6: return EvaluationResult{{real(rng), real(rng), real(rng), real(rng), static_cast<int>(rng.below(100))}};
    default: return ErrorMsg{static_cast<ErrorCode>(rng.below(6)), word(rng)};
  }
}

enum class Mutation { none, truncate, flip, oversize, garbage, splice };

struct Mutated {
  std::string bytes;
  Mutation kind;
};

inline Mutated mutate(Rng& rng, const std::string& frame) {
  const auto kind = static_cast<Mutation>(rng.below(6));
  std::string b = frame;
  switch (kind) {
    case Mutation::none: break;
    case Mutation::truncate: b.resize(rng.below(b.size())); break;
    case Mutation::flip: {
      const auto n = 1 + rng.below(4);
      for (std::uint64_t i = 0; i < n; ++i) b[4 + rng.below(b.size() - 4)] = static_cast<char>(rng.below(256));
      break;
    }
    case Mutation::oversize: {
      const std::uint32_t len = static_cast<std::uint32_t>(kMaxFrame + 1 + rng.below(1u << 20));
      b[0] = static_cast<char>(len >> 24);
      b[1] = static_cast<char>(len >> 16);
      b[2] = static_cast<char>(len >> 8);
      b[3] = static_cast<char>(len);
      break;
    }
    case Mutation::garbage: {
      const auto n = rng.below(64);
      std::string payload;
      for (std::uint64_t i = 0; i < n; ++i) payload.push_back(static_cast<char>(rng.below(256)));
      b = std::string{0, 0, 0, static_cast<char>(n)} + payload;
      break;
    }
    case Mutation::splice: {
      // valid JSON with the wrong shape
      static const char* kBodies[] = {
          R"({"type":"action","protocol_version":"aido-sim/1","t":"x","v":0,"omega":0})",
          R"({"type":"teleport","protocol_version":"aido-sim/1"})",
          R"({"type":"action","protocol_version":"aido-sim/0","t":0,"v":0,"omega":0})",
          R"([1,2,3])",
          R"({"type":"observation","protocol_version":"aido-sim/1","t":0,"semantic":{"width":2,"height":2,"intensity_shift":0,"labels":[1]}})",
          R"({"protocol_version":"aido-sim/1"})",
      };
      const std::string body = kBodies[rng.below(6)];
      const auto n = static_cast<std::uint32_t>(body.size());
      b = std::string{static_cast<char>(n >> 24), static_cast<char>(n >> 16), static_cast<char>(n >> 8),
                      static_cast<char>(n)} +
          body;
      break;
    }
  }
  return {b, kind};
}

} // namespace fuzz

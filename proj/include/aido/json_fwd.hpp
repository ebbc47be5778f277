#pragma once

#include <json.hpp>

namespace aido {

/// Documents keep insertion order so emitted records are byte-stable.
using Json = nlohmann::ordered_json;

} // namespace aido

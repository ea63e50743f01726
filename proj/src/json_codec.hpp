#pragma once

// Private JSON helpers shared by the file-format readers/writers.

#include <json.hpp>
#include <string>
#include <string_view>

#include "lateralsim/adversary.hpp"
#include "lateralsim/error.hpp"
#include "lateralsim/netsim.hpp"

namespace lateralsim::detail {

using nlohmann::json;

// Parses a whole document; syntax errors become ParseError with a line number.
json parse_document(std::string_view text, std::string_view what);

// Field accessors that raise ParseError naming `context` and the field.
const json& require(const json& object, std::string_view field,
                    const std::string& context);

template <typename T>
T require_as(const json& object, std::string_view field,
             const std::string& context) {
  const json& value = require(object, field, context);
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ParseError, context + ": field \"" +
                                           std::string(field) +
                                           "\" has the wrong type");
  }
}

template <typename T>
T optional_as(const json& object, std::string_view field, T fallback,
              const std::string& context) {
  if (!object.is_object() || !object.contains(field)) return fallback;
  return require_as<T>(object, field, context);
}

json config_to_json(const GenerationConfig& config);
// Missing fields keep their defaults so hand-written files can stay short.
GenerationConfig config_from_json(const json& j, const std::string& context);

HeuristicWeights weights_from_json(const json& j, const std::string& context);
json weights_json(const HeuristicWeights& weights);

}  // namespace lateralsim::detail

#pragma once

// JSON encoding shared by genome and model files. Private to the core library.

#include <string>

#include <json.hpp>

#include "dagevo/dag.hpp"

namespace dagevo::detail {

nlohmann::json node_to_json(const NodeSpec& node);
NodeSpec node_from_json(const nlohmann::json& j, std::size_t index);

nlohmann::json dag_to_json(const Dag& dag);
Dag dag_from_json(const nlohmann::json& j);

/// Parses text, mapping syntax errors to ParseError with a line number.
nlohmann::json parse_json_text(const std::string& text);

}  // namespace dagevo::detail

// JSON round-trip for network specs. Doubles are written in shortest
// round-trip decimal form, so serialize -> parse -> serialize is
// bit-stable and identical builds produce identical bytes.
#pragma once

#include <string>

#include "json.hpp"
#include "kernelformer/transformer.hpp"

namespace kf {

nlohmann::json spec_to_json(const TransformerSpec& spec);
TransformerSpec spec_from_json(const nlohmann::json& j);

std::string spec_to_string(const TransformerSpec& spec);
TransformerSpec spec_from_string(const std::string& text);

void save_spec(const TransformerSpec& spec, const std::string& path);
TransformerSpec load_spec(const std::string& path);

}  // namespace kf

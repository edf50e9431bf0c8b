#pragma once

#include <json.hpp>

#include "dpn/dataset.hpp"
#include "dpn/nn.hpp"

namespace dpn {

nlohmann::json stats_to_json(const NormStats& s);
NormStats stats_from_json(const nlohmann::json& j);

// weights serialized row-major under their registry names; loading checks
// that shapes match the already-constructed model
nlohmann::json params_to_json(const NamedParams& params);
void params_from_json(const nlohmann::json& j, const NamedParams& params);

}  // namespace dpn

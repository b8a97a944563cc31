#pragma once

#include <optional>
#include <string>
#include <vector>

#include "antdt/config.hpp"

namespace antdt {

struct Preset {
  std::string name;
  std::string description;
  ScenarioConfig cfg;
};

// Shipped scenario presets. Every preset validates and runs to completion in
// seconds at desk scale.
const std::vector<Preset>& presets();
std::optional<ScenarioConfig> preset_config(const std::string& name);

}  // namespace antdt

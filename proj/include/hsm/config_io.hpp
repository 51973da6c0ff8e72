#pragma once

// Flat key=value serialization of MatcherConfig. Unknown keys are errors;
// missing keys keep their defaults. Floats are written in shortest round-trip form.

#include <filesystem>
#include <string>
#include <string_view>

#include "hsm/pipeline.hpp"

namespace hsm {

std::string to_config_text(const MatcherConfig& cfg);
MatcherConfig parse_config_text(std::string_view text, MatcherConfig base = {});

MatcherConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const MatcherConfig& cfg);

}  // namespace hsm

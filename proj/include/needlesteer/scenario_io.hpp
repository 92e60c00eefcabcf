#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "needlesteer/environment.hpp"

namespace needlesteer {

// JSON scenario documents. CRs without an explicit DR get one of radius CR + dr_margin_mm.
// Throws ParseError (with line) for malformed text and ConfigError naming the field otherwise.
Scenario load_scenario(std::string_view text);
// Canonical form: every region written explicitly, DRs carry their parent index.
std::string save_scenario(const Scenario& scenario);

Scenario load_scenario_file(const std::filesystem::path& path);
void save_scenario_file(const Scenario& scenario, const std::filesystem::path& path);

// Builtin name or path to a scenario file.
Scenario resolve_scenario(const std::string& name_or_path);

}  // namespace needlesteer

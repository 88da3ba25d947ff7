#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "fawn/evalkit.hpp"
#include "fawn/losses.hpp"
#include "fawn/refine.hpp"
#include "fawn/synth.hpp"
#include "fawn/volume.hpp"

namespace fawn {

/// Parse with line/column diagnostics (InputError) and strict key checking
/// where noted below.
nlohmann::json parse_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

nlohmann::json grid_spec_to_json(const GridSpec& spec);
GridSpec grid_spec_from_json(const nlohmann::json& j);

nlohmann::json loss_breakdown_to_json(const LossBreakdown& b);

nlohmann::json refine_config_to_json(const RefineConfig& cfg);
RefineConfig refine_config_from_json(const nlohmann::json& j);  // strict keys

nlohmann::json refine_report_to_json(const RefineReport& report, const RefineConfig& cfg);

nlohmann::json metrics_report_to_json(const MetricsReport& m);

nlohmann::json camera_to_json(const PinholeCamera& cam);
PinholeCamera camera_from_json(const nlohmann::json& j);

nlohmann::json scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const nlohmann::json& j);  // strict keys

/// FNV-1a of the exact byte content, as fixed-width hex.
std::string digest_hex(std::string_view bytes);
std::string file_digest_hex(const std::filesystem::path& path);

}  // namespace fawn

#pragma once

#include <filesystem>
#include <string_view>

#include <json.hpp>

#include "lebid/domain.hpp"

namespace lebid {

nlohmann::json dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const nlohmann::json& j);

// Writes to a sibling temporary and renames, so a failed write never leaves
// a partial file at `path`.
void write_text_file(std::string_view text, const std::filesystem::path& path);
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace lebid

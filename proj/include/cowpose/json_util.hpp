#pragma once

#include <json.hpp>

#include <filesystem>

namespace cowpose {

// Parses a JSON file. Missing files raise IoError; syntax errors raise
// FormatError naming the path, line and column.
nlohmann::json read_json_file(const std::filesystem::path& path);

// Writes `doc` indented by two spaces with a trailing newline.
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);

} // namespace cowpose

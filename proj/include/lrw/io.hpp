#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>

#include "json.hpp"

namespace lrw {

/// Writes `content` to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);
/// Streams into a buffer, then writes it atomically.
void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fill);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// Parses a JSON file. Throws MissingDependencyError when it does not exist
/// and ConfigError when it does not parse.
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace lrw

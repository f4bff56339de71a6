#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace fairpipe {

using Json = nlohmann::json;

/// Rounds to 6 decimal places; every float we serialize goes through this.
double round6(double x);

/// Stable text form: 2-space indent, keys in insertion order of the object.
std::string dump_stable(const Json& j);

/// FNV-1a 64-bit, hex encoded. Used for dataset/split/recipe fingerprints.
std::string fingerprint(std::string_view bytes);

Json read_json_file(const std::filesystem::path& path);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace fairpipe

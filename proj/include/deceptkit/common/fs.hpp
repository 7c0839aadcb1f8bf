#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace deceptkit {

// Reads a whole file. Throws Error when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over the target, so
// readers see either the old or the new contents.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace deceptkit

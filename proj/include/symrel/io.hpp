#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace symrel {

// Throws DataError if the file cannot be read.
std::string read_file(const std::filesystem::path& path);
// Creates parent directories as needed. Throws DataError on failure.
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace symrel

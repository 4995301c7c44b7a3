#pragma once

#include <filesystem>
#include <string>

namespace adviser {

// Reads a whole file; throws InvalidArgument when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes via a temp file in the same directory followed by rename, so a
// concurrent reader sees either the old or the new contents.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace adviser

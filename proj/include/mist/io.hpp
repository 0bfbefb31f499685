#pragma once

#include <string>
#include <string_view>

namespace mist {

// "mist 0.4.0"
std::string version_stamp();

// Writes to a sibling temp file, then renames over path. Throws IoError.
void write_file_atomic(const std::string& path, std::string_view content);

std::string read_file(const std::string& path);

// Shortest decimal that round-trips a double.
std::string format_double(double v);

}  // namespace mist

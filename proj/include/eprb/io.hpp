#pragma once

#include <string>
#include <string_view>

namespace eprb {

/// Writes `content` to `path` via a sibling temporary file and rename(2), so
/// readers never observe a partially written file.
void write_file_atomic(const std::string& path, std::string_view content);

std::string read_file(const std::string& path);

}  // namespace eprb

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace sinc {

/// Writes via a temporary sibling and rename, so readers never observe a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

}  // namespace sinc

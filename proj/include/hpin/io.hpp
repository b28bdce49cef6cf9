#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace hpin {

/// Shortest round-trip decimal form.
std::string fmt_real(double x);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never see a partial file. Creates missing parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// `flag` if non-empty, else $HPIN_OUT_DIR, else ".".
std::filesystem::path resolve_output_dir(const std::string& flag);

}  // namespace hpin

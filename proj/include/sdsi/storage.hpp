#pragma once

#include <filesystem>
#include <span>
#include <string>

namespace sdsi::storage {

// Write to a sibling temporary file, then rename over the target.
void write_atomic(const std::filesystem::path& path, std::span<const char> data);
void write_atomic(const std::filesystem::path& path, const std::string& text);

std::string read_text(const std::filesystem::path& path);

// Identifiers that double as file names: [A-Za-z0-9_.-], not starting with '.'.
bool is_safe_id(const std::string& id);

double now_unix();

}  // namespace sdsi::storage

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace goal {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull);
std::string hex64(std::uint64_t value);
/// Hash of a file, or of every regular file under a directory (sorted by
/// relative path, path names included).
std::uint64_t hash_path(const std::filesystem::path& path);

}  // namespace goal

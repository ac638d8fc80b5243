#pragma once

// Checkpoint directory layout:
//   manifest.json  config, vocabulary, init seed, and an ordered list of
//                  {name, shape, offset} (byte offset into params.f64)
//   params.f64     little-endian f64 values, concatenated in manifest order

#include <filesystem>

#include "goal/encoders.hpp"

namespace goal {

void save_checkpoint(const std::filesystem::path& dir, const Model& model);
Model load_checkpoint(const std::filesystem::path& dir);

/// Little-endian f64 packing shared by the checkpoint and GEMB writers.
void append_f64_le(std::string& out, std::span<const double> values);
void read_f64_le(std::string_view bytes, std::span<double> out);

}  // namespace goal

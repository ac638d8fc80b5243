#pragma once

// Synthetic scene dataset with known local correspondences, and the file
// formats shared by the pipeline:
//   dataset.jsonl   one SampleRecord per line (masks as RLE "v:run,…")
//   images/*.ppm    binary PPM P6
//   *.gemb          "GEMB", u32 count, u32 dim, count×dim f64 (all LE),
//                   with ids in a sidecar <name>.ids.jsonl

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "goal/image.hpp"
#include "goal/tokenizer.hpp"

namespace goal {

class SegmentMask {
 public:
  SegmentMask() = default;
  SegmentMask(std::size_t side, std::vector<std::uint8_t> bits);

  std::size_t side() const noexcept { return side_; }
  bool get(std::size_t x, std::size_t y) const { return bits_[y * side_ + x] != 0; }
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }
  std::size_t popcount() const noexcept { return popcount_; }
  /// popcount / side².
  double area_fraction() const noexcept { return area_fraction_; }

  /// Row-major run-length string "v:run,v:run,…" with v ∈ {0,1}.
  std::string to_rle() const;
  static SegmentMask from_rle(std::string_view rle, std::size_t side);

  bool operator==(const SegmentMask& other) const {
    return side_ == other.side_ && bits_ == other.bits_;
  }

 private:
  std::size_t side_ = 0;
  std::vector<std::uint8_t> bits_;
  std::size_t popcount_ = 0;
  double area_fraction_ = 0.0;
};

struct SampleRecord {
  std::string id;
  std::string image_path;  // relative to the dataset directory
  std::size_t image_side = 0;
  std::string caption;
  std::vector<SegmentMask> segments;
  std::vector<CharSpan> sentence_spans;
  /// (segment index, sentence index); synthetic data only.
  std::vector<std::pair<std::size_t, std::size_t>> gt_links;

  bool operator==(const SampleRecord&) const = default;
};

struct Dataset {
  std::filesystem::path root;
  std::vector<SampleRecord> records;

  Image load_image(const SampleRecord& record) const;
  const SampleRecord* find(const std::string& id) const;
};

/// Checks the SampleRecord invariants; throws ValidationError.
void validate_record(const SampleRecord& record);

std::string record_to_json(const SampleRecord& record);
SampleRecord record_from_json(std::string_view line);

void write_dataset_jsonl(const std::filesystem::path& path, const std::vector<SampleRecord>& records);
std::vector<SampleRecord> read_dataset_jsonl(const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Generator

struct GeneratorOptions {
  std::size_t image_side = 64;
  std::size_t min_shapes = 2;
  std::size_t max_shapes = 5;
};

/// One rendered scene before serialization.
struct GeneratedSample {
  SampleRecord record;
  Image image;
};

GeneratedSample generate_sample(std::uint64_t seed, std::size_t index,
                                const GeneratorOptions& options = {});
/// Writes dataset.jsonl and images/ under out_dir. Deterministic per seed.
Dataset generate_dataset(std::uint64_t seed, std::size_t n_samples,
                         const std::filesystem::path& out_dir,
                         const GeneratorOptions& options = {});

/// Words that name shape colors and kinds in generated captions.
const std::vector<std::string>& color_words();
const std::vector<std::string>& shape_words();

// ---------------------------------------------------------------------------
// Caption and mask utilities

/// Splits after '.', '!' or '?' when followed by whitespace or the end;
/// trims whitespace and drops empty pieces.
std::vector<CharSpan> split_sentences(std::string_view caption);

inline constexpr double kDefaultExpandFrac = 0.1;

/// Tight box of the set pixels, each side pushed out by
/// round_half_up(expand_frac × box side) and clamped to the image.
BBox mask_to_bbox(const SegmentMask& mask, double expand_frac);

// ---------------------------------------------------------------------------
// GEMB embeddings

struct EmbeddingSet {
  std::vector<std::string> ids;
  std::size_t dim = 0;
  std::vector<double> values;  // ids.size() × dim

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * dim, dim);
  }
  bool operator==(const EmbeddingSet&) const = default;
};

std::string encode_gemb(const EmbeddingSet& set);
/// Reads the blob only; ids are left empty.
EmbeddingSet decode_gemb(std::string_view bytes);
void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set);
EmbeddingSet read_embeddings(const std::filesystem::path& path);
std::filesystem::path ids_sidecar(const std::filesystem::path& gemb_path);

}  // namespace goal

#pragma once

// Local image-sentence matching: pick at most one (crop, sentence) pseudo
// pair per sample by maximum cosine similarity of CLS embeddings.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "goal/data.hpp"
#include "goal/encoders.hpp"
#include "goal/retrieval.hpp"

namespace goal {

inline constexpr double kMinSegmentArea = 0.01;

struct LocalPair {
  std::string sample_id;
  BBox bbox;
  std::size_t segment_index = 0;  // index into SampleRecord::segments
  std::size_t sentence_index = 0;
  CharSpan sentence_char_span;
  double similarity = 0.0;

  bool operator==(const LocalPair&) const = default;
};

struct CandidateSet {
  std::vector<std::size_t> kept_indices;  // segments with area ≥ kMinSegmentArea
  std::vector<BBox> boxes;                // one per kept segment
  std::vector<Image> local_images;        // crops resized to the encoder input
  std::size_t n_sentences = 0;
  std::size_t n_regions() const { return kept_indices.size(); }
};

/// Source of CLS embeddings for matching. Implementations must be safe to
/// call concurrently.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed_text(std::string_view text) const = 0;
  virtual std::vector<double> embed_image(const Image& image) const = 0;
};

class ModelEmbedder final : public Embedder {
 public:
  explicit ModelEmbedder(const Model& model) : model_(&model) {}
  std::vector<double> embed_text(std::string_view text) const override;
  std::vector<double> embed_image(const Image& image) const override;

 private:
  const Model* model_;
};

/// Indices of segments with area_fraction ≥ min_area, in order.
std::vector<std::size_t> filter_segments(std::span<const SegmentMask> segments,
                                         double min_area = kMinSegmentArea);

CandidateSet build_candidates(const SampleRecord& sample, const Image& image, double expand_frac,
                              std::size_t encoder_side);

struct Selection {
  std::size_t sentence = 0;
  std::size_t candidate = 0;  // 0 is the global image, c ≥ 1 is crop c−1
  double similarity = 0.0;
  bool operator==(const Selection&) const = default;
};

/// Selection rule over an M × (1 + N) cosine table whose column 0 is the
/// global image: each sentence takes its best column (lowest column on
/// ties), then the best sentence wins (lowest sentence on ties). Returns
/// nothing when the winner is the global image or there are no crops.
std::optional<Selection> select_local_pair(const std::vector<std::vector<double>>& similarity);

struct LismOptions {
  double expand_frac = kDefaultExpandFrac;
};

std::optional<LocalPair> lism_match(const Embedder& embedder, const SampleRecord& sample,
                                    const Image& image, std::size_t encoder_side,
                                    const LismOptions& options = {});

/// Runs lism_match over a dataset (in parallel); one optional pair per record.
std::vector<std::optional<LocalPair>> lism_match_dataset(const Embedder& embedder,
                                                         const Dataset& dataset,
                                                         std::size_t encoder_side,
                                                         const LismOptions& options = {});

// pairs.jsonl
std::string pair_to_json(const LocalPair& pair);
LocalPair pair_from_json(std::string_view line);
void write_pairs(const std::filesystem::path& path, const std::vector<LocalPair>& pairs);
std::vector<LocalPair> read_pairs(const std::filesystem::path& path);

/// Checks every pair against its sample; throws ValidationError.
void validate_pairs(const Dataset& dataset, const std::vector<LocalPair>& pairs);

// ---------------------------------------------------------------------------
// Global-local joint test set

struct TextItem {
  std::string id;
  std::string sample_id;
  std::string text;
};

struct ImageItem {
  std::string id;
  std::string sample_id;
  std::optional<BBox> crop;  // none: the global image
};

struct JointTestSet {
  std::vector<TextItem> texts;
  std::vector<ImageItem> images;
  RelevanceJudgments text_to_image;
  RelevanceJudgments image_to_text;
};

/// Item id of a sample's local crop / sentence.
std::string local_item_id(const std::string& sample_id);

/// Original items plus one local image and one local text per pair. Every
/// query's correct answers are all items of its sample on the other side.
JointTestSet build_joint_test_set(const Dataset& dataset, const std::vector<LocalPair>& pairs);
JointTestSet build_joint_test_set(const Embedder& embedder, const Dataset& dataset,
                                  std::size_t encoder_side, const LismOptions& options = {});

}  // namespace goal

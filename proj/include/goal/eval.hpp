#pragma once

// Retrieval evaluation: CLS embedding dumps, Recall@K on the original test
// set and mAP@K on the global-local joint test set.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "goal/data.hpp"
#include "goal/encoders.hpp"
#include "goal/lism.hpp"
#include "goal/retrieval.hpp"

namespace goal {

enum class EvalMode { original, joint };
std::string eval_mode_name(EvalMode mode);
EvalMode parse_eval_mode(std::string_view name);

inline const std::vector<std::size_t> kRecallKs = {1, 5, 25, 50};
inline constexpr std::size_t kJointMapK = 10;

/// l2-normalized CLS embeddings, in input order.
EmbeddingSet embed_texts(const Model& model, const std::vector<std::string>& ids,
                         const std::vector<std::string>& texts);
EmbeddingSet embed_images(const Model& model, const std::vector<std::string>& ids,
                          const std::vector<Image>& images);

/// Writes the GEMB file and its id sidecar.
void embed_corpus(const std::filesystem::path& path, const EmbeddingSet& embeddings);

struct Report {
  EvalMode mode = EvalMode::original;
  std::vector<std::pair<std::string, double>> metrics;  // column order
  double get(const std::string& column) const;
};

/// Original mode: T2I/I2T Recall@{1,5,25,50}, one caption and one image
/// per sample. Joint mode: T2I/I2T mAP@10 on the set built from `pairs`
/// (required; ValidationError when absent).
Report evaluate(const Model& model, const Dataset& test, EvalMode mode,
                const std::optional<std::vector<LocalPair>>& pairs = std::nullopt);

/// Metrics from precomputed embeddings; the model-free core of evaluate().
Report original_report(const EmbeddingSet& texts, const EmbeddingSet& images);
Report joint_report(const EmbeddingSet& texts, const EmbeddingSet& images,
                    const JointTestSet& set);

std::string report_csv(const Report& report);
std::string format_metric(double value);

}  // namespace goal

#pragma once

// Toy CLIP-style dual encoder: a patch-token vision transformer and a
// bidirectional text transformer sharing width d_model, plus the two token
// projection maps and the contrastive logit scale.

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "goal/autodiff.hpp"
#include "goal/image.hpp"
#include "goal/tokenizer.hpp"

namespace goal {

struct EncoderConfig {
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t image_side = 64;
  std::size_t patch_size = 8;
  std::size_t base_context = 77;
  std::size_t extended_context = 308;
  std::size_t vocab_size = 0;

  std::size_t grid() const { return image_side / patch_size; }
  std::size_t n_patches() const { return grid() * grid(); }
  std::size_t patch_dim() const { return patch_size * patch_size * 3; }
  std::size_t head_dim() const { return d_model / n_heads; }
  std::size_t mlp_dim() const { return 4 * d_model; }

  /// Throws ValidationError on inconsistent sizes.
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

/// Named parameter tensors in a fixed manifest order.
class ParamStore {
 public:
  void add(std::string name, Tensor value);
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_[i].first; }
  const Tensor& at(std::size_t i) const { return entries_[i].second; }
  Tensor& at(std::size_t i) { return entries_[i].second; }
  std::size_t total_elements() const;
  bool operator==(const ParamStore& other) const { return entries_ == other.entries_; }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// A complete model: configuration, vocabulary, init seed and parameters.
struct Model {
  EncoderConfig config;
  Vocabulary vocab;
  std::uint64_t seed = 0;
  ParamStore params;
};

inline constexpr double kEmbeddingInitStd = 0.02;
/// ln(1/0.07)
inline constexpr double kInitLogitScale = 2.6592600369327779;
/// ln(100)
inline constexpr double kMaxLogitScale = 4.6051701859880914;

/// Ordered (name, shape) list fixed by the config.
std::vector<std::pair<std::string, Shape>> parameter_manifest(const EncoderConfig& config);

/// Fresh model: uniform(±1/√fan_in) for linear maps, N(0, 0.02) for
/// embeddings, unit/zero layer norms, logit scale ln(1/0.07).
Model init_model(EncoderConfig config, Vocabulary vocab, std::uint64_t seed);

/// Parameters placed on a tape.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParamStore& params, bool requires_grad);
  /// Adopts existing leaves, one per entry of `params` in manifest order.
  BoundParams(const ParamStore& params, std::span<const Var> vars);
  Var operator[](const std::string& name) const;
  Tape& tape() const { return *tape_; }
  /// Gradients after tape.backward(), in manifest order.
  std::vector<Tensor> gradients() const;

 private:
  Tape* tape_;
  std::vector<Var> vars_;
  const ParamStore* params_;
};

struct EncodedVars {
  Var cls;     // [d]
  Var tokens;  // T×d
};

struct EncoderOutput {
  Tensor cls;
  Tensor tokens;
  std::vector<CharSpan> token_char_spans;  // text only
};

/// Attention probabilities of every layer/head, for inspection in tests.
using AttentionTrace = std::vector<Tensor>;

/// Pixel patches as a constant N×(p·p·3) matrix; values are bytes/255.
Tensor image_patches(const Image& image, const EncoderConfig& config);

/// Patch embeddings before the transformer (N×d).
Var embed_patches(const BoundParams& p, const EncoderConfig& config, const Image& image);

EncodedVars encode_image(const BoundParams& p, const EncoderConfig& config, const Image& image,
                         AttentionTrace* trace = nullptr);
EncodedVars encode_text(const BoundParams& p, const EncoderConfig& config,
                        const std::vector<int>& ids, AttentionTrace* trace = nullptr);

/// Inference helpers on a private non-recording tape.
EncoderOutput encode_image(const Model& model, const Image& image);
EncoderOutput encode_text(const Model& model, const TokenizedText& text);
EncoderOutput encode_text(const Model& model, std::string_view text);

/// Linear resampling of a base_context×d table to target_len rows: row j
/// blends input rows around j·(base−1)/(target−1). Endpoints are exact.
Tensor interpolate_positional_embeddings(const Tensor& table, std::size_t target_len);
/// First `rows` rows of the interpolated table, differentiable w.r.t. `table`.
Var interpolated_positions(Var table, std::size_t target_len, std::size_t rows);

}  // namespace goal

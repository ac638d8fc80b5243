#include "goal/encoders.hpp"

#include <cmath>
#include <memory>
#include <random>

#include "goal/error.hpp"

namespace goal {

void EncoderConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("encoder config: " + msg); };
  if (d_model == 0 || n_layers == 0 || n_heads == 0) fail("zero-sized dimension");
  if (patch_size == 0 || image_side % patch_size != 0)
    fail("image_side must be divisible by patch_size");
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (base_context < 2) fail("base_context must be at least 2");
  if (extended_context < base_context) fail("extended_context must be >= base_context");
  if (vocab_size < 4) fail("vocabulary must contain the special tokens");
}

// ---------------------------------------------------------------------------
// ParamStore

void ParamStore::add(std::string name, Tensor value) {
  if (index_.count(name)) throw ContractError("duplicate parameter " + name);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
}

std::size_t ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const { return entries_[index_of(name)].second; }
Tensor& ParamStore::get(const std::string& name) { return entries_[index_of(name)].second; }

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

// ---------------------------------------------------------------------------
// Manifest and init

namespace {

void block_manifest(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix,
                    const EncoderConfig& c) {
  const std::size_t d = c.d_model, h = c.mlp_dim();
  out.push_back({prefix + ".ln1.g", {d}});
  out.push_back({prefix + ".ln1.b", {d}});
  out.push_back({prefix + ".attn.qkv.w", {d, 3 * d}});
  out.push_back({prefix + ".attn.qkv.b", {3 * d}});
  out.push_back({prefix + ".attn.out.w", {d, d}});
  out.push_back({prefix + ".attn.out.b", {d}});
  out.push_back({prefix + ".ln2.g", {d}});
  out.push_back({prefix + ".ln2.b", {d}});
  out.push_back({prefix + ".mlp.fc1.w", {d, h}});
  out.push_back({prefix + ".mlp.fc1.b", {h}});
  out.push_back({prefix + ".mlp.fc2.w", {h, d}});
  out.push_back({prefix + ".mlp.fc2.b", {d}});
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<std::pair<std::string, Shape>> parameter_manifest(const EncoderConfig& c) {
  const std::size_t d = c.d_model;
  std::vector<std::pair<std::string, Shape>> m;
  m.push_back({"vision.patch.w", {c.patch_dim(), d}});
  m.push_back({"vision.patch.b", {d}});
  m.push_back({"vision.cls", {d}});
  m.push_back({"vision.pos", {c.n_patches() + 1, d}});
  for (std::size_t l = 0; l < c.n_layers; ++l) block_manifest(m, "vision.block" + std::to_string(l), c);
  m.push_back({"vision.ln_post.g", {d}});
  m.push_back({"vision.ln_post.b", {d}});
  m.push_back({"text.token_embedding", {c.vocab_size, d}});
  m.push_back({"text.pos", {c.base_context, d}});
  for (std::size_t l = 0; l < c.n_layers; ++l) block_manifest(m, "text.block" + std::to_string(l), c);
  m.push_back({"text.ln_final.g", {d}});
  m.push_back({"text.ln_final.b", {d}});
  m.push_back({"proj.image.w", {d, d}});
  m.push_back({"proj.image.b", {d}});
  m.push_back({"proj.text.w", {d, d}});
  m.push_back({"proj.text.b", {d}});
  m.push_back({"logit_scale", {}});
  return m;
}

Model init_model(EncoderConfig config, Vocabulary vocab, std::uint64_t seed) {
  config.vocab_size = vocab.size();
  config.validate();
  Model model{config, std::move(vocab), seed, {}};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, kEmbeddingInitStd);
  // Fan-in of each linear map, keyed by its weight name.
  std::map<std::string, std::size_t> fan_in;
  for (const auto& [name, shape] : parameter_manifest(config))
    if (ends_with(name, ".w")) fan_in[name.substr(0, name.size() - 2)] = shape[0];

  for (auto& [name, shape] : parameter_manifest(config)) {
    Tensor t(shape);
    if (name == "logit_scale") {
      t[0] = kInitLogitScale;
    } else if (ends_with(name, ".g")) {
      for (double& v : t.data()) v = 1.0;
    } else if (ends_with(name, "ln1.b") || ends_with(name, "ln2.b") ||
               ends_with(name, "ln_post.b") || ends_with(name, "ln_final.b")) {
      // zeros
    } else if (ends_with(name, ".w") || ends_with(name, ".b")) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in.at(name.substr(0, name.size() - 2))));
      std::uniform_real_distribution<double> uniform(-bound, bound);
      for (double& v : t.data()) v = uniform(rng);
    } else {
      for (double& v : t.data()) v = normal(rng);
    }
    model.params.add(name, std::move(t));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Binding

BoundParams::BoundParams(Tape& tape, const ParamStore& params, bool requires_grad)
    : tape_(&tape), params_(&params) {
  vars_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    vars_.push_back(tape.leaf(params.at(i), requires_grad));
}

BoundParams::BoundParams(const ParamStore& params, std::span<const Var> vars)
    : vars_(vars.begin(), vars.end()), params_(&params) {
  if (vars.size() != params.size() || vars.empty())
    throw ContractError("expected " + std::to_string(params.size()) + " parameter vars, got " +
                        std::to_string(vars.size()));
  tape_ = vars.front().tape();
}

Var BoundParams::operator[](const std::string& name) const { return vars_[params_->index_of(name)]; }

std::vector<Tensor> BoundParams::gradients() const {
  std::vector<Tensor> out;
  out.reserve(vars_.size());
  for (Var v : vars_) out.push_back(tape_->grad(v));
  return out;
}

// ---------------------------------------------------------------------------
// Transformer

namespace {

Var attention(const BoundParams& p, const std::string& prefix, const EncoderConfig& c, Var x,
              std::span<const bool> key_mask, AttentionTrace* trace) {
  const std::size_t d = c.d_model, dh = c.head_dim();
  Var qkv = linear(x, p[prefix + ".attn.qkv.w"], p[prefix + ".attn.qkv.b"]);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  heads.reserve(c.n_heads);
  for (std::size_t h = 0; h < c.n_heads; ++h) {
    Var q = slice_cols(qkv, h * dh, (h + 1) * dh);
    Var k = slice_cols(qkv, d + h * dh, d + (h + 1) * dh);
    Var v = slice_cols(qkv, 2 * d + h * dh, 2 * d + (h + 1) * dh);
    Var probs = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt), key_mask);
    if (trace) trace->push_back(probs.value());
    heads.push_back(matmul(probs, v));
  }
  return linear(concat_cols(heads), p[prefix + ".attn.out.w"], p[prefix + ".attn.out.b"]);
}

Var block(const BoundParams& p, const std::string& prefix, const EncoderConfig& c, Var x,
          std::span<const bool> key_mask, AttentionTrace* trace) {
  Var h = add(x, attention(p, prefix, c,
                           layer_norm(x, p[prefix + ".ln1.g"], p[prefix + ".ln1.b"]), key_mask,
                           trace));
  Var m = layer_norm(h, p[prefix + ".ln2.g"], p[prefix + ".ln2.b"]);
  m = linear(gelu(linear(m, p[prefix + ".mlp.fc1.w"], p[prefix + ".mlp.fc1.b"])),
             p[prefix + ".mlp.fc2.w"], p[prefix + ".mlp.fc2.b"]);
  return add(h, m);
}

}  // namespace

Tensor image_patches(const Image& image, const EncoderConfig& c) {
  if (image.width != c.image_side || image.height != c.image_side)
    throw DimensionError("image is " + std::to_string(image.width) + "×" +
                         std::to_string(image.height) + ", encoder expects " +
                         std::to_string(c.image_side) + "×" + std::to_string(c.image_side));
  const std::size_t g = c.grid(), ps = c.patch_size, dim = c.patch_dim();
  Tensor out({c.n_patches(), dim});
  constexpr double inv255 = 1.0 / 255.0;
  for (std::size_t py = 0; py < g; ++py)
    for (std::size_t px = 0; px < g; ++px) {
      double* dst = out.data().data() + (py * g + px) * dim;
      for (std::size_t y = 0; y < ps; ++y)
        for (std::size_t x = 0; x < ps; ++x) {
          const std::uint8_t* src = image.pixel(px * ps + x, py * ps + y);
          for (std::size_t ch = 0; ch < 3; ++ch) *dst++ = src[ch] * inv255;
        }
    }
  return out;
}

Var embed_patches(const BoundParams& p, const EncoderConfig& c, const Image& image) {
  Var patches = p.tape().constant(image_patches(image, c));
  return linear(patches, p["vision.patch.w"], p["vision.patch.b"]);
}

EncodedVars encode_image(const BoundParams& p, const EncoderConfig& c, const Image& image,
                         AttentionTrace* trace) {
  Var emb = embed_patches(p, c, image);
  Var parts[] = {p["vision.cls"], emb};
  Var x = add(concat_rows(parts), p["vision.pos"]);
  for (std::size_t l = 0; l < c.n_layers; ++l)
    x = block(p, "vision.block" + std::to_string(l), c, x, {}, trace);
  x = layer_norm(x, p["vision.ln_post.g"], p["vision.ln_post.b"]);
  return {row(x, 0), slice_rows(x, 1, c.n_patches() + 1)};
}

EncodedVars encode_text(const BoundParams& p, const EncoderConfig& c, const std::vector<int>& ids,
                        AttentionTrace* trace) {
  if (ids.size() > c.extended_context)
    throw ContractError("text of " + std::to_string(ids.size()) + " tokens exceeds context " +
                        std::to_string(c.extended_context));
  std::size_t end_pos = ids.size();
  std::vector<std::size_t> rows(ids.size());
  std::unique_ptr<bool[]> keep(new bool[ids.size()]);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= c.vocab_size)
      throw ContractError("token id " + std::to_string(ids[i]) + " outside vocabulary");
    rows[i] = static_cast<std::size_t>(ids[i]);
    keep[i] = ids[i] != kPadId;
    if (ids[i] == kEndId && end_pos == ids.size()) end_pos = i;
  }
  if (end_pos == ids.size()) throw ContractError("token sequence has no <end>");
  std::span<const bool> key_mask(keep.get(), ids.size());

  Var x = add(select_rows(p["text.token_embedding"], rows),
              interpolated_positions(p["text.pos"], c.extended_context, ids.size()));
  for (std::size_t l = 0; l < c.n_layers; ++l)
    x = block(p, "text.block" + std::to_string(l), c, x, key_mask, trace);
  x = layer_norm(x, p["text.ln_final.g"], p["text.ln_final.b"]);
  return {row(x, end_pos), x};
}

EncoderOutput encode_image(const Model& model, const Image& image) {
  Tape tape(false);
  BoundParams p(tape, model.params, false);
  auto out = encode_image(p, model.config, image);
  return {out.cls.value(), out.tokens.value(), {}};
}

EncoderOutput encode_text(const Model& model, const TokenizedText& text) {
  Tape tape(false);
  BoundParams p(tape, model.params, false);
  auto out = encode_text(p, model.config, text.ids);
  return {out.cls.value(), out.tokens.value(), text.spans};
}

EncoderOutput encode_text(const Model& model, std::string_view text) {
  return encode_text(model, tokenize(text, model.vocab, model.config.extended_context, false));
}

// ---------------------------------------------------------------------------
// Positional interpolation

namespace {

// Row-blend weights for the first `rows` outputs of a base→target resample.
Tensor interpolation_matrix(std::size_t base, std::size_t target, std::size_t rows) {
  Tensor w({rows, base});
  for (std::size_t j = 0; j < rows; ++j) {
    if (target == 1) {
      w.at(j, 0) = 1.0;
      continue;
    }
    // Integer arithmetic keeps integral positions exact.
    const std::size_t num = j * (base - 1);
    const std::size_t lo = num / (target - 1);
    const double frac = static_cast<double>(num % (target - 1)) / static_cast<double>(target - 1);
    w.at(j, lo) += 1.0 - frac;
    if (frac > 0.0) w.at(j, lo + 1) += frac;
  }
  return w;
}

}  // namespace

Var interpolated_positions(Var table, std::size_t target_len, std::size_t rows) {
  const std::size_t base = table.rows();
  if (target_len < base)
    throw ContractError("positional interpolation target " + std::to_string(target_len) +
                        " is shorter than the base table (" + std::to_string(base) + ")");
  if (rows > target_len) throw ContractError("requested more positions than the target length");
  return matmul(table.tape()->constant(interpolation_matrix(base, target_len, rows)), table);
}

Tensor interpolate_positional_embeddings(const Tensor& table, std::size_t target_len) {
  if (table.rank() != 2) throw DimensionError("positional table must be a matrix");
  const std::size_t base = table.rows(), d = table.cols();
  if (target_len < base)
    throw ContractError("positional interpolation target " + std::to_string(target_len) +
                        " is shorter than the base table (" + std::to_string(base) + ")");
  Tensor out({target_len, d});
  for (std::size_t j = 0; j < target_len; ++j) {
    const std::size_t num = j * (base - 1);
    const std::size_t lo = target_len == 1 ? 0 : num / (target_len - 1);
    const double frac = target_len == 1 ? 0.0
                                        : static_cast<double>(num % (target_len - 1)) /
                                              static_cast<double>(target_len - 1);
    for (std::size_t k = 0; k < d; ++k) {
      out.at(j, k) = frac == 0.0 ? table.at(lo, k)
                                 : (1.0 - frac) * table.at(lo, k) + frac * table.at(lo + 1, k);
    }
  }
  return out;
}

}  // namespace goal

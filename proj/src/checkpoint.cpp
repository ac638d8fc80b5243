#include "goal/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "goal/error.hpp"
#include "goal/io_util.hpp"
#include "json.hpp"

namespace goal {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void append_f64_le(std::string& out, std::span<const double> values) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  const std::size_t start = out.size();
  out.resize(start + values.size() * 8);
  char* dst = out.data() + start;
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) *dst++ = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
}

void read_f64_le(std::string_view bytes, std::span<double> out) {
  if (bytes.size() != out.size() * 8) throw ContractError("f64 blob size mismatch");
  const auto* src = reinterpret_cast<const unsigned char*>(bytes.data());
  for (double& v : out) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(src[b]) << (8 * b);
    v = std::bit_cast<double>(bits);
    src += 8;
  }
}

namespace {

json config_json(const EncoderConfig& c) {
  return json{{"d_model", c.d_model},       {"n_layers", c.n_layers},
              {"n_heads", c.n_heads},       {"image_side", c.image_side},
              {"patch_size", c.patch_size}, {"base_context", c.base_context},
              {"extended_context", c.extended_context}, {"vocab_size", c.vocab_size}};
}

EncoderConfig config_from_json(const json& j) {
  EncoderConfig c;
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.image_side = j.at("image_side").get<std::size_t>();
  c.patch_size = j.at("patch_size").get<std::size_t>();
  c.base_context = j.at("base_context").get<std::size_t>();
  c.extended_context = j.at("extended_context").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  return c;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const Model& model) {
  json params = json::array();
  std::string blob;
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    params.push_back({{"name", model.params.name(i)},
                      {"shape", model.params.at(i).shape()},
                      {"offset", blob.size()}});
    append_f64_le(blob, model.params.at(i).data());
  }
  json manifest{{"format", "goal-checkpoint-v1"},
                {"config", config_json(model.config)},
                {"seed", model.seed},
                {"vocab", model.vocab.tokens()},
                {"params", std::move(params)}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  write_file(dir / "params.f64", blob);
}

Model load_checkpoint(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) throw IoError("no checkpoint manifest in " + dir.string());
  const std::string text = read_file(dir / "manifest.json");
  const std::string blob = read_file(dir / "params.f64");
  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what(), e.byte);
  }
  try {
    Model model;
    model.config = config_from_json(manifest.at("config"));
    model.seed = manifest.at("seed").get<std::uint64_t>();
    auto tokens = manifest.at("vocab").get<std::vector<std::string>>();
    if (tokens.size() < 4) throw ValidationError("checkpoint vocabulary lacks special tokens");
    model.vocab = Vocabulary(std::vector<std::string>(tokens.begin() + 4, tokens.end()));
    if (model.vocab.tokens() != tokens) throw ValidationError("checkpoint vocabulary is malformed");
    model.config.validate();

    const auto expected = parameter_manifest(model.config);
    const json& entries = manifest.at("params");
    if (entries.size() != expected.size())
      throw ValidationError("checkpoint lists " + std::to_string(entries.size()) +
                            " parameters, config implies " + std::to_string(expected.size()));
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto name = entries[i].at("name").get<std::string>();
      const auto shape = entries[i].at("shape").get<Shape>();
      const auto offset = entries[i].at("offset").get<std::size_t>();
      if (name != expected[i].first || shape != expected[i].second)
        throw ValidationError("checkpoint parameter " + std::to_string(i) + " is " + name + " " +
                              shape_string(shape) + ", expected " + expected[i].first + " " +
                              shape_string(expected[i].second));
      if (offset != cursor) throw ParseError("parameter " + name + " offset mismatch", offset);
      const std::size_t n = shape_size(shape);
      if (offset + n * 8 > blob.size())
        throw ParseError("params.f64 truncated: expected at least " +
                             std::to_string(offset + n * 8) + " bytes, got " +
                             std::to_string(blob.size()),
                         blob.size());
      Tensor t(shape);
      read_f64_le(std::string_view(blob).substr(offset, n * 8), t.data());
      model.params.add(name, std::move(t));
      cursor = offset + n * 8;
    }
    if (cursor != blob.size())
      throw ParseError("params.f64 has " + std::to_string(blob.size() - cursor) + " trailing bytes",
                       cursor);
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint manifest schema: ") + e.what());
  }
}

}  // namespace goal

#include "goal/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "goal/checkpoint.hpp"
#include "goal/error.hpp"
#include "goal/io_util.hpp"
#include "json.hpp"

namespace goal {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// SegmentMask

SegmentMask::SegmentMask(std::size_t side, std::vector<std::uint8_t> bits)
    : side_(side), bits_(std::move(bits)) {
  if (bits_.size() != side_ * side_)
    throw DimensionError("mask of side " + std::to_string(side_) + " needs " +
                         std::to_string(side_ * side_) + " cells, got " +
                         std::to_string(bits_.size()));
  for (auto& b : bits_) {
    b = b ? 1 : 0;
    popcount_ += b;
  }
  area_fraction_ = side_ ? static_cast<double>(popcount_) / static_cast<double>(side_ * side_) : 0.0;
}

std::string SegmentMask::to_rle() const {
  std::string out;
  std::size_t i = 0;
  while (i < bits_.size()) {
    const std::uint8_t v = bits_[i];
    std::size_t run = 0;
    while (i < bits_.size() && bits_[i] == v) {
      ++run;
      ++i;
    }
    if (!out.empty()) out.push_back(',');
    out += std::to_string(v) + ":" + std::to_string(run);
  }
  return out;
}

SegmentMask SegmentMask::from_rle(std::string_view rle, std::size_t side) {
  std::vector<std::uint8_t> bits;
  bits.reserve(side * side);
  std::size_t pos = 0;
  while (pos < rle.size()) {
    const std::size_t start = pos;
    if (rle[pos] != '0' && rle[pos] != '1') throw ParseError("RLE value must be 0 or 1", start);
    const std::uint8_t v = static_cast<std::uint8_t>(rle[pos] - '0');
    ++pos;
    if (pos >= rle.size() || rle[pos] != ':') throw ParseError("RLE expects ':' after value", pos);
    ++pos;
    std::size_t run = 0, digits = 0;
    while (pos < rle.size() && rle[pos] >= '0' && rle[pos] <= '9') {
      run = run * 10 + static_cast<std::size_t>(rle[pos] - '0');
      ++pos;
      ++digits;
      if (run > side * side) throw ParseError("RLE run exceeds mask size", start);
    }
    if (digits == 0 || run == 0) throw ParseError("RLE run length must be positive", start);
    if (bits.size() + run > side * side) throw ParseError("RLE covers more than the mask", start);
    bits.insert(bits.end(), run, v);
    if (pos < rle.size()) {
      if (rle[pos] != ',') throw ParseError("RLE expects ',' between runs", pos);
      ++pos;
    }
  }
  if (bits.size() != side * side)
    throw ParseError("RLE covers " + std::to_string(bits.size()) + " of " +
                         std::to_string(side * side) + " cells",
                     rle.size());
  return SegmentMask(side, std::move(bits));
}

// ---------------------------------------------------------------------------
// Records

void validate_record(const SampleRecord& r) {
  auto fail = [&](const std::string& msg) { throw ValidationError("sample " + r.id + ": " + msg); };
  if (r.id.empty()) throw ValidationError("sample without id");
  for (const auto& s : r.segments)
    if (s.side() != r.image_side) fail("segment side differs from image_side");
  std::size_t prev_end = 0;
  for (const auto& span : r.sentence_spans) {
    if (span.begin >= span.end || span.end > r.caption.size() || span.begin < prev_end)
      fail("sentence spans must be non-empty, ordered and inside the caption");
    prev_end = span.end;
  }
  for (const auto& [seg, sent] : r.gt_links)
    if (seg >= r.segments.size() || sent >= r.sentence_spans.size())
      fail("gt_link references a missing segment or sentence");
}

std::string record_to_json(const SampleRecord& r) {
  json segments = json::array();
  for (const auto& s : r.segments)
    segments.push_back({{"rle", s.to_rle()}, {"area_fraction", s.area_fraction()}});
  json spans = json::array();
  for (const auto& s : r.sentence_spans) spans.push_back({s.begin, s.end});
  json links = json::array();
  for (const auto& [a, b] : r.gt_links) links.push_back({a, b});
  json j{{"id", r.id},
         {"image_path", r.image_path},
         {"image_side", r.image_side},
         {"caption", r.caption},
         {"segments", std::move(segments)},
         {"sentence_spans", std::move(spans)},
         {"gt_links", std::move(links)}};
  return j.dump();
}

SampleRecord record_from_json(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("dataset record: ") + e.what(), e.byte);
  }
  try {
    SampleRecord r;
    r.id = j.at("id").get<std::string>();
    r.image_path = j.at("image_path").get<std::string>();
    r.image_side = j.at("image_side").get<std::size_t>();
    r.caption = j.at("caption").get<std::string>();
    for (const auto& s : j.at("segments")) {
      auto mask = SegmentMask::from_rle(s.at("rle").get<std::string>(), r.image_side);
      const double stated = s.at("area_fraction").get<double>();
      if (std::abs(stated - mask.area_fraction()) > 1e-12)
        throw ValidationError("sample " + r.id + ": area_fraction disagrees with its mask");
      r.segments.push_back(std::move(mask));
    }
    for (const auto& s : j.at("sentence_spans"))
      r.sentence_spans.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
    if (j.contains("gt_links"))
      for (const auto& l : j.at("gt_links"))
        r.gt_links.emplace_back(l.at(0).get<std::size_t>(), l.at(1).get<std::size_t>());
    validate_record(r);
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("dataset record schema: ") + e.what());
  }
}

void write_dataset_jsonl(const fs::path& path, const std::vector<SampleRecord>& records) {
  std::string out;
  for (const auto& r : records) out += record_to_json(r) + "\n";
  write_file(path, out);
}

std::vector<SampleRecord> read_dataset_jsonl(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<SampleRecord> records;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string_view line(text.data() + pos, nl - pos);
    if (!line.empty()) {
      try {
        records.push_back(record_from_json(line));
      } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), pos + e.offset());
      }
    }
    pos = nl + 1;
  }
  return records;
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "dataset.jsonl")) throw IoError("no dataset.jsonl in " + dir.string());
  return Dataset{dir, read_dataset_jsonl(dir / "dataset.jsonl")};
}

Image Dataset::load_image(const SampleRecord& record) const {
  Image img = read_ppm(root / record.image_path);
  if (img.width != record.image_side || img.height != record.image_side)
    throw ValidationError("image " + record.image_path + " does not match image_side");
  return img;
}

const SampleRecord* Dataset::find(const std::string& id) const {
  for (const auto& r : records)
    if (r.id == id) return &r;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Caption utilities

std::vector<CharSpan> split_sentences(std::string_view text) {
  std::vector<CharSpan> out;
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  auto push = [&](std::size_t b, std::size_t e) {
    while (b < e && is_space(text[b])) ++b;
    while (e > b && is_space(text[e - 1])) --e;
    if (b < e) out.push_back({b, e});
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || is_space(text[i + 1]))) {
      push(start, i + 1);
      start = i + 1;
    }
  }
  push(start, text.size());
  return out;
}

BBox mask_to_bbox(const SegmentMask& mask, double expand_frac) {
  if (mask.popcount() == 0) throw ContractError("bounding box of an empty mask");
  const int side = static_cast<int>(mask.side());
  int x1 = side, y1 = side, x2 = 0, y2 = 0;
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      if (mask.get(static_cast<std::size_t>(x), static_cast<std::size_t>(y))) {
        x1 = std::min(x1, x);
        y1 = std::min(y1, y);
        x2 = std::max(x2, x + 1);
        y2 = std::max(y2, y + 1);
      }
  const int ex = static_cast<int>(std::floor(expand_frac * (x2 - x1) + 0.5));
  const int ey = static_cast<int>(std::floor(expand_frac * (y2 - y1) + 0.5));
  return {std::max(0, x1 - ex), std::max(0, y1 - ey), std::min(side, x2 + ex),
          std::min(side, y2 + ey)};
}

// ---------------------------------------------------------------------------
// Generator

namespace {

struct Color {
  const char* name;
  std::array<std::uint8_t, 3> rgb;
};

const Color kShapeColors[] = {
    {"red", {220, 40, 40}},     {"green", {40, 180, 60}},   {"blue", {40, 70, 220}},
    {"yellow", {230, 215, 40}}, {"purple", {140, 50, 180}}, {"orange", {245, 140, 25}},
    {"white", {245, 245, 245}}, {"cyan", {40, 210, 215}},
};
const Color kBackgrounds[] = {{"black", {15, 15, 15}}, {"gray", {110, 110, 110}},
                              {"brown", {95, 62, 35}}};
const char* const kKinds[] = {"circle", "square", "triangle"};
const char* const kSizes[] = {"small", "medium", "large"};
// Half-extent in pixels at image_side 64; scaled linearly for other sides.
const double kRadius64[] = {5.0, 7.0, 9.0};
const char* const kPositions[] = {"top left",    "top center",    "top right",
                                  "middle left", "center",        "middle right",
                                  "bottom left", "bottom center", "bottom right"};
const char* const kCounts[] = {"zero", "one", "two", "three", "four", "five",
                               "six",  "seven", "eight", "nine"};

bool inside(int kind, double dx, double dy, double r) {
  switch (kind) {
    case 0: return dx * dx + dy * dy <= r * r;
    case 1: return std::abs(dx) <= r && std::abs(dy) <= r;
    default:  // apex up, base width 2r
      return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) / 2.0;
  }
}

}  // namespace

const std::vector<std::string>& color_words() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> w;
    for (const auto& c : kShapeColors) w.emplace_back(c.name);
    return w;
  }();
  return words;
}

const std::vector<std::string>& shape_words() {
  static const std::vector<std::string> words(std::begin(kKinds), std::end(kKinds));
  return words;
}

GeneratedSample generate_sample(std::uint64_t seed, std::size_t index, const GeneratorOptions& opt) {
  if (opt.min_shapes < 1 || opt.max_shapes < opt.min_shapes || opt.max_shapes > 8)
    throw ValidationError("shape count range must lie within 1..8");
  if (opt.image_side < 32) throw ValidationError("generator needs image_side >= 32");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  const std::size_t side = opt.image_side;
  const double cell = static_cast<double>(side) / 3.0;
  const double unit = static_cast<double>(side) / 64.0;
  const std::size_t n_shapes = opt.min_shapes + pick(opt.max_shapes - opt.min_shapes + 1);

  std::array<std::size_t, 9> cells{0, 1, 2, 3, 4, 5, 6, 7, 8};
  std::array<std::size_t, 8> colors{0, 1, 2, 3, 4, 5, 6, 7};
  std::shuffle(cells.begin(), cells.end(), rng);
  std::shuffle(colors.begin(), colors.end(), rng);
  const Color& bg = kBackgrounds[pick(3)];

  GeneratedSample out;
  Image& img = out.image;
  img = Image(side, side);
  for (std::size_t i = 0; i < side * side; ++i)
    std::copy(bg.rgb.begin(), bg.rgb.end(), img.rgb.begin() + static_cast<std::ptrdiff_t>(i * 3));
  std::vector<int> label(side * side, -1);

  std::vector<std::string> sentences;
  std::vector<int> sentence_owner;  // shape index, or -1 for the scene sentence
  for (std::size_t s = 0; s < n_shapes; ++s) {
    const std::size_t kind = pick(3), size = pick(3), pos = cells[s];
    const Color& color = kShapeColors[colors[s]];
    const double r = kRadius64[size] * unit;
    const double jx = static_cast<double>(static_cast<int>(pick(3)) - 1) * unit;
    const double jy = static_cast<double>(static_cast<int>(pick(3)) - 1) * unit;
    const double cx = std::clamp((static_cast<double>(pos % 3) + 0.5) * cell + jx, r, side - r);
    const double cy = std::clamp((static_cast<double>(pos / 3) + 0.5) * cell + jy, r, side - r);
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) {
        if (!inside(static_cast<int>(kind), static_cast<double>(x) + 0.5 - cx,
                    static_cast<double>(y) + 0.5 - cy, r))
          continue;
        if (label[y * side + x] != -1) throw StateError("generated shapes overlap");
        label[y * side + x] = static_cast<int>(s);
        std::copy(color.rgb.begin(), color.rgb.end(), img.pixel(x, y));
      }
    const bool alt = pick(2) == 1;
    std::string sentence = alt ? std::string("There is a ") + kSizes[size] + " " + color.name +
                                     " " + kKinds[kind] + " in the " + kPositions[pos] + "."
                               : std::string("A ") + kSizes[size] + " " + color.name + " " +
                                     kKinds[kind] + " sits in the " + kPositions[pos] + ".";
    sentences.push_back(std::move(sentence));
    sentence_owner.push_back(static_cast<int>(s));
  }
  sentences.push_back(std::string("The scene shows ") + kCounts[n_shapes] + " shapes on a " +
                      bg.name + " background.");
  sentence_owner.push_back(-1);

  std::vector<std::size_t> order(sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  SampleRecord& rec = out.record;
  char id[48];
  std::snprintf(id, sizeof id, "%llu-%05zu", static_cast<unsigned long long>(seed), index);
  rec.id = id;
  rec.image_path = "images/" + rec.id + ".ppm";
  rec.image_side = side;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k) rec.caption += ' ';
    const std::size_t begin = rec.caption.size();
    rec.caption += sentences[order[k]];
    rec.sentence_spans.push_back({begin, rec.caption.size()});
    if (sentence_owner[order[k]] >= 0)
      rec.gt_links.emplace_back(static_cast<std::size_t>(sentence_owner[order[k]]), k);
  }
  std::sort(rec.gt_links.begin(), rec.gt_links.end());

  std::vector<std::uint8_t> background(side * side);
  for (std::size_t s = 0; s < n_shapes; ++s) {
    std::vector<std::uint8_t> bits(side * side);
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = label[i] == static_cast<int>(s);
    rec.segments.emplace_back(side, std::move(bits));
  }
  for (std::size_t i = 0; i < background.size(); ++i) background[i] = label[i] == -1;
  rec.segments.emplace_back(side, std::move(background));

  if (split_sentences(rec.caption) != rec.sentence_spans)
    throw StateError("generated caption does not split into its own sentences");
  validate_record(rec);
  return out;
}

Dataset generate_dataset(std::uint64_t seed, std::size_t n_samples, const fs::path& out_dir,
                         const GeneratorOptions& options) {
  if (n_samples < 1) throw ValidationError("n_samples must be at least 1");
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());
  Dataset ds{out_dir, {}};
  for (std::size_t i = 0; i < n_samples; ++i) {
    GeneratedSample s = generate_sample(seed, i, options);
    write_ppm(out_dir / s.record.image_path, s.image);
    ds.records.push_back(std::move(s.record));
  }
  write_dataset_jsonl(out_dir / "dataset.jsonl", ds.records);
  return ds;
}

// ---------------------------------------------------------------------------
// GEMB

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t pos) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + b])) << (8 * b);
  return v;
}

}  // namespace

std::string encode_gemb(const EmbeddingSet& set) {
  const std::size_t count = set.dim ? set.values.size() / set.dim : set.ids.size();
  if (set.dim && set.values.size() != count * set.dim)
    throw DimensionError("embedding values not a multiple of dim");
  std::string out = "GEMB";
  put_u32(out, static_cast<std::uint32_t>(count));
  put_u32(out, static_cast<std::uint32_t>(set.dim));
  append_f64_le(out, set.values);
  return out;
}

EmbeddingSet decode_gemb(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != "GEMB") throw ParseError("bad GEMB magic", 0);
  if (bytes.size() < 12)
    throw ParseError("GEMB header truncated: expected 12 bytes, got " + std::to_string(bytes.size()),
                     bytes.size());
  EmbeddingSet set;
  const std::size_t count = get_u32(bytes, 4);
  set.dim = get_u32(bytes, 8);
  const std::size_t expected = count * set.dim * 8;
  if (bytes.size() - 12 != expected)
    throw ParseError("GEMB payload: expected " + std::to_string(expected) + " bytes, got " +
                         std::to_string(bytes.size() - 12),
                     12);
  set.values.resize(count * set.dim);
  read_f64_le(bytes.substr(12), set.values);
  return set;
}

fs::path ids_sidecar(const fs::path& gemb_path) {
  fs::path p = gemb_path;
  p.replace_extension(".ids.jsonl");
  return p;
}

void write_embeddings(const fs::path& path, const EmbeddingSet& set) {
  if (set.dim && set.ids.size() * set.dim != set.values.size())
    throw DimensionError("embedding ids and values disagree");
  write_file(path, encode_gemb(set));
  std::string ids;
  for (const auto& id : set.ids) ids += json(id).dump() + "\n";
  write_file(ids_sidecar(path), ids);
}

EmbeddingSet read_embeddings(const fs::path& path) {
  EmbeddingSet set = decode_gemb(read_file(path));
  const std::string text = read_file(ids_sidecar(path));
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    try {
      set.ids.push_back(json::parse(line).get<std::string>());
    } catch (const json::exception& e) {
      throw ValidationError("embedding id sidecar: " + std::string(e.what()));
    }
  }
  const std::size_t count = set.dim ? set.values.size() / set.dim : set.ids.size();
  if (set.ids.size() != count)
    throw ValidationError("embedding sidecar lists " + std::to_string(set.ids.size()) +
                          " ids for " + std::to_string(count) + " vectors");
  return set;
}

}  // namespace goal

#include "goal/lism.hpp"

#include <unordered_map>

#include "goal/error.hpp"
#include "goal/io_util.hpp"
#include "goal/parallel.hpp"
#include "json.hpp"

namespace goal {

using json = nlohmann::ordered_json;

std::vector<double> ModelEmbedder::embed_text(std::string_view text) const {
  return encode_text(*model_, text).cls.storage();
}

std::vector<double> ModelEmbedder::embed_image(const Image& image) const {
  return encode_image(*model_, image).cls.storage();
}

std::vector<std::size_t> filter_segments(std::span<const SegmentMask> segments, double min_area) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (segments[i].area_fraction() >= min_area) kept.push_back(i);
  return kept;
}

CandidateSet build_candidates(const SampleRecord& sample, const Image& image, double expand_frac,
                              std::size_t encoder_side) {
  CandidateSet c;
  c.n_sentences = sample.sentence_spans.size();
  c.kept_indices = filter_segments(sample.segments);
  for (std::size_t idx : c.kept_indices) {
    const BBox box = mask_to_bbox(sample.segments[idx], expand_frac);
    c.boxes.push_back(box);
    c.local_images.push_back(crop_and_resize(image, box, encoder_side));
  }
  return c;
}

std::optional<Selection> select_local_pair(const std::vector<std::vector<double>>& sim) {
  if (sim.empty()) throw ContractError("matching needs at least one sentence");
  std::optional<Selection> best;
  for (std::size_t s = 0; s < sim.size(); ++s) {
    if (sim[s].empty()) throw ContractError("similarity row without candidates");
    std::size_t arg = 0;
    for (std::size_t c = 1; c < sim[s].size(); ++c)
      if (sim[s][c] > sim[s][arg]) arg = c;
    if (!best || sim[s][arg] > best->similarity) best = Selection{s, arg, sim[s][arg]};
  }
  if (best->candidate == 0) return std::nullopt;
  return best;
}

std::optional<LocalPair> lism_match(const Embedder& embedder, const SampleRecord& sample,
                                    const Image& image, std::size_t encoder_side,
                                    const LismOptions& options) {
  if (sample.sentence_spans.empty())
    throw ContractError("sample " + sample.id + " has no sentences");
  const CandidateSet cands = build_candidates(sample, image, options.expand_frac, encoder_side);
  if (cands.kept_indices.empty()) return std::nullopt;

  std::vector<std::vector<double>> images;
  images.push_back(embedder.embed_image(image));
  for (const Image& crop : cands.local_images) images.push_back(embedder.embed_image(crop));

  std::vector<std::vector<double>> table;
  for (const CharSpan& span : sample.sentence_spans) {
    const auto text = embedder.embed_text(
        std::string_view(sample.caption).substr(span.begin, span.end - span.begin));
    std::vector<double> row;
    for (const auto& img : images) row.push_back(cosine(text, img));
    table.push_back(std::move(row));
  }
  const auto sel = select_local_pair(table);
  if (!sel) return std::nullopt;
  LocalPair pair;
  pair.sample_id = sample.id;
  pair.bbox = cands.boxes[sel->candidate - 1];
  pair.segment_index = cands.kept_indices[sel->candidate - 1];
  pair.sentence_index = sel->sentence;
  pair.sentence_char_span = sample.sentence_spans[sel->sentence];
  pair.similarity = sel->similarity;
  return pair;
}

std::vector<std::optional<LocalPair>> lism_match_dataset(const Embedder& embedder,
                                                         const Dataset& dataset,
                                                         std::size_t encoder_side,
                                                         const LismOptions& options) {
  std::vector<std::optional<LocalPair>> out(dataset.records.size());
  parallel_for(dataset.records.size(), [&](std::size_t i) {
    const auto& rec = dataset.records[i];
    out[i] = lism_match(embedder, rec, dataset.load_image(rec), encoder_side, options);
  });
  return out;
}

// ---------------------------------------------------------------------------
// pairs.jsonl

std::string pair_to_json(const LocalPair& p) {
  json j{{"sample_id", p.sample_id},
         {"bbox", {p.bbox.x1, p.bbox.y1, p.bbox.x2, p.bbox.y2}},
         {"segment_index", p.segment_index},
         {"sentence_index", p.sentence_index},
         {"sentence_char_span", {p.sentence_char_span.begin, p.sentence_char_span.end}},
         {"similarity", p.similarity}};
  return j.dump();
}

LocalPair pair_from_json(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("pairs record: ") + e.what(), e.byte);
  }
  try {
    LocalPair p;
    p.sample_id = j.at("sample_id").get<std::string>();
    const auto& b = j.at("bbox");
    p.bbox = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
    p.segment_index = j.value("segment_index", std::size_t{0});
    p.sentence_index = j.at("sentence_index").get<std::size_t>();
    const auto& s = j.at("sentence_char_span");
    p.sentence_char_span = {s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()};
    p.similarity = j.at("similarity").get<double>();
    if (!(p.similarity >= -1.0 - 1e-9 && p.similarity <= 1.0 + 1e-9))
      throw ValidationError("pair similarity outside [-1, 1]");
    return p;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("pairs record schema: ") + e.what());
  }
}

void write_pairs(const std::filesystem::path& path, const std::vector<LocalPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) out += pair_to_json(p) + "\n";
  write_file(path, out);
}

std::vector<LocalPair> read_pairs(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<LocalPair> pairs;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    if (nl > pos) {
      try {
        pairs.push_back(pair_from_json(std::string_view(text).substr(pos, nl - pos)));
      } catch (const ParseError& e) {
        throw ParseError(path.string() + ": malformed pairs record", pos + e.offset());
      }
    }
    pos = nl + 1;
  }
  return pairs;
}

void validate_pairs(const Dataset& dataset, const std::vector<LocalPair>& pairs) {
  std::unordered_map<std::string, const SampleRecord*> by_id;
  for (const auto& r : dataset.records) by_id.emplace(r.id, &r);
  std::unordered_map<std::string, int> seen;
  for (const auto& p : pairs) {
    auto it = by_id.find(p.sample_id);
    if (it == by_id.end()) throw ValidationError("pair references unknown sample id " + p.sample_id);
    const SampleRecord& r = *it->second;
    if (++seen[p.sample_id] > 1) throw ValidationError("more than one pair for sample " + p.sample_id);
    if (!bbox_valid(p.bbox, r.image_side, r.image_side))
      throw ValidationError("pair for " + p.sample_id + " has an invalid bbox");
    if (p.sentence_index >= r.sentence_spans.size() ||
        r.sentence_spans[p.sentence_index] != p.sentence_char_span)
      throw ValidationError("pair for " + p.sample_id + " names a sentence the caption lacks");
  }
}

// ---------------------------------------------------------------------------
// Joint test set

std::string local_item_id(const std::string& sample_id) { return sample_id + "#local"; }

JointTestSet build_joint_test_set(const Dataset& dataset, const std::vector<LocalPair>& pairs) {
  if (dataset.records.empty()) throw ValidationError("joint test set needs a non-empty dataset");
  validate_pairs(dataset, pairs);
  std::unordered_map<std::string, const LocalPair*> pair_of;
  for (const auto& p : pairs) pair_of.emplace(p.sample_id, &p);

  JointTestSet set;
  for (const auto& r : dataset.records) {
    std::set<std::string> text_ids{r.id}, image_ids{r.id};
    set.texts.push_back({r.id, r.id, r.caption});
    set.images.push_back({r.id, r.id, std::nullopt});
    if (auto it = pair_of.find(r.id); it != pair_of.end()) {
      const LocalPair& p = *it->second;
      const std::string lid = local_item_id(r.id);
      set.texts.push_back({lid, r.id,
                           r.caption.substr(p.sentence_char_span.begin,
                                            p.sentence_char_span.end - p.sentence_char_span.begin)});
      set.images.push_back({lid, r.id, p.bbox});
      text_ids.insert(lid);
      image_ids.insert(lid);
    }
    for (const auto& t : text_ids) set.text_to_image[t] = image_ids;
    for (const auto& i : image_ids) set.image_to_text[i] = text_ids;
  }
  return set;
}

JointTestSet build_joint_test_set(const Embedder& embedder, const Dataset& dataset,
                                  std::size_t encoder_side, const LismOptions& options) {
  std::vector<LocalPair> pairs;
  for (auto& p : lism_match_dataset(embedder, dataset, encoder_side, options))
    if (p) pairs.push_back(std::move(*p));
  return build_joint_test_set(dataset, pairs);
}

}  // namespace goal

// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. `goal_acceptance 2 3` runs a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "goal/checkpoint.hpp"
#include "goal/error.hpp"
#include "goal/eval.hpp"
#include "goal/io_util.hpp"
#include "goal/lism.hpp"
#include "goal/losses.hpp"
#include "goal/model_gradcheck.hpp"
#include "goal/retrieval.hpp"
#include "goal/trainer.hpp"

using namespace goal;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

fs::path work_root() {
  const fs::path p = fs::temp_directory_path() / "goal_acceptance";
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------
// 1. gradient fidelity

Outcome gradient_fidelity() {
  const TinyProblem problem = make_tiny_problem(7);
  const auto t0 = Clock::now();
  const ModelGradcheckReport r = check_total_loss_gradients(problem);
  const double cpu = seconds_since(t0);
  return {r.result.max_rel_error <= 1e-4 && cpu <= 60.0,
          fmt("max rel err %.3g over %zu entries (worst %s), %.1f s", r.result.max_rel_error,
              r.result.entries_checked, r.worst_parameter.c_str(), cpu)};
}

// ---------------------------------------------------------------------------
// 2. loss identities

Outcome loss_identities() {
  double worst_ce = 0.0;
  for (std::size_t n : {2u, 4u, 8u}) {
    Tape tape(false);
    const Var a = tape.constant(Tensor({n, 3}, std::vector<double>(n * 3, 1.0)));
    const double l = contrastive_loss(a, a, tape.constant(Tensor::scalar(0.0))).value().item();
    worst_ce = std::max(worst_ce, std::abs(l - std::log(static_cast<double>(n))));
  }
  Tape tape(false);
  const Var eye = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  const Var ones = tape.constant(Tensor::matrix({{1, 1}, {1, 1}}));
  const double zero = tsl_loss(eye, eye, eye, eye).value().item();
  const double one = tsl_loss(ones, ones, ones, ones).value().item();
  const bool pass = worst_ce <= 1e-9 && std::abs(zero) <= 1e-12 && std::abs(one - 1.0) <= 1e-12;
  return {pass, fmt("|CE - ln n| %.2g, TSL(identity) %.2g, TSL(ones) %.17g", worst_ce, zero, one)};
}

// ---------------------------------------------------------------------------
// 3. oracle equivalence

// Integer-valued embeddings keyed on content so that exact ties occur.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::uint64_t salt) : salt_(salt) {}
  std::vector<double> embed_text(std::string_view text) const override {
    return vec(fnv1a(text, salt_));
  }
  std::vector<double> embed_image(const Image& image) const override {
    return vec(fnv1a(std::string_view(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size()),
                     salt_ ^ 0x5bd1e995));
  }

 private:
  static std::vector<double> vec(std::uint64_t h) {
    std::vector<double> v(3);
    for (double& x : v) {
      x = static_cast<double>(static_cast<int>(h % 3) - 1);
      h /= 3;
    }
    return v;
  }
  std::uint64_t salt_;
};

// Exhaustive reference: every (sentence, column) cell, lexicographic minimum
// of (−cosine, sentence, column); column 0 is the global image.
std::optional<LocalPair> reference_lism(const Embedder& e, const SampleRecord& r, const Image& img,
                                        std::size_t side) {
  std::vector<std::size_t> kept;
  std::vector<BBox> boxes;
  for (std::size_t i = 0; i < r.segments.size(); ++i)
    if (static_cast<double>(r.segments[i].popcount()) /
            static_cast<double>(r.segments[i].side() * r.segments[i].side()) >=
        0.01) {
      kept.push_back(i);
      boxes.push_back(mask_to_bbox(r.segments[i], kDefaultExpandFrac));
    }
  std::vector<std::vector<double>> cols{e.embed_image(img)};
  for (const BBox& b : boxes) cols.push_back(e.embed_image(crop_and_resize(img, b, side)));
  std::tuple<double, std::size_t, std::size_t> best{2.0, 0, 0};
  for (std::size_t s = 0; s < r.sentence_spans.size(); ++s) {
    const CharSpan sp = r.sentence_spans[s];
    const auto t = e.embed_text(std::string_view(r.caption).substr(sp.begin, sp.end - sp.begin));
    for (std::size_t c = 0; c < cols.size(); ++c)
      best = std::min(best, std::tuple{-cosine(t, cols[c]), s, c});
  }
  const auto [neg, s, c] = best;
  if (c == 0) return std::nullopt;
  return LocalPair{r.id, boxes[c - 1], kept[c - 1], s, r.sentence_spans[s], -neg};
}

std::vector<std::string> reference_ranking(const EmbeddingSet& items, std::span<const double> q) {
  auto norm = [](std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  std::vector<std::pair<double, std::string>> scored;
  for (std::size_t i = 0; i < items.ids.size(); ++i) {
    const auto row = items.row(i);
    double d = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) d += row[j] * q[j];
    scored.emplace_back(-d / (norm(row) * norm(q)), items.ids[i]);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::string> out;
  for (auto& s : scored) out.push_back(s.second);
  return out;
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(31);
  std::size_t lism_n = 0, lism_bad = 0, emitted = 0, max_m = 0, max_n = 0;
  for (std::size_t trial = 0; trial < 600; ++trial) {
    GeneratorOptions g;
    g.image_side = 32;
    g.min_shapes = 1 + rng() % 2;
    g.max_shapes = g.min_shapes + rng() % (6 - g.min_shapes);
    const GeneratedSample s = generate_sample(rng(), trial, g);
    const HashEmbedder e(rng());
    const auto got = lism_match(e, s.record, s.image, g.image_side);
    const auto want = reference_lism(e, s.record, s.image, g.image_side);
    ++lism_n;
    emitted += got.has_value();
    lism_bad += !(got == want);
    max_m = std::max(max_m, s.record.sentence_spans.size());
    max_n = std::max(max_n, s.record.segments.size());
  }

  std::normal_distribution<double> gauss;
  std::size_t metric_n = 0;
  double worst = 0.0;
  for (std::size_t trial = 0; trial < 600; ++trial) {
    const std::size_t n_items = 1 + rng() % 20, n_q = 1 + rng() % 20, dim = 2 + rng() % 3;
    EmbeddingSet items, queries;
    items.dim = queries.dim = dim;
    for (std::size_t i = 0; i < n_items; ++i) {
      items.ids.push_back("i" + std::to_string(rng() % 1000) + "_" + std::to_string(i));
      if (i > 0 && rng() % 4 == 0) {
        const auto prev = items.row(rng() % i);
        const std::vector<double> copy(prev.begin(), prev.end());
        items.values.insert(items.values.end(), copy.begin(), copy.end());
      } else {
        for (std::size_t j = 0; j < dim; ++j) items.values.push_back(gauss(rng));
      }
    }
    RelevanceJudgments judgments;
    for (std::size_t q = 0; q < n_q; ++q) {
      queries.ids.push_back("q" + std::to_string(q));
      for (std::size_t j = 0; j < dim; ++j) queries.values.push_back(gauss(rng));
      auto& rel = judgments[queries.ids.back()];
      while (rel.empty())
        for (const auto& id : items.ids)
          if (rng() % 4 == 0) rel.insert(id);
    }
    const RetrievalIndex index(items);
    for (std::size_t k : {1u, 5u, 10u, 25u}) {
      double recall = 0.0, ap_sum = 0.0;
      for (std::size_t q = 0; q < n_q; ++q) {
        const auto ranking = reference_ranking(items, queries.row(q));
        const auto& rel = judgments.at(queries.ids[q]);
        bool hit = false;
        double ap = 0.0;
        std::size_t found = 0;
        for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i)
          if (rel.count(ranking[i])) {
            hit = true;
            ap += static_cast<double>(++found) / static_cast<double>(i + 1);
          }
        recall += hit;
        ap_sum += ap / static_cast<double>(std::min(rel.size(), k));
      }
      worst = std::max(worst, std::abs(recall_at_k(index, queries, judgments, k) - recall / n_q));
      worst = std::max(worst, std::abs(map_at_k(index, queries, judgments, k) - ap_sum / n_q));
    }
    ++metric_n;
  }
  const bool pass = lism_bad == 0 && lism_n >= 500 && metric_n >= 500 && worst <= 1e-12 &&
                    max_m <= 6 && max_n <= 6 && emitted > 0;
  return {pass, fmt("lism %zu/%zu exact (%zu emitted, M<=%zu, segments<=%zu); metrics %zu "
                    "instances, max diff %.2g",
                    lism_n - lism_bad, lism_n, emitted, max_m, max_n, metric_n, worst)};
}

// ---------------------------------------------------------------------------
// 4-6. ablation pipeline

// Warm start shared by matching and every ablation run.
constexpr std::size_t kWarmEpochs = 20;
constexpr double kWarmLr = 5e-4;
const std::vector<std::uint64_t> kSeeds = {1, 2, 3};

struct SeedResult {
  std::map<Ablation, double> t2i_r1;
  std::map<Ablation, double> joint_map;
  double agreement = 0.0, chance = 0.0;
  std::size_t emitted = 0;
  double seconds = 0.0;
};

std::vector<LocalPair> match_all(const Model& m, const Dataset& d) {
  std::vector<LocalPair> out;
  for (auto& p : lism_match_dataset(ModelEmbedder(m), d, m.config.image_side))
    if (p) out.push_back(*p);
  return out;
}

SeedResult run_seed(std::uint64_t seed) {
  const auto t0 = Clock::now();
  const fs::path dir = work_root() / ("seed" + std::to_string(seed));
  fs::remove_all(dir);
  const Dataset train_set = generate_dataset(seed, 400, dir / "train");
  const Dataset test_set = generate_dataset(seed + 1000, 100, dir / "test");

  TrainConfig warm_cfg;
  warm_cfg.seed = seed;
  warm_cfg.ablation = Ablation::global_only;
  warm_cfg.epochs = kWarmEpochs;
  warm_cfg.learning_rate = kWarmLr;
  const Model warm = train(train_set, {}, warm_cfg, std::nullopt).model;
  const auto train_pairs = match_all(warm, train_set);
  const auto test_pairs = match_all(warm, test_set);

  TrainConfig base;
  base.seed = seed;
  const auto rows =
      run_ablation_suite(train_set, train_pairs, base, warm, test_set, test_pairs, dir / "ablate");

  SeedResult r;
  for (const AblationRow& row : rows) {
    for (const auto& [name, value] : row.metrics) {
      if (name == "T2I_R@1") r.t2i_r1[row.ablation] = value;
      if (name == "T2I_mAP@10") r.joint_map[row.ablation] = value;
    }
  }

  const Model goal_model = load_checkpoint(dir / "ablate" / ablation_name(Ablation::goal));
  double hits = 0.0, chance = 0.0;
  const auto pairs = match_all(goal_model, test_set);
  for (const LocalPair& p : pairs) {
    const SampleRecord& rec = *test_set.find(p.sample_id);
    const std::pair<std::size_t, std::size_t> link{p.segment_index, p.sentence_index};
    hits += std::find(rec.gt_links.begin(), rec.gt_links.end(), link) != rec.gt_links.end();
    chance += 1.0 / static_cast<double>(rec.sentence_spans.size());
  }
  r.emitted = pairs.size();
  if (!pairs.empty()) {
    r.agreement = hits / static_cast<double>(pairs.size());
    r.chance = chance / static_cast<double>(pairs.size());
  }
  r.seconds = seconds_since(t0);
  std::printf("  seed %llu: R@1 global %.2f local %.2f no_tsl %.2f goal %.2f | mAP@10 global "
              "%.4f goal %.4f | LISM agree %.3f chance %.3f (%zu pairs) | %.0f s\n",
              static_cast<unsigned long long>(seed), r.t2i_r1[Ablation::global_only],
              r.t2i_r1[Ablation::local_only], r.t2i_r1[Ablation::no_tsl], r.t2i_r1[Ablation::goal],
              r.joint_map[Ablation::global_only], r.joint_map[Ablation::goal], r.agreement, r.chance,
              r.emitted, r.seconds);
  std::fflush(stdout);
  return r;
}

const std::vector<SeedResult>& pipeline() {
  static const std::vector<SeedResult> results = [] {
    std::vector<SeedResult> out;
    for (std::uint64_t s : kSeeds) out.push_back(run_seed(s));
    return out;
  }();
  return results;
}

double median_of(const std::function<double(const SeedResult&)>& f) {
  std::vector<double> v;
  for (const auto& r : pipeline()) v.push_back(f(r));
  return median3(v);
}

Outcome ablation_direction() {
  auto med = [](Ablation a) { return median_of([a](const SeedResult& r) { return r.t2i_r1.at(a); }); };
  const double g = med(Ablation::goal), n = med(Ablation::no_tsl), l = med(Ablation::local_only),
               gl = med(Ablation::global_only);
  double total = 0.0;
  for (const auto& r : pipeline()) total += r.seconds;
  const bool pass = g >= n && n >= l && g - gl >= 0.02 && total <= 15 * 60;
  return {pass, fmt("median T2I R@1 goal %.3f no_tsl %.3f local_only %.3f global_only %.3f "
                    "(goal - global %+.3f), %.0f s",
                    g, n, l, gl, g - gl, total)};
}

Outcome joint_behavior() {
  const double gain = median_of([](const SeedResult& r) {
    return r.joint_map.at(Ablation::goal) - r.joint_map.at(Ablation::global_only);
  });
  const double goal_map = median_of([](const SeedResult& r) { return r.joint_map.at(Ablation::goal); });
  const double global_map =
      median_of([](const SeedResult& r) { return r.joint_map.at(Ablation::global_only); });
  return {goal_map - global_map >= 0.01,
          fmt("median joint T2I mAP@10 goal %.4f global_only %.4f (median per-seed gain %+.4f)",
              goal_map, global_map, gain)};
}

Outcome lism_quality() {
  const double ratio = median_of([](const SeedResult& r) {
    return r.chance > 0.0 ? r.agreement / r.chance : 0.0;
  });
  const double agree = median_of([](const SeedResult& r) { return r.agreement; });
  return {ratio >= 3.0, fmt("median agreement %.3f, %.2fx chance", agree, ratio)};
}

// ---------------------------------------------------------------------------
// 7. determinism and formats

Outcome determinism_and_formats() {
  const fs::path dir = work_root() / "determinism";
  fs::remove_all(dir);
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  GeneratorOptions small;
  small.image_side = tiny_encoder_config().image_side;
  const Dataset a = generate_dataset(11, 20, dir / "data_a", small);
  const Dataset b = generate_dataset(11, 20, dir / "data_b", small);
  expect(hash_path(dir / "data_a") == hash_path(dir / "data_b"), "dataset");

  std::vector<LocalPair> pairs;
  for (const auto& r : a.records) {
    const auto [seg, sent] = r.gt_links.front();
    pairs.push_back({r.id, mask_to_bbox(r.segments[seg], kDefaultExpandFrac), seg, sent,
                     r.sentence_spans[sent], 0.5});
  }
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 12;
  std::string reports[2];
  for (int i = 0; i < 2; ++i) {
    const TrainResult run = train(a, pairs, cfg, std::nullopt, tiny_encoder_config());
    save_training_run(dir / ("ckpt" + std::to_string(i)), run);
    reports[i] = report_csv(evaluate(run.model, b, EvalMode::original)) +
                 report_csv(evaluate(run.model, b, EvalMode::joint, pairs));
  }
  expect(hash_path(dir / "ckpt0") == hash_path(dir / "ckpt1"), "checkpoint");
  expect(reports[0] == reports[1], "report");

  constexpr std::size_t kN = 1000;
  std::mt19937_64 rng(41);
  std::size_t ppm = 0, rec = 0, rle = 0, gemb = 0, pjson = 0, ckpt = 0;
  for (std::size_t i = 0; i < kN; ++i) {
    Image img(1 + rng() % 40, 1 + rng() % 40);
    for (auto& px : img.rgb) px = static_cast<std::uint8_t>(rng());
    const std::string bytes = encode_ppm(img);
    ppm += decode_ppm(bytes) == img && encode_ppm(decode_ppm(bytes)) == bytes;

    const SampleRecord r = generate_sample(rng(), i, small).record;
    const std::string line = record_to_json(r);
    rec += record_from_json(line) == r && record_to_json(record_from_json(line)) == line;

    const std::size_t side = 1 + rng() % 24;
    std::vector<std::uint8_t> bits(side * side);
    const unsigned density = rng() % 5;
    for (auto& bit : bits) bit = (rng() % 4) < density;
    const SegmentMask m(side, bits);
    rle += SegmentMask::from_rle(m.to_rle(), side) == m;

    EmbeddingSet e;
    e.dim = 1 + rng() % 8;
    const std::size_t count = rng() % 6;
    for (std::size_t k = 0; k < count * e.dim; ++k) {
      std::uint64_t raw = rng();
      double x;
      std::memcpy(&x, &raw, sizeof x);
      e.values.push_back(std::isfinite(x) ? x : static_cast<double>(raw));
    }
    const EmbeddingSet back = decode_gemb(encode_gemb(e));
    gemb += back.dim == e.dim && back.values == e.values && encode_gemb(back) == encode_gemb(e);

    LocalPair p;
    p.sample_id = "s" + std::to_string(rng());
    p.bbox = {static_cast<int>(rng() % 30), static_cast<int>(rng() % 30), 0, 0};
    p.bbox.x2 = p.bbox.x1 + 1 + static_cast<int>(rng() % 30);
    p.bbox.y2 = p.bbox.y1 + 1 + static_cast<int>(rng() % 30);
    p.segment_index = rng() % 7;
    p.sentence_index = rng() % 7;
    p.sentence_char_span.begin = rng() % 100;
    p.sentence_char_span.end = p.sentence_char_span.begin + 1 + rng() % 100;
    p.similarity = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    pjson += pair_from_json(pair_to_json(p)) == p;
  }
  // Checkpoints: random tiny models with arbitrary finite parameter values.
  const Model proto = init_model(tiny_encoder_config(), Vocabulary::from_corpus({"a red circle."}), 1);
  for (std::size_t i = 0; i < kN; ++i) {
    Model m = proto;
    m.seed = rng();
    for (std::size_t k = 0; k < m.params.size(); ++k)
      for (double& x : m.params.at(k).data())
        x = std::ldexp(std::uniform_real_distribution<double>(-1, 1)(rng),
                       static_cast<int>(rng() % 200) - 100);
    const fs::path p = dir / "ckpt_rt";
    save_checkpoint(p, m);
    const Model back = load_checkpoint(p);
    ckpt += back.params == m.params && back.seed == m.seed && back.config == m.config &&
            back.vocab == m.vocab;
  }
  for (auto [name, n] : {std::pair{"ppm", ppm}, {"record", rec}, {"rle", rle}, {"gemb", gemb},
                         {"pairs", pjson}, {"checkpoint", ckpt}})
    expect(n == kN, std::string(name) + " " + std::to_string(n) + "/" + std::to_string(kN));
  fs::remove_all(dir);

  std::string detail = "dataset, checkpoint, report reproducible; 6 formats x 1000 round-trips";
  if (!failures.empty()) {
    detail = "failed:";
    for (auto& f : failures) detail += " " + f;
  }
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------
// 8. padding and scale invariance

Outcome invariances() {
  const fs::path dir = work_root() / "invariance";
  fs::remove_all(dir);
  const Dataset d = generate_dataset(21, 30, dir);
  std::vector<std::string> captions;
  for (const auto& r : d.records) captions.push_back(r.caption);
  const Model m = init_model(EncoderConfig{}, Vocabulary::from_corpus(captions), 22);

  double worst_pad = 0.0;
  for (const auto& caption : captions) {
    const TokenizedText bare = tokenize(caption, m.vocab, m.config.extended_context, false);
    const Tensor ref = encode_text(m, bare).cls;
    for (std::size_t len : {bare.ids.size() + 1, m.config.base_context, m.config.extended_context}) {
      if (len < bare.ids.size()) continue;
      const Tensor padded = encode_text(m, tokenize(caption, m.vocab, len, true)).cls;
      for (std::size_t j = 0; j < ref.size(); ++j)
        worst_pad = std::max(worst_pad, std::abs(padded.data()[j] - ref.data()[j]));
    }
  }

  // Original mode on model embeddings, joint mode on random embeddings of a
  // joint set; every rescaling must reproduce the CSV byte for byte.
  std::vector<std::string> ids;
  std::vector<Image> images;
  for (const auto& r : d.records) ids.push_back(r.id), images.push_back(d.load_image(r));
  const EmbeddingSet texts = embed_texts(m, ids, captions), imgs = embed_images(m, ids, images);

  std::vector<LocalPair> pairs;
  for (const auto& r : d.records) {
    const auto [seg, sent] = r.gt_links.front();
    pairs.push_back({r.id, mask_to_bbox(r.segments[seg], kDefaultExpandFrac), seg, sent,
                     r.sentence_spans[sent], 0.5});
  }
  const JointTestSet set = build_joint_test_set(d, pairs);
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g;
  EmbeddingSet jt, ji;
  jt.dim = ji.dim = 8;
  for (const auto& t : set.texts) {
    jt.ids.push_back(t.id);
    for (int k = 0; k < 8; ++k) jt.values.push_back(g(rng));
  }
  for (const auto& im : set.images) {
    ji.ids.push_back(im.id);
    for (int k = 0; k < 8; ++k) ji.values.push_back(g(rng));
  }

  const std::string base = report_csv(original_report(texts, imgs)) + report_csv(joint_report(jt, ji, set));
  std::size_t same = 0, tried = 0;
  for (double c : {1e-3, 0.5, 2.0, 7.25, 1e3}) {
    auto scaled = [c](EmbeddingSet e) {
      for (double& x : e.values) x *= c;
      return e;
    };
    const std::string got = report_csv(original_report(scaled(texts), scaled(imgs))) +
                            report_csv(joint_report(scaled(jt), scaled(ji), set));
    same += got == base;
    ++tried;
  }
  fs::remove_all(dir);
  return {worst_pad <= 1e-10 && same == tried,
          fmt("max padding drift %.2g; %zu/%zu rescalings give identical report bytes", worst_pad,
              same, tried)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, gradient_fidelity},  {2, loss_identities},         {3, oracle_equivalence},
      {4, ablation_direction}, {5, joint_behavior},          {6, lism_quality},
      {7, determinism_and_formats}, {8, invariances}};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  bool all = true;
  for (const auto& [id, run] : criteria) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("criterion %d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}

#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "goal/checkpoint.hpp"
#include "goal/error.hpp"
#include "goal/eval.hpp"
#include "goal/io_util.hpp"
#include "goal/model_gradcheck.hpp"
#include "goal/trainer.hpp"

using namespace goal;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("goal_unit_" + name);
  fs::remove_all(dir);
  return dir;
}

// Small dataset at the tiny encoder's resolution, plus one gt-derived pair
// for every other sample.
struct SmallSetup {
  Dataset data;
  std::vector<LocalPair> pairs;
};

SmallSetup small_setup(const std::string& name, std::uint64_t seed, std::size_t n) {
  GeneratorOptions opts;
  opts.image_side = tiny_encoder_config().image_side;
  opts.max_shapes = 3;
  SmallSetup s{generate_dataset(seed, n, scratch_dir(name), opts), {}};
  for (std::size_t i = 0; i < n; i += 2) {
    const SampleRecord& r = s.data.records[i];
    const auto [seg, sent] = r.gt_links.front();
    s.pairs.push_back({r.id, mask_to_bbox(r.segments[seg], kDefaultExpandFrac), seg, sent,
                       r.sentence_spans[sent], 0.5});
  }
  return s;
}

TrainConfig quick_config(std::uint64_t seed) {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 3;
  c.learning_rate = 1e-3;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("ablation names and effective weights") {
  for (Ablation a : all_ablations()) CHECK(parse_ablation(ablation_name(a)) == a);
  CHECK_THROWS_AS(parse_ablation("both"), ValidationError);
  TrainConfig c;
  c.ablation = Ablation::global_only;
  CHECK(c.effective_weights() == LossWeights{1, 0, 0});
  c.ablation = Ablation::local_only;
  CHECK(c.effective_weights() == LossWeights{0, 0.5, 0});
  c.ablation = Ablation::no_tsl;
  CHECK(c.effective_weights() == LossWeights{1, 0.5, 0});
  c.ablation = Ablation::goal;
  CHECK(c.effective_weights() == LossWeights{1, 0.5, 1});
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("adam first step moves each weight by lr against the gradient sign") {
  ParamStore params;
  params.add("w", Tensor::vector({1.0, -2.0, 0.5}));
  Adam adam(params);
  adam.step(params, {Tensor::vector({0.3, -4.0, 0.0})}, 0.1);
  const auto w = params.get("w").data();
  CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(w[1] == doctest::Approx(-1.9).epsilon(1e-7));
  CHECK(w[2] == 0.5);
  CHECK(adam.steps() == 1);
}

TEST_CASE("zero learning rate leaves the init untouched") {
  const SmallSetup s = small_setup("lr0", 1, 6);
  TrainConfig c = quick_config(2);
  c.learning_rate = 0.0;
  const TrainResult r = train(s.data, s.pairs, c, std::nullopt, tiny_encoder_config());
  std::vector<std::string> captions;
  for (const auto& rec : s.data.records) captions.push_back(rec.caption);
  const Model init = init_model(tiny_encoder_config(), Vocabulary::from_corpus(captions), 2);
  CHECK(r.model.params == init.params);
  CHECK(r.log.size() == 4);  // 2 epochs × ⌈6/3⌉
}

TEST_CASE("training is bit-reproducible") {
  const SmallSetup s = small_setup("repro", 3, 7);
  const fs::path a = scratch_dir("repro_a"), b = scratch_dir("repro_b");
  save_training_run(a, train(s.data, s.pairs, quick_config(4), std::nullopt, tiny_encoder_config()));
  save_training_run(b, train(s.data, s.pairs, quick_config(4), std::nullopt, tiny_encoder_config()));
  CHECK(hash_path(a) == hash_path(b));
  const std::string log = read_file(a / "train_log.csv");
  CHECK(log.rfind("step,epoch,L_global,L_local,L_TSL,L_total,logit_scale\n", 0) == 0);
  // Last partial batch kept: ⌈7/3⌉ = 3 steps per epoch.
  CHECK(std::count(log.begin(), log.end(), '\n') == 1 + 6);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("unknown pair sample ids are rejected before training") {
  SmallSetup s = small_setup("badpair", 5, 4);
  s.pairs.front().sample_id = "missing";
  CHECK_THROWS_AS(train(s.data, s.pairs, quick_config(1), std::nullopt, tiny_encoder_config()),
                  ValidationError);
}

TEST_CASE("train log leaves terms that are switched off blank") {
  TrainLogRow row;
  row.step = 1;
  row.epoch = 1;
  row.loss.global = 0.5;
  row.loss.total = 0.5;
  row.logit_scale = 2.0;
  CHECK(train_log_csv({row}) ==
        "step,epoch,L_global,L_local,L_TSL,L_total,logit_scale\n1,1,0.5,,,0.5,2\n");
}

TEST_CASE("one Adam step lowers the batch loss") {
  int improved = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset d = generate_dataset(seed, 16, scratch_dir("descent"));
    std::vector<LocalPair> pairs;
    for (const auto& r : d.records) {
      const auto [seg, sent] = r.gt_links.front();
      pairs.push_back({r.id, mask_to_bbox(r.segments[seg], kDefaultExpandFrac), seg, sent,
                       r.sentence_spans[sent], 0.5});
    }
    std::vector<std::string> captions;
    for (const auto& r : d.records) captions.push_back(r.caption);
    Model m = init_model(EncoderConfig{}, Vocabulary::from_corpus(captions), seed);
    const auto samples = prepare_samples(m, d, pairs);
    std::vector<const PreparedSample*> batch;
    for (const auto& s : samples) batch.push_back(&s);
    const StepEvaluation before = evaluate_batch(m, batch, LossWeights{});
    Adam adam(m.params);
    adam.step(m.params, before.gradients, 1e-4);
    const StepEvaluation after = evaluate_batch(m, batch, LossWeights{});
    improved += after.breakdown.total < before.breakdown.total;
  }
  CHECK(improved >= 3);
}

TEST_CASE("ablation suite writes four runs and a comparison table") {
  const SmallSetup s = small_setup("ablate", 6, 6);
  const fs::path out = scratch_dir("ablate_out");
  TrainConfig c = quick_config(7);
  c.epochs = 1;
  const auto rows = run_ablation_suite(s.data, s.pairs, c, std::nullopt, s.data, s.pairs, out,
                                       tiny_encoder_config());
  CHECK(rows.size() == 4);
  const std::string csv = read_file(out / "comparison.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(csv.rfind("method,T2I_R@1,T2I_R@5,T2I_R@25,T2I_R@50,I2T_R@1,I2T_R@5,I2T_R@25,I2T_R@50,"
                  "T2I_mAP@10,I2T_mAP@10\n",
                  0) == 0);
  for (Ablation a : all_ablations()) CHECK(fs::exists(out / ablation_name(a) / "params.f64"));
  fs::remove_all(out);
}

// ---------------------------------------------------------------------------
// Evaluation

TEST_CASE("report columns per mode") {
  const SmallSetup s = small_setup("report", 8, 5);
  std::vector<std::string> captions;
  for (const auto& r : s.data.records) captions.push_back(r.caption);
  const Model m = init_model(tiny_encoder_config(), Vocabulary::from_corpus(captions), 9);

  const Report original = evaluate(m, s.data, EvalMode::original);
  CHECK(report_csv(original).rfind(
            "mode,T2I_R@1,T2I_R@5,T2I_R@25,T2I_R@50,I2T_R@1,I2T_R@5,I2T_R@25,I2T_R@50\noriginal,", 0) ==
        0);
  CHECK(original.get("T2I_R@25") == 1.0);

  const Report joint = evaluate(m, s.data, EvalMode::joint, s.pairs);
  CHECK(report_csv(joint).rfind("mode,T2I_mAP@10,I2T_mAP@10\njoint,", 0) == 0);
  CHECK_THROWS_AS(evaluate(m, s.data, EvalMode::joint), ValidationError);
  CHECK_THROWS_AS(parse_eval_mode("both"), ValidationError);
}

TEST_CASE("reports are invariant to rescaling every embedding") {
  std::mt19937_64 rng(47);
  std::normal_distribution<double> g;
  EmbeddingSet texts, images;
  texts.dim = images.dim = 6;
  for (int i = 0; i < 60; ++i) {
    texts.ids.push_back("s" + std::to_string(i));
    images.ids.push_back("s" + std::to_string(i));
    for (int j = 0; j < 6; ++j) texts.values.push_back(g(rng)), images.values.push_back(g(rng));
  }
  const std::string base = report_csv(original_report(texts, images));
  for (double c : {0.37, 3.0, 1e4}) {
    EmbeddingSet t2 = texts, i2 = images;
    for (double& x : t2.values) x *= c;
    for (double& x : i2.values) x *= c;
    CHECK(report_csv(original_report(t2, i2)) == base);
  }
}

TEST_CASE("embed_corpus output") {
  const SmallSetup s = small_setup("embed", 10, 3);
  std::vector<std::string> ids, captions;
  for (const auto& r : s.data.records) ids.push_back(r.id), captions.push_back(r.caption);
  const Model m = init_model(tiny_encoder_config(), Vocabulary::from_corpus(captions), 11);
  const EmbeddingSet e = embed_texts(m, ids, captions);
  CHECK(e.dim == m.config.d_model);
  for (std::size_t i = 0; i < e.ids.size(); ++i) {
    double n = 0.0;
    for (double x : e.row(i)) n += x * x;
    CHECK(std::abs(std::sqrt(n) - 1.0) <= 1e-10);
  }
  const fs::path dir = scratch_dir("embed_out");
  embed_corpus(dir / "a.gemb", e);
  embed_corpus(dir / "b.gemb", embed_texts(m, ids, captions));
  CHECK(read_file(dir / "a.gemb") == read_file(dir / "b.gemb"));
  CHECK(read_embeddings(dir / "a.gemb") == e);

  embed_corpus(dir / "empty.gemb", embed_texts(m, {}, {}));
  CHECK(read_file(dir / "empty.gemb").size() == 12);
  fs::remove_all(dir);
}

TEST_CASE("random-init retrieval is at chance") {
  constexpr std::size_t n = 20;
  double hits = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Dataset d = generate_dataset(100 + seed, n, scratch_dir("chance"));
    std::vector<std::string> captions;
    for (const auto& r : d.records) captions.push_back(r.caption);
    const Model m = init_model(EncoderConfig{}, Vocabulary::from_corpus(captions), seed);
    hits += evaluate(m, d, EvalMode::original).get("T2I_R@1") * n;
  }
  const double trials = 10.0 * n, p = 1.0 / n;
  const double sigma = std::sqrt(trials * p * (1 - p));
  CHECK(std::abs(hits - trials * p) <= 3.0 * sigma);
}

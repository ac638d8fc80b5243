// goal: data generation, matching, training, evaluation and ablations.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "goal/checkpoint.hpp"
#include "goal/data.hpp"
#include "goal/error.hpp"
#include "goal/eval.hpp"
#include "goal/io_util.hpp"
#include "goal/lism.hpp"
#include "goal/model_gradcheck.hpp"
#include "goal/parallel.hpp"
#include "goal/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace goal;

namespace {

// One JSON record per run, written next to the primary output as <out>.run.json.
class RunManifest {
 public:
  explicit RunManifest(std::string command) : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["config"] = json::object();
    doc_["inputs"] = json::object();
    doc_["outputs"] = json::object();
  }
  void config(const std::string& key, json value) { doc_["config"][key] = std::move(value); }
  void seed(std::uint64_t s) { doc_["seed"] = s; }
  void input(const std::string& key, const fs::path& path) {
    doc_["inputs"][key] = {{"path", path.string()}, {"hash", hex64(hash_path(path))}};
  }
  void output(const std::string& key, const fs::path& path) {
    doc_["outputs"][key] = {{"path", path.string()}, {"hash", hex64(hash_path(path))}};
  }
  void write(const fs::path& primary_output) {
    doc_["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    fs::path target = primary_output;
    target += ".run.json";
    write_file(target, doc_.dump(2) + "\n");
  }

 private:
  json doc_;
  std::chrono::steady_clock::time_point start_;
};

json weights_json(const LossWeights& w) {
  return {{"lambda_global", w.lambda_global},
          {"lambda_local", w.lambda_local},
          {"lambda_tsl", w.lambda_tsl}};
}

json train_config_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},     {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate}, {"weights", weights_json(c.weights)},
          {"seed", c.seed},         {"ablation", ablation_name(c.ablation)}};
}

std::vector<LocalPair> pairs_or_empty(const std::string& path) {
  return path.empty() ? std::vector<LocalPair>{} : read_pairs(path);
}

void add_train_flags(CLI::App* cmd, TrainConfig& cfg) {
  cmd->add_option("--epochs", cfg.epochs, "Training epochs")->default_val(cfg.epochs);
  cmd->add_option("--batch", cfg.batch_size, "Batch size")->default_val(cfg.batch_size);
  cmd->add_option("--lr", cfg.learning_rate, "Adam learning rate")->default_val(cfg.learning_rate);
  cmd->add_option("--lambda-global", cfg.weights.lambda_global)->default_val(cfg.weights.lambda_global);
  cmd->add_option("--lambda-local", cfg.weights.lambda_local)->default_val(cfg.weights.lambda_local);
  cmd->add_option("--lambda-tsl", cfg.weights.lambda_tsl)->default_val(cfg.weights.lambda_tsl);
  cmd->add_option("--seed", cfg.seed, "Init and shuffle seed")->default_val(cfg.seed);
}

void inspect(const fs::path& path) {
  if (fs::is_directory(path)) {
    if (!fs::exists(path / "manifest.json"))
      throw ValidationError(path.string() + " is a directory without a checkpoint manifest");
    const Model m = load_checkpoint(path);
    const EncoderConfig& c = m.config;
    std::printf("checkpoint %s\n", path.string().c_str());
    std::printf("  d_model %zu  layers %zu  heads %zu  image %zu/%zu  context %zu→%zu\n", c.d_model,
                c.n_layers, c.n_heads, c.image_side, c.patch_size, c.base_context,
                c.extended_context);
    std::printf("  vocab %zu  seed %llu  tensors %zu  elements %zu\n", m.vocab.size(),
                static_cast<unsigned long long>(m.seed), m.params.size(),
                m.params.total_elements());
    std::printf("  logit_scale %.6f\n", m.params.get("logit_scale").item());
    return;
  }
  const std::string bytes = read_file(path);
  if (bytes.rfind("GEMB", 0) == 0) {
    const EmbeddingSet e = decode_gemb(bytes);
    const std::size_t items = e.dim == 0 ? 0 : e.values.size() / e.dim;
    std::printf("GEMB %s\n  items %zu  dim %zu\n", path.string().c_str(), items, e.dim);
    return;
  }
  if (path.extension() == ".jsonl") {
    const auto pairs = read_pairs(path);
    std::printf("pairs %s\n  records %zu\n", path.string().c_str(), pairs.size());
    if (!pairs.empty()) std::printf("  first %s\n", pair_to_json(pairs.front()).c_str());
    return;
  }
  throw ValidationError("cannot tell the format of " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Global-local fine-tuning of a toy dual encoder"};
  app.require_subcommand(1);

  // gen-data
  std::uint64_t gen_seed = 0;
  long long gen_n = 0;
  std::size_t gen_side = 64;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic shapes dataset");
  gen->add_option("--seed", gen_seed)->required();
  gen->add_option("--n", gen_n, "Number of samples")->required();
  gen->add_option("--image-side", gen_side)->default_val(gen_side);
  gen->add_option("--out", gen_out)->required();

  // match
  std::string match_ckpt, match_data, match_out;
  double expand_frac = kDefaultExpandFrac;
  auto* match = app.add_subcommand("match", "Pick one local pair per sample");
  match->add_option("--ckpt", match_ckpt, "Matching encoder checkpoint")->required();
  match->add_option("--data", match_data)->required();
  match->add_option("--out", match_out)->required();
  match->add_option("--expand-frac", expand_frac)->default_val(expand_frac);

  // train
  TrainConfig train_cfg;
  std::string train_data, train_pairs, train_out, train_init, train_ablation = "goal";
  auto* trn = app.add_subcommand("train", "Fine-tune with one ablation");
  trn->add_option("--data", train_data)->required();
  trn->add_option("--pairs", train_pairs, "Local pairs (omit for none)");
  trn->add_option("--ablation", train_ablation)
      ->check(CLI::IsMember({"global_only", "local_only", "no_tsl", "goal"}))
      ->default_val(train_ablation);
  trn->add_option("--init", train_init, "Start from this checkpoint");
  trn->add_option("--out", train_out)->required();
  add_train_flags(trn, train_cfg);

  // eval
  std::string eval_ckpt, eval_data, eval_mode = "original", eval_pairs, eval_out, eval_emb;
  auto* evl = app.add_subcommand("eval", "Retrieval metrics on a test set");
  evl->add_option("--ckpt", eval_ckpt)->required();
  evl->add_option("--data", eval_data)->required();
  evl->add_option("--mode", eval_mode)->check(CLI::IsMember({"original", "joint"}))->default_val(eval_mode);
  evl->add_option("--pairs", eval_pairs, "Local pairs of the test set (joint mode)");
  evl->add_option("--out", eval_out)->required();
  evl->add_option("--embeddings", eval_emb, "Also write text/image GEMB dumps here");

  // ablate
  TrainConfig abl_cfg;
  std::string abl_data, abl_pairs, abl_out, abl_test, abl_test_pairs, abl_init;
  auto* abl = app.add_subcommand("ablate", "Train and compare all four ablations");
  abl->add_option("--data", abl_data)->required();
  abl->add_option("--pairs", abl_pairs)->required();
  abl->add_option("--out", abl_out)->required();
  abl->add_option("--test-data", abl_test, "Held-out set (default: the training set)");
  abl->add_option("--test-pairs", abl_test_pairs, "Local pairs of the held-out set");
  abl->add_option("--init", abl_init, "Shared starting checkpoint");
  add_train_flags(abl, abl_cfg);

  // gradcheck
  std::string gc_config = "tiny";
  std::uint64_t gc_seed = 7;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the training loss");
  gc->add_option("--config", gc_config)->check(CLI::IsMember({"tiny"}))->default_val(gc_config);
  gc->add_option("--seed", gc_seed)->default_val(gc_seed);

  // inspect
  std::string inspect_path;
  auto* ins = app.add_subcommand("inspect", "Describe a checkpoint, GEMB or pairs file");
  ins->add_option("file", inspect_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::printf("ERROR validation: %s\n", e.what());
    return static_cast<int>(ErrorKind::validation);
  }

  try {
    if (*gen) {
      if (gen_n < 1) throw ValidationError("--n must be at least 1");
      RunManifest run("gen-data");
      run.seed(gen_seed);
      run.config("n", gen_n);
      run.config("image_side", gen_side);
      GeneratorOptions opts;
      opts.image_side = gen_side;
      const Dataset d = generate_dataset(gen_seed, static_cast<std::size_t>(gen_n), gen_out, opts);
      run.output("dataset", gen_out);
      run.write(gen_out);
      std::printf("wrote %zu samples to %s\n", d.records.size(), gen_out.c_str());
    } else if (*match) {
      RunManifest run("match");
      run.config("expand_frac", expand_frac);
      run.input("ckpt", match_ckpt);
      run.input("data", match_data);
      const Model model = load_checkpoint(match_ckpt);
      const Dataset data = load_dataset(match_data);
      run.seed(model.seed);
      const ModelEmbedder embedder(model);
      std::vector<LocalPair> pairs;
      for (auto& p : lism_match_dataset(embedder, data, model.config.image_side, {expand_frac}))
        if (p) pairs.push_back(std::move(*p));
      write_pairs(match_out, pairs);
      run.output("pairs", match_out);
      run.write(match_out);
      std::printf("%zu of %zu samples matched\n", pairs.size(), data.records.size());
    } else if (*trn) {
      train_cfg.ablation = parse_ablation(train_ablation);
      train_cfg.validate();
      RunManifest run("train");
      run.seed(train_cfg.seed);
      run.config("train", train_config_json(train_cfg));
      run.input("data", train_data);
      if (!train_pairs.empty()) run.input("pairs", train_pairs);
      std::optional<Model> init;
      if (!train_init.empty()) {
        run.input("init", train_init);
        init = load_checkpoint(train_init);
      }
      const Dataset data = load_dataset(train_data);
      const TrainResult result = train(data, pairs_or_empty(train_pairs), train_cfg, init);
      save_training_run(train_out, result);
      run.output("checkpoint", train_out);
      run.write(train_out);
      std::printf("trained %zu steps, final loss %.6f\n", result.log.size(),
                  result.log.empty() ? 0.0 : result.log.back().loss.total);
    } else if (*evl) {
      const EvalMode mode = parse_eval_mode(eval_mode);
      RunManifest run("eval");
      run.config("mode", eval_mode);
      run.input("ckpt", eval_ckpt);
      run.input("data", eval_data);
      std::optional<std::vector<LocalPair>> pairs;
      if (!eval_pairs.empty()) {
        run.input("pairs", eval_pairs);
        pairs = read_pairs(eval_pairs);
      }
      const Model model = load_checkpoint(eval_ckpt);
      run.seed(model.seed);
      const Dataset data = load_dataset(eval_data);
      const Report report = evaluate(model, data, mode, pairs);
      if (!eval_emb.empty()) {
        std::vector<std::string> ids, captions;
        std::vector<Image> images;
        for (const auto& r : data.records) {
          ids.push_back(r.id);
          captions.push_back(r.caption);
          images.push_back(data.load_image(r));
        }
        embed_corpus(fs::path(eval_emb) / "texts.gemb", embed_texts(model, ids, captions));
        embed_corpus(fs::path(eval_emb) / "images.gemb", embed_images(model, ids, images));
        run.output("embeddings", eval_emb);
      }
      write_file(eval_out, report_csv(report));
      run.output("report", eval_out);
      run.write(eval_out);
      std::printf("%s", report_csv(report).c_str());
    } else if (*abl) {
      abl_cfg.validate();
      RunManifest run("ablate");
      run.seed(abl_cfg.seed);
      run.config("train", train_config_json(abl_cfg));
      run.input("data", abl_data);
      run.input("pairs", abl_pairs);
      std::optional<Model> init;
      if (!abl_init.empty()) {
        run.input("init", abl_init);
        init = load_checkpoint(abl_init);
      }
      const Dataset data = load_dataset(abl_data);
      std::optional<Dataset> test;
      if (!abl_test.empty()) {
        run.input("test_data", abl_test);
        test = load_dataset(abl_test);
      }
      std::optional<std::vector<LocalPair>> test_pairs;
      if (!abl_test_pairs.empty()) {
        run.input("test_pairs", abl_test_pairs);
        test_pairs = read_pairs(abl_test_pairs);
      }
      const auto rows = run_ablation_suite(data, read_pairs(abl_pairs), abl_cfg, init,
                                           test ? *test : data, test_pairs, abl_out);
      run.output("runs", abl_out);
      run.write(abl_out);
      std::printf("%s", comparison_csv(rows).c_str());
    } else if (*gc) {
      const TinyProblem problem = make_tiny_problem(gc_seed);
      const ModelGradcheckReport report = check_total_loss_gradients(problem);
      const bool ok = report.result.max_rel_error <= 1e-4;
      std::printf("%s: %zu entries, max relative error %.3e (at %s[%zu]), %.1fs\n",
                  ok ? "PASS" : "FAIL", report.result.entries_checked, report.result.max_rel_error,
                  report.worst_parameter.c_str(), report.result.worst_entry, report.seconds);
      if (!ok) throw ContractError("gradient check exceeded relative error 1e-4");
    } else if (*ins) {
      inspect(inspect_path);
    }
  } catch (const Error& e) {
    std::printf("ERROR %s: %s\n", error_code(e.kind()), e.what());
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::printf("ERROR internal: %s\n", e.what());
    return static_cast<int>(ErrorKind::internal);
  }
  return 0;
}

#include "goal/model_gradcheck.hpp"

#include <chrono>

#include "goal/error.hpp"

namespace goal {

EncoderConfig tiny_encoder_config() {
  EncoderConfig c;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.image_side = 32;
  c.patch_size = 8;
  c.base_context = 16;
  c.extended_context = 64;
  return c;
}

TinyProblem make_tiny_problem(std::uint64_t seed, std::size_t n, std::size_t n_local) {
  if (n_local > n) throw ContractError("more local pairs than samples");
  const EncoderConfig config = tiny_encoder_config();
  GeneratorOptions gen;
  gen.image_side = config.image_side;
  gen.max_shapes = 3;

  Dataset dataset;
  std::vector<Image> images;
  std::vector<std::string> captions;
  for (std::size_t i = 0; i < n; ++i) {
    GeneratedSample s = generate_sample(seed, i, gen);
    captions.push_back(s.record.caption);
    dataset.records.push_back(std::move(s.record));
    images.push_back(std::move(s.image));
  }

  TinyProblem problem;
  problem.model = init_model(config, Vocabulary::from_corpus(captions), seed);
  for (std::size_t i = 0; i < n; ++i) {
    const SampleRecord& r = dataset.records[i];
    PreparedSample s;
    s.id = r.id;
    s.image = images[i];
    s.caption = tokenize(r.caption, problem.model.vocab, config.extended_context, false);
    if (i < n_local) {
      const auto [segment, sentence] = r.gt_links.front();
      const BBox box = mask_to_bbox(r.segments[segment], kDefaultExpandFrac);
      const CharSpan span = r.sentence_spans[sentence];
      PreparedSample::Local local;
      local.crop = crop_and_resize(s.image, box, config.image_side);
      local.sentence = tokenize(std::string_view(r.caption).substr(span.begin, span.end - span.begin),
                                problem.model.vocab, config.extended_context, false);
      local.patch_indices = select_patch_indices(box, config);
      local.token_indices = select_token_indices(span, s.caption.spans, s.caption.ids);
      s.local = std::move(local);
    }
    problem.samples.push_back(std::move(s));
  }
  return problem;
}

LossBuilder total_loss_builder(const TinyProblem& problem) {
  return [&problem](Tape&, std::span<const Var> leaves) {
    const BoundParams p(problem.model.params, leaves);
    std::vector<const PreparedSample*> batch;
    for (const auto& s : problem.samples) batch.push_back(&s);
    const BatchViews views = build_batch_views(p, problem.model.config, batch, problem.weights);
    const Projections proj{p["proj.image.w"], p["proj.image.b"], p["proj.text.w"],
                           p["proj.text.b"]};
    return total_loss(views, problem.weights, p["logit_scale"], proj).total;
  };
}

ModelGradcheckReport check_total_loss_gradients(const TinyProblem& problem,
                                                const GradcheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<Tensor> inputs;
  for (std::size_t i = 0; i < problem.model.params.size(); ++i)
    inputs.push_back(problem.model.params.at(i));
  ModelGradcheckReport report;
  report.result = gradcheck(total_loss_builder(problem), std::move(inputs), options);
  report.worst_parameter = problem.model.params.name(report.result.worst_input);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace goal

#include "goal/eval.hpp"

#include <cstdio>

#include "goal/autodiff.hpp"
#include "goal/error.hpp"
#include "goal/io_util.hpp"
#include "goal/parallel.hpp"

namespace goal {

std::string eval_mode_name(EvalMode mode) {
  return mode == EvalMode::original ? "original" : "joint";
}

EvalMode parse_eval_mode(std::string_view name) {
  if (name == "original") return EvalMode::original;
  if (name == "joint") return EvalMode::joint;
  throw ValidationError("unknown eval mode '" + std::string(name) + "'");
}

namespace {

EmbeddingSet collect(const std::vector<std::string>& ids, std::size_t dim,
                     const std::function<std::vector<double>(std::size_t)>& embed) {
  EmbeddingSet set;
  set.ids = ids;
  set.dim = dim;
  set.values.resize(ids.size() * dim);
  parallel_for(ids.size(), [&](std::size_t i) {
    const std::vector<double> cls = embed(i);
    const Tensor unit = l2_normalize_rows(Tensor({1, dim}, cls));
    std::copy(unit.data().begin(), unit.data().end(), set.values.begin() + i * dim);
  });
  return set;
}

}  // namespace

EmbeddingSet embed_texts(const Model& model, const std::vector<std::string>& ids,
                         const std::vector<std::string>& texts) {
  if (ids.size() != texts.size()) throw ContractError("text ids and texts differ in length");
  return collect(ids, model.config.d_model,
                 [&](std::size_t i) { return encode_text(model, texts[i]).cls.storage(); });
}

EmbeddingSet embed_images(const Model& model, const std::vector<std::string>& ids,
                          const std::vector<Image>& images) {
  if (ids.size() != images.size()) throw ContractError("image ids and images differ in length");
  return collect(ids, model.config.d_model,
                 [&](std::size_t i) { return encode_image(model, images[i]).cls.storage(); });
}

void embed_corpus(const std::filesystem::path& path, const EmbeddingSet& embeddings) {
  write_embeddings(path, embeddings);
}

double Report::get(const std::string& column) const {
  for (const auto& [name, value] : metrics)
    if (name == column) return value;
  throw ContractError("report has no column " + column);
}

Report original_report(const EmbeddingSet& texts, const EmbeddingSet& images) {
  RelevanceJudgments t2i, i2t;
  for (const auto& id : texts.ids) t2i[id] = {id};
  for (const auto& id : images.ids) i2t[id] = {id};
  const RetrievalIndex image_index(images), text_index(texts);
  Report r{EvalMode::original, {}};
  for (std::size_t k : kRecallKs)
    r.metrics.emplace_back("T2I_R@" + std::to_string(k), recall_at_k(image_index, texts, t2i, k));
  for (std::size_t k : kRecallKs)
    r.metrics.emplace_back("I2T_R@" + std::to_string(k), recall_at_k(text_index, images, i2t, k));
  return r;
}

Report joint_report(const EmbeddingSet& texts, const EmbeddingSet& images,
                    const JointTestSet& set) {
  const RetrievalIndex image_index(images), text_index(texts);
  const std::string k = std::to_string(kJointMapK);
  Report r{EvalMode::joint, {}};
  r.metrics.emplace_back("T2I_mAP@" + k, map_at_k(image_index, texts, set.text_to_image, kJointMapK));
  r.metrics.emplace_back("I2T_mAP@" + k, map_at_k(text_index, images, set.image_to_text, kJointMapK));
  return r;
}

Report evaluate(const Model& model, const Dataset& test, EvalMode mode,
                const std::optional<std::vector<LocalPair>>& pairs) {
  if (test.records.empty()) throw ValidationError("evaluation needs a non-empty test set");
  if (mode == EvalMode::original) {
    std::vector<std::string> ids, captions;
    std::vector<Image> images;
    for (const auto& r : test.records) {
      ids.push_back(r.id);
      captions.push_back(r.caption);
      images.push_back(test.load_image(r));
    }
    return original_report(embed_texts(model, ids, captions), embed_images(model, ids, images));
  }

  if (!pairs) throw ValidationError("joint evaluation needs a pairs file");
  const JointTestSet set = build_joint_test_set(test, *pairs);
  std::vector<std::string> text_ids, texts, image_ids;
  for (const auto& t : set.texts) {
    text_ids.push_back(t.id);
    texts.push_back(t.text);
  }
  std::vector<Image> images;
  for (const auto& item : set.images) {
    image_ids.push_back(item.id);
    Image full = test.load_image(*test.find(item.sample_id));
    images.push_back(item.crop ? crop_and_resize(full, *item.crop, model.config.image_side)
                               : std::move(full));
  }
  return joint_report(embed_texts(model, text_ids, texts), embed_images(model, image_ids, images),
                      set);
}

std::string format_metric(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

std::string report_csv(const Report& report) {
  std::string header = "mode", values = eval_mode_name(report.mode);
  for (const auto& [name, value] : report.metrics) {
    header += "," + name;
    values += "," + format_metric(value);
  }
  return header + "\n" + values + "\n";
}

}  // namespace goal

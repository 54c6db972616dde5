// Template definitions for evaluation.hpp.
#ifndef SYNCCLIP_EVALUATION_IMPL_HPP_
#define SYNCCLIP_EVALUATION_IMPL_HPP_

namespace syncclip {

template <typename T>
Matrix<T> score_examples(const PromptedModel<T>& model, const Learnables<T>& params,
                         const std::vector<LabeledExample>& examples, const std::vector<int>& class_ids,
                         const std::vector<std::vector<int>>& class_tokens) {
  if (class_ids.empty()) throw Error(ErrorKind::kInput, "empty class subset");
  const auto n = static_cast<Eigen::Index>(examples.size());
  const auto c = static_cast<Eigen::Index>(class_ids.size());
  Matrix<T> scores(n, c);
  const bool conditioned = model.method() == Method::kCoCoOp;
  std::optional<ClassTable<T>> shared_table;
  if (!conditioned) shared_table = model.class_table(class_tokens, class_ids, params);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Matrix<T> patches = examples[static_cast<std::size_t>(i)].content->template cast<T>();
    const RowVector<T> image = model.encode_image(patches, params, VisualRoute::kReal);
    if (conditioned) {
      const RowVector<T> feature = model.conditioning_feature(patches);
      const ClassTable<T> table = model.class_table(class_tokens, class_ids, params, &feature);
      for (Eigen::Index j = 0; j < c; ++j) scores(i, j) = cosine_sim<T>(image, table.embeddings.row(j));
    } else {
      for (Eigen::Index j = 0; j < c; ++j) scores(i, j) = cosine_sim<T>(image, shared_table->embeddings.row(j));
    }
  }
  return scores;
}

template <typename T>
int predict(const PromptedModel<T>& model, const Learnables<T>& params, const Matrix<T>& patches,
            const std::vector<int>& class_subset, const std::vector<std::vector<int>>& class_tokens) {
  if (class_subset.empty()) throw Error(ErrorKind::kInput, "empty class subset");
  LabeledExample ex;
  ex.content = std::make_shared<const PatchMatrix>(patches.template cast<double>());
  const Matrix<double> scores =
      score_examples(model, params, {ex}, class_subset, class_tokens).template cast<double>();
  return restricted_argmax(scores, 0, class_subset, class_subset);
}

template <typename T>
EvalReport evaluate(const PromptedModel<T>& model, const Learnables<T>& params,
                    const std::vector<LabeledExample>& test, const ClassSpace& classes, Protocol protocol) {
  const auto tokens = model.tokenize(classes);
  const std::vector<int> ids = classes.all();
  const Matrix<double> scores = score_examples(model, params, test, ids, tokens).template cast<double>();
  std::vector<int> labels;
  for (const auto& ex : test) labels.push_back(ex.class_id);
  return report_from_scores(scores, labels, ids, classes, protocol);
}

template <typename T>
std::vector<RowVector<double>> embed_examples(const PromptedModel<T>& model, const Learnables<T>& params,
                                              const std::vector<LabeledExample>& examples) {
  std::vector<RowVector<double>> out;
  out.reserve(examples.size());
  const bool ivlp = model.method() == Method::kIvlp;
  for (const auto& ex : examples) {
    const VisualRoute route = ivlp ? VisualRoute::kIvlp : route_for(ex.domain);
    out.push_back(
        model.encode_image(ex.content->template cast<T>(), params, route).template cast<double>());
  }
  return out;
}

template <typename T>
std::map<int, Matrix<double>> embeddings_by_class(const PromptedModel<T>& model, const Learnables<T>& params,
                                                  const std::vector<LabeledExample>& examples) {
  const auto vectors = embed_examples(model, params, examples);
  std::map<int, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < examples.size(); ++i) rows[examples[i].class_id].push_back(i);
  std::map<int, Matrix<double>> out;
  for (const auto& [cls, idx] : rows) {
    Matrix<double> m(static_cast<Eigen::Index>(idx.size()), vectors[idx[0]].size());
    for (std::size_t r = 0; r < idx.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = vectors[idx[r]];
    out.emplace(cls, std::move(m));
  }
  return out;
}

}  // namespace syncclip

#endif  // SYNCCLIP_EVALUATION_IMPL_HPP_

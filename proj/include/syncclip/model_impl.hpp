// Template definitions for model.hpp.
#ifndef SYNCCLIP_MODEL_IMPL_HPP_
#define SYNCCLIP_MODEL_IMPL_HPP_

#include <optional>

namespace syncclip {

template <typename T>
PromptedModel<T>::PromptedModel(const DualEncoder<T>& encoders, Method method, T temperature)
    : encoders_(&encoders), method_(method), temperature_(temperature) {
  if (!(temperature_ > T(0))) throw Error(ErrorKind::kConfig, "temperature must be positive");
}

template <typename T>
void PromptedModel<T>::validate(const Learnables<T>& params) const {
  const PromptConfig& c = params.bank.config;
  c.validate_against(encoders_->visual_spec().n_layers, encoders_->text_spec().n_layers);
  if (c.embed_dim_v != encoders_->visual_spec().embed_dim || c.embed_dim_t != encoders_->text_spec().embed_dim)
    throw Error(ErrorKind::kShape, "prompt widths do not match encoder widths");
  if (method_ == Method::kIvlp && (c.m1 != 0 || c.m2 != 0))
    throw Error(ErrorKind::kConfig, "ivlp uses a single visual prompt group: m1 and m2 must be 0");
  if (method_ == Method::kCoCoOp && !params.metanet)
    throw Error(ErrorKind::kConfig, "cocoop requires a meta-network");
  if (method_ == Method::kMaPLe && !params.projector) throw Error(ErrorKind::kConfig, "maple requires a projector");
  if (params.metanet && (params.metanet->in_dim() != encoders_->output_dim() ||
                         params.metanet->out_dim() != c.embed_dim_t))
    throw Error(ErrorKind::kShape, "meta-network widths do not match the encoders");
  if (params.projector && (params.projector->rows() != c.embed_dim_t || params.projector->cols() != c.embed_dim_v))
    throw Error(ErrorKind::kShape, "projector must map embed_dim_t to embed_dim_v");
}

template <typename T>
std::vector<Matrix<T>> PromptedModel<T>::visual_prompts(const Learnables<T>& params, VisualRoute route) const {
  const PromptBank<T>& bank = params.bank;
  std::vector<Matrix<T>> out;
  if (method_ == Method::kCoCoOp) return out;
  for (int l = 0; l < bank.depth(); ++l) {
    const auto li = static_cast<std::size_t>(l);
    if (method_ == Method::kMaPLe) {
      out.push_back(maple_project<T>(bank.textual[li], *params.projector));
    } else if (method_ == Method::kIvlp || route == VisualRoute::kIvlp) {
      out.push_back(bank.shared_v[li]);
    } else {
      const Matrix<T>& own = route == VisualRoute::kReal ? bank.real_v[li] : bank.synth_v[li];
      Matrix<T> m(own.rows() + bank.shared_v[li].rows(), bank.shared_v[li].cols());
      m.topRows(own.rows()) = own;
      m.bottomRows(bank.shared_v[li].rows()) = bank.shared_v[li];
      out.push_back(std::move(m));
    }
  }
  return out;
}

template <typename T>
void PromptedModel<T>::accumulate_visual_grad(const Learnables<T>& params, VisualRoute route,
                                              const std::vector<Matrix<T>>& layer_grads, Learnables<T>& grad) const {
  const PromptBank<T>& bank = params.bank;
  for (std::size_t l = 0; l < layer_grads.size(); ++l) {
    const Matrix<T>& g = layer_grads[l];
    if (method_ == Method::kCoCoOp) continue;
    if (method_ == Method::kMaPLe) {
      grad.bank.textual[l].noalias() += g * params.projector->transpose();
      grad.projector->noalias() += bank.textual[l].transpose() * g;
    } else if (method_ == Method::kIvlp || route == VisualRoute::kIvlp) {
      grad.bank.shared_v[l] += g;
    } else {
      Matrix<T>& own = route == VisualRoute::kReal ? grad.bank.real_v[l] : grad.bank.synth_v[l];
      const Eigen::Index m = own.rows();
      own += g.topRows(m);
      grad.bank.shared_v[l] += g.bottomRows(g.rows() - m);
    }
  }
}

template <typename T>
std::vector<Matrix<T>> PromptedModel<T>::text_prompts(const Learnables<T>& params,
                                                      const RowVector<T>* image_feature) const {
  std::vector<Matrix<T>> out = params.bank.textual;
  if (method_ == Method::kCoCoOp) {
    if (!image_feature) throw Error(ErrorKind::kInput, "cocoop text prompts need an image feature");
    out[0] = cocoop_condition<T>(*image_feature, out[0], *params.metanet);
  }
  return out;
}

template <typename T>
void PromptedModel<T>::accumulate_text_grad(const Learnables<T>& params, const RowVector<T>* image_feature,
                                            const std::vector<Matrix<T>>& layer_grads, Learnables<T>& grad) const {
  for (std::size_t l = 0; l < layer_grads.size(); ++l) grad.bank.textual[l] += layer_grads[l];
  if (method_ == Method::kCoCoOp && !layer_grads.empty()) {
    const RowVector<T> shift_grad = layer_grads[0].colwise().sum();
    params.metanet->backward(*image_feature, shift_grad, *grad.metanet);
  }
}

template <typename T>
RowVector<T> PromptedModel<T>::encode_image(const Matrix<T>& patches, const Learnables<T>& params, VisualRoute route,
                                            EncoderTape<T>* tape) const {
  const auto prompts = visual_prompts(params, route);
  return encoders_->encode_patches(patches, prompts, tape);
}

template <typename T>
RowVector<T> PromptedModel<T>::encode_class(const std::vector<int>& token_ids, const Learnables<T>& params,
                                            const RowVector<T>* image_feature, EncoderTape<T>* tape) const {
  const auto prompts = text_prompts(params, image_feature);
  return encoders_->encode_token_ids(token_ids, prompts, tape);
}

template <typename T>
std::vector<std::vector<int>> PromptedModel<T>::tokenize(const ClassSpace& classes) const {
  std::vector<std::vector<int>> out;
  for (const auto& name : classes.names) out.push_back(encoders_->tokenize_class(name, classes.prompt_template));
  return out;
}

template <typename T>
ClassTable<T> PromptedModel<T>::class_table(const std::vector<std::vector<int>>& tokens,
                                            const std::vector<int>& class_ids, const Learnables<T>& params,
                                            const RowVector<T>* image_feature) const {
  ClassTable<T> table;
  table.class_ids = class_ids;
  table.embeddings.resize(static_cast<Eigen::Index>(class_ids.size()), encoders_->output_dim());
  for (std::size_t i = 0; i < class_ids.size(); ++i)
    table.embeddings.row(static_cast<Eigen::Index>(i)) =
        encode_class(tokens.at(static_cast<std::size_t>(class_ids[i])), params, image_feature);
  return table;
}

template <typename T>
RowVector<T> PromptedModel<T>::conditioning_feature(const Matrix<T>& patches) const {
  return encoders_->encode_patches(patches, {});
}

template <typename T>
BatchInputs<T> resolve_batch(const MixedBatch& batch, const std::vector<LabeledExample>& real_pool,
                             const std::vector<LabeledExample>& synth_pool, int skipped) {
  BatchInputs<T> in;
  for (auto i : batch.real) {
    in.real_patches.push_back(real_pool.at(i).content->template cast<T>());
    in.real_labels.push_back(real_pool[i].class_id);
  }
  for (auto i : batch.synthetic) {
    in.synth_patches.push_back(synth_pool.at(i).content->template cast<T>());
    in.synth_labels.push_back(synth_pool[i].class_id);
  }
  in.triplets = batch.triplets;
  in.skipped_triplets = skipped;
  return in;
}

namespace detail {

// Cross-entropy where each image has its own image-conditioned class table.
template <typename T>
double conditioned_cross_entropy(const PromptedModel<T>& model, const Learnables<T>& params,
                                 const std::vector<Matrix<T>>& patches, const std::vector<int>& labels,
                                 const std::vector<int>& candidates, const std::vector<std::vector<int>>& tokens,
                                 double term_scale, Reduction reduction, Learnables<T>* grad,
                                 const char* space_name) {
  if (patches.empty()) return 0.0;
  const T scale = reduction == Reduction::kMean ? T(1) / static_cast<T>(patches.size()) : T(1);
  const auto& text = model.encoders().text();
  double loss = 0.0;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const RowVector<T> feature = model.conditioning_feature(patches[i]);
    int target = -1;
    for (std::size_t c = 0; c < candidates.size(); ++c)
      if (candidates[c] == labels[i]) target = static_cast<int>(c);
    if (target < 0) throw Error(ErrorKind::kLabel, "label " + std::to_string(labels[i]) + " outside " + space_name);
    std::vector<EncoderTape<T>> tapes(candidates.size());
    Matrix<T> table(static_cast<Eigen::Index>(candidates.size()), feature.size());
    for (std::size_t c = 0; c < candidates.size(); ++c)
      table.row(static_cast<Eigen::Index>(c)) = model.encode_class(
          tokens.at(static_cast<std::size_t>(candidates[c])), params, &feature, grad ? &tapes[c] : nullptr);
    Matrix<T> d_table = Matrix<T>::Zero(table.rows(), table.cols());
    const T s = scale * static_cast<T>(term_scale);
    loss += static_cast<double>(scale * cross_entropy_one<T>(feature, target, table, model.temperature(), s, nullptr,
                                                              grad ? &d_table : nullptr));
    if (!grad) continue;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const auto layer_grads = text.backward(tapes[c], d_table.row(static_cast<Eigen::Index>(c)));
      model.accumulate_text_grad(params, &feature, layer_grads, *grad);
    }
  }
  return loss;
}

}  // namespace detail

template <typename T>
ObjectiveResult<T> evaluate_objective(const PromptedModel<T>& model, const Learnables<T>& params,
                                      const BatchInputs<T>& batch, const ClassSpace& classes,
                                      const std::vector<std::vector<int>>& class_tokens, const TermScales& scales,
                                      Reduction reduction, bool want_grad) {
  ObjectiveResult<T> result;
  if (want_grad) result.grad = params.zeros_like();
  LossComponents& comp = result.components;
  comp.skipped_triplets = batch.skipped_triplets;

  const bool use_rce = scales.rce != 0.0 && !batch.real_patches.empty();
  const bool use_sce = scales.sce != 0.0 && !batch.synth_patches.empty();
  const bool use_fs = scales.fs != 0.0;
  if (use_fs && batch.triplets.empty()) ++comp.skipped_triplets;
  const bool fs_active = use_fs && !batch.triplets.empty();

  const std::vector<int> all_ids = classes.all();
  const bool ivlp = model.method() == Method::kIvlp;
  const VisualRoute real_route = ivlp ? VisualRoute::kIvlp : VisualRoute::kReal;
  const VisualRoute synth_route = ivlp ? VisualRoute::kIvlp : VisualRoute::kSynthetic;
  const auto& visual = model.encoders().visual();
  const auto& text = model.encoders().text();
  const int out_dim = model.encoders().output_dim();
  Learnables<T>* grad = want_grad ? &result.grad : nullptr;

  // Image embeddings (needed by rce/sce outside CoCoOp, and by fs always).
  const bool conditioned = model.method() == Method::kCoCoOp;
  const bool need_real = (use_rce && !conditioned) || fs_active;
  const bool need_synth = (use_sce && !conditioned) || fs_active;
  auto encode_all = [&](const std::vector<Matrix<T>>& patches, VisualRoute route, bool needed,
                        std::vector<EncoderTape<T>>& tapes) {
    Matrix<T> emb(static_cast<Eigen::Index>(needed ? patches.size() : 0), out_dim);
    if (!needed) return emb;
    tapes.resize(patches.size());
    for (std::size_t i = 0; i < patches.size(); ++i)
      emb.row(static_cast<Eigen::Index>(i)) =
          model.encode_image(patches[i], params, route, want_grad ? &tapes[i] : nullptr);
    return emb;
  };
  std::vector<EncoderTape<T>> real_tapes, synth_tapes;
  const Matrix<T> real_emb = encode_all(batch.real_patches, real_route, need_real, real_tapes);
  const Matrix<T> synth_emb = encode_all(batch.synth_patches, synth_route, need_synth, synth_tapes);
  Matrix<T> d_real = Matrix<T>::Zero(real_emb.rows(), out_dim);
  Matrix<T> d_synth = Matrix<T>::Zero(synth_emb.rows(), out_dim);
  std::vector<char> real_touched(real_emb.rows(), 0), synth_touched(synth_emb.rows(), 0);

  if (conditioned) {
    if (use_rce)
      comp.rce = detail::conditioned_cross_entropy(model, params, batch.real_patches, batch.real_labels,
                                                   classes.base, class_tokens, scales.rce, reduction, grad,
                                                   "the base classes");
    if (use_sce)
      comp.sce = detail::conditioned_cross_entropy(model, params, batch.synth_patches, batch.synth_labels, all_ids,
                                                   class_tokens, scales.sce, reduction, grad,
                                                   "the base+novel classes");
  } else if (use_rce || use_sce) {
    // Base classes are the leading rows of the unified table.
    const std::vector<int>& text_ids = use_sce ? all_ids : classes.base;
    std::vector<EncoderTape<T>> text_tapes(text_ids.size());
    ClassTable<T> table;
    table.class_ids = text_ids;
    table.embeddings.resize(static_cast<Eigen::Index>(text_ids.size()), out_dim);
    for (std::size_t c = 0; c < text_ids.size(); ++c)
      table.embeddings.row(static_cast<Eigen::Index>(c)) = model.encode_class(
          class_tokens.at(static_cast<std::size_t>(text_ids[c])), params, nullptr, want_grad ? &text_tapes[c] : nullptr);
    Matrix<T> d_text = Matrix<T>::Zero(table.embeddings.rows(), out_dim);

    if (use_rce) {
      const auto nb = static_cast<Eigen::Index>(classes.base.size());
      ClassTable<T> base{classes.base, table.embeddings.topRows(nb)};
      const auto res = rce_loss<T>({real_emb, batch.real_labels}, base, model.temperature(), reduction);
      comp.rce = static_cast<double>(res.loss);
      const T s = static_cast<T>(scales.rce);
      d_real += s * res.grad_images;
      d_text.topRows(nb) += s * res.grad_classes;
      std::fill(real_touched.begin(), real_touched.end(), 1);
    }
    if (use_sce) {
      const auto res = sce_loss<T>({synth_emb, batch.synth_labels}, table, model.temperature(), reduction);
      comp.sce = static_cast<double>(res.loss);
      const T s = static_cast<T>(scales.sce);
      d_synth += s * res.grad_images;
      d_text += s * res.grad_classes;
      std::fill(synth_touched.begin(), synth_touched.end(), 1);
    }
    if (want_grad) {
      for (std::size_t c = 0; c < text_ids.size(); ++c) {
        const auto layer_grads = text.backward(text_tapes[c], d_text.row(static_cast<Eigen::Index>(c)));
        model.accumulate_text_grad(params, nullptr, layer_grads, *grad);
      }
    }
  }

  if (fs_active) {
    std::vector<TripletEmbeddings<T>> trips;
    for (const auto& t : batch.triplets)
      trips.push_back({synth_emb.row(static_cast<Eigen::Index>(t.anchor)),
                       real_emb.row(static_cast<Eigen::Index>(t.positive)),
                       real_emb.row(static_cast<Eigen::Index>(t.negative))});
    const auto res = fs_loss<T>(trips, reduction);
    comp.fs = static_cast<double>(res.loss);
    const T s = static_cast<T>(scales.fs);
    for (std::size_t i = 0; i < batch.triplets.size(); ++i) {
      const auto& t = batch.triplets[i];
      d_synth.row(static_cast<Eigen::Index>(t.anchor)) += s * res.grad_anchor[i];
      d_real.row(static_cast<Eigen::Index>(t.positive)) += s * res.grad_positive[i];
      d_real.row(static_cast<Eigen::Index>(t.negative)) += s * res.grad_negative[i];
      synth_touched[t.anchor] = 1;
      real_touched[t.positive] = 1;
      real_touched[t.negative] = 1;
    }
  }

  if (want_grad) {
    for (std::size_t i = 0; i < real_touched.size(); ++i)
      if (real_touched[i])
        model.accumulate_visual_grad(params, real_route,
                                     visual.backward(real_tapes[i], d_real.row(static_cast<Eigen::Index>(i))), *grad);
    for (std::size_t i = 0; i < synth_touched.size(); ++i)
      if (synth_touched[i])
        model.accumulate_visual_grad(params, synth_route,
                                     visual.backward(synth_tapes[i], d_synth.row(static_cast<Eigen::Index>(i))),
                                     *grad);
  }

  comp.total = scales.rce * comp.rce + scales.sce * comp.sce + scales.fs * comp.fs;
  return result;
}

template <typename T>
double objective_value(const PromptedModel<T>& model, const Learnables<T>& params, const BatchInputs<T>& batch,
                       const ClassSpace& classes, const std::vector<std::vector<int>>& class_tokens,
                       const TermScales& scales, Reduction reduction) {
  return evaluate_objective(model, params, batch, classes, class_tokens, scales, reduction, false).components.total;
}

}  // namespace syncclip

#endif  // SYNCCLIP_MODEL_IMPL_HPP_

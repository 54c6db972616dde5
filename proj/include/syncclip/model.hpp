#ifndef SYNCCLIP_MODEL_HPP_
#define SYNCCLIP_MODEL_HPP_

#include <span>
#include <vector>

#include "syncclip/data.hpp"
#include "syncclip/encoders.hpp"
#include "syncclip/objectives.hpp"
#include "syncclip/prompts.hpp"

namespace syncclip {

/// Which visual prompt route an image takes. kIvlp ignores the domain
/// groups and uses only the shared group.
enum class VisualRoute { kReal, kSynthetic, kIvlp };

inline VisualRoute route_for(Domain d) { return d == Domain::kReal ? VisualRoute::kReal : VisualRoute::kSynthetic; }

/// Binds frozen encoders to learnable prompts for one method variant and
/// maps gradients at injected prompt positions back to the parameters.
template <typename T>
class PromptedModel {
 public:
  PromptedModel(const DualEncoder<T>& encoders, Method method, T temperature);

  const DualEncoder<T>& encoders() const { return *encoders_; }
  Method method() const { return method_; }
  T temperature() const { return temperature_; }

  /// Checks that `learnables` carries what the method needs.
  void validate(const Learnables<T>& learnables) const;

  std::vector<Matrix<T>> visual_prompts(const Learnables<T>& params, VisualRoute route) const;
  void accumulate_visual_grad(const Learnables<T>& params, VisualRoute route,
                              const std::vector<Matrix<T>>& layer_grads, Learnables<T>& grad) const;

  /// `image_feature` conditions the input-layer prompts (CoCoOp only).
  std::vector<Matrix<T>> text_prompts(const Learnables<T>& params, const RowVector<T>* image_feature) const;
  void accumulate_text_grad(const Learnables<T>& params, const RowVector<T>* image_feature,
                            const std::vector<Matrix<T>>& layer_grads, Learnables<T>& grad) const;

  RowVector<T> encode_image(const Matrix<T>& patches, const Learnables<T>& params, VisualRoute route,
                            EncoderTape<T>* tape = nullptr) const;
  RowVector<T> encode_class(const std::vector<int>& token_ids, const Learnables<T>& params,
                            const RowVector<T>* image_feature = nullptr, EncoderTape<T>* tape = nullptr) const;

  /// Token ids per class id for the class space's template.
  std::vector<std::vector<int>> tokenize(const ClassSpace& classes) const;

  /// Text embeddings for `class_ids`, row-aligned.
  ClassTable<T> class_table(const std::vector<std::vector<int>>& tokens, const std::vector<int>& class_ids,
                            const Learnables<T>& params, const RowVector<T>* image_feature = nullptr) const;

  /// Image feature feeding the CoCoOp meta-network (unprompted encoder).
  RowVector<T> conditioning_feature(const Matrix<T>& patches) const;

 private:
  const DualEncoder<T>* encoders_;
  Method method_;
  T temperature_;
};

/// One optimization batch, already resolved to patch matrices.
template <typename T>
struct BatchInputs {
  std::vector<Matrix<T>> real_patches;
  std::vector<int> real_labels;
  std::vector<Matrix<T>> synth_patches;
  std::vector<int> synth_labels;
  std::vector<TripletRef> triplets;  // anchor -> synth index, positive/negative -> real index
  int skipped_triplets = 0;
};

template <typename T>
BatchInputs<T> resolve_batch(const MixedBatch& batch, const std::vector<LabeledExample>& real_pool,
                             const std::vector<LabeledExample>& synth_pool, int skipped);

/// Scale of each objective term. {1, alpha, beta} gives the combined loss;
/// zero entries are not evaluated and contribute exactly nothing.
struct TermScales {
  double rce = 1.0;
  double sce = 0.0;
  double fs = 0.0;
};

template <typename T>
struct ObjectiveResult {
  LossComponents components;
  Learnables<T> grad;
};

/// Forward + backward of rce + alpha*sce + beta*fs over one batch.
template <typename T>
ObjectiveResult<T> evaluate_objective(const PromptedModel<T>& model, const Learnables<T>& params,
                                      const BatchInputs<T>& batch, const ClassSpace& classes,
                                      const std::vector<std::vector<int>>& class_tokens, const TermScales& scales,
                                      Reduction reduction, bool want_grad);

/// Loss value only (finite-difference probes).
template <typename T>
double objective_value(const PromptedModel<T>& model, const Learnables<T>& params, const BatchInputs<T>& batch,
                       const ClassSpace& classes, const std::vector<std::vector<int>>& class_tokens,
                       const TermScales& scales, Reduction reduction);

/// Learnables for a method: CoCoOp gets a meta-network, MaPLe a projector.
Learnables<double> init_learnables(Method method, const PromptConfig& config, int image_feature_dim,
                                   int metanet_hidden, std::uint64_t seed);

}  // namespace syncclip

#include "syncclip/model_impl.hpp"

#endif  // SYNCCLIP_MODEL_HPP_

// Template definitions for training.hpp.
#ifndef SYNCCLIP_TRAINING_IMPL_HPP_
#define SYNCCLIP_TRAINING_IMPL_HPP_

#include <cmath>
#include <fstream>
#include <sstream>

#include "syncclip/archive.hpp"

namespace syncclip {
namespace detail {

std::string checkpoint_metadata(Method method, const PromptConfig& prompts, const TrainConfig& config,
                                const EncoderSpec& visual, const EncoderSpec& text, std::uint32_t backbone_checksum,
                                Precision precision, long long step, std::optional<double> best_val);

std::string describe_batch(const MixedBatch& batch);

template <typename T>
void put_learnables(Archive& archive, const std::string& prefix, const Learnables<T>& params) {
  params.for_each([&](const std::string& name, const Matrix<T>& m) { archive.put(prefix + name, m, dtype_of<T>()); });
}

// Base-class accuracy on the validation split (real route).
template <typename T>
double validation_accuracy(const PromptedModel<T>& model, const Learnables<T>& params,
                           const std::vector<LabeledExample>& val, const ClassSpace& classes,
                           const std::vector<std::vector<int>>& tokens) {
  const Matrix<double> scores = score_examples(model, params, val, classes.base, tokens).template cast<double>();
  std::vector<int> labels, rows;
  for (std::size_t i = 0; i < val.size(); ++i) {
    labels.push_back(val[i].class_id);
    rows.push_back(static_cast<int>(i));
  }
  return tally(scores, labels, classes.base, classes.base, rows).accuracy();
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const PromptedModel<T>& model, const Learnables<T>& params,
                     const Learnables<T>& momentum, const TrainConfig& config, long long step,
                     std::optional<double> best_val) {
  const auto& enc = model.encoders();
  Archive archive;
  archive.metadata = detail::checkpoint_metadata(model.method(), params.bank.config, config, enc.visual_spec(),
                                                 enc.text_spec(), enc.backbone_checksum(),
                                                 sizeof(T) == 4 ? Precision::kF32 : Precision::kF64, step, best_val);
  detail::put_learnables(archive, "param/", params);
  detail::put_learnables(archive, "momentum/", momentum);
  archive.save(path);
}

template <typename T>
TrainResult<T> train(const PromptedModel<T>& model, Learnables<T> params, const TrainData& data,
                     const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  data.classes.validate();
  model.validate(params);
  const TermScales scales = term_scales(config.weights);
  if (data.synthetic.empty() && (scales.sce != 0.0 || scales.fs != 0.0))
    throw Error(ErrorKind::kConfig, "alpha or beta is non-zero but the synthetic set is empty");
  if (data.real.empty()) throw Error(ErrorKind::kInput, "no real training examples");
  for (const auto& ex : data.real)
    if (!data.classes.is_base(ex.class_id))
      throw Error(ErrorKind::kLabel, "real training example '" + ex.id + "' is not from a base class");

  const std::uint32_t checksum_before = model.encoders().backbone_checksum();
  const auto tokens = model.tokenize(data.classes);
  MixedBatchSampler sampler(data.real.size(), data.synthetic.size(), config.real_batch_size, config.ratio,
                            derive_seed(config.seed, 0x5A3B1E));
  const long long per_epoch = static_cast<long long>(sampler.iterations_per_epoch());
  const long long total = total_training_steps(data, config);

  TrainResult<T> result;
  result.total_steps = total;
  Learnables<T> momentum = params.zeros_like();
  long long start = 0;
  if (options.resume) {
    const auto& ck = *options.resume;
    check_compatible(ck, model.encoders().visual_spec(), model.encoders().text_spec(), checksum_before);
    if (ck.method != model.method()) throw Error(ErrorKind::kConfig, "checkpoint was trained with another method");
    params = ck.params.template cast<T>();
    momentum = ck.momentum.template cast<T>();
    start = ck.step;
    result.best_val = ck.best_val;
  }

  std::ofstream log;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    const auto log_path = *options.out_dir / "train_log.jsonl";
    log.open(log_path, options.resume ? std::ios::app : std::ios::trunc);
    if (!log) throw Error(ErrorKind::kIo, "cannot write '" + log_path.string() + "'");
  }

  const long long end = options.stop_after > 0 ? std::min(total, options.stop_after) : total;
  const T wd = static_cast<T>(config.weight_decay);
  const T mu = static_cast<T>(config.momentum);
  long long step = start;
  for (; step < end; ++step) {
    MixedBatch batch = sampler.batch(static_cast<std::size_t>(step));
    int skipped = 0;
    if (scales.fs != 0.0) {
      std::mt19937_64 rng(derive_seed(config.seed, 0x7219E7, static_cast<std::uint64_t>(step)));
      auto mined = mine_triplets(batch, data.real, data.synthetic, data.classes, rng);
      batch.triplets = std::move(mined.triplets);
      skipped = mined.skipped;
    }
    const BatchInputs<T> inputs = resolve_batch<T>(batch, data.real, data.synthetic, skipped);
    ObjectiveResult<T> res;
    try {
      res = evaluate_objective(model, params, inputs, data.classes, tokens, scales, config.reduction, true);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNumeric) throw;
      throw Error(ErrorKind::kNumeric, e.message() + " at step " + std::to_string(step) + " (" +
                                           detail::describe_batch(batch) + ")");
    }
    if (!std::isfinite(res.components.total) || !res.grad.all_finite())
      throw Error(ErrorKind::kNumeric, "non-finite loss or gradient at step " + std::to_string(step) + " (" +
                                           detail::describe_batch(batch) + ")");

    const double lr = scheduled_lr(config, step, total);
    if (config.grad_clip > 0) {
      double sq = 0.0;
      res.grad.for_each([&](const std::string&, const Matrix<T>& g) { sq += static_cast<double>(g.squaredNorm()); });
      const double norm = std::sqrt(sq);
      if (norm > config.grad_clip) {
        const T factor = static_cast<T>(config.grad_clip / norm);
        res.grad.for_each([&](const std::string&, Matrix<T>& g) { g *= factor; });
      }
    }
    // g += wd * p; buf = mu * buf + g; p -= lr * buf
    std::vector<Matrix<T>*> p_slots, g_slots, m_slots;
    params.for_each([&](const std::string&, Matrix<T>& m) { p_slots.push_back(&m); });
    res.grad.for_each([&](const std::string&, Matrix<T>& m) { g_slots.push_back(&m); });
    momentum.for_each([&](const std::string&, Matrix<T>& m) { m_slots.push_back(&m); });
    const T lr_t = static_cast<T>(lr);
    for (std::size_t i = 0; i < p_slots.size(); ++i) {
      Matrix<T>& g = *g_slots[i];
      if (wd != T(0)) g += wd * *p_slots[i];
      *m_slots[i] = mu * *m_slots[i] + g;
      *p_slots[i] -= lr_t * *m_slots[i];
    }

    StepRecord rec{step, res.components, lr};
    result.skipped_triplets += res.components.skipped_triplets;
    if (log.is_open()) log << rec.to_json() << "\n";
    if (options.on_step) options.on_step(rec);
    result.log.push_back(std::move(rec));

    const bool epoch_end = (step + 1) % per_epoch == 0;
    if (epoch_end && options.validate_each_epoch && !data.val.empty()) {
      const double acc = detail::validation_accuracy(model, params, data.val, data.classes, tokens);
      if (!result.best_val || acc > *result.best_val) {
        result.best_val = acc;
        if (options.out_dir)
          save_checkpoint(*options.out_dir / "best_val.ckpt", model, params, momentum, config, step + 1, acc);
      }
    }
  }

  if (model.encoders().backbone_checksum() != checksum_before)
    throw Error(ErrorKind::kNumeric, "backbone weights changed during training");
  result.steps_done = step;
  if (options.out_dir)
    save_checkpoint(*options.out_dir / "final.ckpt", model, params, momentum, config, step, result.best_val);
  result.params = std::move(params);
  result.momentum = std::move(momentum);
  return result;
}

}  // namespace syncclip

#endif  // SYNCCLIP_TRAINING_IMPL_HPP_

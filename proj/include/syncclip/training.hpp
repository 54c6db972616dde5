#ifndef SYNCCLIP_TRAINING_HPP_
#define SYNCCLIP_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "syncclip/evaluation.hpp"
#include "syncclip/model.hpp"
#include "syncclip/text_config.hpp"

namespace syncclip {

struct TrainConfig {
  double lr0 = 2.5e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int epochs = 20;
  int real_batch_size = 8;
  int ratio = 2;  // synthetic examples per real example in a batch
  LossWeights weights;
  std::uint64_t seed = 1;
  Precision precision = Precision::kF64;
  double temperature = 100.0;
  int warmup_steps = 0;
  double grad_clip = 0.0;  // global-norm clip, 0 = off
  Reduction reduction = Reduction::kMean;
  int shots = 16;
  long long max_steps = 0;  // > 0 caps the schedule length

  void validate() const;
};

/// lr0 * (1 + cos(pi * step / total_steps)) / 2
double cosine_annealed_lr(double lr0, long long step, long long total_steps);

/// Learning rate at `step`, including the optional linear warmup.
double scheduled_lr(const TrainConfig& config, long long step, long long total_steps);

PromptConfig prompt_config_from(const TextConfig& cfg, const PromptConfig& defaults = {});
void prompt_config_into(TextConfig& cfg, const PromptConfig& config);
TrainConfig train_config_from(const TextConfig& cfg, const TrainConfig& defaults = {});
void train_config_into(TextConfig& cfg, const TrainConfig& config);

/// Everything the trainer reads. `real` holds the few-shot base-class pool.
struct TrainData {
  std::vector<LabeledExample> real;
  std::vector<LabeledExample> val;
  std::vector<LabeledExample> synthetic;
  ClassSpace classes;
};

struct StepRecord {
  long long step = 0;
  LossComponents components;
  double lr = 0.0;

  std::string to_json() const;
};

/// A saved run: parameters, optimizer buffers and provenance.
struct Checkpoint {
  Learnables<double> params;
  Learnables<double> momentum;
  long long step = 0;  // steps completed
  Method method = Method::kSyncClip;
  TrainConfig config;
  EncoderSpec visual_spec, text_spec;
  std::uint32_t backbone_checksum = 0;
  Precision stored_precision = Precision::kF64;
  std::optional<double> best_val;
  std::string metadata;  // rendered key = value text
};

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const PromptedModel<T>& model, const Learnables<T>& params,
                     const Learnables<T>& momentum, const TrainConfig& config, long long step,
                     std::optional<double> best_val = {});

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Refuses checkpoints produced for a different backbone.
void check_compatible(const Checkpoint& checkpoint, const EncoderSpec& visual, const EncoderSpec& text,
                      std::uint32_t backbone_checksum);

struct TrainOptions {
  std::optional<std::filesystem::path> out_dir;  // log + checkpoints
  long long stop_after = 0;                      // > 0 stops early (resume testing)
  const Checkpoint* resume = nullptr;
  bool validate_each_epoch = true;
  std::function<void(const StepRecord&)> on_step;
};

template <typename T>
struct TrainResult {
  Learnables<T> params;
  Learnables<T> momentum;
  std::vector<StepRecord> log;
  long long steps_done = 0;
  long long total_steps = 0;
  std::optional<double> best_val;
  int skipped_triplets = 0;
};

/// SGD with momentum and weight decay on rce + alpha*sce + beta*fs under
/// a cosine schedule. Only prompt-side parameters move.
template <typename T>
TrainResult<T> train(const PromptedModel<T>& model, Learnables<T> params, const TrainData& data,
                     const TrainConfig& config, const TrainOptions& options = {});

/// Steps in a full run for this data and config.
long long total_training_steps(const TrainData& data, const TrainConfig& config);

/// {1, alpha, beta}.
TermScales term_scales(const LossWeights& w);

}  // namespace syncclip

#include "syncclip/training_impl.hpp"

#endif  // SYNCCLIP_TRAINING_HPP_

#ifndef SYNCCLIP_TOY_DATA_HPP_
#define SYNCCLIP_TOY_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "syncclip/data.hpp"
#include "syncclip/encoders.hpp"

namespace syncclip {

/// Two-domain Gaussian-cluster data in patch space. Every class owns a
/// prototype patch matrix; real samples scatter around it and synthetic
/// samples scatter around the prototype plus a domain offset shared by all
/// classes (and a smaller per-class distortion).
struct ToyDataOptions {
  int base_classes = 8;
  int novel_classes = 4;
  int patches = 9;
  int dim = 32;
  int train_per_class = 16;
  int val_per_class = 4;
  int test_per_class = 24;
  int synth_per_class = 16;
  double prototype_scale = 1.0;
  double noise = 0.6;
  double domain_shift = 0.8;
  double synth_distortion = 0.3;
  std::string prompt_template = "a photo of a [CLS].";
  int prototype_candidates = 1;  // > 1 keeps the best-scoring draw per class
};

/// Scores a candidate class prototype; higher is better. Receives the real
/// cluster center and the synthetic one (prototype + shift + distortion).
/// Lets a caller mimic a pretrained backbone whose images already sit near
/// their class text in both domains.
using PrototypeScorer =
    std::function<double(int class_id, const PatchMatrix& real_center, const PatchMatrix& synthetic_center)>;

struct ToyData {
  DatasetSplits splits;
  std::vector<LabeledExample> synthetic;
};

/// Log-probability of the class in both domains under the frozen, unprompted
/// encoders at `temperature`: prototypes picked this way are recognizable
/// before any tuning, as images are to a pretrained backbone. `encoders`
/// must outlive the scorer.
PrototypeScorer zero_shot_scorer(const DualEncoder<double>& encoders, const ToyDataOptions& options,
                                 double temperature);

ToyData make_toy_data(const ToyDataOptions& options, std::uint64_t seed, const PrototypeScorer& scorer = {});

/// Writes the standard on-disk layout: <root>/images, <root>/splits and
/// <synth_root>/<class_name>/.
void write_toy_dataset(const ToyData& data, const std::filesystem::path& root,
                       const std::filesystem::path& synth_root);

}  // namespace syncclip

#endif  // SYNCCLIP_TOY_DATA_HPP_

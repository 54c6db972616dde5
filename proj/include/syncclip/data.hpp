#ifndef SYNCCLIP_DATA_HPP_
#define SYNCCLIP_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "syncclip/common.hpp"

namespace syncclip {

/// Base (Y_b) and novel (Y_n) label spaces. Class ids index `names`.
struct ClassSpace {
  std::vector<int> base;
  std::vector<int> novel;
  std::vector<std::string> names;
  std::string prompt_template = "a photo of a [CLS].";

  void validate() const;
  int size() const { return static_cast<int>(names.size()); }
  std::vector<int> all() const;  // base then novel
  bool is_base(int id) const;
  bool is_novel(int id) const;
  int id_of(const std::string& name) const;  // -1 if absent
};

struct LabeledExample {
  std::string id;
  std::shared_ptr<const PatchMatrix> content;  // pre-tokenized patches [P x D]
  int class_id = -1;
  Domain domain = Domain::kReal;
};

struct DatasetEntry {
  std::string name;
  std::string prompt_template;
  std::optional<double> alpha;  // per-dataset loss weight overrides
  std::optional<double> beta;
  std::string content_extension = ".tok";
};

/// Built-in datasets and their hand-crafted templates.
const std::map<std::string, DatasetEntry>& builtin_registry();
/// Looks up `name` in the built-in registry merged with an optional registry
/// file (tables keyed by dataset name: template, alpha, beta, extension).
DatasetEntry lookup_dataset(const std::string& name, const std::optional<std::filesystem::path>& registry_file = {});

struct DatasetSplits {
  std::vector<LabeledExample> train, val, test;
  ClassSpace classes;
};

/// Reads <root>/splits/{train,val,test}.txt and, when present,
/// <root>/splits/base_novel.txt. Without the split file, the sorted class
/// list is cut in half (first half base).
DatasetSplits load_dataset(const std::filesystem::path& root, const DatasetEntry& entry);

/// Patch files hold a single [P x D] array named "patches".
void save_patch_file(const std::filesystem::path& path, const PatchMatrix& patches);
PatchMatrix load_patch_file(const std::filesystem::path& path);

struct SampleResult {
  std::vector<LabeledExample> examples;
  std::vector<std::string> warnings;
};

/// Up to `shots` real examples per base class, without replacement. Novel
/// classes contribute nothing. Selection depends only on the seed and the
/// sorted example ids.
SampleResult few_shot_sample(const std::vector<LabeledExample>& train, const ClassSpace& classes, int shots,
                             std::uint64_t seed);

/// Lowercase, spaces and underscores unified.
std::string normalize_class_name(const std::string& name);

/// Every file under <dir>/<class_name>/ becomes a synthetic example.
SampleResult ingest_synthetic(const std::filesystem::path& dir, const ClassSpace& classes,
                              const std::string& extension = ".tok");

/// Indices of a triplet inside one MixedBatch: `anchor` is a position in
/// MixedBatch::synthetic, `positive`/`negative` positions in MixedBatch::real.
struct TripletRef {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

struct MixedBatch {
  std::vector<std::size_t> real;       // indices into the real pool
  std::vector<std::size_t> synthetic;  // indices into the synthetic pool
  std::vector<TripletRef> triplets;
};

/// Endless shuffled-epoch streams over both pools. Batch i takes the i-th
/// run of `real_batch_size` reals and `ratio * real_batch_size` synthetics;
/// batches are random-access so training can resume at any step.
class MixedBatchSampler {
 public:
  MixedBatchSampler(std::size_t real_count, std::size_t synth_count, int real_batch_size, int ratio,
                    std::uint64_t seed);

  MixedBatch batch(std::size_t iteration) const;
  std::size_t iterations_per_epoch() const;
  int ratio() const { return ratio_; }
  int real_batch_size() const { return real_batch_size_; }

 private:
  std::size_t draw(int stream, std::size_t position, std::size_t count) const;

  std::size_t real_count_, synth_count_;
  int real_batch_size_, ratio_;
  std::uint64_t seed_;
  mutable std::map<std::pair<int, std::size_t>, std::vector<std::size_t>> permutations_;
};

struct MiningResult {
  std::vector<TripletRef> triplets;
  int skipped = 0;  // synthetic samples that could not anchor a triplet
};

/// One triplet per synthetic base-class sample that has a same-class real
/// sample in the batch; positive and negative drawn uniformly.
MiningResult mine_triplets(const MixedBatch& batch, const std::vector<LabeledExample>& real_pool,
                           const std::vector<LabeledExample>& synth_pool, const ClassSpace& classes,
                           std::mt19937_64& rng);

/// Deterministic seed derivation (splitmix64 over the inputs).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace syncclip

#endif  // SYNCCLIP_DATA_HPP_

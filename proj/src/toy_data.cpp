#include "syncclip/toy_data.hpp"

#include <fstream>
#include <random>

#include "syncclip/objectives.hpp"
#include "syncclip/tokenizer.hpp"

namespace fs = std::filesystem;

namespace syncclip {
namespace {

PatchMatrix gaussian(int rows, int cols, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sd);
  PatchMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

}  // namespace

PrototypeScorer zero_shot_scorer(const DualEncoder<double>& encoders, const ToyDataOptions& options,
                                 double temperature) {
  const int classes = options.base_classes + options.novel_classes;
  Matrix<double> texts(classes, encoders.output_dim());
  for (int c = 0; c < classes; ++c) {
    const auto ids = encoders.tokenize_class(toy_class_words()[static_cast<std::size_t>(c)], options.prompt_template);
    texts.row(c) = encoders.encode_token_ids(ids, {});
  }
  return [texts, temperature, &encoders](int cls, const PatchMatrix& real, const PatchMatrix& synthetic) {
    const auto pr = class_probabilities<double>(encoders.encode_patches(real, {}), texts, temperature);
    const auto ps = class_probabilities<double>(encoders.encode_patches(synthetic, {}), texts, temperature);
    return std::log(pr(cls)) + std::log(ps(cls));
  };
}

ToyData make_toy_data(const ToyDataOptions& o, std::uint64_t seed, const PrototypeScorer& scorer) {
  const int n_classes = o.base_classes + o.novel_classes;
  if (o.base_classes < 1 || o.novel_classes < 0) throw Error(ErrorKind::kConfig, "toy data needs >= 1 base class");
  if (n_classes > static_cast<int>(toy_class_words().size()))
    throw Error(ErrorKind::kConfig, "toy data supports at most " + std::to_string(toy_class_words().size()) +
                                        " classes");
  std::mt19937_64 rng(seed);
  ToyData out;
  ClassSpace& cs = out.splits.classes;
  cs.prompt_template = o.prompt_template;
  for (int c = 0; c < n_classes; ++c) {
    cs.names.push_back(toy_class_words()[static_cast<std::size_t>(c)]);
    (c < o.base_classes ? cs.base : cs.novel).push_back(c);
  }

  const PatchMatrix shift = gaussian(o.patches, o.dim, o.domain_shift, rng);
  std::vector<PatchMatrix> prototypes, distortions;
  for (int c = 0; c < n_classes; ++c) {
    PatchMatrix distortion = gaussian(o.patches, o.dim, o.synth_distortion, rng);
    PatchMatrix best = gaussian(o.patches, o.dim, o.prototype_scale, rng);
    if (scorer && o.prototype_candidates > 1) {
      double best_score = scorer(c, best, best + shift + distortion);
      for (int i = 1; i < o.prototype_candidates; ++i) {
        PatchMatrix cand = gaussian(o.patches, o.dim, o.prototype_scale, rng);
        const double score = scorer(c, cand, cand + shift + distortion);
        if (score > best_score) {
          best_score = score;
          best = std::move(cand);
        }
      }
    }
    prototypes.push_back(std::move(best));
    distortions.push_back(std::move(distortion));
  }

  auto sample = [&](int cls, Domain domain, const std::string& id) {
    PatchMatrix x = prototypes[static_cast<std::size_t>(cls)] + gaussian(o.patches, o.dim, o.noise, rng);
    if (domain == Domain::kSynthetic) x += shift + distortions[static_cast<std::size_t>(cls)];
    LabeledExample ex;
    ex.id = id;
    ex.class_id = cls;
    ex.domain = domain;
    ex.content = std::make_shared<const PatchMatrix>(std::move(x));
    return ex;
  };

  for (int c = 0; c < n_classes; ++c) {
    const std::string& name = cs.names[static_cast<std::size_t>(c)];
    const bool base = c < o.base_classes;
    for (int i = 0; i < o.train_per_class && base; ++i)
      out.splits.train.push_back(sample(c, Domain::kReal, name + "/train_" + std::to_string(i) + ".tok"));
    for (int i = 0; i < o.val_per_class && base; ++i)
      out.splits.val.push_back(sample(c, Domain::kReal, name + "/val_" + std::to_string(i) + ".tok"));
    for (int i = 0; i < o.test_per_class; ++i)
      out.splits.test.push_back(sample(c, Domain::kReal, name + "/test_" + std::to_string(i) + ".tok"));
    for (int i = 0; i < o.synth_per_class; ++i)
      out.synthetic.push_back(sample(c, Domain::kSynthetic, name + "/synth_" + std::to_string(i) + ".tok"));
  }
  return out;
}

void write_toy_dataset(const ToyData& data, const fs::path& root, const fs::path& synth_root) {
  const ClassSpace& cs = data.splits.classes;
  fs::create_directories(root / "splits");
  auto write_split = [&](const std::vector<LabeledExample>& examples, const std::string& split) {
    std::ofstream out(root / "splits" / (split + ".txt"));
    if (!out) throw Error(ErrorKind::kIo, "cannot write split '" + split + "'");
    for (const auto& ex : examples) {
      const fs::path file = root / "images" / ex.id;
      fs::create_directories(file.parent_path());
      save_patch_file(file, *ex.content);
      out << ex.id << '\t' << cs.names[static_cast<std::size_t>(ex.class_id)] << '\n';
    }
  };
  write_split(data.splits.train, "train");
  write_split(data.splits.val, "val");
  write_split(data.splits.test, "test");
  {
    std::ofstream out(root / "splits" / "base_novel.txt");
    if (!out) throw Error(ErrorKind::kIo, "cannot write base_novel.txt");
    for (int id : cs.base) out << cs.names[static_cast<std::size_t>(id)] << "\tbase\n";
    for (int id : cs.novel) out << cs.names[static_cast<std::size_t>(id)] << "\tnovel\n";
  }
  for (const auto& ex : data.synthetic) {
    const fs::path file = synth_root / ex.id;
    fs::create_directories(file.parent_path());
    save_patch_file(file, *ex.content);
  }
}

}  // namespace syncclip

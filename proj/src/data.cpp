#include "syncclip/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "syncclip/archive.hpp"
#include "syncclip/text_config.hpp"
#include "syncclip/tokenizer.hpp"

namespace fs = std::filesystem;

namespace syncclip {
namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct SplitLine {
  std::string path;
  std::string class_name;
};

std::vector<SplitLine> read_split(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::kIo, "missing split file '" + file.string() + "'");
  std::vector<SplitLine> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorKind::kFormat, file.string() + ":" + std::to_string(lineno) + ": expected path<TAB>class");
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix(splitmix(splitmix(seed) ^ a) ^ b);
}

void ClassSpace::validate() const {
  std::set<int> seen;
  for (int id : base) {
    if (id < 0 || id >= size()) throw Error(ErrorKind::kFormat, "base class id " + std::to_string(id) + " has no name");
    if (!seen.insert(id).second) throw Error(ErrorKind::kFormat, "class id " + std::to_string(id) + " listed twice");
  }
  for (int id : novel) {
    if (id < 0 || id >= size())
      throw Error(ErrorKind::kFormat, "novel class id " + std::to_string(id) + " has no name");
    if (!seen.insert(id).second)
      throw Error(ErrorKind::kFormat, "class '" + names[static_cast<std::size_t>(id)] + "' is both base and novel");
  }
  const auto first = prompt_template.find(kClassPlaceholder);
  if (first == std::string::npos || prompt_template.find(kClassPlaceholder, first + 1) != std::string::npos)
    throw Error(ErrorKind::kFormat, "template must contain exactly one [CLS]: '" + prompt_template + "'");
}

std::vector<int> ClassSpace::all() const {
  std::vector<int> out = base;
  out.insert(out.end(), novel.begin(), novel.end());
  return out;
}

bool ClassSpace::is_base(int id) const { return std::find(base.begin(), base.end(), id) != base.end(); }
bool ClassSpace::is_novel(int id) const { return std::find(novel.begin(), novel.end(), id) != novel.end(); }

int ClassSpace::id_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

const std::map<std::string, DatasetEntry>& builtin_registry() {
  static const std::map<std::string, DatasetEntry> registry = [] {
    std::map<std::string, DatasetEntry> r;
    auto add = [&](const std::string& name, const std::string& tmpl, std::optional<double> alpha = {},
                   std::optional<double> beta = {}) { r[lower(name)] = DatasetEntry{name, tmpl, alpha, beta, ".tok"}; };
    add("ImageNet", "a photo of a [CLS]", 0.2);
    add("Caltech101", "a photo of a [CLS].");
    add("OxfordPets", "a photo of a [CLS], a type of pet.");
    add("StanfordCars", "a photo of a [CLS].");
    add("Flowers102", "a photo of a [CLS], a type of flower.", 0.2);
    add("Food101", "a photo of [CLS], a type of food.");
    add("FGVCAircraft", "a photo of a [CLS], a type of aircraft.", std::nullopt, 2.0);
    add("SUN397", "a photo of a [CLS].");
    add("DTD", "[CLS] texture.");
    add("EuroSAT", "a centered satellite photo of [CLS].", std::nullopt, 2.0);
    add("UCF101", "a photo of a person doing [CLS].");
    add("ImageNetV2", "a photo of a [CLS]");
    add("ImageNet-Sketch", "a photo of a [CLS]");
    add("ImageNet-A", "a photo of a [CLS]");
    add("ImageNet-R", "a photo of a [CLS]");
    add("toy", "a photo of a [CLS].");
    return r;
  }();
  return registry;
}

DatasetEntry lookup_dataset(const std::string& name, const std::optional<fs::path>& registry_file) {
  const std::string key = lower(name);
  std::optional<DatasetEntry> entry;
  if (auto it = builtin_registry().find(key); it != builtin_registry().end()) entry = it->second;
  if (registry_file) {
    const TextConfig cfg = TextConfig::load(*registry_file);
    for (const auto& [k, v] : cfg.values()) {
      const auto dot = k.rfind('.');
      if (dot == std::string::npos || lower(k.substr(0, dot)) != key) continue;
      if (!entry) entry = DatasetEntry{name, "", std::nullopt, std::nullopt, ".tok"};
      const std::string field = k.substr(dot + 1);
      if (field == "template")
        entry->prompt_template = v;
      else if (field == "alpha")
        entry->alpha = cfg.get_double(k, 0.0);
      else if (field == "beta")
        entry->beta = cfg.get_double(k, 0.0);
      else if (field == "extension")
        entry->content_extension = v;
      else
        throw Error(ErrorKind::kConfig, "unknown registry field '" + k + "'");
    }
  }
  if (!entry) throw Error(ErrorKind::kConfig, "dataset '" + name + "' is not in the registry");
  return *entry;
}

void save_patch_file(const fs::path& path, const PatchMatrix& patches) {
  Archive ar;
  ar.metadata = "kind = \"patches\"\n";
  ar.put("patches", patches, DType::kF32);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  ar.save(path);
}

PatchMatrix load_patch_file(const fs::path& path) { return Archive::load(path).get_matrix<double>("patches"); }

DatasetSplits load_dataset(const fs::path& root, const DatasetEntry& entry) {
  if (!fs::is_directory(root)) throw Error(ErrorKind::kIo, "dataset root '" + root.string() + "' does not exist");
  const fs::path splits = root / "splits";
  std::map<std::string, std::vector<SplitLine>> lines;
  for (const char* split : {"train", "val", "test"}) lines[split] = read_split(splits / (std::string(split) + ".txt"));

  DatasetSplits out;
  ClassSpace& cs = out.classes;
  cs.prompt_template = entry.prompt_template;

  const fs::path override_file = splits / "base_novel.txt";
  if (fs::exists(override_file)) {
    std::ifstream in(override_file);
    if (!in) throw Error(ErrorKind::kIo, "cannot read '" + override_file.string() + "'");
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw Error(ErrorKind::kFormat, "base_novel.txt: expected class<TAB>base|novel");
      const std::string name = line.substr(0, tab), role = line.substr(tab + 1);
      if (cs.id_of(name) >= 0) throw Error(ErrorKind::kFormat, "duplicated class id '" + name + "' in base_novel.txt");
      cs.names.push_back(name);
      const int id = cs.size() - 1;
      if (role == "base")
        cs.base.push_back(id);
      else if (role == "novel")
        cs.novel.push_back(id);
      else
        throw Error(ErrorKind::kFormat, "base_novel.txt: role must be base or novel, got '" + role + "'");
    }
  } else {
    std::set<std::string> names;
    for (const auto& [split, ls] : lines)
      for (const auto& l : ls) names.insert(l.class_name);
    cs.names.assign(names.begin(), names.end());
    const int n_base = (cs.size() + 1) / 2;
    for (int i = 0; i < cs.size(); ++i) (i < n_base ? cs.base : cs.novel).push_back(i);
  }
  cs.validate();

  auto build = [&](const std::vector<SplitLine>& ls, bool train) {
    std::vector<LabeledExample> examples;
    for (const auto& l : ls) {
      const int id = cs.id_of(l.class_name);
      if (id < 0) throw Error(ErrorKind::kFormat, "split references unknown class '" + l.class_name + "'");
      // Real novel-class images never enter training.
      if (train && cs.is_novel(id)) continue;
      LabeledExample ex;
      ex.id = l.path;
      ex.class_id = id;
      ex.domain = Domain::kReal;
      ex.content = std::make_shared<const PatchMatrix>(load_patch_file(root / "images" / l.path));
      examples.push_back(std::move(ex));
    }
    return examples;
  };
  out.train = build(lines["train"], true);
  out.val = build(lines["val"], true);
  out.test = build(lines["test"], false);
  return out;
}

SampleResult few_shot_sample(const std::vector<LabeledExample>& train, const ClassSpace& classes, int shots,
                             std::uint64_t seed) {
  if (shots < 1) throw Error(ErrorKind::kConfig, "shots must be >= 1");
  SampleResult out;
  std::mt19937_64 rng(seed);
  for (int cls : classes.base) {
    std::vector<const LabeledExample*> pool;
    for (const auto& ex : train)
      if (ex.class_id == cls && ex.domain == Domain::kReal) pool.push_back(&ex);
    std::sort(pool.begin(), pool.end(), [](auto* a, auto* b) { return a->id < b->id; });
    std::shuffle(pool.begin(), pool.end(), rng);
    if (static_cast<int>(pool.size()) < shots)
      out.warnings.push_back("class '" + classes.names[static_cast<std::size_t>(cls)] + "' has only " +
                             std::to_string(pool.size()) + " training examples (< " + std::to_string(shots) +
                             " shots)");
    const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(shots));
    for (std::size_t i = 0; i < take; ++i) out.examples.push_back(*pool[i]);
  }
  return out;
}

std::string normalize_class_name(const std::string& name) {
  std::string out = lower(name);
  for (char& c : out)
    if (c == ' ') c = '_';
  return out;
}

SampleResult ingest_synthetic(const fs::path& dir, const ClassSpace& classes, const std::string& extension) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::kIo, "synthetic root '" + dir.string() + "' does not exist");
  std::map<std::string, int> by_name;
  for (int id = 0; id < classes.size(); ++id) by_name[normalize_class_name(classes.names[static_cast<std::size_t>(id)])] = id;

  std::vector<fs::path> folders;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) folders.push_back(e.path());
  std::sort(folders.begin(), folders.end());

  std::vector<std::string> unmatched;
  std::map<int, fs::path> matched;
  for (const auto& f : folders) {
    auto it = by_name.find(normalize_class_name(f.filename().string()));
    if (it == by_name.end())
      unmatched.push_back(f.filename().string());
    else
      matched[it->second] = f;
  }
  if (!unmatched.empty()) {
    std::string list;
    for (const auto& u : unmatched) list += (list.empty() ? "" : ", ") + u;
    throw Error(ErrorKind::kUnmatchedClass, "synthetic folders match no class: " + list);
  }

  SampleResult out;
  for (int id : classes.all()) {
    const std::string& name = classes.names[static_cast<std::size_t>(id)];
    auto it = matched.find(id);
    if (it == matched.end()) {
      out.warnings.push_back("no synthetic folder for class '" + name + "'");
      continue;
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(it->second))
      if (e.is_regular_file() && e.path().extension() == extension) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) out.warnings.push_back("synthetic folder for class '" + name + "' is empty");
    for (const auto& file : files) {
      LabeledExample ex;
      ex.id = (it->second.filename() / file.filename()).generic_string();
      ex.class_id = id;
      ex.domain = Domain::kSynthetic;
      ex.content = std::make_shared<const PatchMatrix>(load_patch_file(file));
      out.examples.push_back(std::move(ex));
    }
  }
  return out;
}

MixedBatchSampler::MixedBatchSampler(std::size_t real_count, std::size_t synth_count, int real_batch_size, int ratio,
                                     std::uint64_t seed)
    : real_count_(real_count),
      synth_count_(synth_count),
      real_batch_size_(real_batch_size),
      ratio_(ratio),
      seed_(seed) {
  if (real_count_ == 0) throw Error(ErrorKind::kConfig, "real training pool is empty");
  if (real_batch_size_ < 1) throw Error(ErrorKind::kConfig, "real_batch_size must be >= 1");
  if (ratio_ < 1) throw Error(ErrorKind::kConfig, "synthetic:real ratio must be an integer >= 1");
}

std::size_t MixedBatchSampler::iterations_per_epoch() const {
  return (real_count_ + static_cast<std::size_t>(real_batch_size_) - 1) / static_cast<std::size_t>(real_batch_size_);
}

std::size_t MixedBatchSampler::draw(int stream, std::size_t position, std::size_t count) const {
  const std::size_t epoch = position / count;
  const auto key = std::make_pair(stream, epoch);
  auto it = permutations_.find(key);
  if (it == permutations_.end()) {
    if (permutations_.size() > 8) permutations_.clear();
    std::vector<std::size_t> perm(count);
    for (std::size_t i = 0; i < count; ++i) perm[i] = i;
    std::mt19937_64 rng(derive_seed(seed_, static_cast<std::uint64_t>(stream), epoch));
    std::shuffle(perm.begin(), perm.end(), rng);
    it = permutations_.emplace(key, std::move(perm)).first;
  }
  return it->second[position % count];
}

MixedBatch MixedBatchSampler::batch(std::size_t iteration) const {
  MixedBatch b;
  const auto bs = static_cast<std::size_t>(real_batch_size_);
  for (std::size_t i = 0; i < bs; ++i) b.real.push_back(draw(0, iteration * bs + i, real_count_));
  if (synth_count_ > 0) {
    const std::size_t ss = bs * static_cast<std::size_t>(ratio_);
    for (std::size_t i = 0; i < ss; ++i) b.synthetic.push_back(draw(1, iteration * ss + i, synth_count_));
  }
  return b;
}

MiningResult mine_triplets(const MixedBatch& batch, const std::vector<LabeledExample>& real_pool,
                           const std::vector<LabeledExample>& synth_pool, const ClassSpace& classes,
                           std::mt19937_64& rng) {
  MiningResult out;
  for (std::size_t a = 0; a < batch.synthetic.size(); ++a) {
    const int cls = synth_pool[batch.synthetic[a]].class_id;
    std::vector<std::size_t> same, other;
    if (classes.is_base(cls)) {
      for (std::size_t r = 0; r < batch.real.size(); ++r)
        (real_pool[batch.real[r]].class_id == cls ? same : other).push_back(r);
    }
    if (same.empty() || other.empty()) {
      ++out.skipped;
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick_same(0, same.size() - 1), pick_other(0, other.size() - 1);
    const std::size_t pos = same[pick_same(rng)];
    const std::size_t neg = other[pick_other(rng)];
    out.triplets.push_back({a, pos, neg});
  }
  return out;
}

}  // namespace syncclip

#include <fstream>
#include <set>

#include "doctest.h"
#include "support.hpp"

using namespace syncclip;
namespace fs = std::filesystem;

namespace {

LabeledExample example(const std::string& id, int cls, Domain d = Domain::kReal) {
  LabeledExample ex;
  ex.id = id;
  ex.class_id = cls;
  ex.domain = d;
  ex.content = std::make_shared<const PatchMatrix>(PatchMatrix::Constant(1, 2, cls));
  return ex;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  for (const auto& l : lines) out << l << "\n";
}

// Ten classes c0..c9, one image per class in each split.
fs::path ten_class_dataset(const std::string& name) {
  const fs::path root = syncclip::testing::scratch_dir(name);
  std::vector<std::string> lines;
  for (int c = 0; c < 10; ++c) {
    const std::string cls = "c" + std::to_string(c);
    save_patch_file(root / "images" / cls / "a.tok", PatchMatrix::Constant(2, 3, c));
    lines.push_back(cls + "/a.tok\t" + cls);
  }
  for (const char* split : {"train", "val", "test"}) write_lines(root / "splits" / (std::string(split) + ".txt"), lines);
  return root;
}

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::kConfig;
}

}  // namespace

TEST_CASE("dataset loading") {
  const DatasetEntry toy = lookup_dataset("toy");
  SUBCASE("default split halves the sorted class list") {
    const auto root = ten_class_dataset("half");
    const auto d = load_dataset(root, toy);
    CHECK(d.classes.base.size() == 5);
    CHECK(d.classes.novel.size() == 5);
    CHECK(d.classes.names[static_cast<std::size_t>(d.classes.base[0])] == "c0");
    // Novel reals stay out of train and val.
    CHECK(d.train.size() == 5);
    CHECK(d.val.size() == 5);
    CHECK(d.test.size() == 10);
    for (const auto& ex : d.train) CHECK(d.classes.is_base(ex.class_id));
    CHECK(d.test[3].content->isApprox(PatchMatrix::Constant(2, 3, 3)));
  }
  SUBCASE("explicit split file is respected verbatim") {
    const auto root = ten_class_dataset("explicit");
    std::vector<std::string> roles;
    for (int c = 0; c < 10; ++c) roles.push_back("c" + std::to_string(c) + (c == 2 || c == 5 || c == 9 ? "\tbase" : "\tnovel"));
    write_lines(root / "splits" / "base_novel.txt", roles);
    const auto d = load_dataset(root, toy);
    CHECK(d.classes.base.size() == 3);
    CHECK(d.classes.novel.size() == 7);
    CHECK(d.classes.names[static_cast<std::size_t>(d.classes.base[1])] == "c5");
  }
  SUBCASE("duplicated class in the split file") {
    const auto root = ten_class_dataset("dup");
    write_lines(root / "splits" / "base_novel.txt", {"c0\tbase", "c0\tnovel"});
    CHECK(kind_of([&] { load_dataset(root, toy); }) == ErrorKind::kFormat);
  }
  SUBCASE("missing split file") {
    const auto root = ten_class_dataset("missing");
    fs::remove(root / "splits" / "val.txt");
    CHECK(kind_of([&] { load_dataset(root, toy); }) == ErrorKind::kIo);
  }
}

TEST_CASE("dataset registry") {
  CHECK(lookup_dataset("EuroSAT").prompt_template == "a centered satellite photo of [CLS].");
  CHECK(lookup_dataset("eurosat").beta.value() == 2.0);
  CHECK(lookup_dataset("FGVCAircraft").beta.value() == 2.0);
  CHECK(lookup_dataset("ImageNet").alpha.value() == 0.2);
  CHECK(lookup_dataset("Flowers102").alpha.value() == 0.2);
  CHECK_FALSE(lookup_dataset("DTD").alpha.has_value());
  CHECK(lookup_dataset("DTD").prompt_template == "[CLS] texture.");
  CHECK(kind_of([] { lookup_dataset("mnist"); }) == ErrorKind::kConfig);

  const fs::path dir = syncclip::testing::scratch_dir("registry");
  write_lines(dir / "registry.cfg", {"[mnist]", "template = \"a photo of the number: [CLS].\"", "beta = 1.5"});
  const auto e = lookup_dataset("mnist", dir / "registry.cfg");
  CHECK(e.prompt_template == "a photo of the number: [CLS].");
  CHECK(e.beta.value() == 1.5);
}

TEST_CASE("few-shot sampling") {
  ClassSpace cs;
  cs.names = {"big", "small", "unseen"};
  cs.base = {0, 1};
  cs.novel = {2};
  std::vector<LabeledExample> train;
  for (int i = 0; i < 40; ++i) train.push_back(example("big/" + std::to_string(i), 0));
  for (int i = 0; i < 5; ++i) train.push_back(example("small/" + std::to_string(i), 1));
  for (int i = 0; i < 3; ++i) train.push_back(example("unseen/" + std::to_string(i), 2));

  const auto a = few_shot_sample(train, cs, 16, 9);
  int big = 0, small = 0, unseen = 0;
  std::set<std::string> ids;
  for (const auto& ex : a.examples) {
    big += ex.class_id == 0;
    small += ex.class_id == 1;
    unseen += ex.class_id == 2;
    ids.insert(ex.id);
  }
  CHECK(big == 16);
  CHECK(small == 5);
  CHECK(unseen == 0);
  CHECK(ids.size() == a.examples.size());
  REQUIRE(a.warnings.size() == 1);
  CHECK(a.warnings[0].find("small") != std::string::npos);

  const auto b = few_shot_sample(train, cs, 16, 9);
  REQUIRE(a.examples.size() == b.examples.size());
  for (std::size_t i = 0; i < a.examples.size(); ++i) CHECK(a.examples[i].id == b.examples[i].id);

  // Stable under permutation of the listing.
  std::vector<LabeledExample> reversed(train.rbegin(), train.rend());
  const auto c = few_shot_sample(reversed, cs, 16, 9);
  std::set<std::string> ids_c;
  for (const auto& ex : c.examples) ids_c.insert(ex.id);
  CHECK(ids == ids_c);
}

TEST_CASE("synthetic ingestion") {
  ClassSpace cs;
  cs.names = {"golden_retriever", "tabby cat", "owl"};
  cs.base = {0, 1};
  cs.novel = {2};
  const fs::path dir = syncclip::testing::scratch_dir("ingest");
  for (int i = 0; i < 4; ++i) save_patch_file(dir / "Golden Retriever" / (std::to_string(i) + ".tok"), PatchMatrix::Zero(1, 2));
  for (int i = 0; i < 3; ++i) save_patch_file(dir / "tabby_cat" / (std::to_string(i) + ".tok"), PatchMatrix::Zero(1, 2));
  fs::create_directories(dir / "owl");

  const auto r = ingest_synthetic(dir, cs);
  CHECK(r.examples.size() == 7);
  for (const auto& ex : r.examples) CHECK(ex.domain == Domain::kSynthetic);
  CHECK(r.examples.front().class_id == 0);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("owl") != std::string::npos);

  fs::create_directories(dir / "zebra");
  try {
    ingest_synthetic(dir, cs);
    FAIL("unmatched folder accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUnmatchedClass);
    CHECK(std::string(e.what()).find("zebra") != std::string::npos);
  }
  CHECK(normalize_class_name("Golden Retriever") == normalize_class_name("golden_retriever"));
}

TEST_CASE("mixed batch sampler") {
  SUBCASE("default batch shape") {
    MixedBatchSampler s(64, 200, 8, 2, 1);
    for (std::size_t i = 0; i < 50; ++i) {
      const auto b = s.batch(i);
      CHECK(b.real.size() == 8);
      CHECK(b.synthetic.size() == 16);
    }
  }
  SUBCASE("ratio one gives equal halves") {
    MixedBatchSampler s(10, 10, 4, 1, 1);
    const auto b = s.batch(3);
    CHECK(b.real.size() == b.synthetic.size());
  }
  SUBCASE("exact ratio over many iterations, each epoch a permutation") {
    MixedBatchSampler s(24, 100, 8, 2, 5);
    std::size_t real = 0, synth = 0;
    for (std::size_t i = 0; i < 10000; ++i) {
      const auto b = s.batch(i);
      real += b.real.size();
      synth += b.synthetic.size();
    }
    CHECK(static_cast<double>(synth) / static_cast<double>(real) == 2.0);
    std::multiset<std::size_t> seen;
    for (std::size_t i = 0; i < s.iterations_per_epoch(); ++i)
      for (auto r : s.batch(i).real) seen.insert(r);
    CHECK(seen.size() == 24);
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 24);
  }
  SUBCASE("random access and determinism") {
    MixedBatchSampler a(30, 50, 8, 2, 7), b(30, 50, 8, 2, 7);
    const auto late = a.batch(17);
    for (std::size_t i = 0; i < 17; ++i) b.batch(i);
    CHECK(b.batch(17).real == late.real);
    CHECK(b.batch(17).synthetic == late.synthetic);
  }
  SUBCASE("empty synthetic pool gives real-only batches") {
    MixedBatchSampler s(10, 0, 4, 2, 1);
    CHECK(s.batch(0).synthetic.empty());
  }
}

TEST_CASE("triplet mining") {
  ClassSpace cs;
  cs.names = {"a", "b", "n"};
  cs.base = {0, 1};
  cs.novel = {2};
  std::vector<LabeledExample> real{example("r0", 0), example("r1", 1), example("r2", 0)};
  std::vector<LabeledExample> synth{example("s0", 0, Domain::kSynthetic), example("s1", 1, Domain::kSynthetic),
                                    example("s2", 2, Domain::kSynthetic)};
  MixedBatch batch;
  batch.real = {0, 1, 2};
  SUBCASE("one triplet per matched base anchor") {
    batch.synthetic = {0, 1, 0, 2};
    std::mt19937_64 rng(3);
    const auto m = mine_triplets(batch, real, synth, cs, rng);
    CHECK(m.triplets.size() == 3);
    CHECK(m.skipped == 1);
    for (const auto& t : m.triplets) {
      const int anchor = synth[batch.synthetic[t.anchor]].class_id;
      CHECK(cs.is_base(anchor));
      CHECK(real[batch.real[t.positive]].class_id == anchor);
      CHECK(real[batch.real[t.negative]].class_id != anchor);
    }
    std::mt19937_64 rng2(3);
    const auto again = mine_triplets(batch, real, synth, cs, rng2);
    for (std::size_t i = 0; i < m.triplets.size(); ++i) {
      CHECK(m.triplets[i].positive == again.triplets[i].positive);
      CHECK(m.triplets[i].negative == again.triplets[i].negative);
    }
  }
  SUBCASE("novel-only synthetic batch mines nothing") {
    batch.synthetic = {2, 2};
    std::mt19937_64 rng(3);
    const auto m = mine_triplets(batch, real, synth, cs, rng);
    CHECK(m.triplets.empty());
    CHECK(m.skipped == 2);
  }
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

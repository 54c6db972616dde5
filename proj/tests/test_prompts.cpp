#include <cmath>

#include "doctest.h"
#include "syncclip/prompts.hpp"

using namespace syncclip;

namespace {

PromptConfig small_config() {
  PromptConfig c;
  c.m1 = 2;
  c.m2 = 2;
  c.n = 2;
  c.k = 4;
  c.depth = 2;
  c.embed_dim_v = 6;
  c.embed_dim_t = 6;
  return c;
}

template <typename F>
void expect_kind(ErrorKind kind, F&& f) {
  try {
    f();
    FAIL("no error thrown");
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
  }
}

}  // namespace

TEST_CASE("prompt bank initialization") {
  const PromptConfig c = small_config();
  SUBCASE("deterministic per seed") {
    const auto a = init_prompt_bank(c, 7);
    const auto b = init_prompt_bank(c, 7);
    std::vector<Matrix<double>> va, vb;
    a.for_each([&](const std::string&, const Matrix<double>& m) { va.push_back(m); });
    b.for_each([&](const std::string&, const Matrix<double>& m) { vb.push_back(m); });
    REQUIRE(va.size() == vb.size());
    for (std::size_t i = 0; i < va.size(); ++i) CHECK(va[i] == vb[i]);
    CHECK(a.depth() == c.depth);
    CHECK(a.all_finite());
  }
  SUBCASE("zero scale gives zero prompts") {
    PromptConfig z = c;
    z.init_scale = 0.0;
    const auto bank = init_prompt_bank(z, 3);
    bank.for_each([](const std::string&, const Matrix<double>& m) { CHECK(m.isZero(0.0)); });
  }
  SUBCASE("sample mean within three standard errors") {
    PromptConfig big = c;
    big.embed_dim_v = big.embed_dim_t = 64;
    const auto bank = init_prompt_bank(big, 7);
    double sum = 0.0, sq = 0.0;
    long count = 0;
    bank.for_each([&](const std::string&, const Matrix<double>& m) {
      sum += m.sum();
      sq += m.squaredNorm();
      count += static_cast<long>(m.size());
    });
    const double mean = sum / count;
    CHECK(std::abs(mean) < 3 * big.init_scale / std::sqrt(static_cast<double>(count)));
    CHECK(std::sqrt(sq / count) == doctest::Approx(big.init_scale).epsilon(0.05));
  }
  SUBCASE("invalid configs") {
    PromptConfig bad = c;
    bad.n = 0;
    expect_kind(ErrorKind::kConfig, [&] { init_prompt_bank(bad, 1); });
    bad = c;
    bad.m1 = -1;
    expect_kind(ErrorKind::kConfig, [&] { bad.validate(); });
    expect_kind(ErrorKind::kConfig, [&] { c.validate_against(1, 4); });
  }
  CHECK(default_prompt_depth(12) == 9);
}

TEST_CASE("visual assembly") {
  const PromptConfig c = small_config();
  const auto bank = init_prompt_bank(c, 11);
  const Matrix<double> patches = Matrix<double>::Random(5, c.embed_dim_v);
  using S = Segment;

  SUBCASE("real domain layout") {
    const auto seq = assemble_visual_input(patches, bank, 0, Domain::kReal);
    CHECK(seq.size() == 9);
    CHECK(seq.segments == std::vector<S>{S::kPromptReal, S::kPromptReal, S::kPromptShared, S::kPromptShared,
                                         S::kContent, S::kContent, S::kContent, S::kContent, S::kContent});
    CHECK(seq.tokens.topRows(2) == bank.real_v[0]);
    CHECK(seq.content() == patches);
    seq.check_invariants();
  }
  SUBCASE("synthetic domain layout") {
    const auto seq = assemble_visual_input(patches, bank, 1, Domain::kSynthetic);
    CHECK(seq.size() == 9);
    CHECK(seq.segments[0] == S::kPromptSynth);
    CHECK(seq.segments[1] == S::kPromptSynth);
    CHECK(seq.tokens.topRows(2) == bank.synth_v[1]);
  }
  SUBCASE("both domains read the same shared rows") {
    const auto r = assemble_visual_input(patches, bank, 1, Domain::kReal);
    const auto s = assemble_visual_input(patches, bank, 1, Domain::kSynthetic);
    CHECK(r.tokens.middleRows(2, 2) == s.tokens.middleRows(2, 2));
    CHECK(r.tokens.middleRows(2, 2) == bank.shared_v[1]);
  }
  SUBCASE("empty domain slot") {
    PromptConfig z = c;
    z.m1 = 0;
    const auto zb = init_prompt_bank(z, 2);
    const auto seq = assemble_visual_input(patches, zb, 0, Domain::kReal);
    CHECK(seq.size() == 7);
    CHECK(seq.segments[0] == S::kPromptShared);
  }
  SUBCASE("ivlp uses one undivided group") {
    const auto seq = assemble_ivlp_visual_input(patches, bank, 0);
    CHECK(seq.size() == 5 + c.n);
    for (auto seg : seq.segments) CHECK((seg == S::kPromptShared || seg == S::kContent));
  }
  SUBCASE("layer out of range") {
    expect_kind(ErrorKind::kIndex, [&] { assemble_visual_input(patches, bank, 2, Domain::kReal); });
  }
  SUBCASE("deep prompting replaces the previous layer's prompt outputs") {
    auto seq = assemble_visual_input(patches, bank, 0, Domain::kReal);
    seq.tokens.array() += 1.0;  // stand-in for a transformer block
    const auto fresh = assemble_visual_input(patches, bank, 1, Domain::kReal);
    Matrix<double> prompts(4, c.embed_dim_v);
    prompts << bank.real_v[1], bank.shared_v[1];
    const auto next = reinject_prompts(seq, prompts, {S::kPromptReal, S::kPromptReal, S::kPromptShared,
                                                      S::kPromptShared});
    CHECK(next.tokens.topRows(4) == fresh.tokens.topRows(4));
    CHECK(next.content() == seq.content());
  }
}

TEST_CASE("text assembly") {
  const PromptConfig c = small_config();
  const auto bank = init_prompt_bank(c, 5);
  const Matrix<double> cls = Matrix<double>::Random(3, c.embed_dim_t);
  const auto seq = assemble_text_input(cls, bank, 0);
  CHECK(seq.size() == 7);
  CHECK(seq.tokens.topRows(4) == bank.textual[0]);
  CHECK(seq.content() == cls);
  CHECK(assemble_text_input(cls, bank, 0).tokens == seq.tokens);
  PromptConfig one = c;
  one.k = 1;
  const auto b1 = init_prompt_bank(one, 5);
  const auto s1 = assemble_text_input(cls, b1, 1);
  CHECK(s1.segments.front() != Segment::kContent);
  CHECK(s1.segments.back() == Segment::kContent);
  expect_kind(ErrorKind::kInput, [&] { assemble_text_input(Matrix<double>(0, c.embed_dim_t), bank, 0); });
}

TEST_CASE("image-conditioned textual prompts") {
  Matrix<double> base(2, 2);
  base << 1, 2, 3, 4;
  RowVector<double> f(2);
  f << 0.5, 1.5;
  SUBCASE("zero meta-network leaves prompts unchanged") {
    const auto zero = MetaNet<double>::zeros(2, 1, 2);
    CHECK(cocoop_condition<double>(f, base, zero) == base);
  }
  SUBCASE("identity meta-network adds the feature to every row") {
    auto id = MetaNet<double>::zeros(2, 2, 2);
    id.w1 = Matrix<double>::Identity(2, 2);
    id.w2 = Matrix<double>::Identity(2, 2);
    Matrix<double> expected(2, 2);
    expected << 1.5, 3.5, 3.5, 5.5;
    CHECK(cocoop_condition<double>(f, base, id).isApprox(expected));
  }
  SUBCASE("identical features give identical prompts") {
    std::mt19937_64 rng(3);
    const auto net = MetaNet<double>::random(2, 3, 2, 1.0, rng);
    CHECK(cocoop_condition<double>(f, base, net) == cocoop_condition<double>(RowVector<double>(f), base, net));
  }
  SUBCASE("width mismatch") {
    const auto wrong = MetaNet<double>::zeros(2, 1, 3);
    expect_kind(ErrorKind::kShape, [&] { cocoop_condition<double>(f, base, wrong); });
  }
}

TEST_CASE("prompt projection") {
  Matrix<double> pt(2, 2);
  pt << 1, 2, 3, 4;
  CHECK(maple_project<double>(pt, Matrix<double>::Identity(2, 2)) == pt);
  CHECK(maple_project<double>(pt, Matrix<double>::Zero(2, 2)).isZero(0.0));
  Matrix<double> proj(2, 2);
  proj << 0, 1, 2, -1;
  Matrix<double> expected(2, 2);
  expected << 1 * 0 + 2 * 2, 1 * 1 + 2 * -1, 3 * 0 + 4 * 2, 3 * 1 + 4 * -1;
  CHECK(maple_project<double>(pt, proj) == expected);
  expect_kind(ErrorKind::kShape, [&] { maple_project<double>(pt, Matrix<double>::Zero(3, 2)); });
}

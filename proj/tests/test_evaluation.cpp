#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "support.hpp"
#include "syncclip/evaluation.hpp"

using namespace syncclip;
using doctest::Approx;

namespace {

ClassSpace two_by_two() {
  ClassSpace cs;
  cs.names = {"b0", "b1", "n0", "n1"};
  cs.base = {0, 1};
  cs.novel = {2, 3};
  return cs;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Matrix<double> gaussian_rows(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

}  // namespace

TEST_CASE("harmonic mean") {
  CHECK(harmonic_mean(62.2, 65.4) == Approx(63.77).epsilon(1e-3));
  CHECK(std::abs(harmonic_mean(62.2, 65.4) - 63.8) <= 0.05);
  CHECK(std::abs(harmonic_mean(77.84, 71.04) - 74.28) <= 0.05);
  CHECK(harmonic_mean(0.0, 0.0) == 0.0);
  CHECK(harmonic_mean(50.0, 0.0) == 0.0);
  CHECK(harmonic_mean(70.0, 70.0) == Approx(70.0));
  CHECK(harmonic_mean(30.0, 90.0) == harmonic_mean(90.0, 30.0));
  // Never above the arithmetic mean, never below the smaller value.
  for (double b : {10.0, 40.0, 99.0})
    for (double n : {5.0, 40.0, 80.0}) {
      CHECK(harmonic_mean(b, n) <= (b + n) / 2 + 1e-12);
      CHECK(harmonic_mean(b, n) >= std::min(b, n) - 1e-12);
    }
  CHECK_THROWS_AS(harmonic_mean(-1.0, 3.0), Error);
}

TEST_CASE("protocols from one score matrix") {
  const ClassSpace cs = two_by_two();
  const std::vector<int> columns{0, 1, 2, 3};
  // Row 0: base image whose best score is a novel class. Row 2: novel image
  // whose best score is a base class. Both are right under ZSL only.
  Matrix<double> scores(4, 4);
  scores << 0.9, 0.1, 0.95, 0.0,  //
      0.1, 0.8, 0.2, 0.3,         //
      0.1, 0.9, 0.7, 0.2,         //
      0.0, 0.1, 0.2, 0.6;
  const std::vector<int> labels{0, 1, 2, 3};
  const auto zsl = report_from_scores(scores, labels, columns, cs, Protocol::kZsl);
  const auto gzsl = report_from_scores(scores, labels, columns, cs, Protocol::kGzsl);
  CHECK(*zsl.b_acc == 100.0);
  CHECK(*zsl.n_acc == 100.0);
  CHECK(*gzsl.b_acc == 50.0);
  CHECK(*gzsl.n_acc == 50.0);
  CHECK(*gzsl.hm == Approx(50.0));
  CHECK(gzsl.per_class.at(0) == 0.0);
  CHECK(gzsl.per_class.at(3) == 100.0);
  CHECK(*zsl.b_acc >= *gzsl.b_acc);
  CHECK(*zsl.n_acc >= *gzsl.n_acc);

  const auto all = report_from_scores(scores, labels, columns, cs, Protocol::kCrossDataset);
  CHECK(*all.accuracy == 50.0);
  CHECK_FALSE(all.hm.has_value());

  SUBCASE("ties go to the earlier column") {
    Matrix<double> tie = Matrix<double>::Constant(1, 4, 0.5);
    CHECK(restricted_argmax(tie, 0, columns, {1, 3}) == 1);
    CHECK(restricted_argmax(tie, 0, columns, {3, 2}) == 2);
  }
  SUBCASE("unknown label") {
    try {
      report_from_scores(scores, {0, 1, 2, 9}, columns, cs, Protocol::kGzsl);
      FAIL("unknown label accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kLabel);
    }
  }
  SUBCASE("json keeps only populated fields") {
    const auto j = nlohmann::json::parse(gzsl.to_json());
    CHECK(j["protocol"] == "gzsl");
    CHECK(j["hm"].get<double>() == Approx(50.0));
    CHECK_FALSE(j.contains("accuracy"));
    CHECK(parse_protocol("dg") == Protocol::kDomainGeneralization);
    CHECK(parse_protocol(to_string(Protocol::kCrossDataset)) == Protocol::kCrossDataset);
  }
}

TEST_CASE("prediction on the toy model") {
  const auto fixture = syncclip::testing::make_batch_fixture(4);
  const auto& data = fixture.data;
  const auto enc = DualEncoder<double>::toy(4);
  const PromptedModel<double> model(enc, Method::kSyncClip, 10.0);
  PromptConfig pc;
  const auto params = init_learnables(Method::kSyncClip, pc, enc.output_dim(), 0, 4);
  const auto tokens = model.tokenize(data.splits.classes);
  const auto& test = data.splits.test;
  const auto all = data.splits.classes.all();
  const auto scores = score_examples(model, params, test, all, tokens);
  REQUIRE(scores.rows() == static_cast<Eigen::Index>(test.size()));
  for (std::size_t i = 0; i < test.size(); ++i) {
    const int p = predict(model, params, *test[i].content, all, tokens);
    CHECK(p == restricted_argmax(scores, static_cast<Eigen::Index>(i), all, all));
  }
  const auto z = evaluate(model, params, test, data.splits.classes, Protocol::kZsl);
  const auto g = evaluate(model, params, test, data.splits.classes, Protocol::kGzsl);
  CHECK(*z.b_acc >= *g.b_acc);
  CHECK(*z.n_acc >= *g.n_acc);
}

TEST_CASE("frechet distance") {
  const Matrix<double> a = gaussian_rows(400, 3, 1);
  CHECK(fid(a, a) <= 1e-6);
  CHECK(fid(a, a) >= 0.0);
  // b = 2a: covariance 4S, so the trace term is tr(S + 4S - 4S) = tr(S).
  Matrix<double> centered = a.rowwise() - a.colwise().mean();
  const Matrix<double> cov = centered.transpose() * centered / (a.rows() - 1);
  const double expected = cov.trace() + a.colwise().mean().squaredNorm();
  CHECK(fid(a, Matrix<double>(2.0 * a)) == Approx(expected).epsilon(1e-4));
  CHECK(fid(a, gaussian_rows(400, 3, 2)) == Approx(fid(gaussian_rows(400, 3, 2), a)).epsilon(1e-6));
  CHECK_THROWS_AS(fid(a.topRows(1), a), Error);
  CHECK_THROWS_AS(fid(a, gaussian_rows(10, 4, 3)), Error);
}

TEST_CASE("domain centroid gap") {
  const Matrix<double> x = gaussian_rows(20, 5, 4);
  RowVector<double> v(5);
  v << 0.3, -0.4, 0.0, 1.2, 0.0;
  std::map<int, Matrix<double>> real{{0, x}, {1, x.topRows(5)}};
  std::map<int, Matrix<double>> synth{{0, Matrix<double>(x.rowwise() + v)}, {1, Matrix<double>(x.topRows(5).rowwise() + v)},
                                      {7, x}};
  CHECK(domain_centroid_gap(real, synth, false) == Approx(v.norm()));
  CHECK(domain_centroid_gap(real, real) == 0.0);
  CHECK(domain_centroid_gap(real, synth) > 0.0);
  CHECK_THROWS_AS(domain_centroid_gap(real, {{5, x}}), Error);
}

TEST_CASE("embedding export") {
  const auto fixture = syncclip::testing::make_batch_fixture(5);
  const auto enc = DualEncoder<double>::toy(5);
  const PromptedModel<double> model(enc, Method::kSyncClip, 10.0);
  const auto params = init_learnables(Method::kSyncClip, PromptConfig{}, enc.output_dim(), 0, 5);
  auto examples = fixture.data.splits.test;
  examples.insert(examples.end(), fixture.data.synthetic.begin(), fixture.data.synthetic.begin() + 2);
  const auto dir = syncclip::testing::scratch_dir("export");
  export_embeddings(model, params, examples, fixture.data.splits.classes, dir / "a.jsonl");
  export_embeddings(model, params, examples, fixture.data.splits.classes, dir / "b.jsonl");
  const std::string a = slurp(dir / "a.jsonl");
  CHECK(a == slurp(dir / "b.jsonl"));

  std::istringstream lines(a);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    const auto& ex = examples[n];
    CHECK(j["id"] == ex.id);
    CHECK(j["class_name"] == fixture.data.splits.classes.names[static_cast<std::size_t>(ex.class_id)]);
    CHECK(j["domain"] == (ex.domain == Domain::kReal ? "real" : "synthetic"));
    const auto vec = j["vector"].get<std::vector<double>>();
    REQUIRE(static_cast<int>(vec.size()) == enc.output_dim());
    const auto expect = model.encode_image(*ex.content, params, route_for(ex.domain));
    CHECK(vec[0] == expect(0));
    ++n;
  }
  CHECK(n == examples.size());
  CHECK_THROWS_AS(write_embeddings(dir / "missing" / "deeper" / "x.jsonl", examples, {}, fixture.data.splits.classes),
                  Error);
}

TEST_CASE("report table") {
  EvalReport z, g;
  z.b_acc = 80.0;
  z.n_acc = 70.0;
  z.hm = harmonic_mean(80.0, 70.0);
  g.b_acc = 60.0;
  g.n_acc = 50.5;
  g.hm = harmonic_mean(60.0, 50.5);
  const std::string t = render_report_table({{"sync-clip", z, g}, {"ivlp", std::nullopt, g}});
  CHECK(t.find("sync-clip") != std::string::npos);
  CHECK(t.find("50.50") != std::string::npos);
  CHECK(t.find("74.67") != std::string::npos);
  CHECK(t.find("GZSL B") < t.find("ZSL B", t.find("GZSL B") + 1));
}

#include "syncclip/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "json.hpp"

namespace syncclip {

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::kZsl: return "zsl";
    case Protocol::kGzsl: return "gzsl";
    case Protocol::kCrossDataset: return "cross-dataset";
    case Protocol::kDomainGeneralization: return "domain-generalization";
  }
  return "?";
}

Protocol parse_protocol(std::string_view text) {
  if (text == "zsl") return Protocol::kZsl;
  if (text == "gzsl") return Protocol::kGzsl;
  if (text == "cross-dataset") return Protocol::kCrossDataset;
  if (text == "domain-generalization" || text == "dg") return Protocol::kDomainGeneralization;
  throw Error(ErrorKind::kConfig, "unknown protocol '" + std::string(text) + "'");
}

double harmonic_mean(double b, double n) {
  if (b < 0 || n < 0) throw Error(ErrorKind::kInput, "accuracies must be non-negative");
  if (b + n == 0) return 0.0;
  return 2 * b * n / (b + n);
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["protocol"] = std::string(syncclip::to_string(protocol));
  auto opt = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  opt("b_acc", b_acc);
  opt("n_acc", n_acc);
  opt("hm", hm);
  opt("accuracy", accuracy);
  nlohmann::ordered_json pc = nlohmann::ordered_json::object();
  for (const auto& [cls, acc] : per_class) pc[std::to_string(cls)] = acc;
  j["per_class"] = pc;
  nlohmann::ordered_json diag = nlohmann::ordered_json::object();
  if (diagnostics.fid) diag["fid"] = *diagnostics.fid;
  if (diagnostics.domain_centroid_gap) diag["domain_centroid_gap"] = *diagnostics.domain_centroid_gap;
  if (diagnostics.skipped_triplets) diag["skipped_triplets"] = *diagnostics.skipped_triplets;
  j["diagnostics"] = diag;
  return j.dump(2);
}

int restricted_argmax(const Matrix<double>& scores, Eigen::Index row, const std::vector<int>& column_ids,
                      const std::vector<int>& subset) {
  if (subset.empty()) throw Error(ErrorKind::kInput, "empty class subset");
  int best = -1;
  double best_score = 0.0;
  for (std::size_t j = 0; j < column_ids.size(); ++j) {
    if (std::find(subset.begin(), subset.end(), column_ids[j]) == subset.end()) continue;
    const double s = scores(row, static_cast<Eigen::Index>(j));
    // Ties go to the earlier column.
    if (best < 0 || s > best_score) {
      best = column_ids[j];
      best_score = s;
    }
  }
  if (best < 0) throw Error(ErrorKind::kInput, "class subset has no scored column");
  return best;
}

double Tally::accuracy() const {
  int correct = 0, total = 0;
  for (const auto& [cls, ct] : per_class) {
    correct += ct.first;
    total += ct.second;
  }
  return total == 0 ? 0.0 : 100.0 * correct / total;
}

std::map<int, double> Tally::per_class_accuracy() const {
  std::map<int, double> out;
  for (const auto& [cls, ct] : per_class) out[cls] = ct.second == 0 ? 0.0 : 100.0 * ct.first / ct.second;
  return out;
}

Tally tally(const Matrix<double>& scores, const std::vector<int>& labels, const std::vector<int>& column_ids,
            const std::vector<int>& subset, const std::vector<int>& rows) {
  Tally t;
  for (int r : rows) {
    const int label = labels.at(static_cast<std::size_t>(r));
    auto& ct = t.per_class[label];
    ct.second += 1;
    if (restricted_argmax(scores, r, column_ids, subset) == label) ct.first += 1;
  }
  return t;
}

EvalReport report_from_scores(const Matrix<double>& scores, const std::vector<int>& labels,
                              const std::vector<int>& column_ids, const ClassSpace& classes, Protocol protocol) {
  EvalReport report;
  report.protocol = protocol;
  const std::vector<int> all = classes.all();
  if (protocol == Protocol::kCrossDataset || protocol == Protocol::kDomainGeneralization) {
    std::vector<int> rows(labels.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
    const Tally t = tally(scores, labels, column_ids, all, rows);
    report.accuracy = t.accuracy();
    report.per_class = t.per_class_accuracy();
    return report;
  }
  std::vector<int> base_rows, novel_rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (classes.is_base(labels[i])) base_rows.push_back(static_cast<int>(i));
    else if (classes.is_novel(labels[i])) novel_rows.push_back(static_cast<int>(i));
    else throw Error(ErrorKind::kLabel, "test label " + std::to_string(labels[i]) + " is outside the class space");
  }
  const bool gzsl = protocol == Protocol::kGzsl;
  const Tally tb = tally(scores, labels, column_ids, gzsl ? all : classes.base, base_rows);
  const Tally tn = tally(scores, labels, column_ids, gzsl ? all : classes.novel, novel_rows);
  report.b_acc = tb.accuracy();
  report.n_acc = tn.accuracy();
  report.hm = harmonic_mean(*report.b_acc, *report.n_acc);
  report.per_class = tb.per_class_accuracy();
  for (const auto& [cls, acc] : tn.per_class_accuracy()) report.per_class[cls] = acc;
  return report;
}

namespace {

Matrix<double> covariance(const Matrix<double>& x, const RowVector<double>& mean) {
  const Matrix<double> centered = x.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

// Symmetric PSD square root by eigendecomposition; tiny negative
// eigenvalues from rounding are clamped.
Matrix<double> sqrt_psd(const Matrix<double>& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double fid(const Matrix<double>& a, const Matrix<double>& b, double eps) {
  if (a.rows() < 2 || b.rows() < 2) throw Error(ErrorKind::kInput, "fid needs at least 2 samples per set");
  if (a.cols() != b.cols()) throw Error(ErrorKind::kShape, "fid feature widths differ");
  const RowVector<double> mu_a = a.colwise().mean();
  const RowVector<double> mu_b = b.colwise().mean();
  const auto d = a.cols();
  const Matrix<double> eye = Matrix<double>::Identity(d, d) * eps;
  const Matrix<double> sa = covariance(a, mu_a) + eye;
  const Matrix<double> sb = covariance(b, mu_b) + eye;
  // Tr((Sa Sb)^1/2) = Tr((Sa^1/2 Sb Sa^1/2)^1/2), the latter symmetric.
  const Matrix<double> ra = sqrt_psd(sa);
  const Matrix<double> inner = ra * sb * ra;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2 * tr_sqrt;
  return std::max(value, 0.0);
}

double fid(const std::vector<Embedding<double>>& a, const std::vector<Embedding<double>>& b, double eps) {
  auto stack = [](const std::vector<Embedding<double>>& v) {
    if (v.empty()) return Matrix<double>(0, 0);
    Matrix<double> m(static_cast<Eigen::Index>(v.size()), v[0].dim());
    for (std::size_t i = 0; i < v.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = v[i].vector;
    return m;
  };
  return fid(stack(a), stack(b), eps);
}

double domain_centroid_gap(const std::map<int, Matrix<double>>& real_by_class,
                           const std::map<int, Matrix<double>>& synth_by_class, bool normalize) {
  auto centroid = [normalize](const Matrix<double>& m) {
    if (!normalize) return RowVector<double>(m.colwise().mean());
    return RowVector<double>(m.rowwise().normalized().colwise().mean());
  };
  double sum = 0.0;
  int shared = 0;
  for (const auto& [cls, real] : real_by_class) {
    auto it = synth_by_class.find(cls);
    if (it == synth_by_class.end() || real.rows() == 0 || it->second.rows() == 0) continue;
    sum += (centroid(real) - centroid(it->second)).norm();
    ++shared;
  }
  if (shared == 0) throw Error(ErrorKind::kInput, "no class is present in both domains");
  return sum / shared;
}

void write_embeddings(const std::filesystem::path& path, const std::vector<LabeledExample>& examples,
                      const std::vector<RowVector<double>>& vectors, const ClassSpace& classes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write embeddings to '" + path.string() + "'");
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    nlohmann::ordered_json j;
    j["id"] = ex.id;
    j["class_name"] = classes.names.at(static_cast<std::size_t>(ex.class_id));
    j["domain"] = std::string(to_string(ex.domain));
    j["vector"] = std::vector<double>(vectors[i].data(), vectors[i].data() + vectors[i].size());
    out << j.dump() << "\n";
  }
  if (!out) throw Error(ErrorKind::kIo, "failed writing '" + path.string() + "'");
}

std::string render_report_table(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  auto cell = [&](const std::optional<double>& v) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(2);
    if (v) c << *v;
    else c << "-";
    return c.str();
  };
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.method.size());
  out << std::left << std::setw(static_cast<int>(width)) << "Method" << " | " << std::right << std::setw(7) << "GZSL B"
      << std::setw(8) << "N" << std::setw(8) << "HM" << " | " << std::setw(7) << "ZSL B" << std::setw(8) << "N"
      << std::setw(8) << "HM" << "\n";
  out << std::string(width, '-') << "-+-" << std::string(23, '-') << "-+-" << std::string(23, '-') << "\n";
  for (const auto& r : rows) {
    auto triple = [&](const std::optional<EvalReport>& e) {
      std::ostringstream t;
      t << std::right << std::setw(7) << cell(e ? e->b_acc : std::nullopt) << std::setw(8)
        << cell(e ? e->n_acc : std::nullopt) << std::setw(8) << cell(e ? e->hm : std::nullopt);
      return t.str();
    };
    out << std::left << std::setw(static_cast<int>(width)) << r.method << " | " << triple(r.gzsl) << " | "
        << triple(r.zsl) << "\n";
  }
  return out.str();
}

}  // namespace syncclip

#ifndef SYNCCLIP_EVALUATION_HPP_
#define SYNCCLIP_EVALUATION_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "syncclip/model.hpp"

namespace syncclip {

enum class Protocol { kZsl, kGzsl, kCrossDataset, kDomainGeneralization };

std::string_view to_string(Protocol p);
Protocol parse_protocol(std::string_view text);

/// 2bn/(b+n); defined as 0 when both are 0.
double harmonic_mean(double b, double n);

struct Diagnostics {
  std::optional<double> fid;
  std::optional<double> domain_centroid_gap;
  std::optional<int> skipped_triplets;
};

struct EvalReport {
  Protocol protocol = Protocol::kGzsl;
  std::optional<double> b_acc;  // percentages
  std::optional<double> n_acc;
  std::optional<double> hm;
  std::optional<double> accuracy;  // single-space protocols (cross-dataset, DG)
  std::map<int, double> per_class;
  Diagnostics diagnostics;

  std::string to_json() const;
};

/// Cosine scores of every example against every class in `class_ids`,
/// [N x C]. Images go through the real-domain route.
template <typename T>
Matrix<T> score_examples(const PromptedModel<T>& model, const Learnables<T>& params,
                         const std::vector<LabeledExample>& examples, const std::vector<int>& class_ids,
                         const std::vector<std::vector<int>>& class_tokens);

/// Argmax of the row over the columns whose class id is in `subset`.
int restricted_argmax(const Matrix<double>& scores, Eigen::Index row, const std::vector<int>& column_ids,
                      const std::vector<int>& subset);

/// Class id predicted for one real image among `class_subset`.
template <typename T>
int predict(const PromptedModel<T>& model, const Learnables<T>& params, const Matrix<T>& patches,
            const std::vector<int>& class_subset, const std::vector<std::vector<int>>& class_tokens);

/// Accuracy bookkeeping from a score matrix whose columns are `column_ids`.
struct Tally {
  std::map<int, std::pair<int, int>> per_class;  // class -> (correct, total)
  double accuracy() const;                      // percentage, micro-averaged
  std::map<int, double> per_class_accuracy() const;
};

Tally tally(const Matrix<double>& scores, const std::vector<int>& labels, const std::vector<int>& column_ids,
            const std::vector<int>& subset, const std::vector<int>& rows);

/// ZSL: base test against Y_b, novel test against Y_n. GZSL: both against
/// Y_b u Y_n. Cross-dataset and domain generalization score every test
/// example against all classes of `classes`.
EvalReport report_from_scores(const Matrix<double>& scores, const std::vector<int>& labels,
                              const std::vector<int>& column_ids, const ClassSpace& classes, Protocol protocol);

template <typename T>
EvalReport evaluate(const PromptedModel<T>& model, const Learnables<T>& params,
                    const std::vector<LabeledExample>& test, const ClassSpace& classes, Protocol protocol);

/// Fréchet distance between row sets, covariances regularized by eps*I.
double fid(const Matrix<double>& a, const Matrix<double>& b, double eps = 1e-6);
double fid(const std::vector<Embedding<double>>& a, const std::vector<Embedding<double>>& b, double eps = 1e-6);

/// Mean over shared classes of the L2 distance between real and synthetic
/// class centroids. Rows are L2-normalized first unless `normalize` is off.
double domain_centroid_gap(const std::map<int, Matrix<double>>& real_by_class,
                           const std::map<int, Matrix<double>>& synth_by_class, bool normalize = true);

/// Embeddings per example, grouped by class; each example goes through its
/// own domain's prompt route.
template <typename T>
std::map<int, Matrix<double>> embeddings_by_class(const PromptedModel<T>& model, const Learnables<T>& params,
                                                  const std::vector<LabeledExample>& examples);

template <typename T>
std::vector<RowVector<double>> embed_examples(const PromptedModel<T>& model, const Learnables<T>& params,
                                              const std::vector<LabeledExample>& examples);

/// One JSON line per example: {"id","class_name","domain","vector"}.
void write_embeddings(const std::filesystem::path& path, const std::vector<LabeledExample>& examples,
                      const std::vector<RowVector<double>>& vectors, const ClassSpace& classes);

template <typename T>
void export_embeddings(const PromptedModel<T>& model, const Learnables<T>& params,
                       const std::vector<LabeledExample>& examples, const ClassSpace& classes,
                       const std::filesystem::path& path) {
  write_embeddings(path, examples, embed_examples(model, params, examples), classes);
}

/// A row of the B/N/HM table.
struct ReportRow {
  std::string method;
  std::optional<EvalReport> zsl;
  std::optional<EvalReport> gzsl;
};

/// Plain-text table laid out as method | GZSL B N HM | ZSL B N HM.
std::string render_report_table(const std::vector<ReportRow>& rows);

}  // namespace syncclip

#include "syncclip/evaluation_impl.hpp"

#endif  // SYNCCLIP_EVALUATION_HPP_

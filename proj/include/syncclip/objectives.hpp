#ifndef SYNCCLIP_OBJECTIVES_HPP_
#define SYNCCLIP_OBJECTIVES_HPP_

#include <span>
#include <string>
#include <vector>

#include "syncclip/common.hpp"

namespace syncclip {

/// Mean divides each loss by its batch (or triplet) count; Sum keeps the
/// literal summed form.
enum class Reduction { kMean, kSum };

std::string_view to_string(Reduction r);
Reduction parse_reduction(std::string_view text);

struct LossWeights {
  double alpha = 0.1;  // synthetic cross-entropy
  double beta = 0.5;   // cross-domain feature alignment

  void validate() const;
};

/// Per-step loss record.
struct LossComponents {
  double rce = 0.0;
  double sce = 0.0;
  double fs = 0.0;
  double total = 0.0;
  int skipped_triplets = 0;
};

/// total = rce + alpha * sce + beta * fs
double combine_losses(double rce, double sce, double fs, const LossWeights& w);

template <typename T>
T cosine_sim(const RowVector<T>& u, const RowVector<T>& v);

/// softmax(temperature * cos(f_img, class_c)) over the rows of class_embs.
template <typename T>
Vector<T> class_probabilities(const RowVector<T>& f_img, const Matrix<T>& class_embs, T temperature);

/// Embeddings paired with class ids.
template <typename T>
struct LabeledEmbeddings {
  Matrix<T> embeddings;  // [N x D]
  std::vector<int> class_ids;
};

/// The candidate classes of a classifier: class ids and their text
/// embeddings, row-aligned.
template <typename T>
struct ClassTable {
  std::vector<int> class_ids;
  Matrix<T> embeddings;  // [C x D]

  int row_of(int class_id) const;
};

template <typename T>
struct ClassifierLoss {
  T loss = T(0);
  Matrix<T> grad_images;   // [N x D]
  Matrix<T> grad_classes;  // [C x D]
};

/// -log p(y|x) under cosine-softmax, for a single image against a table.
/// Gradients are accumulated (scaled by `scale`) into the two output rows.
template <typename T>
T cross_entropy_one(const RowVector<T>& image, int target_row, const Matrix<T>& classes, T temperature, T scale,
                    RowVector<T>* grad_image, Matrix<T>* grad_classes);

/// Cross-entropy of real base-class samples against the base classes only.
template <typename T>
ClassifierLoss<T> rce_loss(const LabeledEmbeddings<T>& real_batch, const ClassTable<T>& base_classes, T temperature,
                           Reduction reduction = Reduction::kMean);

/// Cross-entropy of synthetic samples against the unified base+novel classes.
template <typename T>
ClassifierLoss<T> sce_loss(const LabeledEmbeddings<T>& synth_batch, const ClassTable<T>& all_classes, T temperature,
                           Reduction reduction = Reduction::kMean);

template <typename T>
struct TripletEmbeddings {
  RowVector<T> anchor;    // synthetic, base class a
  RowVector<T> positive;  // real, class a
  RowVector<T> negative;  // real, class b != a
};

template <typename T>
struct AlignmentLoss {
  T loss = T(0);
  std::vector<RowVector<T>> grad_anchor, grad_positive, grad_negative;
  int skipped = 0;  // 1 when the triplet list was empty
};

/// max{d(a,p) - d(a,n), 0} + d(a,p), d = L1 distance. With `normalize`, the
/// distance is taken between L2-normalized embeddings.
template <typename T>
AlignmentLoss<T> fs_loss(std::span<const TripletEmbeddings<T>> triplets, Reduction reduction = Reduction::kMean,
                         bool normalize = true);

/// Back-propagates a gradient w.r.t. v/|v| into a gradient w.r.t. v.
template <typename T>
RowVector<T> normalize_backward(const RowVector<T>& v, const RowVector<T>& grad_normalized);

}  // namespace syncclip

#include "syncclip/objectives_impl.hpp"

#endif  // SYNCCLIP_OBJECTIVES_HPP_

// Template definitions for objectives.hpp.
#ifndef SYNCCLIP_OBJECTIVES_IMPL_HPP_
#define SYNCCLIP_OBJECTIVES_IMPL_HPP_

#include <cmath>

namespace syncclip {

template <typename T>
T cosine_sim(const RowVector<T>& u, const RowVector<T>& v) {
  if (u.size() != v.size()) throw Error(ErrorKind::kShape, "cosine of vectors with different widths");
  const T nu = u.norm(), nv = v.norm();
  if (nu == T(0) || nv == T(0)) throw Error(ErrorKind::kNumeric, "cosine similarity of a zero vector");
  return u.dot(v) / (nu * nv);
}

namespace detail {

template <typename T>
Matrix<T> normalize_rows(const Matrix<T>& m) {
  Matrix<T> out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const T n = m.row(r).norm();
    if (n == T(0)) throw Error(ErrorKind::kNumeric, "zero class embedding");
    out.row(r) = m.row(r) / n;
  }
  return out;
}

template <typename T>
Vector<T> stable_softmax(const Vector<T>& logits) {
  const T mx = logits.maxCoeff();
  Vector<T> e = (logits.array() - mx).exp();
  return e / e.sum();
}

template <typename T>
T sign_of(T x) {
  return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0));
}

}  // namespace detail

template <typename T>
RowVector<T> normalize_backward(const RowVector<T>& v, const RowVector<T>& grad_normalized) {
  const T n = v.norm();
  if (n == T(0)) throw Error(ErrorKind::kNumeric, "cannot normalize a zero embedding");
  const RowVector<T> unit = v / n;
  return (grad_normalized - unit * unit.dot(grad_normalized)) / n;
}

template <typename T>
Vector<T> class_probabilities(const RowVector<T>& f_img, const Matrix<T>& class_embs, T temperature) {
  if (class_embs.rows() == 0) throw Error(ErrorKind::kInput, "class list is empty");
  if (!(temperature > T(0))) throw Error(ErrorKind::kInput, "temperature must be positive");
  Vector<T> logits(class_embs.rows());
  for (Eigen::Index c = 0; c < class_embs.rows(); ++c)
    logits(c) = temperature * cosine_sim<T>(f_img, class_embs.row(c));
  return detail::stable_softmax(logits);
}

template <typename T>
int ClassTable<T>::row_of(int class_id) const {
  for (std::size_t i = 0; i < class_ids.size(); ++i)
    if (class_ids[i] == class_id) return static_cast<int>(i);
  return -1;
}

template <typename T>
T cross_entropy_one(const RowVector<T>& image, int target_row, const Matrix<T>& classes, T temperature, T scale,
                    RowVector<T>* grad_image, Matrix<T>* grad_classes) {
  const T img_norm = image.norm();
  if (img_norm == T(0)) throw Error(ErrorKind::kNumeric, "zero image embedding");
  const RowVector<T> u = image / img_norm;
  const Matrix<T> t = detail::normalize_rows(classes);
  const Vector<T> logits = temperature * (t * u.transpose());
  const Vector<T> p = detail::stable_softmax(logits);
  const T mx = logits.maxCoeff();
  const T log_z = mx + std::log((logits.array() - mx).exp().sum());
  const T loss = log_z - logits(target_row);

  if (grad_image || grad_classes) {
    Vector<T> d_logits = p;
    d_logits(target_row) -= T(1);
    d_logits *= scale * temperature;
    if (grad_image) *grad_image += normalize_backward<T>(image, RowVector<T>(d_logits.transpose() * t));
    if (grad_classes) {
      for (Eigen::Index c = 0; c < classes.rows(); ++c) {
        if (d_logits(c) == T(0)) continue;
        grad_classes->row(c) += normalize_backward<T>(classes.row(c), RowVector<T>(d_logits(c) * u));
      }
    }
  }
  return loss;
}

namespace detail {

template <typename T>
ClassifierLoss<T> labeled_cross_entropy(const LabeledEmbeddings<T>& batch, const ClassTable<T>& table, T temperature,
                                        Reduction reduction, const char* space_name) {
  if (static_cast<std::size_t>(batch.embeddings.rows()) != batch.class_ids.size())
    throw Error(ErrorKind::kShape, "embedding rows differ from label count");
  if (!(temperature > T(0))) throw Error(ErrorKind::kInput, "temperature must be positive");
  ClassifierLoss<T> out;
  out.grad_images = Matrix<T>::Zero(batch.embeddings.rows(), batch.embeddings.cols());
  out.grad_classes = Matrix<T>::Zero(table.embeddings.rows(), table.embeddings.cols());
  const std::size_t n = batch.class_ids.size();
  if (n == 0) return out;
  if (table.embeddings.rows() == 0) throw Error(ErrorKind::kInput, "class list is empty");
  const T scale = reduction == Reduction::kMean ? T(1) / static_cast<T>(n) : T(1);
  for (std::size_t i = 0; i < n; ++i) {
    const int row = table.row_of(batch.class_ids[i]);
    if (row < 0)
      throw Error(ErrorKind::kLabel, "label " + std::to_string(batch.class_ids[i]) + " outside " + space_name);
    RowVector<T> g = RowVector<T>::Zero(batch.embeddings.cols());
    const auto ei = static_cast<Eigen::Index>(i);
    out.loss += scale * cross_entropy_one<T>(batch.embeddings.row(ei), row, table.embeddings, temperature, scale, &g,
                                             &out.grad_classes);
    out.grad_images.row(ei) = g;
  }
  return out;
}

}  // namespace detail

template <typename T>
ClassifierLoss<T> rce_loss(const LabeledEmbeddings<T>& real_batch, const ClassTable<T>& base_classes, T temperature,
                           Reduction reduction) {
  return detail::labeled_cross_entropy(real_batch, base_classes, temperature, reduction, "the base classes");
}

template <typename T>
ClassifierLoss<T> sce_loss(const LabeledEmbeddings<T>& synth_batch, const ClassTable<T>& all_classes, T temperature,
                           Reduction reduction) {
  return detail::labeled_cross_entropy(synth_batch, all_classes, temperature, reduction,
                                       "the base+novel classes");
}

template <typename T>
AlignmentLoss<T> fs_loss(std::span<const TripletEmbeddings<T>> triplets, Reduction reduction, bool normalize) {
  AlignmentLoss<T> out;
  if (triplets.empty()) {
    out.skipped = 1;
    return out;
  }
  const T scale = reduction == Reduction::kMean ? T(1) / static_cast<T>(triplets.size()) : T(1);
  for (const auto& tr : triplets) {
    auto prep = [&](const RowVector<T>& v) -> RowVector<T> {
      if (!normalize) return v;
      const T n = v.norm();
      if (n == T(0)) throw Error(ErrorKind::kNumeric, "zero embedding in triplet");
      return v / n;
    };
    const RowVector<T> a = prep(tr.anchor), p = prep(tr.positive), n = prep(tr.negative);
    if (a.size() != p.size() || a.size() != n.size()) throw Error(ErrorKind::kShape, "triplet widths differ");
    const RowVector<T> diff_ap = a - p, diff_an = a - n;
    const T d1 = diff_ap.cwiseAbs().sum();
    const T d2 = diff_an.cwiseAbs().sum();
    const bool active = d1 - d2 > T(0);
    out.loss += scale * ((active ? d1 - d2 : T(0)) + d1);

    const RowVector<T> s_ap = diff_ap.unaryExpr([](T x) { return detail::sign_of(x); });
    const RowVector<T> s_an = diff_an.unaryExpr([](T x) { return detail::sign_of(x); });
    const T w1 = scale * (active ? T(2) : T(1));
    const T w2 = active ? scale : T(0);
    RowVector<T> ga = w1 * s_ap - w2 * s_an;
    RowVector<T> gp = -w1 * s_ap;
    RowVector<T> gn = w2 * s_an;
    if (normalize) {
      ga = normalize_backward<T>(tr.anchor, ga);
      gp = normalize_backward<T>(tr.positive, gp);
      gn = normalize_backward<T>(tr.negative, gn);
    }
    out.grad_anchor.push_back(std::move(ga));
    out.grad_positive.push_back(std::move(gp));
    out.grad_negative.push_back(std::move(gn));
  }
  return out;
}

}  // namespace syncclip

#endif  // SYNCCLIP_OBJECTIVES_IMPL_HPP_

// Template definitions for transformer.hpp.
#ifndef SYNCCLIP_TRANSFORMER_IMPL_HPP_
#define SYNCCLIP_TRANSFORMER_IMPL_HPP_

namespace syncclip {
namespace detail {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kQuickGeluAlpha = 1.702;

template <typename T>
Matrix<T> layer_norm(const Matrix<T>& x, const Matrix<T>& gain, const Matrix<T>& bias, LayerNormCache<T>* cache) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  Matrix<T> xhat(rows, cols);
  Vector<T> inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const T mean = x.row(r).mean();
    const RowVector<T> centered = x.row(r).array() - mean;
    const T var = centered.squaredNorm() / static_cast<T>(cols);
    inv_std(r) = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    xhat.row(r) = centered * inv_std(r);
  }
  Matrix<T> y = (xhat.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
Matrix<T> layer_norm_backward(const LayerNormCache<T>& cache, const Matrix<T>& gain, const Matrix<T>& grad_y) {
  const Eigen::Index cols = grad_y.cols();
  Matrix<T> dxhat = grad_y.array().rowwise() * gain.row(0).array();
  Matrix<T> dx(grad_y.rows(), cols);
  for (Eigen::Index r = 0; r < grad_y.rows(); ++r) {
    const T mean_d = dxhat.row(r).mean();
    const T mean_dx = dxhat.row(r).dot(cache.xhat.row(r)) / static_cast<T>(cols);
    dx.row(r) = (dxhat.row(r).array() - mean_d - cache.xhat.row(r).array() * mean_dx) * cache.inv_std(r);
  }
  return dx;
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void softmax_rows(Matrix<T>& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const T mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

template <typename T>
void fill_normal(Matrix<T>& m, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(normal(rng));
}

}  // namespace detail

template <typename T>
TransformerWeights<T> TransformerWeights<T>::random(const EncoderSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  const int d = spec.embed_dim, f = spec.embed_dim * spec.mlp_ratio;
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  TransformerWeights<T> w;
  w.spec = spec;
  w.pos.resize(spec.max_tokens, d);
  detail::fill_normal(w.pos, 0.1, rng);
  for (int l = 0; l < spec.n_layers; ++l) {
    BlockWeights<T> b;
    b.ln1_g = Matrix<T>::Ones(1, d);
    b.ln1_b = Matrix<T>::Zero(1, d);
    for (Matrix<T>* m : {&b.wq, &b.wk, &b.wv, &b.wo}) {
      m->resize(d, d);
      detail::fill_normal(*m, sd, rng);
    }
    for (Matrix<T>* m : {&b.bq, &b.bk, &b.bv, &b.bo}) *m = Matrix<T>::Zero(1, d);
    b.ln2_g = Matrix<T>::Ones(1, d);
    b.ln2_b = Matrix<T>::Zero(1, d);
    b.w1.resize(d, f);
    detail::fill_normal(b.w1, sd, rng);
    b.b1 = Matrix<T>::Zero(1, f);
    b.w2.resize(f, d);
    detail::fill_normal(b.w2, 1.0 / std::sqrt(static_cast<double>(f)), rng);
    b.b2 = Matrix<T>::Zero(1, d);
    w.blocks.push_back(std::move(b));
  }
  w.lnf_g = Matrix<T>::Ones(1, d);
  w.lnf_b = Matrix<T>::Zero(1, d);
  w.proj.resize(d, spec.output_dim);
  detail::fill_normal(w.proj, sd, rng);
  return w;
}

template <typename T>
template <typename U>
TransformerWeights<U> TransformerWeights<T>::cast() const {
  TransformerWeights<U> out;
  out.spec = spec;
  out.blocks.resize(blocks.size());
  std::vector<const Matrix<T>*> src;
  for_each([&](const std::string&, const Matrix<T>& m) { src.push_back(&m); });
  std::size_t i = 0;
  out.for_each([&](const std::string&, Matrix<U>& m) { m = src[i++]->template cast<U>(); });
  return out;
}

template <typename T>
Transformer<T>::Transformer(TransformerWeights<T> weights) : weights_(std::move(weights)) {
  weights_.spec.validate();
  if (static_cast<int>(weights_.blocks.size()) != weights_.spec.n_layers)
    throw Error(ErrorKind::kShape, "weight block count differs from n_layers");
}

template <typename T>
Matrix<T> Transformer<T>::block_forward(const BlockWeights<T>& w, const Matrix<T>& x, BlockTape<T>* tape) const {
  const int heads = weights_.spec.n_heads;
  const Eigen::Index d = x.cols(), dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  LayerNormCache<T> ln1;
  const Matrix<T> z = detail::layer_norm(x, w.ln1_g, w.ln1_b, &ln1);
  Matrix<T> q = (z * w.wq).rowwise() + w.bq.row(0);
  Matrix<T> k = (z * w.wk).rowwise() + w.bk.row(0);
  Matrix<T> v = (z * w.wv).rowwise() + w.bv.row(0);

  Matrix<T> ctx(x.rows(), d);
  std::vector<Matrix<T>> attn(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Matrix<T> s = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() * scale;
    detail::softmax_rows(s);
    ctx.middleCols(h * dh, dh).noalias() = s * v.middleCols(h * dh, dh);
    attn[static_cast<std::size_t>(h)] = std::move(s);
  }
  Matrix<T> hidden = x + ((ctx * w.wo).rowwise() + w.bo.row(0));

  LayerNormCache<T> ln2;
  const Matrix<T> z2 = detail::layer_norm(hidden, w.ln2_g, w.ln2_b, &ln2);
  Matrix<T> u = (z2 * w.w1).rowwise() + w.b1.row(0);
  Matrix<T> act = u.unaryExpr([](T a) { return a * detail::sigmoid(static_cast<T>(detail::kQuickGeluAlpha) * a); });
  Matrix<T> y = hidden + ((act * w.w2).rowwise() + w.b2.row(0));

  if (tape) {
    tape->ln1 = std::move(ln1);
    tape->q = std::move(q);
    tape->k = std::move(k);
    tape->v = std::move(v);
    tape->attn = std::move(attn);
    tape->ln2 = std::move(ln2);
    tape->u = std::move(u);
  }
  return y;
}

template <typename T>
Matrix<T> Transformer<T>::block_backward(const BlockWeights<T>& w, const BlockTape<T>& tape,
                                         const Matrix<T>& grad_y) const {
  const int heads = weights_.spec.n_heads;
  const Eigen::Index d = grad_y.cols(), dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const T alpha = static_cast<T>(detail::kQuickGeluAlpha);

  // MLP branch.
  Matrix<T> d_act = grad_y * w.w2.transpose();
  Matrix<T> d_u = d_act.binaryExpr(tape.u, [alpha](T g, T a) {
    const T s = detail::sigmoid(alpha * a);
    return g * (s + alpha * a * s * (T(1) - s));
  });
  Matrix<T> d_hidden = grad_y + detail::layer_norm_backward(tape.ln2, w.ln2_g, Matrix<T>(d_u * w.w1.transpose()));

  // Attention branch.
  const Matrix<T> d_ctx = d_hidden * w.wo.transpose();
  Matrix<T> dq(grad_y.rows(), d), dk(grad_y.rows(), d), dv(grad_y.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const Matrix<T>& p = tape.attn[static_cast<std::size_t>(h)];
    const auto dc = d_ctx.middleCols(h * dh, dh);
    Matrix<T> dp = dc * tape.v.middleCols(h * dh, dh).transpose();
    dv.middleCols(h * dh, dh).noalias() = p.transpose() * dc;
    const Vector<T> row_dot = dp.cwiseProduct(p).rowwise().sum();
    Matrix<T> ds = p.cwiseProduct(Matrix<T>(dp.colwise() - row_dot)) * scale;
    dq.middleCols(h * dh, dh).noalias() = ds * tape.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh).noalias() = ds.transpose() * tape.q.middleCols(h * dh, dh);
  }
  const Matrix<T> dz = dq * w.wq.transpose() + dk * w.wk.transpose() + dv * w.wv.transpose();
  return d_hidden + detail::layer_norm_backward(tape.ln1, w.ln1_g, dz);
}

template <typename T>
RowVector<T> Transformer<T>::forward(const Matrix<T>& content, std::span<const Matrix<T>> layer_prompts,
                                     Eigen::Index readout, EncoderTape<T>* tape) const {
  const EncoderSpec& spec = weights_.spec;
  const Eigen::Index d = spec.embed_dim;
  if (content.cols() != d)
    throw Error(ErrorKind::kShape, "content width " + std::to_string(content.cols()) + " != embed_dim " +
                                       std::to_string(d));
  if (content.rows() == 0 || content.rows() > spec.max_tokens)
    throw Error(ErrorKind::kShape, "content length " + std::to_string(content.rows()) + " outside [1, " +
                                       std::to_string(spec.max_tokens) + "]");
  if (readout < 0 || readout >= content.rows()) throw Error(ErrorKind::kIndex, "readout row outside content");
  if (static_cast<int>(layer_prompts.size()) > spec.n_layers)
    throw Error(ErrorKind::kShape, "prompted depth " + std::to_string(layer_prompts.size()) + " exceeds " +
                                       std::to_string(spec.n_layers) + " layers");
  const Eigen::Index p = layer_prompts.empty() ? 0 : layer_prompts[0].rows();
  for (const auto& m : layer_prompts)
    if (m.rows() != p || (p > 0 && m.cols() != d))
      throw Error(ErrorKind::kShape, "prompt block shape differs across layers or from embed_dim");

  Matrix<T> x(p + content.rows(), d);
  if (p > 0) x.topRows(p) = layer_prompts[0];
  x.bottomRows(content.rows()) = content + weights_.pos.topRows(content.rows());

  if (tape) {
    tape->prompt_count = p;
    tape->prompted_layers = static_cast<int>(layer_prompts.size());
    tape->readout_row = p + readout;
    tape->blocks.assign(static_cast<std::size_t>(spec.n_layers), {});
  }
  for (int l = 0; l < spec.n_layers; ++l) {
    if (l > 0 && l < static_cast<int>(layer_prompts.size()) && p > 0) x.topRows(p) = layer_prompts[l];
    x = block_forward(weights_.blocks[static_cast<std::size_t>(l)], x,
                      tape ? &tape->blocks[static_cast<std::size_t>(l)] : nullptr);
  }
  const Matrix<T> row = x.row(p + readout);
  LayerNormCache<T> lnf;
  const Matrix<T> normed = detail::layer_norm(row, weights_.lnf_g, weights_.lnf_b, &lnf);
  RowVector<T> out = normed * weights_.proj;
  if (!out.allFinite()) throw Error(ErrorKind::kNumeric, "non-finite encoder activation");
  if (tape) tape->lnf = std::move(lnf);
  return out;
}

template <typename T>
std::vector<Matrix<T>> Transformer<T>::backward(const EncoderTape<T>& tape, const RowVector<T>& grad_out) const {
  const EncoderSpec& spec = weights_.spec;
  if (grad_out.size() != spec.output_dim) throw Error(ErrorKind::kShape, "gradient width != output_dim");
  const Eigen::Index p = tape.prompt_count;
  const Eigen::Index len = tape.blocks.empty() ? 0 : tape.blocks.front().q.rows();

  const Matrix<T> d_normed = grad_out * weights_.proj.transpose();
  Matrix<T> dx = Matrix<T>::Zero(len, spec.embed_dim);
  dx.row(tape.readout_row) = detail::layer_norm_backward(tape.lnf, weights_.lnf_g, d_normed);

  std::vector<Matrix<T>> grads(static_cast<std::size_t>(tape.prompted_layers));
  for (int l = spec.n_layers - 1; l >= 0; --l) {
    dx = block_backward(weights_.blocks[static_cast<std::size_t>(l)], tape.blocks[static_cast<std::size_t>(l)], dx);
    if (l < tape.prompted_layers) {
      grads[static_cast<std::size_t>(l)] = dx.topRows(p);
      if (p > 0) dx.topRows(p).setZero();
    }
  }
  return grads;
}

}  // namespace syncclip

#endif  // SYNCCLIP_TRANSFORMER_IMPL_HPP_

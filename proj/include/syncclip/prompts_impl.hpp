// Template definitions for prompts.hpp.
#ifndef SYNCCLIP_PROMPTS_IMPL_HPP_
#define SYNCCLIP_PROMPTS_IMPL_HPP_

namespace syncclip {

template <typename T>
PromptBank<T> PromptBank<T>::zeros(const PromptConfig& config) {
  config.validate();
  PromptBank<T> bank;
  bank.config = config;
  for (int l = 0; l < config.depth; ++l) {
    bank.real_v.push_back(Matrix<T>::Zero(config.m1, config.embed_dim_v));
    bank.synth_v.push_back(Matrix<T>::Zero(config.m2, config.embed_dim_v));
    bank.shared_v.push_back(Matrix<T>::Zero(config.n, config.embed_dim_v));
    bank.textual.push_back(Matrix<T>::Zero(config.k, config.embed_dim_t));
  }
  return bank;
}

template <typename T>
bool PromptBank<T>::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const Matrix<T>& m) { ok = ok && m.allFinite(); });
  return ok;
}

template <typename T>
template <typename U>
PromptBank<U> PromptBank<T>::cast() const {
  PromptBank<U> out;
  out.config = config;
  auto conv = [](const std::vector<Matrix<T>>& src, std::vector<Matrix<U>>& dst) {
    for (const auto& m : src) dst.push_back(m.template cast<U>());
  };
  conv(real_v, out.real_v);
  conv(synth_v, out.synth_v);
  conv(shared_v, out.shared_v);
  conv(textual, out.textual);
  return out;
}

template <typename T>
MetaNet<T> MetaNet<T>::random(int in_dim, int hidden, int out_dim, double scale, std::mt19937_64& rng) {
  MetaNet<T> net = zeros(in_dim, hidden, out_dim);
  std::normal_distribution<double> n1(0.0, scale / std::sqrt(static_cast<double>(in_dim)));
  for (Eigen::Index i = 0; i < net.w1.size(); ++i) net.w1.data()[i] = static_cast<T>(n1(rng));
  std::normal_distribution<double> n2(0.0, scale / std::sqrt(static_cast<double>(hidden)));
  for (Eigen::Index i = 0; i < net.w2.size(); ++i) net.w2.data()[i] = static_cast<T>(n2(rng));
  return net;
}

template <typename T>
MetaNet<T> MetaNet<T>::zeros(int in_dim, int hidden, int out_dim) {
  if (in_dim <= 0 || hidden <= 0 || out_dim <= 0)
    throw Error(ErrorKind::kConfig, "meta-network widths must be positive");
  return MetaNet<T>{Matrix<T>::Zero(in_dim, hidden), Matrix<T>::Zero(1, hidden), Matrix<T>::Zero(hidden, out_dim),
                    Matrix<T>::Zero(1, out_dim)};
}

template <typename T>
RowVector<T> MetaNet<T>::forward(const RowVector<T>& feature) const {
  if (feature.size() != w1.rows())
    throw Error(ErrorKind::kShape, "meta-network expects feature width " + std::to_string(w1.rows()) + ", got " +
                                       std::to_string(feature.size()));
  RowVector<T> hidden = (feature * w1 + b1).cwiseMax(T(0));
  return hidden * w2 + b2;
}

template <typename T>
void MetaNet<T>::backward(const RowVector<T>& feature, const RowVector<T>& grad_out, MetaNet& grad) const {
  const RowVector<T> pre = feature * w1 + b1;
  const RowVector<T> hidden = pre.cwiseMax(T(0));
  grad.w2.noalias() += hidden.transpose() * grad_out;
  grad.b2 += grad_out;
  RowVector<T> d_hidden = grad_out * w2.transpose();
  for (Eigen::Index j = 0; j < d_hidden.size(); ++j)
    if (pre(j) <= T(0)) d_hidden(j) = T(0);
  grad.w1.noalias() += feature.transpose() * d_hidden;
  grad.b1 += d_hidden;
}

template <typename T>
Learnables<T> Learnables<T>::zeros_like() const {
  Learnables<T> out = *this;
  out.for_each([](const std::string&, Matrix<T>& m) { m.setZero(); });
  return out;
}

template <typename T>
std::size_t Learnables<T>::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix<T>& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename T>
bool Learnables<T>::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const Matrix<T>& m) { ok = ok && m.allFinite(); });
  return ok;
}

template <typename T>
template <typename U>
Learnables<U> Learnables<T>::cast() const {
  Learnables<U> out;
  out.bank = bank.template cast<U>();
  if (metanet)
    out.metanet = MetaNet<U>{metanet->w1.template cast<U>(), metanet->b1.template cast<U>(),
                             metanet->w2.template cast<U>(), metanet->b2.template cast<U>()};
  if (projector) out.projector = projector->template cast<U>();
  return out;
}

template <typename T>
Eigen::Index TokenSequence<T>::prompt_count() const {
  Eigen::Index n = 0;
  for (auto s : segments) n += s != Segment::kContent ? 1 : 0;
  return n;
}

template <typename T>
Matrix<T> TokenSequence<T>::content() const {
  const Eigen::Index p = prompt_count();
  return tokens.bottomRows(tokens.rows() - p);
}

template <typename T>
void TokenSequence<T>::check_invariants() const {
  if (static_cast<Eigen::Index>(segments.size()) != tokens.rows())
    throw Error(ErrorKind::kShape, "segment map length differs from token count");
  bool seen_content = false;
  for (auto s : segments) {
    if (s == Segment::kContent)
      seen_content = true;
    else if (seen_content)
      throw Error(ErrorKind::kShape, "prompt token after content token");
  }
}

namespace detail {

template <typename T>
TokenSequence<T> concat_blocks(std::initializer_list<std::pair<const Matrix<T>*, Segment>> blocks) {
  Eigen::Index rows = 0, cols = -1;
  for (const auto& [m, seg] : blocks) {
    if (m->rows() == 0) continue;
    if (cols >= 0 && m->cols() != cols)
      throw Error(ErrorKind::kShape, "token width mismatch: " + std::to_string(m->cols()) + " vs " +
                                         std::to_string(cols));
    cols = m->cols();
    rows += m->rows();
  }
  TokenSequence<T> out;
  out.tokens.resize(rows, cols < 0 ? 0 : cols);
  Eigen::Index at = 0;
  for (const auto& [m, seg] : blocks) {
    if (m->rows() == 0) continue;
    out.tokens.middleRows(at, m->rows()) = *m;
    out.segments.insert(out.segments.end(), static_cast<std::size_t>(m->rows()), seg);
    at += m->rows();
  }
  return out;
}

template <typename T>
void check_layer(const PromptBank<T>& bank, int layer) {
  if (layer < 0 || layer >= bank.depth())
    throw Error(ErrorKind::kIndex, "prompt layer " + std::to_string(layer) + " outside [0, " +
                                       std::to_string(bank.depth()) + ")");
}

}  // namespace detail

template <typename T>
TokenSequence<T> assemble_visual_input(const Matrix<T>& patches, const PromptBank<T>& bank, int layer,
                                       Domain domain) {
  detail::check_layer(bank, layer);
  const bool real = domain == Domain::kReal;
  const Matrix<T>& own = real ? bank.real_v[layer] : bank.synth_v[layer];
  return detail::concat_blocks<T>({{&own, real ? Segment::kPromptReal : Segment::kPromptSynth},
                                   {&bank.shared_v[layer], Segment::kPromptShared},
                                   {&patches, Segment::kContent}});
}

template <typename T>
TokenSequence<T> assemble_ivlp_visual_input(const Matrix<T>& patches, const PromptBank<T>& bank, int layer) {
  detail::check_layer(bank, layer);
  return detail::concat_blocks<T>({{&bank.shared_v[layer], Segment::kPromptShared}, {&patches, Segment::kContent}});
}

template <typename T>
TokenSequence<T> assemble_text_input(const Matrix<T>& class_tokens, const PromptBank<T>& bank, int layer) {
  detail::check_layer(bank, layer);
  if (class_tokens.rows() == 0) throw Error(ErrorKind::kInput, "class token sequence is empty");
  return detail::concat_blocks<T>({{&bank.textual[layer], Segment::kPromptShared}, {&class_tokens, Segment::kContent}});
}

template <typename T>
TokenSequence<T> reinject_prompts(const TokenSequence<T>& previous_output, const Matrix<T>& fresh_prompts,
                                  const std::vector<Segment>& prompt_segments) {
  if (static_cast<Eigen::Index>(prompt_segments.size()) != fresh_prompts.rows())
    throw Error(ErrorKind::kShape, "prompt segment map length differs from prompt count");
  const Matrix<T> content = previous_output.content();
  TokenSequence<T> out;
  out.tokens.resize(fresh_prompts.rows() + content.rows(), content.cols());
  out.tokens.topRows(fresh_prompts.rows()) = fresh_prompts;
  out.tokens.bottomRows(content.rows()) = content;
  out.segments = prompt_segments;
  out.segments.insert(out.segments.end(), static_cast<std::size_t>(content.rows()), Segment::kContent);
  return out;
}

template <typename T>
Matrix<T> cocoop_condition(const RowVector<T>& image_feature, const Matrix<T>& base_prompts,
                           const MetaNet<T>& metanet) {
  if (metanet.out_dim() != base_prompts.cols())
    throw Error(ErrorKind::kShape, "meta-network output width " + std::to_string(metanet.out_dim()) +
                                       " differs from prompt width " + std::to_string(base_prompts.cols()));
  const RowVector<T> shift = metanet.forward(image_feature);
  return base_prompts.rowwise() + shift;
}

template <typename T>
Matrix<T> maple_project(const Matrix<T>& textual_prompts, const Matrix<T>& projector) {
  if (projector.rows() != textual_prompts.cols())
    throw Error(ErrorKind::kShape, "projector expects width " + std::to_string(projector.rows()) + ", got " +
                                       std::to_string(textual_prompts.cols()));
  return textual_prompts * projector;
}

}  // namespace syncclip

#endif  // SYNCCLIP_PROMPTS_IMPL_HPP_

#include "syncclip/model.hpp"

namespace syncclip {

Learnables<double> init_learnables(Method method, const PromptConfig& config, int image_feature_dim,
                                   int metanet_hidden, std::uint64_t seed) {
  Learnables<double> params;
  params.bank = init_prompt_bank(config, seed);
  if (method == Method::kCoCoOp) {
    std::mt19937_64 rng(derive_seed(seed, 0xC0C0));
    const int hidden = metanet_hidden > 0 ? metanet_hidden : std::max(1, config.embed_dim_t / 16);
    params.metanet = MetaNet<double>::random(image_feature_dim, hidden, config.embed_dim_t, 1.0, rng);
  }
  if (method == Method::kMaPLe) {
    std::mt19937_64 rng(derive_seed(seed, 0x3A91E));
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(config.embed_dim_t)));
    Matrix<double> proj(config.embed_dim_t, config.embed_dim_v);
    for (Eigen::Index i = 0; i < proj.size(); ++i) proj.data()[i] = normal(rng);
    params.projector = std::move(proj);
  }
  return params;
}

}  // namespace syncclip

#include "syncclip/training.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace syncclip {

void TrainConfig::validate() const {
  std::string problems;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) problems += (problems.empty() ? "" : "; ") + what;
  };
  need(lr0 >= 0 && std::isfinite(lr0), "train.lr0 must be >= 0");
  need(momentum >= 0 && momentum < 1, "train.momentum must be in [0, 1)");
  need(weight_decay >= 0, "train.weight_decay must be >= 0");
  need(epochs >= 1, "train.epochs must be >= 1");
  need(real_batch_size >= 1, "train.real_batch_size must be >= 1");
  need(ratio >= 1, "train.ratio must be >= 1");
  need(temperature > 0, "train.temperature must be > 0");
  need(warmup_steps >= 0, "train.warmup_steps must be >= 0");
  need(grad_clip >= 0, "train.grad_clip must be >= 0");
  need(shots >= 1, "train.shots must be >= 1");
  need(max_steps >= 0, "train.max_steps must be >= 0");
  try {
    weights.validate();
  } catch (const Error& e) {
    need(false, e.what());
  }
  if (!problems.empty()) throw Error(ErrorKind::kConfig, problems);
}

double cosine_annealed_lr(double lr0, long long step, long long total_steps) {
  if (total_steps <= 0) throw Error(ErrorKind::kConfig, "total_steps must be positive");
  if (step < 0 || step > total_steps) throw Error(ErrorKind::kConfig, "step outside [0, total_steps]");
  return lr0 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps))) / 2.0;
}

double scheduled_lr(const TrainConfig& config, long long step, long long total_steps) {
  const double lr = cosine_annealed_lr(config.lr0, step, total_steps);
  if (step < config.warmup_steps) return lr * static_cast<double>(step + 1) / config.warmup_steps;
  return lr;
}

PromptConfig prompt_config_from(const TextConfig& cfg, const PromptConfig& d) {
  PromptConfig c = d;
  c.m1 = static_cast<int>(cfg.get_int("prompts.m1", d.m1));
  c.m2 = static_cast<int>(cfg.get_int("prompts.m2", d.m2));
  c.n = static_cast<int>(cfg.get_int("prompts.n", d.n));
  c.k = static_cast<int>(cfg.get_int("prompts.k", d.k));
  c.depth = static_cast<int>(cfg.get_int("prompts.depth", d.depth));
  c.embed_dim_v = static_cast<int>(cfg.get_int("prompts.embed_dim_v", d.embed_dim_v));
  c.embed_dim_t = static_cast<int>(cfg.get_int("prompts.embed_dim_t", d.embed_dim_t));
  c.init_scale = cfg.get_double("prompts.init_scale", d.init_scale);
  return c;
}

namespace {

std::string exact(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

void prompt_config_into(TextConfig& cfg, const PromptConfig& c) {
  cfg.set("prompts.m1", std::to_string(c.m1));
  cfg.set("prompts.m2", std::to_string(c.m2));
  cfg.set("prompts.n", std::to_string(c.n));
  cfg.set("prompts.k", std::to_string(c.k));
  cfg.set("prompts.depth", std::to_string(c.depth));
  cfg.set("prompts.embed_dim_v", std::to_string(c.embed_dim_v));
  cfg.set("prompts.embed_dim_t", std::to_string(c.embed_dim_t));
  cfg.set("prompts.init_scale", exact(c.init_scale));
}

TrainConfig train_config_from(const TextConfig& cfg, const TrainConfig& d) {
  TrainConfig c = d;
  c.lr0 = cfg.get_double("train.lr0", d.lr0);
  c.momentum = cfg.get_double("train.momentum", d.momentum);
  c.weight_decay = cfg.get_double("train.weight_decay", d.weight_decay);
  c.epochs = static_cast<int>(cfg.get_int("train.epochs", d.epochs));
  c.real_batch_size = static_cast<int>(cfg.get_int("train.real_batch_size", d.real_batch_size));
  c.ratio = static_cast<int>(cfg.get_int("train.ratio", d.ratio));
  c.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", static_cast<long long>(d.seed)));
  c.precision = parse_precision(cfg.get_string("train.precision", std::string(to_string(d.precision))));
  c.temperature = cfg.get_double("train.temperature", d.temperature);
  c.warmup_steps = static_cast<int>(cfg.get_int("train.warmup_steps", d.warmup_steps));
  c.grad_clip = cfg.get_double("train.grad_clip", d.grad_clip);
  c.reduction = parse_reduction(cfg.get_string("train.reduction", std::string(to_string(d.reduction))));
  c.shots = static_cast<int>(cfg.get_int("train.shots", d.shots));
  c.max_steps = cfg.get_int("train.max_steps", d.max_steps);
  c.weights.alpha = cfg.get_double("weights.alpha", d.weights.alpha);
  c.weights.beta = cfg.get_double("weights.beta", d.weights.beta);
  return c;
}

void train_config_into(TextConfig& cfg, const TrainConfig& c) {
  cfg.set("train.lr0", exact(c.lr0));
  cfg.set("train.momentum", exact(c.momentum));
  cfg.set("train.weight_decay", exact(c.weight_decay));
  cfg.set("train.epochs", std::to_string(c.epochs));
  cfg.set("train.real_batch_size", std::to_string(c.real_batch_size));
  cfg.set("train.ratio", std::to_string(c.ratio));
  cfg.set("train.seed", std::to_string(c.seed));
  cfg.set("train.precision", std::string(to_string(c.precision)));
  cfg.set("train.temperature", exact(c.temperature));
  cfg.set("train.warmup_steps", std::to_string(c.warmup_steps));
  cfg.set("train.grad_clip", exact(c.grad_clip));
  cfg.set("train.reduction", std::string(to_string(c.reduction)));
  cfg.set("train.shots", std::to_string(c.shots));
  cfg.set("train.max_steps", std::to_string(c.max_steps));
  cfg.set("weights.alpha", exact(c.weights.alpha));
  cfg.set("weights.beta", exact(c.weights.beta));
}

std::string StepRecord::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["l_rce"] = components.rce;
  j["l_sce"] = components.sce;
  j["l_fs"] = components.fs;
  j["total"] = components.total;
  j["skipped_triplets"] = components.skipped_triplets;
  j["lr"] = lr;
  return j.dump();
}

TermScales term_scales(const LossWeights& w) { return {1.0, w.alpha, w.beta}; }

long long total_training_steps(const TrainData& data, const TrainConfig& config) {
  const MixedBatchSampler sampler(data.real.size(), data.synthetic.size(), config.real_batch_size, config.ratio, 0);
  long long total = static_cast<long long>(sampler.iterations_per_epoch()) * config.epochs;
  if (config.max_steps > 0) total = std::min(total, config.max_steps);
  return total;
}

namespace detail {

std::string checkpoint_metadata(Method method, const PromptConfig& prompts, const TrainConfig& config,
                                const EncoderSpec& visual, const EncoderSpec& text, std::uint32_t backbone_checksum,
                                Precision precision, long long step, std::optional<double> best_val) {
  TextConfig cfg;
  cfg.set("checkpoint.format", "syncclip-checkpoint-1");
  cfg.set("checkpoint.method", std::string(to_string(method)));
  cfg.set("checkpoint.step", std::to_string(step));
  cfg.set("checkpoint.backbone_checksum", std::to_string(backbone_checksum));
  cfg.set("checkpoint.precision", std::string(to_string(precision)));
  if (best_val) cfg.set("checkpoint.best_val", exact(*best_val));
  prompt_config_into(cfg, prompts);
  train_config_into(cfg, config);
  encoder_spec_into(cfg, "visual", visual);
  encoder_spec_into(cfg, "text", text);
  return cfg.render();
}

std::string describe_batch(const MixedBatch& batch) {
  std::ostringstream out;
  out << "real batch indices [";
  for (std::size_t i = 0; i < batch.real.size(); ++i) out << (i ? "," : "") << batch.real[i];
  out << "], synthetic batch indices [";
  for (std::size_t i = 0; i < batch.synthetic.size(); ++i) out << (i ? "," : "") << batch.synthetic[i];
  out << "]";
  return out.str();
}

}  // namespace detail

namespace {

Learnables<double> read_learnables(const Archive& archive, const std::string& prefix, const PromptConfig& config) {
  Learnables<double> out;
  out.bank = PromptBank<double>::zeros(config);
  if (archive.contains(prefix + "metanet.w1")) {
    const auto& w1 = archive.at(prefix + "metanet.w1");
    const auto& w2 = archive.at(prefix + "metanet.w2");
    if (w1.shape.size() != 2 || w2.shape.size() != 2)
      throw Error(ErrorKind::kFormat, "meta-network arrays must be 2-d");
    out.metanet = MetaNet<double>::zeros(static_cast<int>(w1.shape[0]), static_cast<int>(w1.shape[1]),
                                         static_cast<int>(w2.shape[1]));
  }
  if (archive.contains(prefix + "projector")) out.projector = Matrix<double>(config.embed_dim_t, config.embed_dim_v);
  out.for_each([&](const std::string& name, Matrix<double>& m) {
    const Matrix<double> stored = archive.get_matrix<double>(prefix + name);
    if (stored.rows() != m.rows() || stored.cols() != m.cols())
      throw Error(ErrorKind::kShape, "checkpoint array '" + prefix + name + "' has an unexpected shape");
    m = stored;
  });
  return out;
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::kIo, "checkpoint '" + path.string() + "' not found");
  const Archive archive = Archive::load(path);
  const TextConfig meta = TextConfig::parse(archive.metadata, path.string());
  for (const char* key : {"checkpoint.format", "checkpoint.method", "checkpoint.step", "checkpoint.backbone_checksum"})
    if (!meta.has(key))
      throw Error(ErrorKind::kFormat, "'" + path.string() + "' is not a checkpoint (missing " + key + ")");
  if (meta.get_string("checkpoint.format", "") != "syncclip-checkpoint-1")
    throw Error(ErrorKind::kFormat, "'" + path.string() + "' has an unknown checkpoint format");
  Checkpoint ck;
  ck.metadata = archive.metadata;
  ck.method = parse_method(meta.get_string("checkpoint.method", ""));
  ck.step = meta.get_int("checkpoint.step", 0);
  ck.backbone_checksum = static_cast<std::uint32_t>(meta.get_int("checkpoint.backbone_checksum", 0));
  ck.stored_precision = parse_precision(meta.get_string("checkpoint.precision", "f64"));
  if (meta.has("checkpoint.best_val")) ck.best_val = meta.get_double("checkpoint.best_val", 0.0);
  ck.config = train_config_from(meta);
  ck.visual_spec = encoder_spec_from(meta, "visual");
  ck.text_spec = encoder_spec_from(meta, "text");
  const PromptConfig prompts = prompt_config_from(meta);
  ck.params = read_learnables(archive, "param/", prompts);
  ck.momentum = read_learnables(archive, "momentum/", prompts);
  ck.params.bank.config = prompts;
  ck.momentum.bank.config = prompts;
  return ck;
}

void check_compatible(const Checkpoint& ck, const EncoderSpec& visual, const EncoderSpec& text,
                      std::uint32_t backbone_checksum) {
  if (!(ck.visual_spec == visual))
    throw Error(ErrorKind::kConfig, "checkpoint visual encoder {" + ck.visual_spec.describe() +
                                        "} does not match the loaded encoder {" + visual.describe() + "}");
  if (!(ck.text_spec == text))
    throw Error(ErrorKind::kConfig, "checkpoint text encoder {" + ck.text_spec.describe() +
                                        "} does not match the loaded encoder {" + text.describe() + "}");
  if (ck.backbone_checksum != backbone_checksum)
    throw Error(ErrorKind::kConfig, "checkpoint was trained against backbone checksum " +
                                        std::to_string(ck.backbone_checksum) + ", loaded backbone has " +
                                        std::to_string(backbone_checksum));
}

}  // namespace syncclip

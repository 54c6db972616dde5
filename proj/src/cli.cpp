#include "syncclip/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "syncclip/toy_data.hpp"

namespace fs = std::filesystem;

namespace syncclip {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kInput:
    case ErrorKind::kShape:
    case ErrorKind::kLabel:
    case ErrorKind::kTokenizer:
    case ErrorKind::kUnmatchedClass:
      return kExitValidation;
    case ErrorKind::kIo:
    case ErrorKind::kFormat:
    case ErrorKind::kChecksum:
      return kExitIo;
    case ErrorKind::kNumeric:
    case ErrorKind::kIndex:
      return kExitRuntime;
  }
  return kExitRuntime;
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "dataset.name",        "dataset.registry",   "paths.real_root",      "paths.synth_root",
      "paths.out_dir",       "backbone.path",      "backbone.toy_seed",    "method.baseline",
      "method.metanet_hidden", "eval.protocol",    "prompts.m1",           "prompts.m2",
      "prompts.n",           "prompts.k",          "prompts.depth",        "prompts.embed_dim_v",
      "prompts.embed_dim_t", "prompts.init_scale", "train.lr0",            "train.momentum",
      "train.weight_decay",  "train.epochs",       "train.real_batch_size", "train.ratio",
      "train.seed",          "train.precision",    "train.temperature",    "train.warmup_steps",
      "train.grad_clip",     "train.reduction",    "train.shots",          "train.max_steps",
      "weights.alpha",       "weights.beta",
  };
  return keys;
}

fs::path rooted(const fs::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  if (const char* root = std::getenv(kDataRootEnv); root && *root) return fs::path(root) / p;
  return p;
}

}  // namespace

TextConfig RunConfig::effective() const {
  TextConfig cfg;
  cfg.set("dataset.name", dataset);
  if (registry_file) cfg.set("dataset.registry", registry_file->string());
  cfg.set("paths.real_root", real_root.string());
  cfg.set("paths.synth_root", synth_root.string());
  cfg.set("paths.out_dir", out_dir.string());
  if (backbone) cfg.set("backbone.path", backbone->string());
  cfg.set("backbone.toy_seed", std::to_string(toy_backbone_seed));
  cfg.set("method.baseline", std::string(to_string(method)));
  cfg.set("method.metanet_hidden", std::to_string(metanet_hidden));
  cfg.set("eval.protocol", std::string(to_string(protocol)));
  prompt_config_into(cfg, prompts);
  train_config_into(cfg, train);
  return cfg;
}

DualEncoder<double> load_backbone(const RunConfig& rc) {
  if (rc.backbone) return DualEncoder<double>::from_archive(Archive::load(*rc.backbone));
  return DualEncoder<double>::toy(rc.toy_backbone_seed);
}

void fit_prompts_to_backbone(RunConfig& rc, const DualEncoder<double>& enc) {
  const auto& v = enc.visual_spec();
  const auto& t = enc.text_spec();
  if (!rc.source.has("prompts.embed_dim_v")) rc.prompts.embed_dim_v = v.embed_dim;
  if (!rc.source.has("prompts.embed_dim_t")) rc.prompts.embed_dim_t = t.embed_dim;
  if (!rc.source.has("prompts.depth")) rc.prompts.depth = default_prompt_depth(std::min(v.n_layers, t.n_layers));
  rc.prompts.validate();
  rc.prompts.validate_against(v.n_layers, t.n_layers);
  if (rc.prompts.embed_dim_v != v.embed_dim || rc.prompts.embed_dim_t != t.embed_dim)
    throw Error(ErrorKind::kConfig, "prompt widths (" + std::to_string(rc.prompts.embed_dim_v) + ", " +
                                        std::to_string(rc.prompts.embed_dim_t) + ") do not match the backbone (" +
                                        std::to_string(v.embed_dim) + ", " + std::to_string(t.embed_dim) + ")");
}

RunConfig resolve_run_config(const std::optional<fs::path>& config_file, const std::vector<std::string>& overrides) {
  TextConfig cfg;
  if (config_file) cfg = TextConfig::load(*config_file);
  for (const auto& o : overrides) cfg.apply_override(o);

  std::vector<std::string> problems;
  for (const auto& [key, value] : cfg.values())
    if (!known_keys().count(key)) problems.push_back("unknown key '" + key + "'");

  RunConfig rc;
  rc.source = cfg;
  auto attempt = [&](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      problems.push_back(e.message());
    }
  };
  rc.dataset = cfg.get_string("dataset.name", rc.dataset);
  if (auto r = cfg.get("dataset.registry")) rc.registry_file = rooted(*r);
  attempt([&] { rc.entry = lookup_dataset(rc.dataset, rc.registry_file); });
  rc.real_root = rooted(cfg.get_string("paths.real_root", rc.dataset));
  rc.synth_root = rooted(cfg.get_string("paths.synth_root", ""));
  rc.out_dir = cfg.get_string("paths.out_dir", rc.out_dir.string());
  if (auto b = cfg.get("backbone.path"); b && !b->empty()) rc.backbone = *b;
  attempt([&] { rc.toy_backbone_seed = static_cast<std::uint64_t>(cfg.get_int("backbone.toy_seed", 1)); });
  attempt([&] { rc.method = parse_method(cfg.get_string("method.baseline", "sync-clip")); });
  attempt([&] { rc.metanet_hidden = static_cast<int>(cfg.get_int("method.metanet_hidden", 0)); });
  attempt([&] { rc.protocol = parse_protocol(cfg.get_string("eval.protocol", "gzsl")); });

  // Registry loss weights sit between the built-in defaults and the file.
  TrainConfig defaults;
  if (rc.entry.alpha) defaults.weights.alpha = *rc.entry.alpha;
  if (rc.entry.beta) defaults.weights.beta = *rc.entry.beta;
  attempt([&] { rc.train = train_config_from(cfg, defaults); });
  attempt([&] { rc.train.validate(); });
  attempt([&] { rc.train.weights.validate(); });

  attempt([&] {
    rc.prompts = prompt_config_from(cfg);
    if (rc.method == Method::kIvlp) {
      // IVLP has no domain groups. Explicit non-zero sizes are a mistake.
      for (const char* key : {"prompts.m1", "prompts.m2"})
        if (cfg.has(key) && cfg.get_int(key, 0) != 0)
          problems.push_back(std::string("baseline ivlp requires ") + key + " = 0, got " + *cfg.get(key));
      rc.prompts.m1 = rc.prompts.m2 = 0;
    }
    rc.prompts.validate();
  });
  // CoCoOp and MaPLe see real data only unless a weight is set explicitly.
  if (rc.method == Method::kCoCoOp || rc.method == Method::kMaPLe) {
    if (!cfg.has("weights.alpha")) rc.train.weights.alpha = 0.0;
    if (!cfg.has("weights.beta")) rc.train.weights.beta = 0.0;
  }
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw Error(ErrorKind::kConfig, msg);
  }
  return rc;
}

namespace {

struct Common {
  std::optional<std::string> config;
  std::vector<std::string> overrides;
  std::optional<std::string> baseline;

  RunConfig resolve() const {
    std::vector<std::string> all = overrides;
    if (baseline) all.push_back("method.baseline=" + *baseline);
    return resolve_run_config(config ? std::optional<fs::path>(*config) : std::nullopt, all);
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config,-c", c.config, "Run configuration file");
  cmd->add_option("--set", c.overrides, "Override a key: section.key=value (repeatable, applied in order)")
      ->take_all()
      ->allow_extra_args(false);
  cmd->add_option("--baseline", c.baseline, "sync-clip, ivlp, cocoop or maple");
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

TrainData gather_train_data(const RunConfig& rc, std::ostream& err) {
  const DatasetSplits splits = load_dataset(rc.real_root, rc.entry);
  TrainData td;
  td.classes = splits.classes;
  auto shots = few_shot_sample(splits.train, splits.classes, rc.train.shots, rc.train.seed);
  print_warnings(shots.warnings, err);
  td.real = std::move(shots.examples);
  td.val = splits.val;
  if (!rc.synth_root.empty()) {
    auto synth = ingest_synthetic(rc.synth_root, splits.classes, rc.entry.content_extension);
    print_warnings(synth.warnings, err);
    td.synthetic = std::move(synth.examples);
  }
  return td;
}

template <typename T>
TrainResult<T> run_training(const RunConfig& rc, const DualEncoder<T>& enc, const TrainData& td,
                            const Checkpoint* resume) {
  const PromptedModel<T> model(enc, rc.method, static_cast<T>(rc.train.temperature));
  const auto init = init_learnables(rc.method, rc.prompts, enc.output_dim(), rc.metanet_hidden, rc.train.seed);
  TrainOptions opts;
  opts.out_dir = rc.out_dir;
  opts.resume = resume;
  return train(model, init.template cast<T>(), td, rc.train, opts);
}

std::string file_crc(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::ostringstream s;
  s << std::hex << std::setw(8) << std::setfill('0')
    << crc32_of(std::span<const std::byte>(reinterpret_cast<const std::byte*>(bytes.data()), bytes.size()));
  return s.str();
}

int cmd_train(const Common& common, const std::optional<std::string>& out_dir,
              const std::optional<std::string>& resume_path, std::ostream& out, std::ostream& err) {
  RunConfig rc = common.resolve();
  if (out_dir) rc.out_dir = *out_dir;
  const auto enc = load_backbone(rc);
  fit_prompts_to_backbone(rc, enc);
  const TrainData td = gather_train_data(rc, err);

  std::optional<Checkpoint> resume;
  if (resume_path) resume = load_checkpoint(*resume_path);

  fs::create_directories(rc.out_dir);
  {
    std::ofstream echo(rc.out_dir / "effective.cfg");
    if (!echo) throw Error(ErrorKind::kIo, "cannot write '" + (rc.out_dir / "effective.cfg").string() + "'");
    echo << rc.effective().render();
  }

  LossComponents last;
  long long steps = 0;
  std::optional<double> best;
  if (rc.train.precision == Precision::kF32) {
    const auto r = run_training(rc, enc.cast<float>(), td, resume ? &*resume : nullptr);
    if (!r.log.empty()) last = r.log.back().components;
    steps = r.steps_done;
    best = r.best_val;
  } else {
    const auto r = run_training(rc, enc, td, resume ? &*resume : nullptr);
    if (!r.log.empty()) last = r.log.back().components;
    steps = r.steps_done;
    best = r.best_val;
  }
  const fs::path final_ckpt = rc.out_dir / "final.ckpt";
  out << std::setprecision(6) << std::fixed;
  out << "method " << to_string(rc.method) << ", " << steps << " steps, " << td.real.size() << " real / "
      << td.synthetic.size() << " synthetic examples\n";
  out << "final loss: l_rce=" << last.rce << " l_sce=" << last.sce << " l_fs=" << last.fs << " total=" << last.total
      << "\n";
  if (best) out << "best base-class val accuracy: " << std::setprecision(2) << *best << "\n";
  out << "checkpoint " << final_ckpt.string() << " crc32 " << file_crc(final_ckpt) << "\n";
  return kExitOk;
}

Checkpoint open_checkpoint(const fs::path& path, const DualEncoder<double>& enc) {
  if (!fs::exists(path)) throw Error(ErrorKind::kIo, "checkpoint '" + path.string() + "' does not exist");
  Checkpoint ck = load_checkpoint(path);
  check_compatible(ck, enc.visual_spec(), enc.text_spec(), enc.backbone_checksum());
  return ck;
}

nlohmann::ordered_json report_json(const EvalReport& r) { return nlohmann::ordered_json::parse(r.to_json()); }

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.protocol = parse_protocol(j.at("protocol").get<std::string>());
  auto opt = [&](const char* key, std::optional<double>& v) {
    if (j.contains(key)) v = j.at(key).get<double>();
  };
  opt("b_acc", r.b_acc);
  opt("n_acc", r.n_acc);
  opt("hm", r.hm);
  opt("accuracy", r.accuracy);
  return r;
}

int cmd_eval(const Common& common, const std::string& checkpoint, const std::string& protocol_arg,
             const std::optional<std::string>& out_path, const std::optional<std::string>& label, std::ostream& out,
             std::ostream&) {
  const RunConfig rc = common.resolve();
  const auto enc = load_backbone(rc);
  const Checkpoint ck = open_checkpoint(checkpoint, enc);
  const DatasetSplits splits = load_dataset(rc.real_root, rc.entry);
  const PromptedModel<double> model(enc, ck.method, ck.config.temperature);
  model.validate(ck.params);

  std::vector<Protocol> protocols;
  const std::string p = protocol_arg.empty() ? std::string(to_string(rc.protocol)) : protocol_arg;
  if (p == "both")
    protocols = {Protocol::kGzsl, Protocol::kZsl};
  else
    protocols = {parse_protocol(p)};

  ReportRow row;
  row.method = label ? *label : std::string(to_string(ck.method));
  nlohmann::ordered_json doc;
  doc["method"] = row.method;
  doc["checkpoint"] = checkpoint;
  doc["reports"] = nlohmann::ordered_json::object();
  out << std::fixed << std::setprecision(2);
  bool tabular = false;
  for (Protocol pr : protocols) {
    const EvalReport r = evaluate(model, ck.params, splits.test, splits.classes, pr);
    doc["reports"][std::string(to_string(pr))] = report_json(r);
    if (pr == Protocol::kZsl) row.zsl = r, tabular = true;
    else if (pr == Protocol::kGzsl) row.gzsl = r, tabular = true;
    else out << to_string(pr) << " accuracy: " << *r.accuracy << "\n";
  }
  if (tabular) out << render_report_table({row});
  if (out_path) {
    std::ofstream f(*out_path);
    if (!f) throw Error(ErrorKind::kIo, "cannot write '" + *out_path + "'");
    f << doc.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_ingest(const Common& common, const std::optional<std::string>& synth, std::ostream& out, std::ostream& err) {
  const RunConfig rc = common.resolve();
  const fs::path dir = synth ? rooted(*synth) : rc.synth_root;
  if (dir.empty()) throw Error(ErrorKind::kConfig, "no synthetic directory (use --synth or paths.synth_root)");
  const DatasetSplits splits = load_dataset(rc.real_root, rc.entry);
  const auto r = ingest_synthetic(dir, splits.classes, rc.entry.content_extension);
  print_warnings(r.warnings, err);
  std::map<int, int> counts;
  for (const auto& ex : r.examples) ++counts[ex.class_id];
  for (int id : splits.classes.all())
    out << splits.classes.names[static_cast<std::size_t>(id)] << (splits.classes.is_base(id) ? " (base)" : " (novel)")
        << ": " << counts[id] << "\n";
  out << r.examples.size() << " synthetic examples\n";
  return kExitOk;
}

std::vector<PatchMatrix> patch_files_under(const fs::path& dir, const std::string& extension) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::kIo, "'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == extension) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<PatchMatrix> out;
  for (const auto& f : files) out.push_back(load_patch_file(f));
  return out;
}

int cmd_fid(const Common& common, const std::string& real, const std::string& synth,
            const std::optional<std::string>& checkpoint, std::ostream& out) {
  const RunConfig rc = common.resolve();
  const auto enc = load_backbone(rc);
  std::optional<Checkpoint> ck;
  if (checkpoint) ck = open_checkpoint(*checkpoint, enc);
  const Method method = ck ? ck->method : Method::kSyncClip;
  const PromptedModel<double> model(enc, method, 1.0);
  auto embed = [&](const fs::path& dir, VisualRoute route) {
    const auto patches = patch_files_under(rooted(dir), rc.entry.content_extension);
    Matrix<double> rows(static_cast<Eigen::Index>(patches.size()), enc.output_dim());
    for (std::size_t i = 0; i < patches.size(); ++i)
      rows.row(static_cast<Eigen::Index>(i)) =
          ck ? model.encode_image(patches[i], ck->params, route) : enc.encode_patches(patches[i], {});
    return rows;
  };
  const VisualRoute real_route = method == Method::kIvlp ? VisualRoute::kIvlp : VisualRoute::kReal;
  const VisualRoute synth_route = method == Method::kIvlp ? VisualRoute::kIvlp : VisualRoute::kSynthetic;
  const double d = fid(embed(real, real_route), embed(synth, synth_route));
  out << std::fixed << std::setprecision(6) << d << "\n";
  return kExitOk;
}

int cmd_export(const Common& common, const std::string& checkpoint, const std::string& split, const std::string& path,
               std::ostream& out, std::ostream& err) {
  const RunConfig rc = common.resolve();
  const auto enc = load_backbone(rc);
  const Checkpoint ck = open_checkpoint(checkpoint, enc);
  const DatasetSplits splits = load_dataset(rc.real_root, rc.entry);
  std::vector<LabeledExample> examples;
  if (split == "train") examples = splits.train;
  else if (split == "val") examples = splits.val;
  else if (split == "test") examples = splits.test;
  else if (split == "synthetic") {
    if (rc.synth_root.empty()) throw Error(ErrorKind::kConfig, "paths.synth_root is not set");
    auto r = ingest_synthetic(rc.synth_root, splits.classes, rc.entry.content_extension);
    print_warnings(r.warnings, err);
    examples = std::move(r.examples);
  } else {
    throw Error(ErrorKind::kConfig, "unknown split '" + split + "' (expected train, val, test or synthetic)");
  }
  const PromptedModel<double> model(enc, ck.method, ck.config.temperature);
  export_embeddings(model, ck.params, examples, splits.classes, path);
  out << examples.size() << " embeddings written to " << path << "\n";
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& inputs, const std::optional<std::string>& out_path,
               std::ostream& out) {
  std::vector<ReportRow> rows;
  for (const auto& in : inputs) {
    std::ifstream f(in);
    if (!f) throw Error(ErrorKind::kIo, "cannot read '" + in + "'");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kFormat, "'" + in + "' is not an evaluation file: " + e.what());
    }
    ReportRow row;
    row.method = doc.value("method", in);
    const auto& reports = doc.at("reports");
    if (reports.contains("zsl")) row.zsl = report_from_json(reports.at("zsl"));
    if (reports.contains("gzsl")) row.gzsl = report_from_json(reports.at("gzsl"));
    rows.push_back(std::move(row));
  }
  const std::string table = render_report_table(rows);
  out << table;
  if (out_path) {
    std::ofstream f(*out_path);
    if (!f) throw Error(ErrorKind::kIo, "cannot write '" + *out_path + "'");
    f << table;
  }
  return kExitOk;
}

int cmd_make_toy(const std::string& dir, std::uint64_t seed, int candidates, std::ostream& out) {
  const fs::path root(dir);
  const auto enc = DualEncoder<double>::toy(seed);
  ToyDataOptions o;
  o.prototype_candidates = candidates;
  const TrainConfig defaults;
  const ToyData data = make_toy_data(o, seed, zero_shot_scorer(enc, o, defaults.temperature));
  write_toy_dataset(data, root / "real", root / "synthetic");
  enc.to_archive().save(root / "backbone.arc");

  TextConfig cfg;
  cfg.set("dataset.name", "toy");
  cfg.set("paths.real_root", fs::absolute(root / "real").string());
  cfg.set("paths.synth_root", fs::absolute(root / "synthetic").string());
  cfg.set("paths.out_dir", fs::absolute(root / "run").string());
  cfg.set("backbone.path", fs::absolute(root / "backbone.arc").string());
  cfg.set("train.lr0", "0.15");
  cfg.set("train.epochs", "10");
  std::ofstream f(root / "toy.cfg");
  if (!f) throw Error(ErrorKind::kIo, "cannot write '" + (root / "toy.cfg").string() + "'");
  f << "# Toy two-domain dataset written by make-toy.\n" << cfg.render();
  out << "wrote " << data.splits.train.size() << " train / " << data.splits.test.size() << " test / "
      << data.synthetic.size() << " synthetic examples and " << (root / "toy.cfg").string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prompt tuning with real and synthetic domains for frozen dual encoders", "syncclip"};
  app.require_subcommand(1);

  Common train_c, eval_c, ingest_c, fid_c, export_c;
  std::optional<std::string> train_out, resume, eval_out, label, synth_dir, fid_ckpt, report_out;
  std::string checkpoint, protocol, split = "test", export_out, fid_real, fid_synth, toy_dir;
  std::vector<std::string> report_inputs;
  std::uint64_t toy_seed = 1;
  int toy_candidates = 300;

  auto* train_cmd = app.add_subcommand("train", "Tune prompts and write checkpoints and a step log");
  add_common(train_cmd, train_c);
  train_cmd->add_option("--out", train_out, "Output directory (overrides paths.out_dir)");
  train_cmd->add_option("--resume", resume, "Continue from a checkpoint");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  add_common(eval_cmd, eval_c);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--protocol", protocol, "zsl, gzsl, both, cross-dataset or dg");
  eval_cmd->add_option("--out", eval_out, "Write the report as JSON");
  eval_cmd->add_option("--label", label, "Row label in tables (default: method)");

  auto* ingest_cmd = app.add_subcommand("ingest", "Check a synthetic image folder against the class list");
  add_common(ingest_cmd, ingest_c);
  ingest_cmd->add_option("--synth", synth_dir, "Synthetic root (default: paths.synth_root)");

  auto* fid_cmd = app.add_subcommand("fid", "Frechet distance between two folders of patch files");
  add_common(fid_cmd, fid_c);
  fid_cmd->add_option("--real", fid_real, "Real images")->required();
  fid_cmd->add_option("--synth", fid_synth, "Synthetic images")->required();
  fid_cmd->add_option("--checkpoint", fid_ckpt, "Embed through tuned prompts instead of the bare backbone");

  auto* export_cmd = app.add_subcommand("export", "Write per-example embeddings as JSON lines");
  add_common(export_cmd, export_c);
  export_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  export_cmd->add_option("--split", split, "train, val, test or synthetic");
  export_cmd->add_option("--out", export_out, "Output .jsonl file")->required();

  auto* report_cmd = app.add_subcommand("report", "Tabulate evaluation JSON files");
  report_cmd->add_option("inputs", report_inputs, "Files written by eval --out")->required();
  report_cmd->add_option("--out", report_out, "Also write the table to a file");

  auto* toy_cmd = app.add_subcommand("make-toy", "Write a toy dataset, backbone and config");
  toy_cmd->add_option("--out", toy_dir, "Directory")->required();
  toy_cmd->add_option("--seed", toy_seed, "Seed");
  toy_cmd->add_option("--candidates", toy_candidates, "Prototype draws per class (best zero-shot kept)");

  std::vector<std::string> argv_store{"syncclip"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  try {
    if (*train_cmd) return cmd_train(train_c, train_out, resume, out, err);
    if (*eval_cmd) return cmd_eval(eval_c, checkpoint, protocol, eval_out, label, out, err);
    if (*ingest_cmd) return cmd_ingest(ingest_c, synth_dir, out, err);
    if (*fid_cmd) return cmd_fid(fid_c, fid_real, fid_synth, fid_ckpt, out);
    if (*export_cmd) return cmd_export(export_c, checkpoint, split, export_out, out, err);
    if (*report_cmd) return cmd_report(report_inputs, report_out, out);
    if (*toy_cmd) return cmd_make_toy(toy_dir, toy_seed, toy_candidates, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace syncclip

#include "ssmix/cli.hpp"

#include "ssmix/corpus.hpp"
#include "ssmix/error.hpp"
#include "ssmix/mixer.hpp"
#include "ssmix/model.hpp"
#include "ssmix/saliency.hpp"
#include "ssmix/trainer.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace ssmix::cli {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Resolved configuration for train/sweep: built-in defaults, then a manifest
// file, then explicit flags.

struct ConfigKey {
  const char* name;
  const char* fallback;
  const char* help;
};

constexpr ConfigKey kTrainKeys[] = {
    {"train", "", "training data file"},
    {"valid", "", "validation data file"},
    {"labels", "", "label map sidecar (label<TAB>index); built from the training file when empty"},
    {"format", "tsv", "data file format: tsv | jsonl"},
    {"schema", "single", "single | paired"},
    {"variant", "ssmix", "none | ssmix | random_span | random_token | unk_replace | embedmix | hiddenmix"},
    {"lambda0", "0.1", "prior mixup ratio for span-based variants"},
    {"alpha", "0.2", "Beta(alpha, alpha) parameter for embedmix/hiddenmix"},
    {"batch_size", "32", "mini-batch size (even)"},
    {"lr1", "5e-05", "step-1 learning rate (no mixup)"},
    {"epochs1", "3", "step-1 epochs"},
    {"lr2", "1e-05", "step-2 learning rate (mixup)"},
    {"epochs2", "5", "step-2 epochs"},
    {"eval_every", "0", "optimizer steps between validations; 0 = every epoch"},
    {"seed", "0", "random seed"},
    {"weight_decay", "0.0001", "decoupled weight decay"},
    {"warmup", "0.1", "linear warmup fraction of each phase"},
    {"embed_dim", "32", "embedding width"},
    {"hidden_dim", "64", "hidden width"},
    {"max_len", "128", "maximum sequence length including [CLS]/[SEP]"},
    {"min_count", "1", "minimum token count for the vocabulary"},
    {"hiddenmix_layer", "hidden", "interpolation layer for hiddenmix: embed | hidden"},
    {"loss_weighting", "label", "mixed-loss weighting: label | algorithm1"},
    {"optimizer", "adamw", "adamw | sgd"},
};

using Settings = std::map<std::string, std::string>;

std::string flag_name(std::string key) {
  for (auto& c : key) {
    if (c == '_') {
      c = '-';
    }
  }
  return "--" + key;
}

Settings read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot read config " + path.string());
  }
  Settings out;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ": expected key=value, got '" + line + "'");
    }
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

template <class T>
T parse_number(const Settings& s, const std::string& key) {
  const std::string& text = s.at(key);
  T value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw UsageError("invalid value '" + text + "' for " + key);
  }
  return value;
}

struct RunSettings {
  Settings values;
  TrainConfig train;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t max_len = 128;
  std::size_t min_count = 1;
};

RunSettings resolve(const Settings& flags, const std::string& config_path) {
  Settings values;
  for (const auto& key : kTrainKeys) {
    values[key.name] = key.fallback;
  }
  if (!config_path.empty()) {
    for (const auto& [k, v] : read_manifest(config_path)) {
      if (k == "command") {
        continue;
      }
      if (!values.contains(k)) {
        throw UsageError("unknown key '" + k + "' in " + config_path);
      }
      values[k] = v;
    }
  }
  for (const auto& [k, v] : flags) {
    values[k] = v;
  }

  RunSettings rs;
  rs.values = values;
  auto& tc = rs.train;
  tc.variant = parse_variant(values.at("variant"));
  tc.lambda0 = parse_number<double>(values, "lambda0");
  tc.alpha = parse_number<double>(values, "alpha");
  tc.batch_size = parse_number<std::size_t>(values, "batch_size");
  tc.step1 = {parse_number<double>(values, "lr1"), parse_number<std::size_t>(values, "epochs1")};
  tc.step2 = {parse_number<double>(values, "lr2"), parse_number<std::size_t>(values, "epochs2")};
  tc.eval_every = parse_number<std::size_t>(values, "eval_every");
  tc.seed = parse_number<std::uint64_t>(values, "seed");
  tc.weight_decay = parse_number<double>(values, "weight_decay");
  tc.warmup = parse_number<double>(values, "warmup");
  const auto& layer = values.at("hiddenmix_layer");
  if (layer != "embed" && layer != "hidden") {
    throw UsageError("hiddenmix-layer must be embed or hidden");
  }
  tc.hiddenmix_layer = layer == "embed" ? MixLayer::embed : MixLayer::hidden;
  const auto& weighting = values.at("loss_weighting");
  if (weighting != "label" && weighting != "algorithm1") {
    throw UsageError("loss-weighting must be label or algorithm1");
  }
  tc.loss_weighting = weighting == "label" ? LossWeighting::label_definition : LossWeighting::algorithm1;
  const auto& opt = values.at("optimizer");
  if (opt != "adamw" && opt != "sgd") {
    throw UsageError("optimizer must be adamw or sgd");
  }
  tc.optimizer = opt == "adamw" ? OptimizerKind::adamw : OptimizerKind::sgd;
  tc.validate();

  rs.embed_dim = parse_number<std::size_t>(values, "embed_dim");
  rs.hidden_dim = parse_number<std::size_t>(values, "hidden_dim");
  rs.max_len = parse_number<std::size_t>(values, "max_len");
  rs.min_count = parse_number<std::size_t>(values, "min_count");
  if (values.at("train").empty() || values.at("valid").empty()) {
    throw UsageError("--train and --valid are required (as flags or in --config)");
  }
  parse_format(values.at("format"));
  parse_schema(values.at("schema"));
  return rs;
}

void write_manifest(const fs::path& path, const std::string& command, const RunSettings& rs) {
  std::ofstream out(path, std::ios::binary);
  out << "command=" << command << '\n';
  for (const auto& key : kTrainKeys) {
    out << key.name << '=' << rs.values.at(key.name) << '\n';
  }
}

struct PreparedData {
  TextDataset train_text;
  Vocabulary vocab;
  Dataset train;
  Dataset valid;
  ModelDims dims;
};

PreparedData prepare(const RunSettings& rs) {
  const auto format = parse_format(rs.values.at("format"));
  const auto schema = parse_schema(rs.values.at("schema"));
  PreparedData p;
  std::optional<LabelMap> sidecar;
  if (!rs.values.at("labels").empty()) {
    sidecar = LabelMap::load(rs.values.at("labels"));
  }
  p.train_text = load_dataset(rs.values.at("train"), format, schema, Split::train,
                              sidecar ? &*sidecar : nullptr);
  const auto valid_text =
      load_dataset(rs.values.at("valid"), format, schema, Split::valid, &p.train_text.labels);
  if (p.train_text.num_classes() < 2) {
    throw DataError("training data needs at least two distinct labels");
  }
  p.vocab = build_vocab(p.train_text.all_texts(), rs.min_count);
  p.train = encode_dataset(p.train_text, p.vocab, rs.max_len);
  p.valid = encode_dataset(valid_text, p.vocab, rs.max_len);
  p.dims = ModelDims{p.vocab.size(), rs.embed_dim, rs.hidden_dim, p.train_text.num_classes(),
                     schema == Schema::paired};
  return p;
}

void prepare_out_dir(const fs::path& dir, bool force) {
  fs::create_directories(dir);
  if (!force && fs::exists(dir / "metrics.csv")) {
    throw UsageError(dir.string() + " already holds a run; pass --force to overwrite");
  }
}

void write_metrics(const fs::path& path, const std::vector<const RunMetrics*>& phases) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << kMetricsHeader << '\n';
  for (const auto* m : phases) {
    write_metrics_rows(out, *m);
  }
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  const auto dots = text.find("..");
  auto number = [&](std::string_view s) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
      throw UsageError("invalid seed list '" + text + "'");
    }
    return v;
  };
  if (dots != std::string::npos) {
    const auto lo = number(std::string_view(text).substr(0, dots));
    const auto hi = number(std::string_view(text).substr(dots + 2));
    if (hi < lo) {
      throw UsageError("empty seed range '" + text + "'");
    }
    for (auto s = lo; s <= hi; ++s) {
      seeds.push_back(s);
    }
  } else {
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
      seeds.push_back(number(item));
    }
  }
  if (seeds.empty()) {
    throw UsageError("no seeds given");
  }
  return seeds;
}

// ---------------------------------------------------------------------------
// Commands

void add_train_flags(CLI::App& cmd, Settings& raw, std::string& config, bool& force, fs::path& out_dir) {
  for (const auto& key : kTrainKeys) {
    raw[key.name] = key.fallback;
    cmd.add_option(flag_name(key.name), raw[key.name], key.help);
  }
  cmd.add_option("--config", config, "key=value file (e.g. a previous manifest.txt); flags override it");
  cmd.add_option("--out", out_dir, "output directory")->required();
  cmd.add_flag("--force", force, "overwrite an existing run in --out");
}

Settings given_flags(const CLI::App& cmd, const Settings& raw) {
  Settings given;
  for (const auto& key : kTrainKeys) {
    if (cmd.get_option(flag_name(key.name))->count() > 0) {
      given[key.name] = raw.at(key.name);
    }
  }
  return given;
}

int cmd_train(const RunSettings& rs, const fs::path& out_dir, bool force, std::ostream& out) {
  prepare_out_dir(out_dir, force);
  const auto data = prepare(rs);
  data.vocab.save(out_dir / "vocab.txt");
  data.train_text.labels.save(out_dir / "labels.tsv");
  write_manifest(out_dir / "manifest.txt", "train", rs);

  const auto initial = ToyTextClassifier::initialize(data.dims, rs.train.seed);
  const auto result = train_two_step(initial, data.train, data.valid, rs.train,
                                     [&](const ToyTextClassifier& model, const EvalRecord& rec) {
                                       save_checkpoint(model, out_dir / ("best_" + rec.phase + ".ckpt"));
                                       save_checkpoint(model, out_dir / "best.ckpt");
                                     });
  write_metrics(out_dir / "metrics.csv", {&result.step1.metrics, &result.step2.metrics});
  if (!fs::exists(out_dir / "best.ckpt")) {
    save_checkpoint(result.best_model(), out_dir / "best.ckpt");
  }
  out << "best_accuracy\t" << format_double(result.best_accuracy()) << '\n';
  return kSuccess;
}

struct SweepSummaryRow {
  std::string variant;
  std::vector<double> best;
};

int cmd_sweep(const RunSettings& base, const std::string& seeds_text, const std::string& variants_text,
              const fs::path& out_dir, bool force, std::ostream& out) {
  const auto seeds = parse_seeds(seeds_text);
  std::vector<Variant> variants;
  {
    std::stringstream ss(variants_text);
    for (std::string item; std::getline(ss, item, ',');) {
      variants.push_back(parse_variant(item));
    }
  }
  if (variants.empty()) {
    throw UsageError("no variants given");
  }
  fs::create_directories(out_dir);
  if (!force && fs::exists(out_dir / "summary.csv")) {
    throw UsageError(out_dir.string() + " already holds a sweep; pass --force to overwrite");
  }
  const auto data = prepare(base);

  std::vector<SweepSummaryRow> summary;
  for (const auto v : variants) {
    summary.push_back({std::string(to_string(v)), {}});
  }
  for (const auto seed : seeds) {
    RunSettings rs = base;
    rs.train.seed = seed;
    rs.values["seed"] = std::to_string(seed);
    const auto initial = ToyTextClassifier::initialize(data.dims, seed);
    // Step 1 never mixes, so one run serves every variant of this seed.
    const auto step1 = train_step1(initial, data.train, data.valid, rs.train);
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
      rs.train.variant = variants[vi];
      rs.values["variant"] = summary[vi].variant;
      const auto step2 = train_step2(step1.best, data.train, data.valid, rs.train);
      const fs::path run_dir = out_dir / summary[vi].variant / ("seed" + std::to_string(seed));
      fs::create_directories(run_dir);
      write_manifest(run_dir / "manifest.txt", "sweep", rs);
      write_metrics(run_dir / "metrics.csv", {&step1.metrics, &step2.metrics});
      summary[vi].best.push_back(std::max(step1.metrics.best_accuracy.value_or(0.0),
                                          step2.metrics.best_accuracy.value_or(0.0)));
    }
  }

  std::ofstream csv(out_dir / "summary.csv", std::ios::binary | std::ios::trunc);
  csv << "variant,runs,mean_best_accuracy,std_best_accuracy\n";
  for (const auto& row : summary) {
    const auto n = static_cast<double>(row.best.size());
    double mean = 0.0;
    for (const double b : row.best) {
      mean += b;
    }
    mean /= n;
    double var = 0.0;
    for (const double b : row.best) {
      var += (b - mean) * (b - mean);
    }
    const double sd = row.best.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    csv << row.variant << ',' << row.best.size() << ',' << format_double(mean) << ',' << format_double(sd)
        << '\n';
    out << row.variant << '\t' << format_double(mean) << '\t' << format_double(sd) << '\n';
  }
  return kSuccess;
}

std::string span_text(const std::optional<Span>& span) {
  return span ? std::to_string(span->start) + "+" + std::to_string(span->length) : "-";
}

std::string join_positions(const std::vector<std::size_t>& pos) {
  std::string out;
  for (const auto p : pos) {
    if (!out.empty()) {
      out.push_back(',');
    }
    out += std::to_string(p);
  }
  return out.empty() ? "-" : out;
}

LabeledExample encode_example(const Vocabulary& vocab, const std::string& text, const std::string& text2,
                              std::size_t label, std::size_t max_len) {
  LabeledExample ex;
  ex.first = encode(vocab, text, max_len);
  if (!text2.empty()) {
    ex.second = encode(vocab, text2, max_len);
  }
  ex.label = label;
  return ex;
}

void check_model_fits(const ToyTextClassifier& model, const Vocabulary& vocab, bool paired,
                      std::initializer_list<std::size_t> labels) {
  if (model.dims().vocab_size != vocab.size()) {
    throw DataError("checkpoint vocabulary size " + std::to_string(model.dims().vocab_size) +
                    " does not match vocabulary file (" + std::to_string(vocab.size()) + ")");
  }
  if (model.dims().paired != paired) {
    throw DataError(model.dims().paired ? "checkpoint expects sentence pairs" : "checkpoint expects single sentences");
  }
  for (const auto y : labels) {
    if (y >= model.dims().num_classes) {
      throw DataError("label " + std::to_string(y) + " out of range for the checkpoint");
    }
  }
}

int dispatch(CLI::App& app, int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic keyword classification dataset");
  std::string gen_task = "single";
  SyntheticSpec spec;
  std::string gen_format = "tsv";
  fs::path gen_out;
  gen->add_option("--task", gen_task, "single | paired");
  gen->add_option("--classes", spec.num_classes, "number of classes (topics for paired)");
  gen->add_option("--n-train", spec.n_train, "training examples");
  gen->add_option("--n-valid", spec.n_valid, "validation examples");
  gen->add_option("--seed", spec.seed, "random seed");
  gen->add_option("--lexicon", spec.lexicon_size, "total distinct words");
  gen->add_option("--keywords", spec.keywords_per_class, "keywords per class");
  gen->add_option("--format", gen_format, "tsv | jsonl");
  gen->add_option("--out", gen_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "two-step training: plain, then mixup fine-tuning");
  Settings train_raw;
  std::string train_config;
  bool train_force = false;
  fs::path train_out;
  add_train_flags(*train, train_raw, train_config, train_force, train_out);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "train every variant over several seeds");
  Settings sweep_raw;
  std::string sweep_config;
  bool sweep_force = false;
  fs::path sweep_out;
  std::string sweep_seeds = "0..4";
  std::string sweep_variants = "none,embedmix,hiddenmix,ssmix,random_span,random_token,unk_replace";
  add_train_flags(*sweep, sweep_raw, sweep_config, sweep_force, sweep_out);
  sweep->add_option("--seeds", sweep_seeds, "seed range lo..hi or comma list");
  sweep->add_option("--variants", sweep_variants, "comma-separated variants");

  // eval
  auto* eval = app.add_subcommand("eval", "accuracy of a checkpoint on a dataset");
  fs::path eval_data;
  fs::path eval_ckpt;
  fs::path eval_vocab;
  fs::path eval_labels;
  std::string eval_format = "tsv";
  std::string eval_schema = "single";
  std::size_t eval_max_len = 128;
  eval->add_option("--data", eval_data, "dataset file")->required();
  eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  eval->add_option("--vocab", eval_vocab, "vocabulary file written by train")->required();
  eval->add_option("--labels", eval_labels, "label map written by train")->required();
  eval->add_option("--format", eval_format, "tsv | jsonl");
  eval->add_option("--schema", eval_schema, "single | paired");
  eval->add_option("--max-len", eval_max_len, "maximum sequence length");

  // mix
  auto* mix = app.add_subcommand("mix", "mix one example into another and print the result");
  std::string mix_a;
  std::string mix_a2;
  std::string mix_b;
  std::string mix_b2;
  fs::path mix_ckpt;
  fs::path mix_vocab;
  std::size_t mix_label_a = 0;
  std::size_t mix_label_b = 1;
  double mix_lambda0 = 0.1;
  std::string mix_variant = "ssmix";
  std::uint64_t mix_seed = 0;
  std::size_t mix_max_len = 128;
  mix->add_option("--a", mix_a, "text of x^A (first sentence)")->required();
  mix->add_option("--a2", mix_a2, "second sentence of x^A (paired tasks)");
  mix->add_option("--b", mix_b, "text of x^B (first sentence)")->required();
  mix->add_option("--b2", mix_b2, "second sentence of x^B (paired tasks)");
  mix->add_option("--checkpoint", mix_ckpt, "checkpoint used for saliency (ssmix only)");
  mix->add_option("--vocab", mix_vocab, "vocabulary file")->required();
  mix->add_option("--label-a", mix_label_a, "class index of x^A");
  mix->add_option("--label-b", mix_label_b, "class index of x^B");
  mix->add_option("--lambda0", mix_lambda0, "prior mixup ratio");
  mix->add_option("--variant", mix_variant, "ssmix | random_span | random_token | unk_replace");
  mix->add_option("--seed", mix_seed, "seed for random variants");
  mix->add_option("--max-len", mix_max_len, "maximum sequence length");

  // saliency
  auto* sal = app.add_subcommand("saliency", "per-token saliency under a checkpoint");
  std::string sal_text;
  std::string sal_text2;
  fs::path sal_ckpt;
  fs::path sal_vocab;
  std::size_t sal_label = 0;
  std::size_t sal_max_len = 128;
  sal->add_option("--text", sal_text, "input sentence")->required();
  sal->add_option("--text2", sal_text2, "second sentence (paired tasks)");
  sal->add_option("--checkpoint", sal_ckpt, "model checkpoint")->required();
  sal->add_option("--vocab", sal_vocab, "vocabulary file")->required();
  sal->add_option("--label", sal_label, "gold class index for the loss");
  sal->add_option("--max-len", sal_max_len, "maximum sequence length");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsage;
  }

  if (gen->parsed()) {
    spec.task = gen_task == "paired" ? TaskKind::paired : TaskKind::single;
    if (gen_task != "single" && gen_task != "paired") {
      throw UsageError("--task must be single or paired");
    }
    const auto format = parse_format(gen_format);
    const auto splits = generate_synthetic(spec);
    fs::create_directories(gen_out);
    const std::string ext = format == FileFormat::tsv ? ".tsv" : ".jsonl";
    save_dataset(splits.train, gen_out / ("train" + ext), format);
    save_dataset(splits.valid, gen_out / ("valid" + ext), format);
    splits.train.labels.save(gen_out / "labels.tsv");
    out << "wrote " << splits.train.examples.size() << " train / " << splits.valid.examples.size()
        << " valid examples to " << gen_out.string() << '\n';
    return kSuccess;
  }
  if (train->parsed()) {
    return cmd_train(resolve(given_flags(*train, train_raw), train_config), train_out, train_force, out);
  }
  if (sweep->parsed()) {
    return cmd_sweep(resolve(given_flags(*sweep, sweep_raw), sweep_config), sweep_seeds, sweep_variants,
                     sweep_out, sweep_force, out);
  }
  if (eval->parsed()) {
    const auto labels = LabelMap::load(eval_labels);
    const auto vocab = Vocabulary::load(eval_vocab);
    const auto model = load_checkpoint(eval_ckpt);
    const auto text = load_dataset(eval_data, parse_format(eval_format), parse_schema(eval_schema),
                                   Split::test, &labels);
    const auto data = encode_dataset(text, vocab, eval_max_len);
    check_model_fits(model, vocab, data.is_paired, {});
    const auto res = evaluate_full(model, data);
    out << "accuracy\t" << format_double(res.accuracy) << '\n';
    out << "loss\t" << format_double(res.loss) << '\n';
    return kSuccess;
  }
  if (mix->parsed()) {
    const auto variant = parse_variant(mix_variant);
    if (!is_input_level(variant)) {
      throw UsageError("mix supports ssmix, random_span, random_token and unk_replace");
    }
    MixConfig{mix_lambda0, variant, 0.2}.validate();
    if (mix_a2.empty() != mix_b2.empty()) {
      throw UsageError("--a2 and --b2 must be given together");
    }
    const auto vocab = Vocabulary::load(mix_vocab);
    const auto a = encode_example(vocab, mix_a, mix_a2, mix_label_a, mix_max_len);
    const auto b = encode_example(vocab, mix_b, mix_b2, mix_label_b, mix_max_len);
    std::vector<SaliencyMap> sal_a;
    std::vector<SaliencyMap> sal_b;
    if (variant == Variant::ssmix) {
      if (mix_ckpt.empty()) {
        throw UsageError("ssmix needs --checkpoint for saliency");
      }
      const auto model = load_checkpoint(mix_ckpt);
      check_model_fits(model, vocab, a.paired(), {mix_label_a, mix_label_b});
      sal_a = compute_saliency(model, a, a.label);
      sal_b = compute_saliency(model, b, b.label);
    }
    Rng rng(mix_seed);
    const auto result = mix_examples(variant, a, b, sal_a, sal_b, mix_lambda0, rng);
    for (std::size_t s = 0; s < result.provenance.size(); ++s) {
      const auto& seq = s == 0 ? result.mixed.first : *result.mixed.second;
      const auto& prov = result.provenance[s];
      const std::string n = std::to_string(s + 1);
      out << "mixed_" << n << '\t' << decode(vocab, seq) << '\n';
      out << "span_a_" << n << '\t' << span_text(prov.span_a) << '\n';
      out << "span_b_" << n << '\t' << span_text(prov.span_b) << '\n';
      out << "replaced_" << n << '\t' << join_positions(prov.replaced) << '\n';
      out << "source_" << n << '\t' << join_positions(prov.source) << '\n';
    }
    out << "lambda\t" << format_double(result.lambda) << '\n';
    out << "y_a\t" << result.soft_label.y_a << '\n';
    out << "y_b\t" << result.soft_label.y_b << '\n';
    return kSuccess;
  }
  if (sal->parsed()) {
    const auto vocab = Vocabulary::load(sal_vocab);
    const auto model = load_checkpoint(sal_ckpt);
    const auto ex = encode_example(vocab, sal_text, sal_text2, sal_label, sal_max_len);
    check_model_fits(model, vocab, ex.paired(), {sal_label});
    const auto maps = compute_saliency(model, ex, sal_label);
    out << "token\tposition\tscore" << (ex.paired() ? "\tsentence" : "") << '\n';
    for (std::size_t s = 0; s < maps.size(); ++s) {
      const auto& seq = s == 0 ? ex.first : *ex.second;
      for (std::size_t i = 0; i < seq.size(); ++i) {
        out << vocab.token(seq.ids[i]) << '\t' << i << '\t' << format_double(maps[s].scores[i]);
        if (ex.paired()) {
          out << '\t' << s + 1;
        }
        out << '\n';
      }
    }
    return kSuccess;
  }
  return kUsage;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ssmix: saliency-based span mixup for text classification"};
  app.name("ssmix");
  try {
    return dispatch(app, argc, argv, out, err);
  } catch (const UsageError& e) {
    err << "ssmix: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "ssmix: numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const std::exception& e) {
    err << "ssmix: " << e.what() << '\n';
    return kDataError;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("ssmix");
  for (const auto& a : args) {
    argv.push_back(a.c_str());
  }
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace ssmix::cli

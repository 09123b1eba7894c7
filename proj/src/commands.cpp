#include "satlab/commands.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "satlab/attacks.hpp"
#include "satlab/checkpoint.hpp"
#include "satlab/eval.hpp"
#include "satlab/image_io.hpp"
#include "satlab/plots.hpp"
#include "satlab/style_transfer.hpp"
#include "satlab/training.hpp"

#ifndef SATLAB_VERSION
#define SATLAB_VERSION "dev"
#endif

namespace satlab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Keeps the listed classes (relabelled 0..k-1 in list order), at most `per_class` each (0: all).
Dataset keep_classes(const Dataset& d, const std::vector<int>& classes, std::size_t per_class) {
  if (classes.empty()) {
    if (per_class == 0) return d;
    std::vector<int> all(std::size_t(d.num_classes));
    for (int k = 0; k < d.num_classes; ++k) all[std::size_t(k)] = k;
    return d.select_classes(all, per_class, false);
  }
  if (per_class > 0) return d.select_classes(classes, per_class, true);
  std::vector<std::size_t> idx;
  std::vector<int> labels;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto it = std::find(classes.begin(), classes.end(), d.labels[i]);
    if (it == classes.end()) continue;
    idx.push_back(i);
    labels.push_back(int(it - classes.begin()));
  }
  Dataset out = d.subset(idx);
  out.labels = std::move(labels);
  out.num_classes = int(classes.size());
  return out;
}

std::string first_samples_id(const Dataset& d, std::size_t n) {
  return n == 0 || n >= d.size() ? d.id : d.id + "[:" + std::to_string(n) + "]";
}

ImageBatch<float> first_samples(const Dataset& d, std::size_t n) { return d.batch(detail::first_n(n, d.size())); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

json epoch_json(const EpochRecord& r) {
  json j{{"epoch", r.epoch},           {"lr", r.lr},
         {"loss", r.loss},             {"margin", r.margin},
         {"ce", r.ce},                 {"adv_style", r.adv_style},
         {"adv_content", r.adv_content}, {"adv_boundary", r.adv_boundary},
         {"train_accuracy", r.train_accuracy}};
  if (r.eval_accuracy >= 0) j["eval_accuracy"] = r.eval_accuracy;
  if (r.eval_pgd_accuracy >= 0) j["eval_pgd_accuracy"] = r.eval_pgd_accuracy;
  return j;
}

Model<float> load_model_for(const std::string& path, const Dataset& data, const char* role) {
  if (path.empty()) throw ConfigError(std::string("model.") + role + ": a checkpoint path is required");
  Model<float> m = load_checkpoint<float>(path);
  const ArchSpec& s = m.spec();
  const Shape img = data.image_shape();
  if (std::size_t(s.channels) != img.c || std::size_t(s.height) != img.h || std::size_t(s.width) != img.w ||
      s.num_classes != data.num_classes) {
    throw ConfigError(std::string("model.") + role + ": checkpoint " + path + " expects " +
                      std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width) +
                      " inputs and " + std::to_string(s.num_classes) + " classes, data has " + to_string(img) +
                      " and " + std::to_string(data.num_classes));
  }
  m.set_mode(Mode::eval);
  return m;
}

RobustnessReport report_base(const RunConfig& cfg, const Model<float>& model, const ImageBatch<float>& data,
                             const std::string& dataset_id) {
  RobustnessReport r;
  r.model_id = fs::path(cfg.model.checkpoint).filename().string();
  r.dataset_id = dataset_id;
  r.samples = data.size();
  r.clean_accuracy = clean_accuracy(model, data);
  return r;
}

AttackRecord attack_with(const Model<float>& model, const ImageBatch<float>& data, const AttackSection& a,
                         std::uint64_t seed) {
  AttackConfig c = a.config;
  c.seed = seed;
  return robust_accuracy(model, data, parse_attack(a.name), c, a.batch_size);
}

void cmd_train(const RunConfig& cfg, const DataSplits& d, const fs::path& out, std::ostream& log,
               std::vector<std::string>& outputs) {
  Model<float> model = build_model<float>(arch_for(cfg.model, d.train), cfg.seed);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  std::ofstream ndjson(out / "train_log.ndjson", std::ios::binary | std::ios::trunc);
  if (!ndjson) throw Error("cannot write " + (out / "train_log.ndjson").string());
  TrainHooks hooks;
  hooks.checkpoint_dir = out / "checkpoints";
  hooks.eval_set = &d.test;
  hooks.on_epoch = [&](const EpochRecord& r) {
    ndjson << epoch_json(r).dump() << "\n";
    ndjson.flush();
    log << "epoch " << r.epoch << "/" << tc.epochs << " lr " << r.lr << " loss " << r.loss << " train "
        << r.train_accuracy << "% test " << r.eval_accuracy << "%\n";
  };
  fs::create_directories(hooks.checkpoint_dir);
  train(model, d.train, tc, hooks);
  save_checkpoint(model, out / "model.ckpt");
  outputs.push_back("train_log.ndjson");
  outputs.push_back("model.ckpt");
  std::vector<std::string> ckpts;
  for (const auto& e : fs::directory_iterator(hooks.checkpoint_dir)) {
    ckpts.push_back("checkpoints/" + e.path().filename().string());
  }
  std::sort(ckpts.begin(), ckpts.end());
  outputs.insert(outputs.end(), ckpts.begin(), ckpts.end());
}

void cmd_attack(const RunConfig& cfg, const DataSplits& d, const fs::path& out, std::ostream& log,
                std::vector<std::string>& outputs) {
  const Model<float> model = load_model_for(cfg.model.checkpoint, d.test, "checkpoint");
  const auto data = first_samples(d.test, cfg.attack.samples);
  RobustnessReport r = report_base(cfg, model, data, first_samples_id(d.test, cfg.attack.samples));
  r.attacks.push_back(attack_with(model, data, cfg.attack, cfg.seed));
  log << cfg.attack.name << ": clean " << r.clean_accuracy << "% robust " << r.attacks[0].robust_accuracy << "%\n";
  save_report(r, out / "report.json");
  outputs.push_back("report.json");
}

void cmd_evaluate(const RunConfig& cfg, const DataSplits& d, const fs::path& out, std::ostream& log,
                  std::vector<std::string>& outputs) {
  const Model<float> model = load_model_for(cfg.model.checkpoint, d.test, "checkpoint");
  const auto data = first_samples(d.test, cfg.evaluate.samples);
  RobustnessReport r = report_base(cfg, model, data, first_samples_id(d.test, cfg.evaluate.samples));
  const std::vector<AttackSection> attacks =
      cfg.evaluate.attacks.empty() ? std::vector<AttackSection>{cfg.attack} : cfg.evaluate.attacks;
  for (std::size_t i = 0; i < attacks.size(); ++i) {
    r.attacks.push_back(attack_with(model, data, attacks[i], cfg.seed + i));
    log << attacks[i].name << ": robust " << r.attacks.back().robust_accuracy << "%\n";
  }
  if (cfg.evaluate.correlation && data.size() >= 2) {
    // Same per-batch seeds as the first attack record.
    const AttackSection& a = attacks.front();
    Tensor<float> adv(data.pixels.shape());
    const std::size_t per = data.pixels.shape().per_sample();
    std::size_t index = 0;
    for (std::size_t s = 0; s < data.size(); s += a.batch_size, ++index) {
      const auto b = detail::slice(data, s, std::min(data.size(), s + a.batch_size));
      AttackConfig c = a.config;
      c.seed = detail::batch_seed(cfg.seed, index);
      const auto x = run_attack(parse_attack(a.name), model, b, c);
      std::copy(x.pixels.data(), x.pixels.data() + b.size() * per, adv.data() + s * per);
    }
    r.correlation_loss = correlation_loss(model, data.pixels, adv);
    log << "correlation loss " << *r.correlation_loss << "\n";
  }
  if (!cfg.evaluate.epsilon_sweep.empty()) {
    Sweep s{"accuracy-vs-epsilon", "epsilon (raw)", "robust accuracy (%)", {}, {}};
    for (double e : cfg.evaluate.epsilon_sweep) {
      AttackSection a = cfg.attack;
      a.name = "pgd";
      a.config.epsilon = e;
      a.config.step_size = e > 0.0 ? e / 4.0 : a.config.step_size;
      s.x.push_back(e);
      s.y.push_back(attack_with(model, data, a, cfg.seed).robust_accuracy);
    }
    r.sweeps.push_back(std::move(s));
  }
  save_report(r, out / "report.json");
  outputs.push_back("report.json");
}

void cmd_corruptions(const RunConfig& cfg, const DataSplits& d, const fs::path& out, std::ostream& log,
                     std::vector<std::string>& outputs) {
  const Model<float> model = load_model_for(cfg.model.checkpoint, d.test, "checkpoint");
  const auto data = first_samples(d.test, cfg.corruptions.samples);
  RobustnessReport r = report_base(cfg, model, data, first_samples_id(d.test, cfg.corruptions.samples));
  const CorruptionTable table =
      cfg.corruptions.table.empty() ? CorruptionTable::defaults() : CorruptionTable::load(cfg.corruptions.table);
  const auto names = cfg.corruptions.names.empty() ? table.names() : cfg.corruptions.names;
  r.corruptions = corruption_sweep(model, data, table, names, cfg.corruptions.severities, cfg.seed);
  log << "corruption mean " << r.corruptions->overall_mean << "% variance " << r.corruptions->variance << "\n";
  save_report(r, out / "report.json");
  outputs.push_back("report.json");
}

void cmd_obfuscation(const RunConfig& cfg, const DataSplits& d, const fs::path& out, std::ostream& log,
                     std::vector<std::string>& outputs) {
  const Model<float> model = load_model_for(cfg.model.checkpoint, d.test, "checkpoint");
  Model<float> source = [&] {
    if (!cfg.model.source_checkpoint.empty()) return load_model_for(cfg.model.source_checkpoint, d.test, "source_checkpoint");
    log << "training a natural transfer source for " << cfg.obfuscation.source_epochs << " epochs\n";
    Model<float> m = build_model<float>(model.spec(), cfg.seed + 1);
    TrainConfig tc = cfg.train;
    tc.mode = TrainMode::natural;
    tc.epochs = cfg.obfuscation.source_epochs;
    tc.seed = cfg.seed + 1;
    train(m, d.train, tc);
    save_checkpoint(m, out / "source.ckpt");
    outputs.push_back("source.ckpt");
    return m;
  }();
  source.set_mode(Mode::eval);
  const auto data = first_samples(d.test, cfg.obfuscation.samples);
  RobustnessReport r = report_base(cfg, model, data, first_samples_id(d.test, cfg.obfuscation.samples));
  ObfuscationOptions opt;
  opt.base = cfg.obfuscation.base;
  opt.base.seed = cfg.seed;
  opt.epsilons = cfg.obfuscation.epsilons;
  opt.iterations = cfg.obfuscation.iterations;
  r.obfuscation = obfuscation_report(model, source, data, opt);
  for (const auto& c : r.obfuscation->checks) log << (c.passed ? "pass " : "FAIL ") << c.name << ": " << c.detail << "\n";
  save_report(r, out / "report.json");
  outputs.push_back("report.json");
}

void cmd_style(const RunConfig& cfg, const DataSplits& d, const fs::path& out, std::ostream& log,
               std::vector<std::string>& outputs) {
  const StyleSection& s = cfg.style;
  if (s.content.empty() || s.style.empty()) throw ConfigError("style.content and style.style: image paths are required");
  const Model<float> model = load_model_for(cfg.model.checkpoint, d.test, "checkpoint");
  StyleJob job;
  job.content = read_image(s.content);
  job.style = read_image(s.style);
  if (!(job.content.shape() == model.input_shape(1))) {
    throw ShapeError("style.content: image is " + to_string(job.content.shape()) + ", model expects " +
                     to_string(model.input_shape(1)));
  }
  job.init = parse_style_init(s.init);
  job.iterations = s.iterations;
  job.style_weight = s.style_weight;
  job.content_weight = s.content_weight;
  job.style_taps = s.style_taps;
  job.content_taps = s.content_taps;
  job.step = s.step;
  job.seed = cfg.seed;
  const auto res = style_transfer(model, job);
  write_image(res.image.cast<double>(), out / s.output);
  outputs.push_back(s.output);
  RobustnessReport r;
  r.model_id = fs::path(cfg.model.checkpoint).filename().string();
  r.dataset_id = fs::path(s.content).filename().string();
  r.samples = 1;
  Sweep trace{"style-loss", "iteration", "loss", {}, res.loss_trace};
  for (std::size_t i = 0; i < res.loss_trace.size(); ++i) trace.x.push_back(double(i));
  r.sweeps.push_back(std::move(trace));
  log << "style loss " << res.loss_trace.front() << " -> " << res.loss_trace.back() << "\n";
  save_report(r, out / "report.json");
  outputs.push_back("report.json");
}

void write_manifest(const fs::path& out, const std::string& command, std::uint64_t seed, const json& config,
                    const std::vector<std::string>& outputs, const std::vector<std::string>& warnings) {
  json m{{"schema", kManifestSchema}, {"command", command},   {"version", SATLAB_VERSION},
         {"seed", seed},              {"config", config},     {"outputs", outputs},
         {"warnings", warnings}};
  write_text(out / "manifest.json", m.dump(2) + "\n");
}

}  // namespace

DataSplits load_data(const DataSection& d) {
  DataSplits s;
  if (d.source == "toy") {
    const ToyKind kind = parse_toy_kind(d.toy_kind);
    const std::size_t k = std::size_t(d.toy_classes);
    const Dataset all = make_toy_dataset(kind, d.toy_train_per_class + d.toy_test_per_class, d.toy_classes, d.toy_seed,
                                         Shape{1, std::size_t(d.toy_channels), std::size_t(d.toy_height),
                                               std::size_t(d.toy_width)},
                                         d.toy_sigma);
    // Labels are interleaved, so a prefix split keeps every class balanced.
    std::vector<std::size_t> tr(d.toy_train_per_class * k), te(d.toy_test_per_class * k);
    std::iota(tr.begin(), tr.end(), 0);
    std::iota(te.begin(), te.end(), tr.size());
    s.train = all.subset(tr);
    s.test = all.subset(te);
    s.train.split = "train";
    s.test.split = "test";
    s.train.id = "toy-" + d.toy_kind + "-train";
    s.test.id = "toy-" + d.toy_kind + "-test";
  } else {
    const fs::path root = resolve_data_root(d);
    s.train = keep_classes(load_cifar10_split(root, "train", d.max_train_files), d.classes, d.train_per_class);
    s.test = keep_classes(load_cifar10_split(root, "test"), d.classes, d.test_per_class);
  }
  s.train.normalize();
  s.test.normalize();
  return s;
}

ArchSpec arch_for(const ModelSection& m, const Dataset& data) {
  const Shape img = data.image_shape();
  return ArchSpec{m.arch, int(img.c), int(img.h), int(img.w), data.num_classes, m.widths};
}

void run_command(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  fs::create_directories(out);
  const DataSplits d = load_data(cfg.data);
  log << "data: " << d.train.id << " (" << d.train.size() << ") / " << d.test.id << " (" << d.test.size() << ")\n";
  std::vector<std::string> outputs;
  if (cfg.command == "train") {
    cmd_train(cfg, d, out, log, outputs);
  } else if (cfg.command == "attack") {
    cmd_attack(cfg, d, out, log, outputs);
  } else if (cfg.command == "evaluate") {
    cmd_evaluate(cfg, d, out, log, outputs);
  } else if (cfg.command == "corruptions") {
    cmd_corruptions(cfg, d, out, log, outputs);
  } else if (cfg.command == "obfuscation") {
    cmd_obfuscation(cfg, d, out, log, outputs);
  } else if (cfg.command == "style") {
    cmd_style(cfg, d, out, log, outputs);
  } else {
    throw ConfigError("command: unknown command '" + cfg.command + "'");
  }
  write_manifest(out, cfg.command, cfg.seed, to_json(cfg), outputs, {});
}

std::vector<std::string> run_plots(const fs::path& report, const fs::path& out, std::ostream& log) {
  fs::create_directories(out);
  const RobustnessReport r = load_report(report);
  const PlotOutcome p = write_plots(r, out / "plots");
  std::vector<std::string> outputs;
  for (const auto& f : p.written) outputs.push_back("plots/" + f.filename().string());
  for (const auto& f : outputs) log << "wrote " << f << "\n";
  write_manifest(out, "plots", 0, json{{"report", report.filename().string()}}, outputs, p.warnings);
  return p.warnings;
}

}  // namespace satlab

#include "satlab/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <type_traits>

namespace satlab {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& d : v) s += "\n  " + d;
  return s;
}

json taps_json(const TapSelection& t) {
  switch (t.kind) {
    case TapSelection::Kind::all: return "all";
    case TapSelection::Kind::penultimate: return "penultimate";
    case TapSelection::Kind::named: return t.ids;
  }
  return "all";
}

json train_json(const TrainConfig& t) {
  const LossWeights& w = t.weights;
  return {{"mode", mode_name(t.mode)},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"momentum", t.momentum},
          {"weight_decay", t.weight_decay},
          {"lr", {{"initial", t.lr.initial}, {"decay_epochs", t.lr.decay_epochs}, {"factor", t.lr.factor}}},
          {"epsilon", t.epsilon},
          {"gaussian_sigma", t.gaussian_sigma},
          {"weights",
           {{"alpha", w.alpha},
            {"gamma", w.gamma},
            {"beta", w.beta},
            {"w1", w.w1},
            {"w2", w.w2},
            {"margin", w.margin},
            {"p", w.p},
            {"smoothing", w.smoothing}}},
          {"margin_taps", taps_json(t.margin_taps)},
          {"style_taps", taps_json(t.style_taps)},
          {"content_taps", taps_json(t.content_taps)},
          {"pgd_iterations", t.pgd_iterations},
          {"pgd_step", t.pgd_step},
          {"log_pgd_iterations", t.log_pgd_iterations},
          {"log_samples", t.log_samples}};
}

json attack_section_json(const AttackSection& a) {
  json j = attack_config_to_json(a.config);
  j["name"] = a.name;
  j["samples"] = a.samples;
  j["batch_size"] = a.batch_size;
  return j;
}

/// Typed field access that records a diagnostic instead of throwing.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  template <typename T>
  void get(const json& obj, const std::string& path, const char* key, T& out) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!obj.is_object() || !obj.contains(key)) {
      errors_.push_back(where + ": missing");
      return;
    }
    const json& v = obj.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) return fail(where, "expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) return fail(where, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
          return fail(where, "must be >= 0");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) return fail(where, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) return fail(where, "expected a string");
    }
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      fail(where, "has the wrong type");
    }
  }

  void taps(const json& obj, const std::string& path, const char* key, TapSelection& out) {
    const std::string where = path + "." + key;
    if (!obj.contains(key)) return fail(where, "missing");
    const json& v = obj.at(key);
    if (v == "all") {
      out = TapSelection::all_taps();
    } else if (v == "penultimate") {
      out = TapSelection::penultimate();
    } else if (v.is_array() && !v.empty() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); })) {
      out = TapSelection::named(v.get<std::vector<std::string>>());
    } else {
      fail(where, "expected \"all\", \"penultimate\" or a non-empty list of tap ids");
    }
  }

  void fail(const std::string& where, const std::string& what) { errors_.push_back(where + ": " + what); }

  /// Runs a struct's own validate() and files its message under `path`.
  template <typename F>
  void check(const std::string& path, F&& f) {
    try {
      f();
    } catch (const ConfigError& e) {
      fail(path, e.what());
    }
  }

 private:
  std::vector<std::string>& errors_;
};

void read_attack_config(Reader& r, const json& j, const std::string& path, AttackConfig& c) {
  r.get(j, path, "epsilon", c.epsilon);
  r.get(j, path, "step_size", c.step_size);
  r.get(j, path, "iterations", c.iterations);
  r.get(j, path, "random_start", c.random_start);
  r.get(j, path, "momentum_decay", c.momentum_decay);
  r.get(j, path, "kappa", c.kappa);
  r.get(j, path, "window_h", c.window_h);
  r.get(j, path, "window_w", c.window_w);
  r.get(j, path, "stride", c.stride);
  r.get(j, path, "candidates", c.candidates);
  r.get(j, path, "roa_steps", c.roa_steps);
  r.get(j, path, "roa_step_size", c.roa_step_size);
  r.get(j, path, "deepfool_max_iter", c.deepfool_max_iter);
  r.get(j, path, "overshoot", c.overshoot);
  r.check(path, [&] { c.validate(); });
}

void read_attack_section(Reader& r, const json& j, const std::string& path, AttackSection& a) {
  r.get(j, path, "name", a.name);
  r.check(path + ".name", [&] { parse_attack(a.name); });
  r.get(j, path, "samples", a.samples);
  r.get(j, path, "batch_size", a.batch_size);
  if (a.batch_size == 0) r.fail(path + ".batch_size", "must be >= 1");
  read_attack_config(r, j, path, a.config);
}

/// Deep merge of `overlay` into `base`; keys absent from `base` are unknown fields.
void merge(json& base, const json& overlay, const std::string& path, std::vector<std::string>& errors) {
  if (path == "evaluate.attacks") {
    if (!overlay.is_array()) {
      errors.push_back(path + ": expected a list of attack sections");
      return;
    }
    const json tmpl = attack_section_json(AttackSection{});
    base = json::array();
    for (std::size_t i = 0; i < overlay.size(); ++i) {
      json item = tmpl;
      merge(item, overlay[i], path + "." + std::to_string(i), errors);
      base.push_back(std::move(item));
    }
    return;
  }
  if (base.is_object()) {
    if (!overlay.is_object()) {
      errors.push_back((path.empty() ? std::string("config") : path) + ": expected an object");
      return;
    }
    for (const auto& [k, v] : overlay.items()) {
      const std::string p = path.empty() ? k : path + "." + k;
      if (!base.contains(k)) {
        errors.push_back(p + ": unknown field");
        continue;
      }
      merge(base[k], v, p, errors);
    }
    return;
  }
  base = overlay;
}

void apply_override(json& doc, const std::string& spec, std::vector<std::string>& errors) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    errors.push_back("--set " + spec + ": expected key=value");
    return;
  }
  const std::string key = spec.substr(0, eq), text = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  // Build a nested overlay from the dotted key; numeric parts index lists.
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
  json* node = &doc;
  std::string path;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& p = parts[i];
    path += (path.empty() ? "" : ".") + p;
    if (node->is_array()) {
      char* end = nullptr;
      const unsigned long idx = std::strtoul(p.c_str(), &end, 10);
      if (*end != '\0' || idx >= node->size()) {
        errors.push_back(path + ": no such list element");
        return;
      }
      node = &(*node)[idx];
    } else if (node->is_object() && node->contains(p)) {
      node = &(*node)[p];
    } else {
      errors.push_back(path + ": unknown field");
      return;
    }
  }
  merge(*node, value, key, errors);
}

}  // namespace

ConfigValidationError::ConfigValidationError(std::vector<std::string> diagnostics)
    : ConfigError("invalid configuration:" + join(diagnostics)), diagnostics_(std::move(diagnostics)) {}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"train", "attack", "evaluate", "corruptions", "obfuscation", "style"};
  return names;
}

json attack_config_to_json(const AttackConfig& c) {
  return {{"epsilon", c.epsilon},
          {"step_size", c.step_size},
          {"iterations", c.iterations},
          {"random_start", c.random_start},
          {"momentum_decay", c.momentum_decay},
          {"kappa", c.kappa},
          {"window_h", c.window_h},
          {"window_w", c.window_w},
          {"stride", c.stride},
          {"candidates", c.candidates},
          {"roa_steps", c.roa_steps},
          {"roa_step_size", c.roa_step_size},
          {"deepfool_max_iter", c.deepfool_max_iter},
          {"overshoot", c.overshoot}};
}

json to_json(const RunConfig& c) {
  const DataSection& d = c.data;
  json attacks = json::array();
  for (const auto& a : c.evaluate.attacks) attacks.push_back(attack_section_json(a));
  return {
      {"schema", kConfigSchema},
      {"command", c.command},
      {"seed", c.seed},
      {"data",
       {{"source", d.source},
        {"root", d.root},
        {"classes", d.classes},
        {"train_per_class", d.train_per_class},
        {"test_per_class", d.test_per_class},
        {"max_train_files", d.max_train_files},
        {"toy_kind", d.toy_kind},
        {"toy_classes", d.toy_classes},
        {"toy_train_per_class", d.toy_train_per_class},
        {"toy_test_per_class", d.toy_test_per_class},
        {"toy_channels", d.toy_channels},
        {"toy_height", d.toy_height},
        {"toy_width", d.toy_width},
        {"toy_sigma", d.toy_sigma},
        {"toy_seed", d.toy_seed}}},
      {"model",
       {{"arch", c.model.arch},
        {"widths", c.model.widths},
        {"checkpoint", c.model.checkpoint},
        {"source_checkpoint", c.model.source_checkpoint}}},
      {"train", train_json(c.train)},
      {"attack", attack_section_json(c.attack)},
      {"evaluate",
       {{"attacks", attacks},
        {"correlation", c.evaluate.correlation},
        {"epsilon_sweep", c.evaluate.epsilon_sweep},
        {"samples", c.evaluate.samples}}},
      {"corruptions",
       {{"table", c.corruptions.table},
        {"names", c.corruptions.names},
        {"severities", c.corruptions.severities},
        {"samples", c.corruptions.samples}}},
      {"obfuscation",
       {{"base", attack_config_to_json(c.obfuscation.base)},
        {"epsilons", c.obfuscation.epsilons},
        {"iterations", c.obfuscation.iterations},
        {"source_epochs", c.obfuscation.source_epochs},
        {"samples", c.obfuscation.samples}}},
      {"style",
       {{"content", c.style.content},
        {"style", c.style.style},
        {"init", c.style.init},
        {"iterations", c.style.iterations},
        {"style_weight", c.style.style_weight},
        {"content_weight", c.style.content_weight},
        {"style_taps", taps_json(c.style.style_taps)},
        {"content_taps", taps_json(c.style.content_taps)},
        {"step", c.style.step},
        {"output", c.style.output}}},
  };
}

json default_config_json() { return to_json(RunConfig{}); }

RunConfig parse_config(const json& user, const std::vector<std::string>& overrides) {
  std::vector<std::string> errors;
  json doc = default_config_json();
  if (user.is_object() && user.contains("schema") && user["schema"] != kConfigSchema) {
    errors.push_back("schema: expected \"" + std::string(kConfigSchema) + "\"");
  }
  merge(doc, user, "", errors);
  for (const auto& o : overrides) apply_override(doc, o, errors);

  Reader r(errors);
  RunConfig c;
  r.get(doc, "", "command", c.command);
  if (std::find(command_names().begin(), command_names().end(), c.command) == command_names().end()) {
    r.fail("command", "unknown command '" + c.command + "'");
  }
  r.get(doc, "", "seed", c.seed);

  const json& d = doc["data"];
  DataSection& ds = c.data;
  r.get(d, "data", "source", ds.source);
  if (ds.source != "cifar10" && ds.source != "toy") r.fail("data.source", "expected cifar10 or toy");
  r.get(d, "data", "root", ds.root);
  r.get(d, "data", "classes", ds.classes);
  for (int k : ds.classes) {
    if (k < 0 || k > 9) r.fail("data.classes", "class ids must lie in 0..9");
  }
  if (ds.classes.size() == 1) r.fail("data.classes", "at least 2 classes are needed");
  r.get(d, "data", "train_per_class", ds.train_per_class);
  r.get(d, "data", "test_per_class", ds.test_per_class);
  r.get(d, "data", "max_train_files", ds.max_train_files);
  if (ds.max_train_files < 1 || ds.max_train_files > 5) r.fail("data.max_train_files", "must lie in 1..5");
  r.get(d, "data", "toy_kind", ds.toy_kind);
  r.check("data.toy_kind", [&] { parse_toy_kind(ds.toy_kind); });
  r.get(d, "data", "toy_classes", ds.toy_classes);
  if (ds.toy_classes < 2 || ds.toy_classes > 255) r.fail("data.toy_classes", "must lie in 2..255");
  r.get(d, "data", "toy_train_per_class", ds.toy_train_per_class);
  if (ds.toy_train_per_class < 1) r.fail("data.toy_train_per_class", "must be >= 1");
  r.get(d, "data", "toy_test_per_class", ds.toy_test_per_class);
  if (ds.toy_test_per_class < 1) r.fail("data.toy_test_per_class", "must be >= 1");
  r.get(d, "data", "toy_channels", ds.toy_channels);
  r.get(d, "data", "toy_height", ds.toy_height);
  r.get(d, "data", "toy_width", ds.toy_width);
  if (ds.toy_channels < 1 || ds.toy_height < 1 || ds.toy_width < 1) r.fail("data", "toy image dimensions must be >= 1");
  r.get(d, "data", "toy_sigma", ds.toy_sigma);
  if (!(ds.toy_sigma > 0.0)) r.fail("data.toy_sigma", "must be > 0");
  r.get(d, "data", "toy_seed", ds.toy_seed);

  const json& m = doc["model"];
  r.get(m, "model", "arch", c.model.arch);
  if (c.model.arch != "linear" && c.model.arch != "tiny-cnn" && c.model.arch != "resnet-mini") {
    r.fail("model.arch", "expected linear, tiny-cnn or resnet-mini");
  }
  r.get(m, "model", "widths", c.model.widths);
  for (int w : c.model.widths) {
    if (w < 1) r.fail("model.widths", "widths must be >= 1");
  }
  r.get(m, "model", "checkpoint", c.model.checkpoint);
  r.get(m, "model", "source_checkpoint", c.model.source_checkpoint);

  const json& t = doc["train"];
  TrainConfig& tc = c.train;
  std::string mode;
  r.get(t, "train", "mode", mode);
  r.check("train.mode", [&] { tc.mode = parse_mode(mode); });
  r.get(t, "train", "epochs", tc.epochs);
  r.get(t, "train", "batch_size", tc.batch_size);
  r.get(t, "train", "momentum", tc.momentum);
  r.get(t, "train", "weight_decay", tc.weight_decay);
  r.get(t["lr"], "train.lr", "initial", tc.lr.initial);
  r.get(t["lr"], "train.lr", "decay_epochs", tc.lr.decay_epochs);
  r.get(t["lr"], "train.lr", "factor", tc.lr.factor);
  r.get(t, "train", "epsilon", tc.epsilon);
  r.get(t, "train", "gaussian_sigma", tc.gaussian_sigma);
  const json& w = t["weights"];
  r.get(w, "train.weights", "alpha", tc.weights.alpha);
  r.get(w, "train.weights", "gamma", tc.weights.gamma);
  r.get(w, "train.weights", "beta", tc.weights.beta);
  r.get(w, "train.weights", "w1", tc.weights.w1);
  r.get(w, "train.weights", "w2", tc.weights.w2);
  r.get(w, "train.weights", "margin", tc.weights.margin);
  r.get(w, "train.weights", "p", tc.weights.p);
  r.get(w, "train.weights", "smoothing", tc.weights.smoothing);
  r.taps(t, "train", "margin_taps", tc.margin_taps);
  r.taps(t, "train", "style_taps", tc.style_taps);
  r.taps(t, "train", "content_taps", tc.content_taps);
  r.get(t, "train", "pgd_iterations", tc.pgd_iterations);
  r.get(t, "train", "pgd_step", tc.pgd_step);
  r.get(t, "train", "log_pgd_iterations", tc.log_pgd_iterations);
  r.get(t, "train", "log_samples", tc.log_samples);
  r.check("train", [&] { tc.validate(); });

  read_attack_section(r, doc["attack"], "attack", c.attack);

  const json& e = doc["evaluate"];
  for (std::size_t i = 0; i < e["attacks"].size(); ++i) {
    AttackSection a;
    read_attack_section(r, e["attacks"][i], "evaluate.attacks." + std::to_string(i), a);
    c.evaluate.attacks.push_back(a);
  }
  r.get(e, "evaluate", "correlation", c.evaluate.correlation);
  r.get(e, "evaluate", "epsilon_sweep", c.evaluate.epsilon_sweep);
  for (double v : c.evaluate.epsilon_sweep) {
    if (!(v >= 0.0)) r.fail("evaluate.epsilon_sweep", "budgets must be >= 0");
  }
  r.get(e, "evaluate", "samples", c.evaluate.samples);

  const json& cs = doc["corruptions"];
  r.get(cs, "corruptions", "table", c.corruptions.table);
  r.get(cs, "corruptions", "names", c.corruptions.names);
  for (const auto& n : c.corruptions.names) {
    if (std::find(corruption_names().begin(), corruption_names().end(), n) == corruption_names().end()) {
      r.fail("corruptions.names", "unknown corruption '" + n + "'");
    }
  }
  r.get(cs, "corruptions", "severities", c.corruptions.severities);
  if (c.corruptions.severities.empty()) r.fail("corruptions.severities", "must not be empty");
  for (int s : c.corruptions.severities) {
    if (s < 1 || s > 5) r.fail("corruptions.severities", "severities must lie in 1..5");
  }
  r.get(cs, "corruptions", "samples", c.corruptions.samples);

  const json& o = doc["obfuscation"];
  read_attack_config(r, o["base"], "obfuscation.base", c.obfuscation.base);
  r.get(o, "obfuscation", "epsilons", c.obfuscation.epsilons);
  if (c.obfuscation.epsilons.empty()) r.fail("obfuscation.epsilons", "must not be empty");
  r.get(o, "obfuscation", "iterations", c.obfuscation.iterations);
  for (int k : c.obfuscation.iterations) {
    if (k < 1) r.fail("obfuscation.iterations", "iteration counts must be >= 1");
  }
  r.get(o, "obfuscation", "source_epochs", c.obfuscation.source_epochs);
  if (c.obfuscation.source_epochs < 1) r.fail("obfuscation.source_epochs", "must be >= 1");
  r.get(o, "obfuscation", "samples", c.obfuscation.samples);

  const json& st = doc["style"];
  StyleSection& ss = c.style;
  r.get(st, "style", "content", ss.content);
  r.get(st, "style", "style", ss.style);
  r.get(st, "style", "init", ss.init);
  r.check("style.init", [&] { parse_style_init(ss.init); });
  r.get(st, "style", "iterations", ss.iterations);
  if (ss.iterations < 0) r.fail("style.iterations", "must be >= 0");
  r.get(st, "style", "style_weight", ss.style_weight);
  r.get(st, "style", "content_weight", ss.content_weight);
  if (!(ss.style_weight >= 0.0) || !(ss.content_weight >= 0.0)) r.fail("style", "weights must be >= 0");
  r.taps(st, "style", "style_taps", ss.style_taps);
  r.taps(st, "style", "content_taps", ss.content_taps);
  r.get(st, "style", "step", ss.step);
  if (!(ss.step > 0.0)) r.fail("style.step", "must be > 0");
  r.get(st, "style", "output", ss.output);

  if (!errors.empty()) throw ConfigValidationError(errors);
  return c;
}

RunConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  json user = json::object();
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw ConfigValidationError({file.string() + ": cannot open config file"});
    try {
      user = json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
      throw ConfigValidationError({file.string() + ": not valid JSON (" + e.what() + ")"});
    }
  }
  return parse_config(user, overrides);
}

std::filesystem::path resolve_data_root(const DataSection& d) {
  std::filesystem::path root = d.root;
  if (root.empty()) {
    const char* env = std::getenv("SATLAB_DATA");
    if (!env || !*env) throw ConfigError("data.root is empty and SATLAB_DATA is not set");
    root = env;
  }
  if (std::filesystem::is_directory(root / "cifar-10-batches-bin")) root /= "cifar-10-batches-bin";
  return root;
}

}  // namespace satlab

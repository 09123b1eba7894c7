#include <fstream>
#include <sstream>

#include <json.hpp>

#include "satlab/eval.hpp"

namespace satlab {

using nlohmann::json;

namespace {

constexpr const char* kSchema = "satlab-report/1";

json attack_config_json(const AttackConfig& c) {
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
          {"overshoot", c.overshoot},
          {"seed", c.seed}};
}

AttackConfig attack_config_from(const json& j) {
  AttackConfig c;
  c.epsilon = j.at("epsilon").get<double>();
  c.step_size = j.at("step_size").get<double>();
  c.iterations = j.at("iterations").get<int>();
  c.random_start = j.at("random_start").get<bool>();
  c.momentum_decay = j.at("momentum_decay").get<double>();
  c.kappa = j.at("kappa").get<double>();
  c.window_h = j.at("window_h").get<int>();
  c.window_w = j.at("window_w").get<int>();
  c.stride = j.at("stride").get<int>();
  c.candidates = j.at("candidates").get<int>();
  c.roa_steps = j.at("roa_steps").get<int>();
  c.roa_step_size = j.at("roa_step_size").get<double>();
  c.deepfool_max_iter = j.at("deepfool_max_iter").get<int>();
  c.overshoot = j.at("overshoot").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json sweep_json(const Sweep& s) {
  return {{"name", s.name}, {"x_label", s.x_label}, {"y_label", s.y_label}, {"x", s.x}, {"y", s.y}};
}

Sweep sweep_from(const json& j) {
  Sweep s;
  s.name = j.at("name").get<std::string>();
  s.x_label = j.at("x_label").get<std::string>();
  s.y_label = j.at("y_label").get<std::string>();
  s.x = j.at("x").get<std::vector<double>>();
  s.y = j.at("y").get<std::vector<double>>();
  if (s.x.size() != s.y.size()) throw FormatError("sweep '" + s.name + "' has unequal x and y lengths");
  return s;
}

json to_json(const RobustnessReport& r) {
  json j;
  j["schema"] = kSchema;
  j["model_id"] = r.model_id;
  j["dataset_id"] = r.dataset_id;
  j["samples"] = r.samples;
  j["clean_accuracy"] = r.clean_accuracy;
  j["attacks"] = json::array();
  for (const auto& a : r.attacks) {
    json ja{{"attack", a.attack},
            {"config", attack_config_json(a.config)},
            {"samples", a.samples},
            {"clean_accuracy", a.clean_accuracy},
            {"robust_accuracy", a.robust_accuracy},
            {"mean_linf", a.mean_linf}};
    if (!a.source_model.empty()) ja["source_model"] = a.source_model;
    if (!a.success.empty()) ja["success"] = a.success;
    if (!a.linf.empty()) ja["linf"] = a.linf;
    j["attacks"].push_back(std::move(ja));
  }
  if (r.corruptions) {
    const auto& c = *r.corruptions;
    j["corruptions"] = {{"table_version", c.table_version},
                        {"severities", c.severities},
                        {"accuracy", c.accuracy},
                        {"mean", c.mean},
                        {"overall_mean", c.overall_mean},
                        {"variance", c.variance},
                        {"clean_accuracy", c.clean_accuracy},
                        {"samples", c.samples}};
  }
  if (r.obfuscation) {
    json checks = json::array();
    for (const auto& c : r.obfuscation->checks) {
      checks.push_back({{"name", c.name}, {"passed", c.passed}, {"numbers", c.numbers}, {"detail", c.detail}});
    }
    json sweeps = json::array();
    for (const auto& s : r.obfuscation->sweeps) sweeps.push_back(sweep_json(s));
    j["obfuscation"] = {{"passed", r.obfuscation->passed()}, {"checks", checks}, {"sweeps", sweeps}};
  }
  if (r.correlation_loss) j["correlation_loss"] = *r.correlation_loss;
  j["sweeps"] = json::array();
  for (const auto& s : r.sweeps) j["sweeps"].push_back(sweep_json(s));
  return j;
}

RobustnessReport from_json(const json& j) {
  if (j.value("schema", std::string{}) != kSchema) {
    throw FormatError("not a " + std::string(kSchema) + " document");
  }
  RobustnessReport r;
  r.model_id = j.at("model_id").get<std::string>();
  r.dataset_id = j.at("dataset_id").get<std::string>();
  r.samples = j.at("samples").get<std::size_t>();
  r.clean_accuracy = j.at("clean_accuracy").get<double>();
  for (const auto& ja : j.at("attacks")) {
    AttackRecord a;
    a.attack = ja.at("attack").get<std::string>();
    a.config = attack_config_from(ja.at("config"));
    a.samples = ja.at("samples").get<std::size_t>();
    a.clean_accuracy = ja.at("clean_accuracy").get<double>();
    a.robust_accuracy = ja.at("robust_accuracy").get<double>();
    a.mean_linf = ja.at("mean_linf").get<double>();
    a.source_model = ja.value("source_model", std::string{});
    if (ja.contains("success")) a.success = ja["success"].get<std::vector<std::uint8_t>>();
    if (ja.contains("linf")) a.linf = ja["linf"].get<std::vector<double>>();
    r.attacks.push_back(std::move(a));
  }
  if (j.contains("corruptions")) {
    const auto& jc = j["corruptions"];
    CorruptionResult c;
    c.table_version = jc.at("table_version").get<int>();
    c.severities = jc.at("severities").get<std::vector<int>>();
    c.accuracy = jc.at("accuracy").get<std::map<std::string, std::vector<double>>>();
    c.mean = jc.at("mean").get<std::map<std::string, double>>();
    c.overall_mean = jc.at("overall_mean").get<double>();
    c.variance = jc.at("variance").get<double>();
    c.clean_accuracy = jc.at("clean_accuracy").get<double>();
    c.samples = jc.at("samples").get<std::size_t>();
    r.corruptions = std::move(c);
  }
  if (j.contains("obfuscation")) {
    ObfuscationReport o;
    for (const auto& jc : j["obfuscation"].at("checks")) {
      o.checks.push_back({jc.at("name").get<std::string>(), jc.at("passed").get<bool>(),
                          jc.at("numbers").get<std::map<std::string, double>>(),
                          jc.at("detail").get<std::string>()});
    }
    for (const auto& js : j["obfuscation"].at("sweeps")) o.sweeps.push_back(sweep_from(js));
    r.obfuscation = std::move(o);
  }
  if (j.contains("correlation_loss")) r.correlation_loss = j["correlation_loss"].get<double>();
  for (const auto& js : j.at("sweeps")) r.sweeps.push_back(sweep_from(js));
  return r;
}

}  // namespace

std::string report_to_json(const RobustnessReport& r) { return to_json(r).dump(2) + "\n"; }

RobustnessReport report_from_json(const std::string& text) {
  try {
    return from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

void save_report(const RobustnessReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write report: " + path.string());
  out << report_to_json(r);
  if (!out) throw Error("failed writing report: " + path.string());
}

RobustnessReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open report: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return report_from_json(ss.str());
}

}  // namespace satlab

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "satlab/commands.hpp"
#include "satlab/config.hpp"
#include "satlab/image_io.hpp"
#include "satlab/plots.hpp"

using namespace satlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("satlab-cli-" + std::to_string(::getpid()) + "-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Runs the satlab binary; stdout/stderr go to files in `dir`. Returns the exit status.
int run_cli(const std::string& args, const fs::path& dir) {
  const std::string cmd = std::string(SATLAB_CLI_PATH) + " " + args + " >" + (dir / "stdout.txt").string() +
                          " 2>" + (dir / "stderr.txt").string();
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const std::string kToy =
    "--set data.source=toy data.toy_train_per_class=30 data.toy_test_per_class=15 data.toy_sigma=40 "
    "train.batch_size=20 train.lr.decay_epochs=[3] ";

/// A trained toy checkpoint shared by the evaluation cases.
const fs::path& toy_checkpoint() {
  static const fs::path ckpt = [] {
    const fs::path dir = scratch("model");
    REQUIRE(run_cli("train --out " + (dir / "run").string() + " --seed 4 " + kToy + "train.epochs=5", dir) == 0);
    return dir / "run" / "model.ckpt";
  }();
  return ckpt;
}

std::vector<json> ndjson_lines(const fs::path& p) {
  std::vector<json> out;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
  return out;
}

}  // namespace

TEST_CASE("config: defaults round-trip and overrides parse as JSON or strings") {
  const RunConfig d = parse_config(json::object(), {});
  CHECK(to_json(d) == default_config_json());
  CHECK(to_json(parse_config(default_config_json(), {})) == default_config_json());

  const RunConfig c = parse_config(json::object(), {"train.epochs=7", "model.arch=linear", "data.classes=[3,5]",
                                                    "train.margin_taps=[\"stage1\",\"stage2\"]",
                                                    "train.style_taps=penultimate", "attack.random_start=false"});
  CHECK(c.train.epochs == 7);
  CHECK(c.model.arch == "linear");
  CHECK(c.data.classes == std::vector<int>{3, 5});
  CHECK(c.train.margin_taps.kind == TapSelection::Kind::named);
  CHECK(c.train.margin_taps.ids == std::vector<std::string>{"stage1", "stage2"});
  CHECK(c.train.style_taps.kind == TapSelection::Kind::penultimate);
  CHECK_FALSE(c.attack.config.random_start);

  const json file = json::parse(R"({"evaluate": {"attacks": [{"name": "fgsm"}, {"name": "cw", "kappa": 2}]}})");
  const RunConfig e = parse_config(file, {"evaluate.attacks.1.iterations=3"});
  REQUIRE(e.evaluate.attacks.size() == 2);
  CHECK(e.evaluate.attacks[0].name == "fgsm");
  CHECK(e.evaluate.attacks[0].config.epsilon == AttackConfig{}.epsilon);
  CHECK(e.evaluate.attacks[1].config.kappa == 2.0);
  CHECK(e.evaluate.attacks[1].config.iterations == 3);
}

TEST_CASE("config: every bad field is reported with its path") {
  const json bad = json::parse(R"({"train": {"epochs": 0, "bogus": 1, "weights": {"p": "two"}},
                                   "data": {"source": "imagenet", "max_train_files": -1},
                                   "attack": {"name": "nope"}, "extra": {}})");
  try {
    parse_config(bad, {"style.step=0", "model.nope=1"});
    FAIL("expected ConfigValidationError");
  } catch (const ConfigValidationError& err) {
    std::string all;
    for (const auto& d : err.diagnostics()) all += d + "\n";
    for (const char* path : {"train.bogus: unknown field", "extra: unknown field", "model.nope: unknown field",
                             "train.weights.p: expected a number", "data.source:", "data.max_train_files:",
                             "attack.name:", "style.step:"}) {
      CHECK_MESSAGE(all.find(path) != std::string::npos, path, " missing from\n", all);
    }
  }
  CHECK_THROWS_AS(parse_config(json::parse(R"({"train": 5})"), {}), ConfigValidationError);
  CHECK_THROWS_AS(parse_config(json::object(), {"no-equals-sign"}), ConfigValidationError);
  CHECK_THROWS_AS(parse_config(json::object(), {"evaluate.attacks.0.epsilon=1"}), ConfigValidationError);
}

TEST_CASE("cli: a bad config exits 2 with field diagnostics") {
  const fs::path dir = scratch("bad");
  std::ofstream(dir / "bad.json") << R"({"train": {"epochs": -3, "lr": {"factor": 4}}, "typo": 1})";
  CHECK(run_cli("train --config " + (dir / "bad.json").string() + " --out " + (dir / "o").string(), dir) == 2);
  const std::string err = slurp(dir / "stderr.txt");
  CHECK(err.find("typo: unknown field") != std::string::npos);
  CHECK(err.find("train:") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "o" / "manifest.json"));

  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run_cli("train --config " + (dir / "broken.json").string() + " --out " + (dir / "o").string(), dir) == 2);
  CHECK(run_cli("evaluate --out " + (dir / "o").string() + " --set data.source=toy", dir) == 2);  // no checkpoint
  CHECK(run_cli("frobnicate --out x", dir) == 2);
  CHECK(run_cli("evaluate --out " + (dir / "o").string() + " " + kToy + "model.checkpoint=" + (dir / "absent.ckpt").string(),
               dir) == 1);
}

TEST_CASE("cli: a five-epoch toy training run writes checkpoints and a complete log") {
  const fs::path ckpt = toy_checkpoint();
  const fs::path run = ckpt.parent_path();
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(run / "checkpoints" / "epoch-3.ckpt"));
  CHECK(fs::exists(run / "checkpoints" / "final.ckpt"));
  const auto log = ndjson_lines(run / "train_log.ndjson");
  REQUIRE(log.size() == 5);
  CHECK(log.back()["epoch"] == 5);
  CHECK(log[2]["lr"].get<double>() == doctest::Approx(0.1));
  CHECK(log[3]["lr"].get<double>() == doctest::Approx(0.01));
  const json manifest = json::parse(slurp(run / "manifest.json"));
  CHECK(manifest["schema"] == kManifestSchema);
  CHECK(manifest["command"] == "train");
  CHECK(manifest["seed"] == 4);
  CHECK(manifest["config"]["train"]["epochs"] == 5);
  CHECK(parse_config(manifest["config"], {}).train.epochs == 5);
}

TEST_CASE("cli: evaluation at epsilon 0 reports robust accuracy equal to clean accuracy") {
  const fs::path dir = scratch("eps0");
  const std::string attacks =
      R"('evaluate.attacks=[{"name":"fgsm","epsilon":0},{"name":"pgd","epsilon":0,"iterations":3},)"
      R"({"name":"mifgsm","epsilon":0},{"name":"cw","epsilon":0,"iterations":3},{"name":"deepfool","epsilon":0}]')";
  REQUIRE(run_cli("evaluate --out " + (dir / "o").string() + " " + kToy + "model.checkpoint=" + toy_checkpoint().string() +
                     " " + attacks,
                 dir) == 0);
  const RobustnessReport r = load_report(dir / "o" / "report.json");
  REQUIRE(r.attacks.size() == 5);
  for (const auto& a : r.attacks) {
    CAPTURE(a.attack);
    CHECK(a.robust_accuracy == r.clean_accuracy);
    CHECK(a.mean_linf == 0.0);
  }
  REQUIRE(r.correlation_loss.has_value());
  CHECK(*r.correlation_loss == 0.0);
}

TEST_CASE("cli: reruns with the same config and seed are byte-identical") {
  const fs::path dir = scratch("rerun");
  const std::string train = kToy + "train.epochs=2 train.mode=sat";
  for (const char* o : {"a", "b"}) {
    REQUIRE(run_cli("train --out " + (dir / o).string() + " --seed 9 " + train, dir) == 0);
    REQUIRE(run_cli("evaluate --out " + (dir / o / "eval").string() + " --seed 9 " + kToy + "model.checkpoint=" +
                       (dir / o / "model.ckpt").string() + " attack.iterations=3 evaluate.epsilon_sweep=[2,8]",
                   dir) == 0);
  }
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), dir / "a");
    CAPTURE(rel.string());
    REQUIRE(fs::exists(dir / "b" / rel));
    const std::string a = slurp(e.path());
    const std::string b = slurp(dir / "b" / rel);
    // The manifest records the checkpoint path, which differs by run directory.
    if (rel.filename() == "manifest.json" && rel.parent_path() == "eval") {
      json ja = json::parse(a), jb = json::parse(b);
      ja["config"]["model"].erase("checkpoint");
      jb["config"]["model"].erase("checkpoint");
      CHECK(ja == jb);
    } else {
      CHECK(a == b);
    }
    ++compared;
  }
  CHECK(compared >= 6);

  REQUIRE(run_cli("train --out " + (dir / "c").string() + " --seed 10 " + train, dir) == 0);
  CHECK(slurp(dir / "a" / "model.ckpt") != slurp(dir / "c" / "model.ckpt"));
}

TEST_CASE("cli: plot sidecars hold exactly the report values") {
  const fs::path dir = scratch("plots");
  REQUIRE(run_cli("evaluate --out " + (dir / "o").string() + " " + kToy + "model.checkpoint=" + toy_checkpoint().string() +
                     " attack.iterations=3 evaluate.epsilon_sweep=[1,4,16,64]",
                 dir) == 0);
  REQUIRE(run_cli("corruptions --out " + (dir / "c").string() + " " + kToy + "model.checkpoint=" + toy_checkpoint().string() +
                     " 'corruptions.names=[\"contrast\",\"gaussian-noise\"]' corruptions.severities=[1,5]",
                 dir) == 0);
  for (const char* sub : {"o", "c"}) {
    const RobustnessReport r = load_report(dir / sub / "report.json");
    REQUIRE(run_cli("plots --report " + (dir / sub / "report.json").string() + " --out " + (dir / sub / "p").string(), dir) == 0);
    const auto sweeps = report_sweeps(r);
    REQUIRE_FALSE(sweeps.empty());
    for (const auto& s : sweeps) {
      CAPTURE(s.name);
      const fs::path stem = dir / sub / "p" / "plots" / plot_stem(s.name);
      REQUIRE(fs::exists(stem.string() + ".ppm"));
      const Sweep back = read_sidecar(stem.string() + ".tsv");
      CHECK(back.name == s.name);
      CHECK(back.x == s.x);
      CHECK(back.y == s.y);
      CHECK(slurp(stem.string() + ".ppm").rfind("P6\n320 240\n255\n", 0) == 0);
    }
  }
  const Sweep eps = read_sidecar(dir / "o" / "p" / "plots" / "accuracy-vs-epsilon.tsv");
  CHECK(eps.x == std::vector<double>{1, 4, 16, 64});
  CHECK(load_report(dir / "c" / "report.json").corruptions->accuracy.at("contrast") ==
        read_sidecar(dir / "c" / "p" / "plots" / "corruption-contrast.tsv").y);
}

TEST_CASE("cli: a report without curves plots nothing and warns") {
  const fs::path dir = scratch("empty");
  REQUIRE(run_cli("attack --out " + (dir / "o").string() + " " + kToy + "model.checkpoint=" + toy_checkpoint().string() +
                     " attack.iterations=2",
                 dir) == 0);
  CHECK(run_cli("plots --report " + (dir / "o" / "report.json").string() + " --out " + (dir / "p").string(), dir) == 0);
  CHECK(slurp(dir / "stderr.txt").find("warning: report has no sweeps") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "p" / "plots"));

  std::ofstream(dir / "junk.json") << R"({"schema": "something-else"})";
  CHECK(run_cli("plots --report " + (dir / "junk.json").string() + " --out " + (dir / "p").string(), dir) == 1);
}

TEST_CASE("cli: style command writes the stylized image and a loss trace") {
  const fs::path dir = scratch("style");
  REQUIRE(run_cli("train --out " + (dir / "m").string() +
                     " --set data.source=toy data.toy_train_per_class=10 data.toy_test_per_class=2 train.epochs=1 "
                     "train.lr.decay_epochs=[] train.mode=natural",
                 dir) == 0);
  // Two 8x8 colour images written through the library's own PPM writer.
  Tensor<double> a(Shape{1, 3, 8, 8}), b(Shape{1, 3, 8, 8});
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = double(i % 17) / 8.0 - 1.0;
    b[i] = (i / 8) % 2 ? 0.8 : -0.8;
  }
  write_image(a, dir / "content.ppm");
  write_image(b, dir / "style.ppm");
  REQUIRE(run_cli("style --out " + (dir / "s").string() + " --set data.source=toy data.toy_train_per_class=1 "
                     "data.toy_test_per_class=1 style.iterations=5 model.checkpoint=" + (dir / "m" / "model.ckpt").string() +
                     " style.content=" + (dir / "content.ppm").string() + " style.style=" + (dir / "style.ppm").string(),
                 dir) == 0);
  const Tensor<double> out = read_image(dir / "s" / "stylized.ppm");
  CHECK(out.shape() == a.shape());
  const RobustnessReport r = load_report(dir / "s" / "report.json");
  REQUIRE(r.sweeps.size() == 1);
  CHECK(r.sweeps[0].y.size() == 6);
}

#include <doctest.h>

#include <stdexcept>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "commands.hpp"

using namespace wsdaor;
using namespace wsdaor::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("wsdaor_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto p = dir / "config.ini";
  std::ofstream(p) << text;
  return p;
}

const char* kSmall =
    "[data]\nsource_subjects = 2\ntarget_subjects = 3\nframes = 80\nfeature_dim = 4\n"
    "episode_min = 8\nepisode_max = 16\n[network]\nhidden_dim = 6\nfeature_dim = 4\n"
    "[train]\nwindow = 16\n";

}  // namespace

TEST_CASE("config round-trips through its file format") {
  ExperimentConfig c;
  c.data.noise = 0.1 + 0.2;
  c.data.shift_rotate = true;
  c.train.pooling = PoolingMode::mean;
  c.train.encoding = LabelEncoding::gaussian_normalized;
  c.train.mode = DaMode::joint_no_da;
  c.seeds = {4, 8};
  c.windows = {8, 32};
  c.dataset = "some/dir";
  c.seed = 77;
  c.sync();
  std::stringstream buf;
  save_config(buf, c);
  const auto back = load_config(buf);
  CHECK(back == c);
  CHECK(back.data.noise == c.data.noise);
  CHECK(back.network.seed == c.network.seed);
}

TEST_CASE("config errors name the offending key") {
  auto check_key = [](const std::string& text, const std::string& key) {
    std::stringstream in(text);
    try {
      load_config(in);
      FAIL("expected a config error for " << key);
    } catch (const ConfigError& e) {
      CHECK(e.key() == key);
    }
  };
  check_key("[train]\nlr = fast\n", "train.lr");
  check_key("[train]\nbogus = 1\n", "train.bogus");
  check_key("[nowhere]\nx = 1\n", "nowhere.x");
  check_key("[train]\npooling = median\n", "train.pooling");
  check_key("[experiment]\nseeds = 1,,2\n", "experiment.seeds");
  check_key("[data]\nevent_rate = 2\n", "data");
}

TEST_CASE("generate writes the documented row counts and is reproducible") {
  TempDir dir("generate");
  const auto cfg = write_config(dir.path, std::string(kSmall) + "epochs = 3\n");
  std::ostringstream log, err;
  CommonOptions opt{cfg, 5, dir.path / "a", std::nullopt, true};
  REQUIRE(cmd_generate(opt, log, err) == kOk);
  CHECK(line_count(dir.path / "a" / "source.csv") == 1 + 2 * 80);
  CHECK(line_count(dir.path / "a" / "target.csv") == 1 + 3 * 80);
  opt.out = dir.path / "b";
  REQUIRE(cmd_generate(opt, log, err) == kOk);
  CHECK(slurp(dir.path / "a" / "source.csv") == slurp(dir.path / "b" / "source.csv"));
  CHECK(slurp(dir.path / "a" / "target.csv") == slurp(dir.path / "b" / "target.csv"));
  const auto m = nlohmann::json::parse(slurp(dir.path / "a" / "manifest.json"));
  CHECK(m["seed"] == 5);
}

TEST_CASE("corrupt config exits 2, missing dataset exits 3") {
  TempDir dir("errors");
  std::ostringstream log, err;
  CHECK(cmd_generate({write_config(dir.path, "[data]\nframes = -3\n"), {}, dir.path, {}, true}, log, err) ==
        kConfigError);
  CHECK(err.str().find("data.frames") != std::string::npos);
  const auto cfg = write_config(dir.path, std::string(kSmall) + "[experiment]\ndataset = " +
                                              (dir.path / "absent").string() + "\n");
  CHECK(cmd_train({cfg, {}, dir.path / "t", {}, true}, log, err) == kMissingInput);
  CHECK(cmd_train({dir.path / "no_such.ini", {}, dir.path / "t", {}, true}, log, err) == kMissingInput);
}

TEST_CASE("train writes one history record per epoch and is deterministic") {
  TempDir dir("train");
  const auto cfg = write_config(dir.path, std::string(kSmall) + "epochs = 3\n");
  std::ostringstream log, err;
  REQUIRE(cmd_train({cfg, 2, dir.path / "a", {}, true}, log, err) == kOk);
  REQUIRE(cmd_train({cfg, 2, dir.path / "b", {}, true}, log, err) == kOk);
  CHECK(slurp(dir.path / "a" / "checkpoint.txt") == slurp(dir.path / "b" / "checkpoint.txt"));
  CHECK(slurp(dir.path / "a" / "history.json") == slurp(dir.path / "b" / "history.json"));
  const auto h = nlohmann::json::parse(slurp(dir.path / "a" / "history.json"));
  CHECK(h["records"].size() == 3);
  CHECK(h["records"][2]["loss_domain"].get<double>() > 0.0);
}

TEST_CASE("mode none records no domain loss") {
  TempDir dir("none");
  const auto cfg = write_config(dir.path, std::string(kSmall) + "epochs = 3\nmode = none\n");
  std::ostringstream log, err;
  REQUIRE(cmd_train({cfg, 1, dir.path, {}, true}, log, err) == kOk);
  const auto h = nlohmann::json::parse(slurp(dir.path / "history.json"));
  for (const auto& r : h["records"]) CHECK(r["loss_domain"].get<double>() == 0.0);
}

TEST_CASE("evaluate on a perfect-oracle checkpoint") {
  TempDir dir("oracle");
  // One feature equal to the frame's level; the network passes it through
  // and scores level k with 10 (k x - k^2 / 2), which peaks at k = x.
  std::vector<Sequence> target;
  for (int s = 0; s < 2; ++s) {
    Sequence seq{s, 0, Domain::target, 1, {}, {}};
    for (int t = 0; t < 40; ++t) {
      const double level = (t / 4 + s) % 6;
      seq.labels.push_back(level);
      seq.features.push_back(level);
    }
    target.push_back(seq);
  }
  Sequence source{0, 0, Domain::source, 1, std::vector<double>(40, 0.0), std::vector<double>(40, -1.0)};
  fs::create_directories(dir.path / "data");
  write_dataset_csv(dir.path / "data" / "target.csv", target);
  write_dataset_csv(dir.path / "data" / "source.csv", std::vector<Sequence>{source});

  NetworkConfig net{1, 1, 1, 1, 6, 0};
  NetworkParams params = zero_network(net);
  params.get("f.w0")[0] = 1.0;
  params.get("f.w1")[0] = 1.0;
  for (int k = 0; k < 6; ++k) {
    params.get("wl.w")[static_cast<std::size_t>(k)] = 10.0 * k;
    params.get("wl.b")[static_cast<std::size_t>(k)] = -5.0 * k * k;
  }
  save_checkpoint(dir.path / "oracle.txt", net, params);

  const auto cfg = write_config(dir.path, "[data]\nfeature_dim = 1\n[train]\nwindow = 8\n[experiment]\ndataset = " +
                                              (dir.path / "data").string() + "\n");
  std::ostringstream log, err;
  REQUIRE(cmd_evaluate({cfg, {}, dir.path / "out", {}, true}, dir.path / "oracle.txt", log, err) == kOk);
  const auto m = nlohmann::json::parse(slurp(dir.path / "out" / "metrics.json"));
  CHECK(m["pcc"].get<double>() == doctest::Approx(1.0));
  CHECK(m["icc"].get<double>() == doctest::Approx(1.0));
  CHECK(m["mae"].get<double>() == 0.0);
  CHECK(line_count(dir.path / "out" / "trace.csv") == 1 + 80);

  REQUIRE(cmd_evaluate({cfg, {}, dir.path / "seq", MetricLevel::sequence, true}, dir.path / "oracle.txt", log, err) ==
          kOk);
  CHECK(nlohmann::json::parse(slurp(dir.path / "seq" / "metrics.json"))["level"] == "sequence");

  const auto wrong = write_config(dir.path, "[data]\nfeature_dim = 3\n[experiment]\ndataset = " +
                                                (dir.path / "data").string() + "\n");
  CHECK(cmd_evaluate({wrong, {}, dir.path / "x", {}, true}, dir.path / "oracle.txt", log, err) == kShapeMismatch);
  CHECK(cmd_evaluate({cfg, {}, dir.path / "x", {}, true}, dir.path / "missing.txt", log, err) == kMissingInput);
}

TEST_CASE("evaluate metrics equal the library evaluation") {
  TempDir dir("crosscheck");
  const auto cfg = write_config(dir.path, std::string(kSmall) + "epochs = 3\n");
  std::ostringstream log, err;
  REQUIRE(cmd_train({cfg, 3, dir.path / "t", {}, true}, log, err) == kOk);
  REQUIRE(cmd_evaluate({cfg, 3, dir.path / "e", {}, true}, dir.path / "t" / "checkpoint.txt", log, err) == kOk);
  const auto m = nlohmann::json::parse(slurp(dir.path / "e" / "metrics.json"));
  const auto config = resolve_config({cfg, 3, {}, {}, true});
  const auto ck = load_checkpoint(dir.path / "t" / "checkpoint.txt");
  const auto report = evaluate_frames(ck.params, ck.config, generate_target(config.data));
  CHECK(m["mae"].get<double>() == report.mae);
  if (report.pcc) CHECK(m["pcc"].get<double>() == *report.pcc);
  CHECK(line_count(dir.path / "e" / "trace.csv") == 1 + 3 * 80);
}

TEST_CASE("ablate table2 emits four rows with shared seeds") {
  TempDir dir("ablate");
  const auto cfg = write_config(dir.path, std::string(kSmall) + "epochs = 1\n[experiment]\nseeds = 1,2\nmax_folds = 1\n");
  std::ostringstream log, err;
  REQUIRE(cmd_ablate({cfg, {}, dir.path, {}, true}, log, err) == kOk);
  CHECK(line_count(dir.path / "ablation.csv") == 1 + 4);
  CHECK(line_count(dir.path / "ablation_seeds.csv") == 1 + 8);
  const auto m = nlohmann::json::parse(slurp(dir.path / "manifest.json"));
  CHECK(m["shared_seeds"] == true);
  CHECK(m["cell_seeds"]["baseline"] == nlohmann::json::array({1, 2}));
}

TEST_CASE("sigma near zero with max pooling makes the full cell match baseline") {
  // With unique maxima, a near-one-hot code and max pooling train exactly
  // like the baseline up to the code's vanishing off-peak mass.
  ExperimentConfig c;
  std::stringstream in(std::string(kSmall) + "epochs = 2\nsigma = 0.05\n[experiment]\nseeds = 3\nmax_folds = 1\n");
  c = load_config(in);
  std::vector<AblationCell> cells{{"baseline", PoolingMode::max, LabelEncoding::onehot, DaMode::adversarial, 16},
                                  {"gm-max", PoolingMode::max, LabelEncoding::gaussian, DaMode::adversarial, 16}};
  const auto runs = run_ablation(c, cells);
  REQUIRE(runs.size() == 2);
  CHECK(*runs[1].frame.mae == doctest::Approx(*runs[0].frame.mae).epsilon(1e-9));
}

TEST_CASE("encode prints the code") {
  std::ostringstream out, err;
  REQUIRE(cmd_encode(2, 0.3, 6, false, out, err) == kOk);
  CHECK(out.str().find("\n2 1\n") != std::string::npos);
  CHECK(cmd_encode(7, 0.3, 6, false, out, err) == kConfigError);
  CHECK(cmd_encode(1, 0.0, 6, false, out, err) == kConfigError);
}

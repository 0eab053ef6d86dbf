#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mpqmc/config.hpp"
#include "mpqmc/csvio.hpp"
#include "mpqmc/experiment.hpp"

using namespace mpqmc;
namespace fs = std::filesystem;

namespace {

void expect_code(Errc code, const std::function<void()>& fn) {
  try {
    fn();
    FAIL_CHECK("expected " << errc_name(code) << ", nothing thrown");
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mpqmc_runner_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const MetricRow* find_row(const std::vector<MetricRow>& rows, const std::string& variant,
                          const std::string& metric) {
  for (const auto& r : rows)
    if (r.variant == variant && r.metric == metric) return &r;
  return nullptr;
}

}  // namespace

TEST_CASE("csv doubles round-trip exactly") {
  for (double x : {3.141592653589793, 0.1, -0.0, 1e-300, 6.02214076e23, -1.0 / 3.0}) {
    const std::string s = csv_double(x);
    CHECK(std::strtod(s.c_str(), nullptr) == x);
  }
}

TEST_CASE("csv files round-trip awkward fields") {
  const fs::path dir = fresh_dir("csv");
  const std::vector<std::string> header = {"name", "note"};
  const std::vector<std::vector<std::string>> rows = {
      {"plain", "nothing special"},
      {"comma,inside", "quote \" inside"},
      {"line\nbreak", "both,\" at once\n"},
      {"", "empty first field"},
  };
  const std::string path = (dir / "t.csv").string();
  write_csv(path, header, rows);
  const auto back = read_csv(path);
  REQUIRE(back.size() == rows.size() + 1);
  CHECK(back[0] == header);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(back[i + 1] == rows[i]);

  expect_code(Errc::ConfigError, [&] { write_csv(path, header, {{"only-one"}}); });
  expect_code(Errc::IoError, [&] { read_csv((dir / "missing.csv").string()); });
}

TEST_CASE("config files parse sections, types and lists") {
  const std::string text =
      "# top comment\n"
      "[experiment]\n"
      "preset = \"smoke\"   # trailing comment\n"
      "replicates = 4\n"
      "seed0 = 11\n"
      "verbose = true\n"
      "grid = [1, 2.5, 3]\n"
      "single = 7\n"
      "\n"
      "[empty]\n";
  const ConfigFile cf = ConfigFile::parse_text(text);
  CHECK(cf.get_string("experiment", "preset") == "smoke");
  CHECK(cf.get_number("experiment", "replicates") == 4.0);
  CHECK(cf.get_bool("experiment", "verbose"));
  CHECK(cf.get_list("experiment", "grid") == std::vector<double>{1.0, 2.5, 3.0});
  // A bare number is accepted where a list is wanted.
  CHECK(cf.get_list("experiment", "single") == std::vector<double>{7.0});
  CHECK(cf.has_section("empty"));
  CHECK(!cf.has("empty", "anything"));
  CHECK(cf.get_number_or("experiment", "missing", 2.5) == 2.5);
  CHECK(cf.get_string_or("experiment", "preset", "x") == "smoke");
  CHECK(cf.keys("experiment").size() == 6);
}

TEST_CASE("config files reject malformed input with line numbers") {
  expect_code(Errc::ConfigError, [] { ConfigFile::parse_text("[a]\nx = 1\ny oops\n"); });
  try {
    ConfigFile::parse_text("[a]\nx = 1\ny oops\n");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  expect_code(Errc::ConfigError, [] { ConfigFile::parse_text("x = 1\nx = 2\n"); });
  expect_code(Errc::ConfigError, [] { ConfigFile::parse_text("[unclosed\n"); });
  expect_code(Errc::ConfigError, [] { ConfigFile::parse_text("x = \"unterminated\n"); });
  expect_code(Errc::ConfigError, [] { ConfigFile::parse_text("x = [1, 2\n"); });
  expect_code(Errc::ConfigError, [] { ConfigFile::parse_text("x = [1, two]\n"); });
  expect_code(Errc::ConfigError, [] { ConfigFile::parse_text("x =\n"); });
  expect_code(Errc::ConfigError, [] { ConfigFile::parse_text("x = maybe\n"); });

  const ConfigFile cf = ConfigFile::parse_text("[a]\nx = 1\n");
  expect_code(Errc::ConfigError, [&] { cf.get_string("a", "x"); });
  expect_code(Errc::ConfigError, [&] { cf.get_number("a", "nope"); });
  expect_code(Errc::ConfigError, [&] { cf.parse_file("/no/such/config.toml"); });
}

TEST_CASE("variant labels name all seven listings") {
  using SM = SamplerMode;
  using AM = AdaptMode;
  CHECK(variant_label({false, SM::Sampling, AM::Off, TransitionKind::Barker, 1}) == "mp-mcmc");
  CHECK(variant_label({false, SM::Sampling, AM::Cov, TransitionKind::Barker, 1}) ==
        "adaptive mp-mcmc");
  CHECK(variant_label({true, SM::Sampling, AM::Off, TransitionKind::Barker, 1}) == "mp-qmcmc");
  CHECK(variant_label({false, SM::ImportanceSampling, AM::Off, TransitionKind::Barker, 1}) ==
        "is-mp-mcmc");
  CHECK(variant_label({false, SM::ImportanceSampling, AM::MeanAndCov, TransitionKind::Barker,
                       1}) == "adaptive is-mp-mcmc");
  CHECK(variant_label({true, SM::ImportanceSampling, AM::Off, TransitionKind::Barker, 1}) ==
        "is-mp-qmcmc");
  CHECK(variant_label({true, SM::ImportanceSampling, AM::MeanAndCov, TransitionKind::Barker,
                       1}) == "adaptive is-mp-qmcmc");
}

TEST_CASE("laplace covariance recovers a gaussian's covariance") {
  Eigen::VectorXd mean(2);
  mean << 0.4, -0.2;
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.3, 0.3, 0.5;
  TargetPtr target = gaussian_target(mean, cov);
  const Eigen::MatrixXd got = laplace_covariance(*target, mean);
  CHECK((got - cov).norm() / cov.norm() < 1e-5);

  Eigen::VectorXd bad(3);
  bad.setZero();
  expect_code(Errc::ConfigError, [&] { laplace_covariance(*target, bad); });
}

TEST_CASE("smoke experiment is deterministic across workers and reruns") {
  ExperimentSpec spec = make_preset("smoke");
  const ExperimentResult a = run_experiment(spec, 1);
  const ExperimentResult b = run_experiment(spec, 3);
  const ExperimentResult c = run_experiment(spec, 1);
  CHECK(a.metrics_csv == b.metrics_csv);
  CHECK(a.metrics_csv == c.metrics_csv);
  CHECK(a.meta_json == b.meta_json);

  // Sampling cells count recorded draws, importance-sampling cells count
  // weighted proposals.
  const MetricRow* s = find_row(a.rows, "mp-mcmc", "mse");
  const MetricRow* is = find_row(a.rows, "is-mp-mcmc", "mse");
  REQUIRE(s);
  REQUIRE(is);
  CHECK(s->n == 40);
  CHECK(is->n == 200);
  CHECK(s->value > 0.0);
  CHECK(s->stderr_.has_value());
  CHECK(find_row(a.rows, "mp-mcmc", "acceptance"));
  CHECK(!find_row(a.rows, "is-mp-mcmc", "acceptance"));
  CHECK(find_row(a.rows, "is-mp-mcmc", "msjd"));
  CHECK(find_row(a.rows, "mp-qmcmc", "mse_reduction_vs_psr"));
  CHECK(find_row(a.rows, "is-mp-qmcmc", "mse_reduction_vs_psr"));
  CHECK(find_row(a.rows, "adaptive is-mp-mcmc", "var"));

  const nlohmann::json meta = nlohmann::json::parse(a.meta_json);
  CHECK(meta.at("seeds") == nlohmann::json::array({7, 8, 9}));
  CHECK(meta.at("errors").empty());
  CHECK(meta.at("cells").size() == spec.cells.size());
}

TEST_CASE("a failing cell is recorded while the rest proceed") {
  ExperimentSpec spec = make_preset("smoke");
  spec.cells.resize(2);
  ExperimentCell bad = spec.cells[0];
  bad.variant.mode = SamplerMode::ImportanceSampling;
  bad.variant.transition = TransitionKind::Peskun;  // rejected by the engine
  spec.cells.push_back(bad);

  const ExperimentResult res = run_experiment(spec, 2);
  const MetricRow* failed = find_row(res.rows, "is-mp-mcmc", "failed");
  REQUIRE(failed);
  CHECK(failed->value == 1.0);
  CHECK(find_row(res.rows, "mp-mcmc", "mse"));
  CHECK(find_row(res.rows, "mp-qmcmc", "mse"));
  const nlohmann::json meta = nlohmann::json::parse(res.meta_json);
  CHECK(!meta.at("errors").empty());
}

TEST_CASE("experiment validation fails fast") {
  ExperimentSpec spec = make_preset("smoke");
  spec.cells.clear();
  expect_code(Errc::ConfigError, [&] { run_experiment(spec, 1); });

  spec = make_preset("smoke");
  spec.replicates = 0;
  expect_code(Errc::ConfigError, [&] { run_experiment(spec, 1); });

  // A CUD cell whose schedule is too short dies before any sampling happens.
  spec = make_preset("smoke");
  spec.cells[1].point.iterations = 2000;  // m=10 width-9 schedule holds 1018 tuples
  expect_code(Errc::ConfigError, [&] { run_experiment(spec, 1); });

  spec = make_preset("smoke");
  spec.cells[0].point.register_size = 9;
  spec.cells[0].variant.cud = true;
  expect_code(Errc::ConfigError, [&] { run_experiment(spec, 1); });

  expect_code(Errc::ConfigError, [&] { make_preset("nope"); });
}

TEST_CASE("experiment spec files load presets with overrides") {
  const fs::path dir = fresh_dir("spec");
  const std::string path = (dir / "exp.toml").string();
  write_text_file(path,
                  "[experiment]\n"
                  "preset = \"smoke\"\n"
                  "replicates = 2\n"
                  "seed0 = 5\n");
  const ExperimentSpec spec = load_experiment_spec(path);
  CHECK(spec.name == "smoke");
  CHECK(spec.replicates == 2);
  CHECK(spec.seed0 == 5);
  CHECK(spec.cells.size() == 6);

  write_text_file(path, "[experiment]\npreset = \"nope\"\n");
  expect_code(Errc::ConfigError, [&] { load_experiment_spec(path); });
}

TEST_CASE("preset grids have the intended shape") {
  const ExperimentSpec g = make_preset("gaussian1d");
  REQUIRE(g.cells.size() == 3);
  CHECK(g.replicates == 25);
  CHECK(g.cells[0].point.iterations == 65535);
  CHECK(variant_label(g.cells[0].variant) == "mp-mcmc");
  CHECK(variant_label(g.cells[1].variant) == "mp-qmcmc");
  CHECK(g.cells[1].variant.transition == TransitionKind::Peskun);
  CHECK(variant_label(g.cells[2].variant) == "is-mp-qmcmc");
  CHECK(g.cells[2].point.n_proposals == 256);

  const ExperimentSpec z1 = make_preset("zellner-d1");
  CHECK(z1.cells.size() == 8);  // four (register, proposal-count) points, PSR and CUD each
  CHECK(z1.bundle.reference.has_value());
  for (const auto& cell : z1.cells) {
    // Each run walks its stream's full tuple schedule: the near-zero tuple
    // plus one tuple per cyclic shift of the trimmed register period.
    const std::uint64_t period = (std::uint64_t{1} << cell.point.register_size) - 1;
    const std::size_t width = static_cast<std::size_t>(cell.point.n_proposals) + 1;
    CHECK(cell.point.iterations == (period / width) * width + 1);
  }
  CHECK(z1.cells.front().point.register_size == 10);
  CHECK(z1.cells.back().point.register_size == 13);
  CHECK(z1.cells.back().point.n_proposals == 7);

  const ExperimentSpec z5 = make_preset("zellner-d5");
  CHECK(z5.cells.size() == 8);
  CHECK(z5.bundle.target->dim() == 5);
  CHECK(z5.cells.front().point.n_proposals == 3);

  const ExperimentSpec lv = make_preset("lv-reduced");
  CHECK(lv.cells.size() == 2);
  CHECK(lv.bundle.target->dim() == 4);
  CHECK(!lv.bundle.reference.has_value());
  CHECK(variant_label(lv.cells[0].variant) == "adaptive is-mp-mcmc");
  CHECK(variant_label(lv.cells[1].variant) == "adaptive is-mp-qmcmc");
}

TEST_CASE("cli runs experiments, reports and stays byte-identical") {
  const fs::path dir = fresh_dir("cli");
  const std::string out1 = (dir / "exp1").string();
  const std::string out2 = (dir / "exp2").string();

  CHECK(cli_main({"experiment", "--preset", "smoke", "--out", out1, "--workers", "2"}) == 0);
  CHECK(cli_main({"experiment", "--preset", "smoke", "--out", out2, "--workers", "1"}) == 0);
  const std::string csv1 = read_text_file(out1 + "/metrics.csv");
  CHECK(csv1 == read_text_file(out2 + "/metrics.csv"));
  CHECK(read_text_file(out1 + "/meta.json") == read_text_file(out2 + "/meta.json"));
  CHECK(csv1.rfind("experiment,n,N,variant,metric,value,stderr\n", 0) == 0);

  CHECK(cli_main({"report", "--dir", out1}) == 0);

  // Spec-file flavour with a per-run diagnostics dump.
  const std::string spec_path = (dir / "exp.toml").string();
  write_text_file(spec_path,
                  "[experiment]\npreset = \"smoke\"\nreplicates = 2\nout = \"" +
                      (dir / "exp3").string() + "\"\n");
  CHECK(cli_main({"experiment", "--spec", spec_path, "--per-run"}) == 0);
  CHECK(fs::exists(dir / "exp3" / "runs" / "cell0" / "rep1.csv"));

  CHECK(cli_main({"experiment", "--preset", "nope", "--out", out1}) == 1);
  CHECK(cli_main({"experiment", "--out", out1}) == 1);
  CHECK(cli_main({"bogus-subcommand"}) == 1);
}

TEST_CASE("cli cud subcommands generate and check sequences") {
  const fs::path dir = fresh_dir("cud");
  const std::string out = (dir / "seq.txt").string();
  CHECK(cli_main({"cud", "gen", "--m", "10", "--count", "16", "--out", out}) == 0);
  std::ifstream in(out);
  std::string line;
  int lines = 0;
  double first = 0.0;
  while (std::getline(in, line)) {
    if (lines == 0) first = std::strtod(line.c_str(), nullptr);
    ++lines;
  }
  CHECK(lines == 16);
  CHECK(first > 0.0);
  CHECK(first < 1.0);

  CHECK(cli_main({"cud", "check", "--m", "10"}) == 0);
  CHECK(cli_main({"cud", "check", "--m", "9"}) == 1);
  CHECK(cli_main({"cud", "gen", "--m", "10", "--count", "2000"}) == 1);
}

TEST_CASE("cli sample writes outputs and reruns identically") {
  const fs::path dir = fresh_dir("sample");
  const std::string cfg_path = (dir / "run.toml").string();
  write_text_file(cfg_path,
                  "[target]\n"
                  "kind = \"gaussian\"\n"
                  "mean = [0.25, -0.5]\n"
                  "var = [1.0, 0.5]\n"
                  "[kernel]\n"
                  "kind = \"independent\"\n"
                  "mean = [0.0, 0.0]\n"
                  "var = [2.0, 2.0]\n"
                  "[sampler]\n"
                  "n_proposals = 4\n"
                  "iterations = 60\n"
                  "mode = \"sampling\"\n"
                  "[driving]\n"
                  "kind = \"psr\"\n"
                  "seed = 3\n");
  const std::string out1 = (dir / "run1").string();
  const std::string out2 = (dir / "run2").string();
  CHECK(cli_main({"sample", "--config", cfg_path, "--out", out1, "--workers", "2"}) == 0);
  CHECK(cli_main({"sample", "--config", cfg_path, "--out", out2, "--workers", "1"}) == 0);
  CHECK(read_text_file(out1 + "/samples.csv") == read_text_file(out2 + "/samples.csv"));
  CHECK(read_text_file(out1 + "/diagnostics.csv") == read_text_file(out2 + "/diagnostics.csv"));
  CHECK(read_text_file(out1 + "/meta.json") == read_text_file(out2 + "/meta.json"));
  const auto samples = read_csv(out1 + "/samples.csv");
  CHECK(samples.size() == 61);  // header + 60 recorded draws
  CHECK(samples[0] == std::vector<std::string>{"x0", "x1"});

  // Importance-sampling flavour on a CUD schedule: no samples.csv, but the
  // estimate lands in meta.json.
  write_text_file(cfg_path,
                  "[target]\n"
                  "kind = \"gaussian\"\n"
                  "mean = [0.25]\n"
                  "var = [1.0]\n"
                  "[sampler]\n"
                  "n_proposals = 8\n"
                  "iterations = 50\n"
                  "mode = \"is\"\n"
                  "[driving]\n"
                  "kind = \"cud\"\n"
                  "register_size = 10\n");
  const std::string out3 = (dir / "run3").string();
  CHECK(cli_main({"sample", "--config", cfg_path, "--out", out3}) == 0);
  CHECK(!fs::exists(out3 + "/samples.csv"));
  const nlohmann::json meta = nlohmann::json::parse(read_text_file(out3 + "/meta.json"));
  CHECK(meta.at("listing") == "is-mp-qmcmc");
  CHECK(meta.at("estimate_ell") == 50);

  CHECK(cli_main({"sample", "--config", (dir / "missing.toml").string()}) == 1);
  write_text_file(cfg_path, "[target]\nkind = \"unknown\"\n");
  CHECK(cli_main({"sample", "--config", cfg_path, "--out", out3}) == 1);
}

#include "hamlearn/errors.hpp"
#include "hamlearn/experiment.hpp"
#include "hamlearn/io.hpp"

#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <set>
#include <sstream>

#include <unistd.h>

using namespace hamlearn;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("hamlearn_exp_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

json minimal_config() {
  return json::parse(R"({
    "schema": "hamlearn.config/1",
    "name": "minimal",
    "figure": "fig2",
    "seed": 11,
    "model": {"family": "random_2local", "L": 3},
    "measurement": {"beta": 1.0},
    "learner": {"method": "mle", "gamma": 1.0, "gamma_scale": "terms", "max_iters": 40, "epsilon": 1e-20}
  })");
}

CommandOptions quiet_in(const fs::path& dir) {
  CommandOptions o;
  o.out = dir;
  o.quiet = true;
  o.jobs = 2;
  return o;
}

std::string config_error(const json& j) {
  try {
    parse_run_config(j);
  } catch (const ConfigError& e) {
    CHECK(exit_code_for(e) == 2);
    return e.what();
  }
  return "";
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("config errors name the field") {
  CHECK(parse_run_config(minimal_config()).model.num_sites == 3);

  auto j = minimal_config();
  j["model"].erase("family");
  CHECK(config_error(j).find("model.family") != std::string::npos);

  j = minimal_config();
  j["learner"]["gama"] = 1.0;
  CHECK(config_error(j) == "learner.gama: unknown field");

  j = minimal_config();
  j["measurement"]["beta"] = -1.0;
  CHECK(config_error(j).find("measurement.beta") == 0);

  j = minimal_config();
  j["schema"] = "hamlearn.config/0";
  CHECK(config_error(j).find("schema") == 0);

  j = minimal_config();
  j["learner"]["gradient"] = "steepest";
  CHECK(config_error(j).find("learner.gradient") == 0);

  j = minimal_config();
  j["sweep"] = {{"trials", 0}};
  CHECK(config_error(j).find("sweep.trials") == 0);

  j = minimal_config();
  j["model"]["params"] = {{"J", 1.0}};
  CHECK(config_error(j).find("model.params.J") == 0);

  j = minimal_config();
  j["learner"]["method"] = "mle-gs";
  CHECK(config_error(j).find("learner.method") == 0);

  j = minimal_config();
  j["learner"]["method"] = "annealing";
  CHECK(config_error(j).find("learner.method") == 0);

  j = minimal_config();
  j["figure"] = "fig11";
  CHECK(config_error(j).find("figure") == 0);

  j = minimal_config();
  j["learner"]["init"] = {{"kind", "random"}, {"seed", 3}, {"range", 0.5}};
  const auto c = parse_run_config(j);
  REQUIRE(std::holds_alternative<RandomInit>(c.learner.mle.init));
  CHECK(std::get<RandomInit>(c.learner.mle.init).range == 0.5);
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(LoadError("x")) == 2);
  CHECK(exit_code_for(PlanningError("x")) == 2);
  CHECK(exit_code_for(DataError("x")) == 2);
  CHECK(exit_code_for(SingularityError("x")) == 3);
  CHECK(exit_code_for(NumericError("x")) == 3);
  CHECK(exit_code_for(DimensionError("x")) == 3);
  CHECK(exit_code_for(DomainError("x")) == 3);
}

TEST_CASE("generate writes a 27-term record and is reproducible") {
  const auto config = parse_run_config(minimal_config());
  TempDir a, b, c;
  CHECK(cmd_generate(config, quiet_in(a.path())) == 0);
  CHECK(cmd_generate(config, quiet_in(b.path())) == 0);
  const auto data = load_dataset(a / "dataset_t0.txt");
  CHECK(data.size() == 27);
  CHECK(read_file(a / "dataset_t0.txt") == read_file(b / "dataset_t0.txt"));
  CHECK(read_file(a / "target_t0.json") == read_file(b / "target_t0.json"));

  auto opts = quiet_in(c.path());
  opts.seed = 12;
  CHECK(cmd_generate(config, opts) == 0);
  CHECK(read_file(a / "dataset_t0.txt") != read_file(c / "dataset_t0.txt"));

  CHECK(cmd_learn(config, quiet_in(a.path())) == 0);
  CHECK(cmd_learn(config, quiet_in(b.path())) == 0);
  CHECK(read_file(a / "trace_t0.csv") == read_file(b / "trace_t0.csv"));
  CHECK(read_file(a / "learned_t0.json") == read_file(b / "learned_t0.json"));
  CHECK(verify_manifests(a.path()).empty());

  const auto manifest = json::parse(read_file(a / "manifest_learn.json"));
  CHECK(manifest.at("schema") == kManifestSchema);
  CHECK(manifest.at("tool_version") == kToolVersion);
  CHECK(manifest.at("trials").at(0).at("termination") == "max_iters");
  CHECK(manifest.at("config") == minimal_config());
  CHECK(manifest.at("inputs").size() == 2);
}

TEST_CASE("every output is listed once with a matching digest") {
  auto j = minimal_config();
  j["sweep"] = {{"trials", 2}};
  const auto config = parse_run_config(j);
  TempDir dir;
  REQUIRE(cmd_generate(config, quiet_in(dir.path())) == 0);
  REQUIRE(cmd_learn(config, quiet_in(dir.path())) == 0);
  std::multiset<std::string> listed;
  for (const auto* name : {"manifest_generate.json", "manifest_learn.json"}) {
    const auto m = json::parse(read_file(dir / name));
    for (const auto& o : m.at("outputs")) listed.insert(o.at("path").get<std::string>());
  }
  for (const auto& entry : fs::directory_iterator(dir.path())) {
    const auto name = entry.path().filename().string();
    if (name.rfind("manifest_", 0) == 0) continue;
    CHECK_MESSAGE(listed.count(name) == 1, name);
  }
  CHECK(listed.size() == 8);
  CHECK(verify_manifests(dir.path()).empty());

  write_file_atomic(dir / "trace_t1.csv", "tampered\n");
  const auto problems = verify_manifests(dir.path());
  REQUIRE(problems.size() == 1);
  CHECK(problems[0].find("trace_t1.csv") != std::string::npos);
  // A learn run refuses data that no longer matches its generate manifest.
  write_file_atomic(dir / "dataset_t0.txt", read_file(dir / "dataset_t1.txt"));
  CHECK_THROWS_AS(cmd_learn(config, quiet_in(dir.path())), LoadError);
}

TEST_CASE("learn needs generated data") {
  const auto config = parse_run_config(minimal_config());
  TempDir dir;
  try {
    cmd_learn(config, quiet_in(dir.path()));
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(exit_code_for(e) == 2);
  }
}

TEST_CASE("gamma = 0 leaves the model untouched until max_iters") {
  auto j = minimal_config();
  j["learner"]["gamma"] = 0.0;
  j["learner"]["max_iters"] = 15;
  j["learner"]["init"] = {{"kind", "random"}, {"seed", 2}};
  const auto config = parse_run_config(j);
  TempDir dir;
  REQUIRE(cmd_generate(config, quiet_in(dir.path())) == 0);
  REQUIRE(cmd_learn(config, quiet_in(dir.path())) == 0);
  const auto m = json::parse(read_file(dir / "manifest_learn.json"));
  CHECK(m.at("trials").at(0).at("termination") == "max_iters");
  const auto rows = lines_of(read_file(dir / "trace_t0.csv"));
  REQUIRE(rows.size() == 2 + 15);
  // Columns after k are identical on every row.
  const auto tail = [](const std::string& row) { return row.substr(row.find(',', row.find(',') + 1)); };
  for (std::size_t i = 3; i < rows.size(); ++i) CHECK(tail(rows[i]) == tail(rows[2]));
}

TEST_CASE("gradient descent runs are tagged in the trace") {
  auto j = minimal_config();
  j["learner"] = {{"method", "gd"}, {"eta", 1.0}, {"max_iters", 30}};
  const auto config = parse_run_config(j);
  CHECK(config.learner.gd.max_iters == 30);
  TempDir dir;
  REQUIRE(cmd_generate(config, quiet_in(dir.path())) == 0);
  REQUIRE(cmd_learn(config, quiet_in(dir.path())) == 0);
  const auto csv = read_file(dir / "trace_t0.csv");
  CHECK(csv.rfind("# hamlearn.trace/1\nmethod,k,M,rel_entropy,delta_mu,max_R_dev,wall_ms,fidelity\n", 0) == 0);
  CHECK(csv.find("\ngd,0,") != std::string::npos);
}

TEST_CASE("sweep covers the Cartesian product") {
  auto j = minimal_config();
  j["figure"] = "fig3";
  j["learner"]["max_iters"] = 10;
  j["sweep"] = {{"beta", {0.1, 1.0}}, {"delta", {0.0, 1e-6}}, {"trials", 10}};
  const auto config = parse_run_config(j);
  TempDir a, b;
  auto opts = quiet_in(a.path());
  opts.jobs = 3;
  REQUIRE(cmd_sweep(config, opts) == 0);
  REQUIRE(cmd_sweep(config, quiet_in(b.path())) == 0);
  const auto csv = read_file(a / "sweep.csv");
  CHECK(csv == read_file(b / "sweep.csv"));  // independent of the worker count
  const auto rows = lines_of(csv);
  REQUIRE(rows.size() == 2 + 40);
  CHECK(rows[0] == "# hamlearn.sweep/1");

  std::set<std::string> model_seeds, noise_seeds;
  for (std::size_t i = 2; i < rows.size(); ++i) {
    std::vector<std::string> cells;
    std::istringstream in(rows[i]);
    for (std::string c; std::getline(in, c, ',');) cells.push_back(c);
    CHECK(cells[7] == "ok");
    model_seeds.insert(cells[5]);
    noise_seeds.insert(cells[6]);
  }
  CHECK(model_seeds.size() == 10);  // one instance per trial, shared across beta and delta
  CHECK(noise_seeds.size() == 40);
  CHECK(verify_manifests(a.path()).empty());
}

TEST_CASE("a failing sweep row is recorded and turns the exit code") {
  auto j = minimal_config();
  j["learner"] = {{"method", "mle-patched"}, {"patch", {{"L_A", 2}, {"Lambda", 1}}}, {"max_iters", 5}};
  j["model"]["L"] = 6;
  j["sweep"] = {{"methods", {"mle", "mle-patched"}}};
  const auto config = parse_run_config(j);
  TempDir dir;
  CHECK(cmd_sweep(config, quiet_in(dir.path())) == 3);
  const auto csv = read_file(dir / "sweep.csv");
  CHECK(csv.find(",mle,1,0,0,") != std::string::npos);
  CHECK(csv.find("failed,error") != std::string::npos);
}

TEST_CASE("methods share one record per trial") {
  auto j = minimal_config();
  j["learner"]["max_iters"] = 400;
  j["learner"]["epsilon"] = 1e-24;
  j["learner"]["eta"] = 1.0;
  const auto config = parse_run_config(j);
  const auto seed = derive_seed(11, {2, 0, 0, 0});
  const auto gen = generate_data(config, 11, 0, 1.0, 0.0, seed);
  for (const char* method : {"mle", "gd", "cm"}) {
    const auto r = run_method(config, method, gen, 1.0, 0.0, seed);
    CHECK(r.trace.method == method);
    REQUIRE(r.trace.records.back().delta_mu.has_value());
    CHECK_MESSAGE(*r.trace.records.back().delta_mu <= 1e-3, method);
  }
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(2, {2, 3}));
  auto j = minimal_config();
  const auto free = parse_run_config(j);
  CHECK(model_seed_for(free, 5, 0) != model_seed_for(free, 5, 1));
  j["model"]["seed"] = 99;
  const auto fixed = parse_run_config(j);
  CHECK(model_seed_for(fixed, 5, 0) == 99);
  CHECK(model_seed_for(fixed, 6, 3) == 99);
}

TEST_CASE("statistics") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(quantile({0.0, 10.0}, 0.25) == 2.5);
  CHECK_THROWS_AS(median({}), DomainError);
  std::vector<double> x{1e-8, 1e-6, 1e-4, 1e-2}, y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 1.1));
  CHECK(loglog_slope(x, y) == doctest::Approx(1.1).epsilon(1e-12));
  CHECK_THROWS_AS(loglog_slope({1.0}, {1.0}), DomainError);
}

TEST_CASE("eigenstate report for the tilted Ising chain") {
  const auto config = parse_run_config(json::parse(R"({
    "schema": "hamlearn.config/1", "figure": "fig5", "name": "eth",
    "model": {"family": "ltfim", "L": 6},
    "measurement": {"state": "eigenstate"},
    "learner": {"gamma": 1.0, "gamma_scale": "terms", "max_iters": 30}
  })"));
  CHECK(config.measurement.eigen_index == 1);
  TempDir dir;
  REQUIRE(cmd_eth(config, quiet_in(dir.path())) == 0);
  const auto rows = lines_of(read_file(dir / "eth_report.csv"));
  REQUIRE(rows.size() == 2 + 3);
  CHECK(rows[0] == "# hamlearn.eth/1");
  CHECK(rows[2].rfind("zz,5,1,", 0) == 0);
  CHECK(rows[3].rfind("z,6,", 0) == 0);
  CHECK(rows[4].rfind("x,6,", 0) == 0);
  const auto m = json::parse(read_file(dir / "manifest_eth.json"));
  CHECK(m.at("mode") == "eigenstate");
  CHECK(m.at("beta_s").get<double>() > 0.0);
  CHECK(m.at("warnings").empty());
  CHECK(verify_manifests(dir.path()).empty());
}

TEST_CASE("ground-state index runs the ground-state comparison") {
  auto j = json::parse(R"({
    "schema": "hamlearn.config/1",
    "model": {"family": "tfim", "L": 4},
    "measurement": {"state": "ground", "eigen_index": 0, "basis": {"kind": "model"}},
    "learner": {"gamma": 0.1, "max_iters": 20, "init": {"kind": "random", "seed": 1, "range": 0.1}}
  })");
  TempDir dir;
  REQUIRE(cmd_eth(parse_run_config(j), quiet_in(dir.path())) == 0);
  const auto m = json::parse(read_file(dir / "manifest_eth.json"));
  CHECK(m.at("mode") == "ground");
  CHECK(!m.contains("beta_s"));
  CHECK(read_file(dir / "trace_eth.csv").find("\nmle-gs,0,") != std::string::npos);

  // The classical chain has a doubly degenerate ground state.
  j["model"]["params"] = {{"g", 0.0}};
  TempDir dir2;
  cmd_eth(parse_run_config(j), quiet_in(dir2.path()));
  CHECK(json::parse(read_file(dir2 / "manifest_eth.json")).at("warnings").size() == 1);
}

TEST_CASE("report tables") {
  TempDir runs, out;
  auto j = minimal_config();
  j["sweep"] = {{"trials", 3}};
  const auto trace_cfg = parse_run_config(j);
  const auto trace_dir = runs / "fig2_L3";
  fs::create_directories(trace_dir);
  REQUIRE(cmd_generate(trace_cfg, quiet_in(trace_dir)) == 0);
  REQUIRE(cmd_learn(trace_cfg, quiet_in(trace_dir)) == 0);
  // A second reading of the same figure must not be pooled with the first.
  j["name"] = "other";
  j["learner"]["gradient"] = "raw";
  j["learner"]["gamma"] = 0.1;
  const auto other_cfg = parse_run_config(j);
  const auto other_dir = runs / "fig2_raw";
  fs::create_directories(other_dir);
  REQUIRE(cmd_generate(other_cfg, quiet_in(other_dir)) == 0);
  REQUIRE(cmd_learn(other_cfg, quiet_in(other_dir)) == 0);

  j = minimal_config();
  j["figure"] = "fig3";
  j["learner"]["max_iters"] = 200;
  j["sweep"] = {{"delta", {1e-6, 1e-4, 1e-2}}, {"methods", {"mle", "gd"}}, {"trials", 3}};
  const auto sweep_cfg = parse_run_config(j);
  const auto sweep_dir = runs / "fig3_L3";
  fs::create_directories(sweep_dir);
  REQUIRE(cmd_sweep(sweep_cfg, quiet_in(sweep_dir)) == 0);

  CHECK(cmd_report({trace_dir, other_dir, sweep_dir}, quiet_in(out.path())) == 0);
  const auto fig2 = lines_of(read_file(out / "fig2.csv"));
  CHECK(fig2[0] == "# hamlearn.figure/1 fig2");
  CHECK(fig2[1] == "run,L,beta,method,k,runs,median_rel_entropy,median_delta_mu,median_fidelity");
  CHECK(fig2[2].rfind("minimal,3,1,mle,0,3,", 0) == 0);
  const auto others = std::count_if(fig2.begin(), fig2.end(),
                                    [](const std::string& l) { return l.rfind("other,3,1,mle,", 0) == 0; });
  CHECK(others > 0);
  CHECK(fig2.size() == 2 + 40 + static_cast<std::size_t>(others));

  const auto fig3 = lines_of(read_file(out / "fig3.csv"));
  CHECK(fig3[1] ==
        "run,L,method,beta,delta,trials,failed,median_delta_mu,q25_delta_mu,q75_delta_mu,median_rel_entropy,"
        "median_iterations,median_k_below_1e-3");
  CHECK(fig3.size() == 2 + 6);
  const auto fit = lines_of(read_file(out / "fig3_fit.csv"));
  REQUIRE(fit.size() == 2 + 2);
  CHECK(fit[1] == "run,L,method,beta,slope,points");
  CHECK(fit[3].rfind("minimal,3,mle,1,", 0) == 0);
  CHECK(verify_manifests(out.path()).empty());

  // Missing runs are listed and make the exit code nonzero.
  TempDir out2;
  CHECK(cmd_report({trace_dir, runs / "nope"}, quiet_in(out2.path())) == 2);
  const auto m = json::parse(read_file(out2 / "manifest_report.json"));
  REQUIRE(m.at("missing_runs").size() == 1);
  CHECK(m.at("missing_runs").at(0).get<std::string>().find("nope") != std::string::npos);

  CHECK_THROWS_AS(cmd_report({}, quiet_in(out2.path())), ConfigError);
}

TEST_CASE("shipped configs parse") {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(HAMLEARN_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    CHECK_NOTHROW(load_run_config(entry.path()));
    ++count;
  }
  CHECK(count >= 8);
}

#include "hamlearn/experiment.hpp"

#include "hamlearn/errors.hpp"
#include "hamlearn/io.hpp"
#include "hamlearn/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace hamlearn {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Config field readers. Every failure names the dotted path of the field.

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw ConfigError(field + ": " + what);
}

std::string join_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad(path, "expected an object");
  for (const auto& item : obj.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return item.key() == a; });
    if (!ok) bad(join_path(path, item.key()), "unknown field");
  }
}

double get_number(const json& obj, const std::string& path, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) bad(join_path(path, key), "expected a number");
  return v.get<double>();
}

int get_int(const json& obj, const std::string& path, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) bad(join_path(path, key), "expected an integer");
  return v.get<int>();
}

std::uint64_t get_unsigned(const json& obj, const std::string& path, const char* key, std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    bad(join_path(path, key), "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) bad(join_path(path, key), "expected true or false");
  return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& path, const char* key, std::string fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_string()) bad(join_path(path, key), "expected a string");
  return v.get<std::string>();
}

std::string one_of(const std::string& value, const std::string& field, std::initializer_list<const char*> options) {
  for (const char* o : options) {
    if (value == o) return value;
  }
  std::string list;
  for (const char* o : options) list += (list.empty() ? "" : ", ") + std::string(o);
  bad(field, "'" + value + "' is not one of " + list);
}

std::vector<double> get_numbers(const json& obj, const std::string& path, const char* key) {
  std::vector<double> out;
  if (!obj.contains(key)) return out;
  const auto& v = obj.at(key);
  if (!v.is_array() || v.empty()) bad(join_path(path, key), "expected a non-empty array of numbers");
  for (const auto& x : v) {
    if (!x.is_number()) bad(join_path(path, key), "expected a non-empty array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<std::string> get_strings(const json& obj, const std::string& path, const char* key) {
  std::vector<std::string> out;
  if (!obj.contains(key)) return out;
  const auto& v = obj.at(key);
  if (!v.is_array() || v.empty()) bad(join_path(path, key), "expected a non-empty array of strings");
  for (const auto& x : v) {
    if (!x.is_string()) bad(join_path(path, key), "expected a non-empty array of strings");
    out.push_back(x.get<std::string>());
  }
  return out;
}

InitSpec parse_init(const json& obj, const std::string& path) {
  if (!obj.contains("init")) return ZeroInit{};
  const std::string field = join_path(path, "init");
  const auto& j = obj.at("init");
  check_keys(j, field, {"kind", "seed", "range"});
  const std::string kind = one_of(get_string(j, field, "kind", "zero"), field + ".kind", {"zero", "random"});
  if (kind == "zero") return ZeroInit{};
  RandomInit r;
  r.seed = get_unsigned(j, field, "seed", 0);
  r.range = get_number(j, field, "range", 1.0);
  if (!(r.range > 0.0)) bad(field + ".range", "must be positive");
  return r;
}

const std::set<std::string>& known_params(const std::string& family) {
  static const std::map<std::string, std::set<std::string>> table{
      {"random_2local", {}}, {"ltfim", {"J", "g_x", "g_z"}}, {"tfim", {"J", "g"}}, {"majorana", {"t", "g"}}};
  return table.at(family);
}

const std::vector<std::string>& methods() {
  static const std::vector<std::string> m{"mle", "mle-gs", "gd", "cm", "mle-patched"};
  return m;
}

void check_method(const std::string& method, const std::string& field) {
  if (std::find(methods().begin(), methods().end(), method) == methods().end()) {
    bad(field, "'" + method + "' is not one of mle, mle-gs, gd, cm, mle-patched");
  }
}

// Rethrows a library ConfigError with the field prefixed.
template <class F>
void validated(const std::string& field, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    bad(field, e.what());
  }
}

// ---------------------------------------------------------------------------
// Output helpers.

std::mutex log_mutex;

void log(const CommandOptions& opts, const std::string& line) {
  if (opts.quiet) return;
  std::lock_guard<std::mutex> lock(log_mutex);
  std::cerr << "[hamlearn] " << line << '\n';
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Collects outputs with their digests and writes manifest_<command>.json last.
class Manifest {
 public:
  Manifest(const RunConfig* config, std::string command, const CommandOptions& opts, std::uint64_t master)
      : dir_(opts.out), command_(std::move(command)) {
    body_["schema"] = kManifestSchema;
    body_["command"] = command_;
    body_["tool_version"] = kToolVersion;
    body_["created"] = timestamp_utc();
    if (config) {
      body_["config"] = config->source;
      body_["figure"] = config->figure;
      body_["name"] = config->name;
      body_["master_seed"] = master;
    }
    body_["outputs"] = json::array();
    body_["inputs"] = json::array();
  }

  json& operator[](const char* key) { return body_[key]; }

  void write_output(const std::string& name, const std::string& content) {
    write_file_atomic(dir_ / name, content);
    body_["outputs"].push_back({{"path", name}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
  }

  void add_input(const fs::path& path) {
    body_["inputs"].push_back({{"path", path.string()}, {"sha256", file_sha256(path)}});
  }

  void finish(double seconds) {
    body_["seconds"] = seconds;
    write_file_atomic(dir_ / ("manifest_" + command_ + ".json"), body_.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  std::string command_;
  json body_;
};

/// Runs f(i) for i in [0, n) on up to `jobs` threads. f must not throw.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  std::size_t workers = jobs > 0 ? static_cast<std::size_t>(jobs) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) f(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::string trial_file(const char* stem, int trial, const char* ext) {
  return std::string(stem) + "_t" + std::to_string(trial) + ext;
}

std::string csv_cell(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::string opt_double(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

BasisPtr measured_basis(const RunConfig& config, const HamiltonianModel& target) {
  const auto& m = config.measurement;
  if (m.descriptors.size() == 1 && m.descriptors[0] == "model") return target.basis_ptr();
  if (!m.descriptors.empty()) return custom_basis(target.num_sites(), m.descriptors);
  return build_klocal_basis(target.num_sites(), m.locality);
}

std::optional<Eigen::VectorXd> target_in(const HamiltonianModel& target, const OperatorBasis& basis) {
  try {
    return embed_coefficients(target, basis);
  } catch (const DataError&) {
    return std::nullopt;
  }
}

double gamma_for(const RunConfig& config, double gamma, std::size_t terms, double beta) {
  const double n = static_cast<double>(terms);
  switch (config.learner.gamma_scale) {
    case GammaScale::Terms: return gamma * n;
    case GammaScale::TermsOverBeta: return gamma * n / beta;
    case GammaScale::None: break;
  }
  return gamma;
}

std::optional<StateVector> pure_target(const RunConfig& config, const HamiltonianModel& target) {
  const auto& state = config.measurement.state;
  if (state == "gibbs") return std::nullopt;
  const auto h = realize_hamiltonian(target);
  if (state == "ground") return ground_state(h).state;
  const int idx = config.measurement.eigen_index;
  return lowest_eigenstates(h, idx + 1).back();
}

// ---------------------------------------------------------------------------
// Minimal CSV reading for the files this module writes itself.

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw LoadError("CSV column '" + name + "' missing");
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

CsvTable read_csv(const fs::path& path, const std::string& schema) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("# " + schema, 0) != 0) {
    throw LoadError(path.string() + ": expected header '# " + schema + "'");
  }
  CsvTable t;
  if (!std::getline(in, line)) throw LoadError(path.string() + ": missing column header");
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    cells.resize(t.header.size());
    t.rows.push_back(std::move(cells));
  }
  return t;
}

double cell_double(const std::string& s) {
  if (s.empty()) return std::nan("");
  return std::stod(s);
}

std::vector<double> finite_only(const std::vector<double>& v) {
  std::vector<double> out;
  std::copy_if(v.begin(), v.end(), std::back_inserter(out), [](double x) { return std::isfinite(x); });
  return out;
}

std::string median_cell(const std::vector<double>& v) {
  const auto f = finite_only(v);
  return f.empty() ? "" : format_double(median(f));
}

std::string quantile_cell(const std::vector<double>& v, double q) {
  const auto f = finite_only(v);
  return f.empty() ? "" : format_double(quantile(f, q));
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration.

RunConfig parse_run_config(const json& j) {
  check_keys(j, "", {"schema", "name", "figure", "seed", "model", "measurement", "learner", "sweep", "output"});
  if (!j.contains("schema")) bad("schema", std::string("missing (expected ") + kConfigSchema + ")");
  if (get_string(j, "", "schema", "") != kConfigSchema) {
    bad("schema", "'" + get_string(j, "", "schema", "") + "' is not supported (expected " + kConfigSchema + ")");
  }
  RunConfig c;
  c.source = j;
  c.name = get_string(j, "", "name", "");
  c.figure = get_string(j, "", "figure", "");
  if (!c.figure.empty()) {
    one_of(c.figure, "figure", {"fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig9", "fig10"});
  }
  c.seed = get_unsigned(j, "", "seed", 0);

  if (!j.contains("model")) bad("model", "missing");
  const auto& jm = j.at("model");
  check_keys(jm, "model", {"family", "L", "params", "seed"});
  c.model = model_spec_from_json(jm, 0);
  c.fixed_model_seed = jm.contains("seed");
  for (const auto& [key, value] : c.model.params) {
    if (!known_params(c.model.family).count(key)) bad("model.params." + key, "unknown parameter for " + c.model.family);
  }
  try {
    make_model(c.model);
  } catch (const std::exception& e) {
    bad("model", e.what());
  }

  if (j.contains("measurement")) {
    const auto& jm2 = j.at("measurement");
    const std::string p = "measurement";
    check_keys(jm2, p, {"state", "kind", "beta", "shots", "delta", "eigen_index", "basis"});
    auto& m = c.measurement;
    m.state = one_of(get_string(jm2, p, "state", m.state), p + ".state", {"gibbs", "ground", "eigenstate"});
    m.kind = one_of(get_string(jm2, p, "kind", m.kind), p + ".kind", {"exact", "shots", "noise"});
    m.beta = get_number(jm2, p, "beta", m.beta);
    m.shots = get_unsigned(jm2, p, "shots", m.shots);
    m.delta = get_number(jm2, p, "delta", m.delta);
    m.eigen_index = get_int(jm2, p, "eigen_index", m.eigen_index);
    if (jm2.contains("basis")) {
      const auto& b = jm2.at("basis");
      check_keys(b, p + ".basis", {"kind", "k", "terms"});
      const std::string kind = one_of(get_string(b, p + ".basis", "kind", "klocal"), p + ".basis.kind",
                                      {"klocal", "model", "custom"});
      m.locality = get_int(b, p + ".basis", "k", m.locality);
      if (kind == "model") m.descriptors = {"model"};
      if (kind == "custom") {
        m.descriptors = get_strings(b, p + ".basis", "terms");
        if (m.descriptors.empty()) bad(p + ".basis.terms", "required for a custom basis");
      }
    }
  }
  {
    const auto& m = c.measurement;
    if (!(m.beta > 0.0) || !std::isfinite(m.beta)) bad("measurement.beta", "must be positive");
    if (m.kind == "shots" && m.shots < 1) bad("measurement.shots", "must be >= 1 for shot data");
    if (!(m.delta >= 0.0) || !std::isfinite(m.delta)) bad("measurement.delta", "must be >= 0");
    if (m.eigen_index < 0) bad("measurement.eigen_index", "must be >= 0");
    if (m.locality < 1 || m.locality > 3) bad("measurement.basis.k", "must be 1, 2 or 3");
    if (!m.descriptors.empty() && m.descriptors[0] != "model") {
      try {
        custom_basis(c.model.num_sites, m.descriptors);
      } catch (const std::exception& e) {
        bad("measurement.basis.terms", e.what());
      }
    }
  }

  auto& l = c.learner;
  l.gd.max_iters = 7000;
  if (j.contains("learner")) {
    const auto& jl = j.at("learner");
    const std::string p = "learner";
    check_keys(jl, p, {"method", "gradient", "gamma", "gamma_scale", "g", "epsilon", "max_iters", "init", "backoff",
                       "degeneracy_tol", "track_lowlying", "eta", "grad_tol", "patch", "cm_locality"});
    l.method = get_string(jl, p, "method", l.method);
    check_method(l.method, p + ".method");
    const std::string gradient = get_string(jl, p, "gradient", "rescaled");
    validated(p + ".gradient", [&] { l.mle.gradient = gradient_kind_from_string(gradient); });
    l.mle.gamma = get_number(jl, p, "gamma", l.mle.gamma);
    const std::string scale =
        one_of(get_string(jl, p, "gamma_scale", "none"), p + ".gamma_scale", {"none", "terms", "terms_over_beta"});
    l.gamma_scale = scale == "terms" ? GammaScale::Terms
                    : scale == "terms_over_beta" ? GammaScale::TermsOverBeta
                                                 : GammaScale::None;
    l.mle.g = get_int(jl, p, "g", l.mle.g);
    l.mle.epsilon = get_number(jl, p, "epsilon", l.mle.epsilon);
    l.mle.max_iters = get_int(jl, p, "max_iters", l.mle.max_iters);
    l.mle.init = parse_init(jl, p);
    l.mle.backoff = get_bool(jl, p, "backoff", false);

    l.gs.gamma = l.mle.gamma;
    l.gs.gradient = l.mle.gradient;
    l.gs.g = l.mle.g;
    l.gs.epsilon = l.mle.epsilon;
    l.gs.max_iters = l.mle.max_iters;
    l.gs.init = l.mle.init;
    l.gs.degeneracy_tol = get_number(jl, p, "degeneracy_tol", l.gs.degeneracy_tol);
    l.gs.track_lowlying = get_int(jl, p, "track_lowlying", l.gs.track_lowlying);

    l.gd.eta = get_number(jl, p, "eta", l.gd.eta);
    l.gd.max_iters = get_int(jl, p, "max_iters", 7000);
    l.gd.grad_tol = get_number(jl, p, "grad_tol", l.gd.grad_tol);
    l.gd.init = l.mle.init;

    if (jl.contains("patch")) {
      const auto& jp = jl.at("patch");
      check_keys(jp, p + ".patch", {"L_A", "Lambda"});
      l.patch_size = get_int(jp, p + ".patch", "L_A", l.patch_size);
      l.patch_margin = get_int(jp, p + ".patch", "Lambda", l.patch_margin);
    }
    l.cm_locality = get_int(jl, p, "cm_locality", l.cm_locality);
  }
  l.mle.beta = c.measurement.beta;
  l.gd.beta = c.measurement.beta;
  // gamma = 0 is a legal (frozen) run; everything else goes through the library checks.
  validated("learner", [&] { l.mle.validate(true); });
  validated("learner", [&] {
    auto gs = l.gs;
    if (gs.gamma == 0.0) gs.gamma = 1.0;
    gs.validate();
  });
  validated("learner", [&] { l.gd.validate(); });
  if (l.patch_size < 1) bad("learner.patch.L_A", "must be positive");
  if (l.patch_margin < 0) bad("learner.patch.Lambda", "must be >= 0");
  if (l.cm_locality < 1 || l.cm_locality > 3) bad("learner.cm_locality", "must be 1, 2 or 3");

  if (j.contains("sweep")) {
    const auto& js = j.at("sweep");
    check_keys(js, "sweep", {"beta", "delta", "methods", "trials"});
    c.sweep.betas = get_numbers(js, "sweep", "beta");
    c.sweep.deltas = get_numbers(js, "sweep", "delta");
    c.sweep.methods = get_strings(js, "sweep", "methods");
    c.sweep.trials = get_int(js, "sweep", "trials", 1);
  }
  for (double b : c.sweep.betas) {
    if (!(b > 0.0) || !std::isfinite(b)) bad("sweep.beta", "entries must be positive");
  }
  for (double d : c.sweep.deltas) {
    if (!(d >= 0.0) || !std::isfinite(d)) bad("sweep.delta", "entries must be >= 0");
  }
  for (const auto& m : c.sweep.methods) check_method(m, "sweep.methods");
  if (c.sweep.trials < 1) bad("sweep.trials", "must be >= 1");

  const bool pure = c.measurement.state != "gibbs";
  auto all_methods = c.sweep.methods;
  all_methods.push_back(l.method);
  for (const auto& m : all_methods) {
    if (m == "mle-gs" && !pure) bad("learner.method", "mle-gs needs measurement.state ground or eigenstate");
    if ((m == "gd" || m == "mle-patched") && pure) bad("learner.method", m + " needs measurement.state gibbs");
  }

  if (j.contains("output")) {
    check_keys(j.at("output"), "output", {"timing"});
    c.timing = get_bool(j.at("output"), "output", "timing", false);
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

// ---------------------------------------------------------------------------
// Seeds and data.

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> indices) {
  std::uint64_t s = CounterRng::mix64(master ^ 0x68616d6c6561726eULL);
  for (std::uint64_t i : indices) s = CounterRng::substream(s, i).key();
  return s;
}

std::uint64_t model_seed_for(const RunConfig& config, std::uint64_t master, int trial) {
  if (config.fixed_model_seed) return config.model.seed;
  return derive_seed(master, {1, static_cast<std::uint64_t>(trial)});
}

GeneratedData generate_data(const RunConfig& config, std::uint64_t master, int trial, double beta, double delta,
                            std::uint64_t noise_seed) {
  ModelSpec spec = config.model;
  spec.seed = model_seed_for(config, master, trial);
  auto target = make_model(spec);
  const auto basis = measured_basis(config, target);
  const auto& m = config.measurement;
  std::ostringstream source;
  source << m.state << ' ' << spec.family << " L=" << spec.num_sites << " seed=" << spec.seed;
  std::optional<StateVector> state;
  std::optional<MeasurementSet> data;
  if (m.state == "gibbs") {
    source << " beta=" << format_double(beta);
    const ThermalFamily family(realize_hamiltonian(target));
    data = exact_probabilities(family.sector_probabilities(*basis, beta), basis, source.str());
  } else {
    if (m.state == "eigenstate") source << " index=" << m.eigen_index;
    state = pure_target(config, target);
    data = exact_probabilities(*state, basis, source.str());
  }
  GeneratedData gen{std::move(target), std::move(*data), std::move(state), spec.seed, std::nullopt};
  if (m.kind == "shots") {
    gen.data = sample_shots(gen.data, m.shots, noise_seed);
    gen.noise_seed = noise_seed;
  }
  if (delta > 0.0 || m.kind == "noise") {
    if (delta > 0.0) gen.data = add_gaussian_noise(gen.data, delta, noise_seed);
    gen.noise_seed = noise_seed;
  }
  return gen;
}

LearningResult run_method(const RunConfig& config, const std::string& method, const GeneratedData& gen, double beta,
                          double delta, std::uint64_t noise_seed) {
  const auto& data = gen.data;
  const auto target = target_in(gen.target, data.basis());
  const auto& l = config.learner;
  const std::size_t n = data.size();

  if (method == "mle" || method == "mle-patched") {
    LearnerConfig cfg = l.mle;
    cfg.beta = beta;
    cfg.gamma = gamma_for(config, cfg.gamma, n, beta);
    // gamma = 0 freezes the initial model; the smallest positive step leaves it bit-identical.
    if (cfg.gamma == 0.0) cfg.gamma = std::numeric_limits<double>::denorm_min();
    if (method == "mle") return run_learning(data, cfg, target);
    return run_patched_learning(data, cfg, plan_patches(data.basis(), l.patch_size, l.patch_margin), target);
  }
  if (method == "mle-gs") {
    GsLearnerConfig cfg = l.gs;
    cfg.gamma = gamma_for(config, cfg.gamma, n, 1.0);
    if (cfg.gamma == 0.0) cfg.gamma = std::numeric_limits<double>::denorm_min();
    if (target) return run_gs_learning(data, cfg, target, gen.state);
    return restricted_operator_learning(data, cfg, gen.state);
  }
  if (method == "gd") {
    GdConfig cfg = l.gd;
    cfg.beta = beta;
    return gd_log_partition(data, cfg, target);
  }
  if (method == "cm") {
    const auto h = realize_hamiltonian(gen.target);
    DensityMatrix rho;
    if (gen.state) {
      rho.matrix = gen.state->amplitudes * gen.state->amplitudes.adjoint();
      rho.num_sites = gen.state->num_sites;
    } else {
      rho = gibbs_state(h, beta);
    }
    const auto constraints = build_klocal_basis(gen.target.num_sites(), l.cm_locality);
    const auto cm = correlation_matrix_method(rho, data.basis(), *constraints, delta, noise_seed);
    const Eigen::VectorXd mu = target ? scale_fixed(*target, cm.mu_hat) : cm.mu_hat;
    HamiltonianModel model(data.basis_ptr(), mu);
    const auto probs = gen.state ? sector_probabilities(ground_state(realize_hamiltonian(model)).state, data.basis())
                                 : ThermalFamily(realize_hamiltonian(model)).sector_probabilities(data.basis(), beta);
    const auto stats = nll(probs, data);
    TraceRecord rec;
    rec.nll = stats.value;
    rec.relative_entropy = stats.relative;
    if (target) rec.delta_mu = hamiltonian_distance(*target, mu);
    rec.max_ratio_dev = max_ratio_deviation(probs, data);
    LearningResult r{model, IterationTrace{"cm", {rec}}, Termination::Converged, ""};
    std::ostringstream msg;
    msg << "sigma_min=" << format_double(cm.sigma_min) << " sigma_next=" << format_double(cm.sigma_next)
        << (cm.ill_conditioned ? " ill-conditioned" : "");
    r.message = msg.str();
    return r;
  }
  throw ConfigError("learner.method: '" + method + "' is not one of mle, mle-gs, gd, cm, mle-patched");
}

std::optional<int> first_below(const IterationTrace& trace, double threshold) {
  for (const auto& r : trace.records) {
    if (r.delta_mu && *r.delta_mu <= threshold) return r.k;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Statistics.

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionError("loglog_slope: sizes differ");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 2) throw DomainError("loglog_slope: need two positive points");
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) throw DomainError("loglog_slope: x values coincide");
  return sxy / sxx;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const LoadError*>(&e) ||
      dynamic_cast<const PlanningError*>(&e) || dynamic_cast<const DataError*>(&e) ||
      dynamic_cast<const IndexError*>(&e)) {
    return 2;
  }
  return 3;
}

// ---------------------------------------------------------------------------
// Commands.

namespace {

std::uint64_t master_of(const RunConfig& config, const CommandOptions& opts) { return opts.seed.value_or(config.seed); }

void prepare_out(const CommandOptions& opts) {
  std::error_code ec;
  fs::create_directories(opts.out, ec);
  if (ec) throw ConfigError("--out: cannot create " + opts.out.string() + ": " + ec.message());
}

json result_summary(const LearningResult& r) {
  json s;
  s["method"] = r.trace.method;
  s["termination"] = to_string(r.termination);
  s["iterations"] = r.trace.records.empty() ? 0 : r.trace.records.back().k;
  if (!r.trace.records.empty()) {
    const auto& last = r.trace.records.back();
    s["final_rel_entropy"] = last.relative_entropy;
    s["final_delta_mu"] = last.delta_mu ? json(*last.delta_mu) : json(nullptr);
    s["final_fidelity"] = last.fidelity ? json(*last.fidelity) : json(nullptr);
  }
  if (!r.message.empty()) s["message"] = r.message;
  return s;
}

}  // namespace

int cmd_generate(const RunConfig& config, const CommandOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  prepare_out(opts);
  const auto master = master_of(config, opts);
  Manifest manifest(&config, "generate", opts, master);
  manifest["trials"] = json::array();
  for (int t = 0; t < config.sweep.trials; ++t) {
    const auto noise_seed = derive_seed(master, {2, 0, 0, static_cast<std::uint64_t>(t)});
    const auto gen = generate_data(config, master, t, config.measurement.beta, config.measurement.delta, noise_seed);
    manifest.write_output(trial_file("dataset", t, ".txt"), dataset_to_string(gen.data));
    manifest.write_output(trial_file("target", t, ".json"), model_to_json(gen.target).dump(2) + "\n");
    manifest["trials"].push_back({{"trial", t},
                                  {"model_seed", gen.model_seed},
                                  {"noise_seed", gen.noise_seed ? json(*gen.noise_seed) : json(nullptr)},
                                  {"terms", gen.data.size()}});
    log(opts, "generate: trial " + std::to_string(t) + ", " + std::to_string(gen.data.size()) + " terms");
  }
  manifest.finish(seconds_since(t0));
  return 0;
}

int cmd_learn(const RunConfig& config, const CommandOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto master = master_of(config, opts);
  const int trials = config.sweep.trials;
  std::vector<GeneratedData> inputs;
  Manifest manifest(&config, "learn", opts, master);
  for (int t = 0; t < trials; ++t) {
    const fs::path dataset = opts.out / trial_file("dataset", t, ".txt");
    const fs::path target = opts.out / trial_file("target", t, ".json");
    for (const auto& p : {dataset, target}) {
      if (!fs::exists(p)) throw ConfigError(p.string() + " not found; run generate first");
    }
    auto model = model_from_json(json::parse(read_file(target)));
    auto data = load_dataset(dataset);
    std::optional<StateVector> state = pure_target(config, model);
    inputs.push_back(GeneratedData{std::move(model), std::move(data), std::move(state), 0, std::nullopt});
    manifest.add_input(dataset);
    manifest.add_input(target);
  }
  // The generate manifest, when present, must agree with the files on disk.
  const fs::path gen_manifest = opts.out / "manifest_generate.json";
  if (fs::exists(gen_manifest)) {
    const auto j = json::parse(read_file(gen_manifest));
    for (const auto& o : j.at("outputs")) {
      const fs::path p = opts.out / o.at("path").get<std::string>();
      if (fs::exists(p) && file_sha256(p) != o.at("sha256").get<std::string>()) {
        throw LoadError(p.string() + ": digest differs from manifest_generate.json");
      }
    }
  }

  std::vector<std::optional<LearningResult>> results(static_cast<std::size_t>(trials));
  std::vector<double> seconds(static_cast<std::size_t>(trials), 0.0);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const double beta = config.measurement.beta;
  parallel_for(static_cast<std::size_t>(trials), opts.jobs, [&](std::size_t t) {
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto noise_seed = derive_seed(master, {2, 0, 0, t});
      results[t] = run_method(config, config.learner.method, inputs[t], beta, config.measurement.delta, noise_seed);
      seconds[t] = seconds_since(start);
      log(opts, "learn: trial " + std::to_string(t) + " " + to_string(results[t]->termination) + " after " +
                    std::to_string(results[t]->trace.records.back().k) + " iterations");
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  });
  if (failure) std::rethrow_exception(failure);

  bool singular = false;
  manifest["trials"] = json::array();
  for (int t = 0; t < trials; ++t) {
    const auto& r = *results[static_cast<std::size_t>(t)];
    manifest.write_output(trial_file("trace", t, ".csv"), trace_to_csv(r.trace, config.timing));
    manifest.write_output(trial_file("learned", t, ".json"), model_to_json(r.model).dump(2) + "\n");
    auto s = result_summary(r);
    s["trial"] = t;
    s["seconds"] = seconds[static_cast<std::size_t>(t)];
    manifest["trials"].push_back(s);
    singular = singular || r.termination == Termination::Singularity;
  }
  manifest.finish(seconds_since(t0));
  return singular ? 3 : 0;
}

int cmd_sweep(const RunConfig& config, const CommandOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  prepare_out(opts);
  const auto master = master_of(config, opts);
  const auto betas = config.sweep.betas.empty() ? std::vector<double>{config.measurement.beta} : config.sweep.betas;
  const auto deltas = config.sweep.deltas.empty() ? std::vector<double>{config.measurement.delta} : config.sweep.deltas;
  const auto meths = config.sweep.methods.empty() ? std::vector<std::string>{config.learner.method} : config.sweep.methods;
  const std::size_t trials = static_cast<std::size_t>(config.sweep.trials);

  struct Row {
    std::size_t method = 0, beta = 0, delta = 0, trial = 0;
    std::uint64_t model_seed = 0, noise_seed = 0;
    bool ok = false;
    std::string termination, message;
    int iterations = 0;
    std::optional<double> dmu, rel, fidelity;
    std::optional<int> k_below;
    double seconds = 0.0;
  };
  std::vector<Row> rows;
  for (std::size_t m = 0; m < meths.size(); ++m)
    for (std::size_t b = 0; b < betas.size(); ++b)
      for (std::size_t d = 0; d < deltas.size(); ++d)
        for (std::size_t t = 0; t < trials; ++t) {
          Row row;
          row.method = m;
          row.beta = b;
          row.delta = d;
          row.trial = t;
          rows.push_back(row);
        }

  std::atomic<std::size_t> done{0};
  parallel_for(rows.size(), opts.jobs, [&](std::size_t i) {
    auto& row = rows[i];
    const auto start = std::chrono::steady_clock::now();
    row.noise_seed = derive_seed(master, {2, row.beta, row.delta, row.trial});
    row.model_seed = model_seed_for(config, master, static_cast<int>(row.trial));
    try {
      const double beta = betas[row.beta], delta = deltas[row.delta];
      const auto gen = generate_data(config, master, static_cast<int>(row.trial), beta, delta, row.noise_seed);
      const auto r = run_method(config, meths[row.method], gen, beta, delta, row.noise_seed);
      const auto& last = r.trace.records.back();
      row.ok = r.termination != Termination::Singularity;
      row.termination = to_string(r.termination);
      row.message = r.message;
      row.iterations = last.k;
      row.dmu = last.delta_mu;
      row.rel = last.relative_entropy;
      row.fidelity = last.fidelity;
      row.k_below = first_below(r.trace, 1e-3);
    } catch (const std::exception& e) {
      row.termination = "error";
      row.message = e.what();
    }
    row.seconds = seconds_since(start);
    log(opts, "sweep: " + std::to_string(++done) + "/" + std::to_string(rows.size()) + " " + meths[row.method] +
                  " beta=" + format_double(betas[row.beta]) + " delta=" + format_double(deltas[row.delta]) +
                  " trial=" + std::to_string(row.trial) + " " + row.termination);
  });

  std::ostringstream csv;
  csv << "# " << kSweepSchema << "\n"
      << "L,method,beta,delta,trial,model_seed,noise_seed,status,termination,iterations,final_delta_mu,"
         "final_rel_entropy,final_fidelity,k_below_1e-3,message\n";
  bool failed = false;
  json timing = json::array();
  for (const auto& row : rows) {
    failed = failed || !row.ok;
    csv << config.model.num_sites << ',' << meths[row.method] << ',' << format_double(betas[row.beta]) << ','
        << format_double(deltas[row.delta]) << ',' << row.trial << ',' << row.model_seed << ',' << row.noise_seed << ','
        << (row.ok ? "ok" : "failed") << ',' << row.termination << ',' << row.iterations << ',' << opt_double(row.dmu)
        << ',' << opt_double(row.rel) << ',' << opt_double(row.fidelity) << ','
        << (row.k_below ? std::to_string(*row.k_below) : "") << ',' << csv_cell(row.message) << '\n';
    timing.push_back(row.seconds);
  }
  Manifest manifest(&config, "sweep", opts, master);
  manifest["axes"] = {{"beta", betas}, {"delta", deltas}, {"methods", meths}, {"trials", trials}};
  manifest["row_seconds"] = timing;
  manifest["failed_rows"] = std::count_if(rows.begin(), rows.end(), [](const Row& r) { return !r.ok; });
  manifest.write_output("sweep.csv", csv.str());
  manifest.finish(seconds_since(t0));
  return failed ? 3 : 0;
}

int cmd_eth(const RunConfig& config, const CommandOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  prepare_out(opts);
  const auto master = master_of(config, opts);
  ModelSpec spec = config.model;
  spec.seed = model_seed_for(config, master, 0);
  const auto target = make_model(spec);
  const int idx = config.measurement.eigen_index;
  const auto h = realize_hamiltonian(target);
  const Eigen::VectorXd energies = spectrum(h);
  if (idx >= energies.size()) throw ConfigError("measurement.eigen_index: beyond the spectrum");
  const auto psi = lowest_eigenstates(h, idx + 1).back();
  const auto basis = measured_basis(config, target);
  const auto data = exact_probabilities(psi, basis, "eigenstate " + std::to_string(idx));
  const auto embedded = target_in(target, *basis);
  if (!embedded) throw ConfigError("measurement.basis: must contain every term of the model");

  Manifest manifest(&config, "eth", opts, master);
  json warnings = json::array();
  const double tol = config.learner.gs.degeneracy_tol;
  const double gap_below = idx > 0 ? energies[idx] - energies[idx - 1] : std::nan("");
  const double gap_above = idx + 1 < energies.size() ? energies[idx + 1] - energies[idx] : std::nan("");
  if ((idx > 0 && gap_below < tol) || (idx + 1 < energies.size() && gap_above < tol)) {
    warnings.push_back("eigenstate " + std::to_string(idx) + " is part of a degenerate pair");
    log(opts, "warning: eigenstate " + std::to_string(idx) + " is degenerate; the reconstruction is not unique");
  }

  double scale = 1.0;
  const auto learn = [&]() -> LearningResult {
    if (idx == 0) {
      GsLearnerConfig cfg = config.learner.gs;
      cfg.gamma = gamma_for(config, cfg.gamma, basis->size(), 1.0);
      manifest["mode"] = "ground";
      return run_gs_learning(data, cfg, *embedded, psi);
    }
    // An eigenstate is matched by a Gibbs state at beta = 1 of beta_s H.
    const double beta_s = solve_effective_beta(target, psi.energy);
    LearnerConfig cfg = config.learner.mle;
    cfg.beta = 1.0;
    cfg.gamma = gamma_for(config, cfg.gamma, basis->size(), 1.0);
    scale = beta_s;
    manifest["mode"] = "eigenstate";
    manifest["beta_s"] = beta_s;
    return run_learning(data, cfg, Eigen::VectorXd(beta_s * *embedded));
  };
  const LearningResult r = learn();

  // Families: coefficients of the model's operator patterns, in the model's own prefactor.
  struct Family {
    std::vector<double> learned;
    double target_sum = 0.0;
  };
  std::map<std::string, Family> families;
  std::vector<std::string> order;
  for (std::size_t j = 0; j < target.basis().size(); ++j) {
    const auto& term = target.basis()[j];
    std::string key;
    for (std::size_t s = 0; s < term.sites().size(); ++s) {
      if (s > 0) key += std::string(static_cast<std::size_t>(term.sites()[s] - term.sites()[s - 1] - 1), '.');
      key += axis_char(term.labels()[s]);
    }
    if (!families.count(key)) order.push_back(key);
    const auto i = *basis->find(term);
    auto& f = families[key];
    f.learned.push_back(r.model.coefficients()[static_cast<Eigen::Index>(i)] * (*basis)[i].prefactor() /
                        term.prefactor());
    f.target_sum += target.coefficients()[static_cast<Eigen::Index>(j)];
  }
  std::ostringstream csv;
  csv << "# " << kEthSchema << "\nfamily,count,target_mean,reference_mean,learned_mean,learned_variance,scale\n";
  for (const auto& key : order) {
    const auto& f = families.at(key);
    const double n = static_cast<double>(f.learned.size());
    const double mean = std::accumulate(f.learned.begin(), f.learned.end(), 0.0) / n;
    double var = 0.0;
    for (double v : f.learned) var += (v - mean) * (v - mean);
    var /= n;
    csv << key << ',' << f.learned.size() << ',' << format_double(f.target_sum / n) << ','
        << format_double(scale * f.target_sum / n) << ',' << format_double(mean) << ',' << format_double(var) << ','
        << format_double(scale) << '\n';
  }
  manifest["eigen_index"] = idx;
  manifest["energy"] = psi.energy;
  manifest["gap_below"] = std::isfinite(gap_below) ? json(gap_below) : json(nullptr);
  manifest["gap_above"] = std::isfinite(gap_above) ? json(gap_above) : json(nullptr);
  manifest["warnings"] = warnings;
  manifest["result"] = result_summary(r);
  manifest.write_output("eth_report.csv", csv.str());
  manifest.write_output("trace_eth.csv", trace_to_csv(r.trace, config.timing));
  manifest.write_output("learned_eth.json", model_to_json(r.model).dump(2) + "\n");
  manifest.finish(seconds_since(t0));
  log(opts, "eth: " + std::string(to_string(r.termination)) + " after " + std::to_string(r.trace.records.back().k) +
                " iterations");
  return r.termination == Termination::Singularity ? 3 : 0;
}

// ---------------------------------------------------------------------------
// Report.

namespace {

struct TraceKey {
  std::string run;
  int L;
  std::string beta, method;
  int k;
  auto operator<=>(const TraceKey&) const = default;
};
struct TraceCell {
  std::vector<double> rel, dmu, fid;
};

struct SweepKey {
  std::string run;
  int L;
  std::string method;
  double beta, delta;
  auto operator<=>(const SweepKey&) const = default;
};
struct SweepCell {
  std::vector<double> dmu, rel, iters, k_below;
  int trials = 0, failed = 0;
};

}  // namespace

int cmd_report(const std::vector<fs::path>& run_dirs, const CommandOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  if (run_dirs.empty()) throw ConfigError("report: no run directories given");
  prepare_out(opts);
  Manifest manifest(nullptr, "report", opts, 0);

  std::map<std::string, std::map<TraceKey, TraceCell>> traces;
  std::map<std::string, std::map<SweepKey, SweepCell>> sweeps;
  std::ostringstream eth;
  bool have_eth = false;
  std::vector<std::string> missing, skipped;

  for (const auto& dir : run_dirs) {
    std::vector<fs::path> manifests;
    if (fs::is_directory(dir)) {
      for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("manifest_", 0) == 0 && entry.path().extension() == ".json" && name != "manifest_report.json") {
          manifests.push_back(entry.path());
        }
      }
    }
    std::sort(manifests.begin(), manifests.end());
    if (manifests.empty()) {
      missing.push_back(dir.string());
      continue;
    }
    for (const auto& mpath : manifests) {
      manifest.add_input(mpath);
      const auto m = json::parse(read_file(mpath));
      require_schema(m, kManifestSchema);
      const std::string command = m.at("command");
      if (command == "generate") continue;
      const std::string fig = m.value("figure", std::string());
      if (fig.empty()) {
        skipped.push_back(mpath.string());
        continue;
      }
      const auto config = parse_run_config(m.at("config"));
      const int L = config.model.num_sites;
      // Runs sharing a figure stay apart: they may encode different readings of it.
      const std::string run = config.name.empty() ? dir.filename().string() : config.name;
      if (command == "learn") {
        auto& table = traces[fig];
        for (const auto& o : m.at("outputs")) {
          const std::string p = o.at("path");
          if (p.rfind("trace_", 0) != 0) continue;
          const auto csv = read_csv(dir / p, kTraceSchema);
          const auto cm = csv.column("method"), ck = csv.column("k"), cr = csv.column("rel_entropy"),
                     cd = csv.column("delta_mu"), cf = csv.column("fidelity");
          for (const auto& row : csv.rows) {
            auto& cell = table[TraceKey{run, L, format_double(config.measurement.beta), row[cm], std::stoi(row[ck])}];
            cell.rel.push_back(cell_double(row[cr]));
            cell.dmu.push_back(cell_double(row[cd]));
            cell.fid.push_back(cell_double(row[cf]));
          }
        }
      } else if (command == "sweep") {
        auto& table = sweeps[fig];
        const auto csv = read_csv(dir / "sweep.csv", kSweepSchema);
        const auto cm = csv.column("method"), cb = csv.column("beta"), cdl = csv.column("delta"),
                   cs = csv.column("status"), ci = csv.column("iterations"), cd = csv.column("final_delta_mu"),
                   cr = csv.column("final_rel_entropy"), ck = csv.column("k_below_1e-3");
        for (const auto& row : csv.rows) {
          auto& cell = table[SweepKey{run, L, row[cm], cell_double(row[cb]), cell_double(row[cdl])}];
          ++cell.trials;
          if (row[cs] != "ok") {
            ++cell.failed;
            continue;
          }
          cell.dmu.push_back(cell_double(row[cd]));
          cell.rel.push_back(cell_double(row[cr]));
          cell.iters.push_back(cell_double(row[ci]));
          cell.k_below.push_back(cell_double(row[ck]));
        }
      } else if (command == "eth") {
        const auto csv = read_csv(dir / "eth_report.csv", kEthSchema);
        for (const auto& row : csv.rows) {
          eth << csv_cell(run) << ','
              << m.at("eigen_index").get<int>() << ',';
          for (std::size_t i = 0; i < row.size(); ++i) eth << (i ? "," : "") << row[i];
          eth << '\n';
        }
        have_eth = true;
      }
    }
  }

  for (const auto& [fig, table] : traces) {
    std::ostringstream csv;
    csv << "# " << kFigureSchema << ' ' << fig << "\n"
        << "run,L,beta,method,k,runs,median_rel_entropy,median_delta_mu,median_fidelity\n";
    for (const auto& [key, cell] : table) {
      csv << csv_cell(key.run) << ',' << key.L << ',' << key.beta << ',' << key.method << ',' << key.k << ',' << cell.rel.size() << ','
          << median_cell(cell.rel) << ',' << median_cell(cell.dmu) << ',' << median_cell(cell.fid) << '\n';
    }
    manifest.write_output(fig + ".csv", csv.str());
  }
  for (const auto& [fig, table] : sweeps) {
    std::ostringstream csv;
    csv << "# " << kFigureSchema << ' ' << fig << "\n"
        << "run,L,method,beta,delta,trials,failed,median_delta_mu,q25_delta_mu,q75_delta_mu,median_rel_entropy,"
           "median_iterations,median_k_below_1e-3\n";
    // Per (run, L, method, beta): median delta_mu against delta, for the power-law fit.
    std::map<std::tuple<std::string, int, std::string, double>, std::pair<std::vector<double>, std::vector<double>>> fits;
    for (const auto& [key, cell] : table) {
      csv << csv_cell(key.run) << ',' << key.L << ',' << key.method << ',' << format_double(key.beta) << ',' << format_double(key.delta) << ','
          << cell.trials << ',' << cell.failed << ',' << median_cell(cell.dmu) << ',' << quantile_cell(cell.dmu, 0.25)
          << ',' << quantile_cell(cell.dmu, 0.75) << ',' << median_cell(cell.rel) << ',' << median_cell(cell.iters)
          << ',' << median_cell(cell.k_below) << '\n';
      const auto f = finite_only(cell.dmu);
      if (key.delta > 0.0 && !f.empty()) {
        auto& fit = fits[{key.run, key.L, key.method, key.beta}];
        fit.first.push_back(key.delta);
        fit.second.push_back(median(f));
      }
    }
    manifest.write_output(fig + ".csv", csv.str());
    if (fig == "fig3") {
      std::ostringstream fit_csv;
      fit_csv << "# " << kFigureSchema << " fig3_fit\nrun,L,method,beta,slope,points\n";
      for (const auto& [key, pts] : fits) {
        std::string slope;
        try {
          slope = format_double(loglog_slope(pts.first, pts.second));
        } catch (const DomainError&) {
        }
        fit_csv << csv_cell(std::get<0>(key)) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
                << format_double(std::get<3>(key)) << ','
                << slope << ',' << pts.first.size() << '\n';
      }
      manifest.write_output("fig3_fit.csv", fit_csv.str());
    }
  }
  if (have_eth) {
    manifest.write_output("fig5.csv", "# " + std::string(kFigureSchema) +
                                          " fig5\nrun,eigen_index,family,count,target_mean,reference_mean,"
                                          "learned_mean,learned_variance,scale\n" +
                                          eth.str());
  }
  manifest["missing_runs"] = missing;
  manifest["skipped"] = skipped;
  for (const auto& m : missing) log(opts, "report: missing run " + m);
  if (traces.empty() && sweeps.empty() && !have_eth && missing.empty()) {
    throw DataError("report: none of the given runs carries a figure key");
  }
  manifest.finish(seconds_since(t0));
  return missing.empty() ? 0 : 2;
}

std::vector<std::string> verify_manifests(const fs::path& dir) {
  std::vector<std::string> problems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("manifest_", 0) != 0 || entry.path().extension() != ".json") continue;
    const auto m = json::parse(read_file(entry.path()));
    for (const auto& o : m.at("outputs")) {
      const fs::path p = dir / o.at("path").get<std::string>();
      if (!fs::exists(p)) {
        problems.push_back(name + ": " + p.filename().string() + " missing");
      } else if (file_sha256(p) != o.at("sha256").get<std::string>()) {
        problems.push_back(name + ": " + p.filename().string() + " digest mismatch");
      }
    }
  }
  return problems;
}

}  // namespace hamlearn

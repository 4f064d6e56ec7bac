#pragma once

#include "hamlearn/baselines.hpp"
#include "hamlearn/gs_learner.hpp"
#include "hamlearn/local_patch.hpp"
#include "hamlearn/mle.hpp"
#include "hamlearn/model_zoo.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hamlearn {

inline constexpr const char* kConfigSchema = "hamlearn.config/1";
inline constexpr const char* kManifestSchema = "hamlearn.manifest/1";
inline constexpr const char* kSweepSchema = "hamlearn.sweep/1";
inline constexpr const char* kEthSchema = "hamlearn.eth/1";
inline constexpr const char* kFigureSchema = "hamlearn.figure/1";
inline constexpr const char* kToolVersion = "hamlearn 0.1.0";

/// How the target state is prepared and read out.
struct MeasurementSpec {
  std::string state = "gibbs";  // gibbs | ground | eigenstate
  std::string kind = "exact";   // exact | shots | noise
  double beta = 1.0;
  std::uint64_t shots = 0;
  double delta = 0.0;
  int eigen_index = 1;
  int locality = 2;                      // measured basis: all k-local strings ...
  std::vector<std::string> descriptors;  // ... unless a custom basis is given
};

/// Multiplier applied to learner.gamma: 1, the number of terms n, or n / beta.
enum class GammaScale { None, Terms, TermsOverBeta };

struct LearnerSpec {
  std::string method = "mle";  // mle | mle-gs | gd | cm | mle-patched
  LearnerConfig mle;           // beta is taken from the measurement
  GsLearnerConfig gs;
  GdConfig gd;
  GammaScale gamma_scale = GammaScale::None;
  int patch_size = 10;
  int patch_margin = 2;
  int cm_locality = 3;
};

struct SweepSpec {
  std::vector<double> betas;           // default: {measurement.beta}
  std::vector<double> deltas;          // default: {measurement.delta}
  std::vector<std::string> methods;    // default: {learner.method}
  int trials = 1;
};

struct RunConfig {
  std::string name;
  std::string figure;  // fig2 | fig3 | fig4 | fig5 | fig6 | fig7 | fig9 | fig10 (optional)
  std::uint64_t seed = 0;
  ModelSpec model;
  bool fixed_model_seed = false;  // model.seed given: every trial uses the same instance
  MeasurementSpec measurement;
  LearnerSpec learner;
  SweepSpec sweep;
  bool timing = false;  // wall_ms column in trace CSVs
  nlohmann::json source;
};

/// Throws ConfigError naming the offending field (e.g. "learner.gamma: must be positive").
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

struct CommandOptions {
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;  // overrides the config's master seed
  int jobs = 0;                       // 0: available parallelism
  bool quiet = false;
};

/// Seeds per (master, axis indices); the same derivation everywhere so runs are reproducible
/// from the manifest alone.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> indices);
std::uint64_t model_seed_for(const RunConfig& config, std::uint64_t master, int trial);

/// Builds the target model and its exact (then shot-sampled or noised) measurement record.
struct GeneratedData {
  HamiltonianModel target;
  MeasurementSet data;
  std::optional<StateVector> state;  // pure targets
  std::uint64_t model_seed = 0;
  std::optional<std::uint64_t> noise_seed;
};
GeneratedData generate_data(const RunConfig& config, std::uint64_t master, int trial, double beta,
                            double delta, std::uint64_t noise_seed);

/// Runs one learner on a generated record. `method` overrides config.learner.method.
LearningResult run_method(const RunConfig& config, const std::string& method, const GeneratedData& gen,
                          double beta, double delta, std::uint64_t noise_seed);

/// First k with delta_mu <= threshold.
std::optional<int> first_below(const IterationTrace& trace, double threshold);

double median(std::vector<double> values);
double quantile(std::vector<double> values, double q);
/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// 0 ok, 2 configuration/input error, 3 numeric failure.
int exit_code_for(const std::exception& e);

// Subcommands. Each writes its files atomically into opts.out together with a
// manifest_<command>.json that lists every output with its SHA-256 digest.
int cmd_generate(const RunConfig& config, const CommandOptions& opts);
int cmd_learn(const RunConfig& config, const CommandOptions& opts);
int cmd_sweep(const RunConfig& config, const CommandOptions& opts);
int cmd_eth(const RunConfig& config, const CommandOptions& opts);
int cmd_report(const std::vector<std::filesystem::path>& run_dirs, const CommandOptions& opts);

/// Reads every manifest in `dir` and checks the listed digests; returns the mismatches.
std::vector<std::string> verify_manifests(const std::filesystem::path& dir);

}  // namespace hamlearn

#pragma once

#include "hamlearn/measurement.hpp"
#include "hamlearn/operators.hpp"
#include "hamlearn/states.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace hamlearn {

enum class GradientKind { Raw, Rescaled };

const char* to_string(GradientKind kind);
GradientKind gradient_kind_from_string(const std::string& name);

struct ZeroInit {};

/// Coefficients i.i.d. uniform on [-range, range] from CounterRng::substream(seed, 0).
struct RandomInit {
  std::uint64_t seed = 0;
  double range = 1.0;
};

using InitSpec = std::variant<ZeroInit, RandomInit, HamiltonianModel>;

HamiltonianModel initial_model(const BasisPtr& basis, const InitSpec& init);

struct LearnerConfig {
  double beta = 1.0;
  double gamma = 1.0;
  GradientKind gradient = GradientKind::Rescaled;
  int g = 2;
  double epsilon = 1e-12;
  int max_iters = 1000;
  InitSpec init = ZeroInit{};
  /// On an NLL increase, halve gamma for that step (up to 5 times) and restore it afterwards.
  bool backoff = false;

  /// A single iterate_step also accepts gamma = 0 (a no-op update).
  void validate(bool allow_zero_gamma = false) const;

  /// gamma = 0.1 with the raw gradient.
  static LearnerConfig raw();
  /// gamma = 1 with the rescaled gradient, g = 2.
  static LearnerConfig rescaled();
};

/// f_g(x) = g x / (x + g - 1); maps (0, inf) monotonically onto (0, g) with f_g(1) = 1.
double tuning_function(double x, int g);

/// Projector weights of the likelihood gradient R:
///   raw:      w = (N_i/N_tot) p / q
///   rescaled: w = (N_i/N_tot) f_g(p / q)
std::vector<SectorWeights> likelihood_gradient(std::span<const SectorProbabilities> model_probs,
                                               const MeasurementSet& data, GradientKind kind,
                                               int g = 2);

struct NegLogLikelihood {
  double value = 0.0;    // M
  double minimum = 0.0;  // M0, the entropy of the data
  /// M - M0, accumulated term by term as sum w q [(p/q) log(p/q) - p/q + 1] so that it stays
  /// accurate far below the rounding level of M itself.
  double relative = 0.0;
  double relative_entropy() const { return relative; }
};

NegLogLikelihood nll(std::span<const SectorProbabilities> model_probs, const MeasurementSet& data);

/// max over terms and sectors of |p / q - 1|; zero exactly when R = I.
double max_ratio_deviation(std::span<const SectorProbabilities> model_probs,
                           const MeasurementSet& data);

/// What a learning loop needs from the current candidate Hamiltonian.
struct ModelEvaluation {
  std::vector<SectorProbabilities> probs;
  std::optional<double> fidelity;
  bool degenerate = false;
};

using Evaluator = std::function<ModelEvaluation(const HamiltonianModel&)>;

/// Exact Gibbs-state probabilities at inverse temperature beta.
Evaluator gibbs_evaluator(double beta);

struct StepMetrics {
  NegLogLikelihood nll;
  double max_ratio_dev = 0.0;
};

struct StepResult {
  HamiltonianModel model;
  StepMetrics metrics;  // evaluated before the step
};

/// One update H_{k+1} = H_k - gamma R_k with the Gibbs state of H_k.
StepResult iterate_step(const HamiltonianModel& model, const MeasurementSet& data,
                        const LearnerConfig& config);

struct TraceRecord {
  int k = 0;
  double nll = 0.0;
  double relative_entropy = 0.0;
  std::optional<double> delta_mu;
  double max_ratio_dev = 0.0;
  double wall_ms = 0.0;
  std::optional<double> fidelity;
  bool degenerate = false;
};

struct IterationTrace {
  std::string method = "mle";
  std::vector<TraceRecord> records;
};

enum class Termination { Converged, MaxIters, Singularity };

const char* to_string(Termination t);

struct LearningResult {
  HamiltonianModel model;
  IterationTrace trace;
  Termination termination = Termination::MaxIters;
  std::string message;
};

/// Iterates until M - M0 < epsilon or max_iters evaluations; logs the Hamiltonian distance
/// each step when the target coefficients are given.
LearningResult run_learning(const MeasurementSet& data, const LearnerConfig& config,
                            const std::optional<Eigen::VectorXd>& target = std::nullopt);

/// Same loop with a caller-supplied way of obtaining the model probabilities.
LearningResult run_learning_with(const MeasurementSet& data, const LearnerConfig& config,
                                 const Evaluator& evaluate,
                                 const std::optional<Eigen::VectorXd>& target = std::nullopt,
                                 std::string method = "mle");

/// ||mu_s - mu_k||_2 / ||mu_s||_2 (identity components are never part of these vectors).
double hamiltonian_distance(const Eigen::VectorXd& target, const Eigen::VectorXd& learned);

/// Dense sum_i (w_i+ P_i+ + w_i- P_i-).
Eigen::MatrixXcd dense_weight_operator(const OperatorBasis& basis,
                                       std::span<const SectorWeights> weights);

/// ||R rho - rho||_F with the raw R of the Gibbs state at beta.
double verify_mle_condition(const HamiltonianModel& model, const MeasurementSet& data, double beta);

/// Delta_k = int_0^1 tr[rho e^{beta s H} R e^{-beta s H} R] ds by composite Simpson rule in the
/// eigenbasis of H (raw R). Cauchy-Schwarz gives Delta_k >= 1.
double delta_k_quadrature(const HamiltonianModel& model, const MeasurementSet& data, double beta,
                          int n_quadrature = 200);

inline constexpr const char* kTraceSchema = "hamlearn.trace/1";

/// CSV with header comment "# hamlearn.trace/1" and columns
/// method,k,M,rel_entropy,delta_mu,max_R_dev,wall_ms,fidelity. Empty cells for absent values;
/// wall_ms is left empty unless include_timing is set so that reruns are byte-identical.
std::string trace_to_csv(const IterationTrace& trace, bool include_timing = false);

/// Shortest round-trip decimal form used in every CSV written by the library.
std::string format_double(double value);

}  // namespace hamlearn

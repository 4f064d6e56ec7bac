#pragma once

#include "hamlearn/mle.hpp"

#include <optional>

namespace hamlearn {

struct GsLearnerConfig {
  double gamma = 0.1;
  GradientKind gradient = GradientKind::Rescaled;
  int g = 2;
  double epsilon = 1e-12;
  int max_iters = 1000;
  InitSpec init = ZeroInit{};
  double degeneracy_tol = 1e-10;
  /// With m > 1, a degenerate step picks the most likely of the m lowest eigenvectors.
  int track_lowlying = 1;

  void validate() const;
  /// The shared loop's view of this config (beta is unused in pure-state mode).
  LearnerConfig as_learner_config() const;
};

/// Pure-state probabilities clamped below at kProbabilityFloor.
std::vector<SectorProbabilities> clamp_probabilities(std::vector<SectorProbabilities> q);

/// Same weights as likelihood_gradient after clamping q.
std::vector<SectorWeights> gs_likelihood_weights(std::span<const SectorProbabilities> psi_probs,
                                                 const MeasurementSet& data, GradientKind kind,
                                                 int g = 2);

/// |<a|b>|.
double fidelity(const StateVector& a, const StateVector& b);

/// Ground-state probabilities of the candidate, with the degeneracy policy of `config`.
Evaluator ground_state_evaluator(const MeasurementSet& data, const GsLearnerConfig& config,
                                 std::optional<StateVector> target_state = std::nullopt);

/// The learner with psi_k = ground state of H_k in place of the Gibbs state. The trace carries
/// the fidelity |<psi_s|psi_k>| when the target state is given; degenerate steps are flagged.
LearningResult run_gs_learning(const MeasurementSet& data, const GsLearnerConfig& config,
                               const std::optional<Eigen::VectorXd>& target = std::nullopt,
                               std::optional<StateVector> target_state = std::nullopt);

/// Learning over an operator set that differs from the target's; judged by relative entropy and
/// fidelity only.
LearningResult restricted_operator_learning(const MeasurementSet& data, const GsLearnerConfig& config,
                                            std::optional<StateVector> target_state = std::nullopt);

/// <psi|R G R|psi> with G = Q (E_0 - H)^-1 Q over the excited eigenvectors and raw R built from
/// the ground state of `model`. Non-positive for a nondegenerate ground state.
double gs_delta_k(const HamiltonianModel& model, const MeasurementSet& data);

}  // namespace hamlearn

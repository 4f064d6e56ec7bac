#include "hamlearn/gs_learner.hpp"

#include "hamlearn/errors.hpp"
#include "hamlearn/measurement.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>

namespace hamlearn {

void GsLearnerConfig::validate() const {
  as_learner_config().validate();
  if (!(degeneracy_tol >= 0.0)) throw ConfigError("degeneracy_tol must be >= 0");
  if (track_lowlying < 1) throw ConfigError("track_lowlying must be >= 1");
}

LearnerConfig GsLearnerConfig::as_learner_config() const {
  LearnerConfig c;
  c.beta = 1.0;
  c.gamma = gamma;
  c.gradient = gradient;
  c.g = g;
  c.epsilon = epsilon;
  c.max_iters = max_iters;
  c.init = init;
  return c;
}

std::vector<SectorProbabilities> clamp_probabilities(std::vector<SectorProbabilities> q) {
  for (auto& s : q) {
    s.plus = std::max(s.plus, kProbabilityFloor);
    s.minus = std::max(s.minus, kProbabilityFloor);
  }
  return q;
}

std::vector<SectorWeights> gs_likelihood_weights(std::span<const SectorProbabilities> psi_probs,
                                                 const MeasurementSet& data, GradientKind kind,
                                                 int g) {
  const auto q = clamp_probabilities({psi_probs.begin(), psi_probs.end()});
  return likelihood_gradient(q, data, kind, g);
}

double fidelity(const StateVector& a, const StateVector& b) {
  if (a.amplitudes.size() != b.amplitudes.size()) throw DimensionError("state dimensions differ");
  return std::min(1.0, std::abs(a.amplitudes.dot(b.amplitudes)));
}

Evaluator ground_state_evaluator(const MeasurementSet& data, const GsLearnerConfig& config,
                                 std::optional<StateVector> target_state) {
  return [&data, tol = config.degeneracy_tol, m = config.track_lowlying,
          target = std::move(target_state)](const HamiltonianModel& model) {
    const Eigen::MatrixXcd h = realize_hamiltonian(model);
    const auto gs = ground_state(h, tol);
    ModelEvaluation out;
    out.degenerate = gs.degenerate;
    StateVector chosen = gs.state;
    out.probs = clamp_probabilities(sector_probabilities(chosen, model.basis()));
    if (gs.degenerate && m > 1) {
      double best = nll(out.probs, data).value;
      for (auto& candidate : lowest_eigenstates(h, m)) {
        auto q = clamp_probabilities(sector_probabilities(candidate, model.basis()));
        const double value = nll(q, data).value;
        if (value < best) {
          best = value;
          out.probs = std::move(q);
          chosen = std::move(candidate);
        }
      }
    }
    if (target) out.fidelity = fidelity(*target, chosen);
    return out;
  };
}

LearningResult run_gs_learning(const MeasurementSet& data, const GsLearnerConfig& config,
                               const std::optional<Eigen::VectorXd>& target,
                               std::optional<StateVector> target_state) {
  config.validate();
  if (target_state && target_state->num_sites != data.basis().num_sites()) {
    throw DimensionError("target state and data differ in chain length");
  }
  return run_learning_with(data, config.as_learner_config(),
                           ground_state_evaluator(data, config, std::move(target_state)), target,
                           "mle-gs");
}

LearningResult restricted_operator_learning(const MeasurementSet& data, const GsLearnerConfig& config,
                                            std::optional<StateVector> target_state) {
  config.validate();
  return run_learning_with(data, config.as_learner_config(),
                           ground_state_evaluator(data, config, std::move(target_state)),
                           std::nullopt, "mle-gs-restricted");
}

double gs_delta_k(const HamiltonianModel& model, const MeasurementSet& data) {
  const Eigen::MatrixXcd h = realize_hamiltonian(model);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const auto& v = eig.eigenvectors();
  const auto& e = eig.eigenvalues();
  const StateVector psi{v.col(0), e[0], model.num_sites()};
  const auto q = sector_probabilities(psi, model.basis());
  const auto weights = gs_likelihood_weights(q, data, GradientKind::Raw);
  const Eigen::MatrixXcd r = dense_weight_operator(model.basis(), weights);
  // R|psi> in the eigenbasis; G is diagonal there with 1/(E_0 - E_n) on excited states.
  const Eigen::VectorXcd c = v.adjoint() * (r * psi.amplitudes);
  double out = 0.0;
  for (Eigen::Index n = 1; n < e.size(); ++n) {
    const double gap = e[0] - e[n];
    if (gap == 0.0) throw SingularityError("degenerate ground state: G is undefined");
    out += std::norm(c[n]) / gap;
  }
  return out;
}

}  // namespace hamlearn

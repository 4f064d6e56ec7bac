#pragma once

#include "hamlearn/mle.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace hamlearn {

// ---------------------------------------------------------------------------
// Gradient descent on F(mu) = log tr exp(-beta H(mu)) + beta sum_j mu_j e_j.

struct GdConfig {
  double beta = 1.0;
  double eta = 1.0;
  int max_iters = 7000;
  double grad_tol = 1e-12;
  InitSpec init = ZeroInit{};

  void validate() const;
};

struct GdObjective {
  double value = 0.0;                      // F(mu)
  Eigen::VectorXd gradient;                // beta (e_j - <O_j>)
  std::vector<SectorProbabilities> probs;  // model sector probabilities at mu
};

GdObjective gd_objective(const HamiltonianModel& model, std::span<const double> expectations,
                         double beta);

/// Steps mu <- mu - eta grad F until ||grad F||_inf < grad_tol or max_iters. The trace uses the
/// learner's schema (NLL of the data under the current model) with method "gd".
/// Throws StepSizeError after 10 consecutive increases of F.
LearningResult gd_log_partition(const MeasurementSet& data, const GdConfig& config,
                                const std::optional<Eigen::VectorXd>& target = std::nullopt);

// ---------------------------------------------------------------------------
// Correlation-matrix (kernel) method.

/// K_mj = -i tr(rho [O_j, A_m]); real for Hermitian rho, O, A.
Eigen::MatrixXd correlation_matrix(const DensityMatrix& rho, const OperatorBasis& basis,
                                   const OperatorBasis& constraints);

struct CmResult {
  Eigen::VectorXd mu_hat;  // unit norm, largest-magnitude entry positive
  double sigma_min = 0.0;
  double sigma_next = 0.0;
  bool ill_conditioned = false;  // sigma_next - sigma_min < 1e-12
};

/// Right-singular vector of the smallest singular value of K. With noise_delta > 0 every
/// entry of K receives i.i.d. N(0, delta^2) noise drawn row-major from substream(noise_seed, 0).
CmResult correlation_matrix_method(const DensityMatrix& rho, const OperatorBasis& basis,
                                   const OperatorBasis& constraints, double noise_delta = 0.0,
                                   std::uint64_t noise_seed = 0);

/// The 3-local constraint set used by default.
BasisPtr default_constraint_basis(int num_sites);

/// alpha* mu_hat with alpha* = argmin ||target - alpha mu_hat||.
Eigen::VectorXd scale_fixed(const Eigen::VectorXd& target, const Eigen::VectorXd& mu_hat);

/// Hamiltonian distance after scale fixing.
double scale_fixed_distance(const Eigen::VectorXd& target, const Eigen::VectorXd& mu_hat);

}  // namespace hamlearn

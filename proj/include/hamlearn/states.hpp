#pragma once

#include "hamlearn/operators.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace hamlearn {

/// H = sum_j mu_j O_j + identity_offset * I over a shared operator basis.
class HamiltonianModel {
 public:
  HamiltonianModel(BasisPtr basis, Eigen::VectorXd coefficients, double identity_offset = 0.0);

  /// All coefficients zero.
  static HamiltonianModel zero(BasisPtr basis);

  const BasisPtr& basis_ptr() const { return basis_; }
  const OperatorBasis& basis() const { return *basis_; }
  int num_sites() const { return basis_->num_sites(); }
  const Eigen::VectorXd& coefficients() const { return coefficients_; }
  double identity_offset() const { return identity_offset_; }

  void set_coefficients(Eigen::VectorXd coefficients);
  void set_identity_offset(double offset);

 private:
  BasisPtr basis_;
  Eigen::VectorXd coefficients_;
  double identity_offset_;
};

struct DensityMatrix {
  Eigen::MatrixXcd matrix;
  int num_sites = 0;
};

struct StateVector {
  Eigen::VectorXcd amplitudes;
  double energy = 0.0;
  int num_sites = 0;
};

/// Probabilities of the +c and -c outcomes of one Pauli term.
struct SectorProbabilities {
  double plus = 0.5;
  double minus = 0.5;
};

Eigen::MatrixXcd realize_hamiltonian(const HamiltonianModel& model);

/// exp(-beta H) / Z via Hermitian eigendecomposition, shifted by the lowest eigenvalue.
DensityMatrix gibbs_state(const Eigen::MatrixXcd& hamiltonian, double beta);

struct ThermalState {
  DensityMatrix rho;
  double log_partition = 0.0;  // log tr exp(-beta H)
};

ThermalState thermal_state(const Eigen::MatrixXcd& hamiltonian, double beta);

/// One eigendecomposition reused across inverse temperatures. Pauli expectations come from the
/// per-eigenvector diagonals <a|O|a>, so no density matrix is formed; this is what makes exact
/// Gibbs data at the top of the dense range affordable for several beta.
class ThermalFamily {
 public:
  explicit ThermalFamily(const Eigen::MatrixXcd& hamiltonian);

  int num_sites() const { return num_sites_; }
  const Eigen::VectorXd& energies() const { return energies_; }

  /// <a|O|a> over the eigenvectors a.
  Eigen::VectorXd diagonal(const PauliTerm& term) const;
  /// Row i holds diagonal(basis[i]).
  Eigen::MatrixXd diagonals(const OperatorBasis& basis) const;

  /// exp(-beta (E_a - E_0)) / Z.
  Eigen::VectorXd boltzmann_weights(double beta) const;

  std::vector<SectorProbabilities> sector_probabilities(const OperatorBasis& basis,
                                                        const Eigen::MatrixXd& diagonals,
                                                        double beta) const;
  std::vector<SectorProbabilities> sector_probabilities(const OperatorBasis& basis, double beta) const;

 private:
  int num_sites_ = 0;
  Eigen::VectorXd energies_;
  Eigen::MatrixXcd vectors_;
};

struct GroundState {
  StateVector state;
  double gap = 0.0;         // E_1 - E_0 (0 for a one-dimensional space)
  bool degenerate = false;  // gap < degeneracy_tol
};

/// Lowest eigenvector; the largest-magnitude amplitude is made real positive.
GroundState ground_state(const Eigen::MatrixXcd& hamiltonian, double degeneracy_tol = 1e-10);

/// The `count` lowest eigenvectors in ascending energy, same phase convention.
std::vector<StateVector> lowest_eigenstates(const Eigen::MatrixXcd& hamiltonian, int count);

/// Full spectrum in ascending order.
Eigen::VectorXd spectrum(const Eigen::MatrixXcd& hamiltonian);

double expectation(const DensityMatrix& rho, const Eigen::MatrixXcd& op);
double expectation(const StateVector& psi, const Eigen::MatrixXcd& op);

/// O(2^L) evaluations of tr[rho O] / <psi|O|psi> for a Pauli term; no matrix is built.
double expectation(const DensityMatrix& rho, const PauliTerm& term);
double expectation(const StateVector& psi, const PauliTerm& term);

SectorProbabilities sector_probabilities(const DensityMatrix& rho, const PauliTerm& term);
SectorProbabilities sector_probabilities(const StateVector& psi, const PauliTerm& term);

std::vector<SectorProbabilities> sector_probabilities(const DensityMatrix& rho,
                                                      const OperatorBasis& basis);
std::vector<SectorProbabilities> sector_probabilities(const StateVector& psi,
                                                      const OperatorBasis& basis);

/// Inclusive contiguous range of sites.
struct SiteRange {
  int first = 0;
  int last = 0;
  int size() const { return last - first + 1; }
};

/// Reduced density matrix on `keep`.
DensityMatrix partial_trace(const DensityMatrix& rho, SiteRange keep);

/// beta >= 0 with <H>_beta = target_energy, found by bisection on [0, 500].
double solve_effective_beta(const HamiltonianModel& model, double target_energy);

/// <H>_beta from a precomputed ascending spectrum (overflow-safe).
double thermal_energy(std::span<const double> energies, double beta);

/// Checks Hermiticity, unit trace and positivity within 1e-10; throws NumericError otherwise.
void validate_density_matrix(const DensityMatrix& rho);

}  // namespace hamlearn

#include "hamlearn/states.hpp"

#include "hamlearn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hamlearn {

namespace {

constexpr double kImagTol = 1e-10;
constexpr double kDensityTol = 1e-10;

std::uint64_t dim_of(int num_sites) { return std::uint64_t{1} << num_sites; }

int sites_of_dim(Eigen::Index dim) {
  int n = 0;
  while ((Eigen::Index{1} << n) < dim) ++n;
  if ((Eigen::Index{1} << n) != dim) throw DimensionError("matrix dimension is not a power of two");
  return n;
}

// Eigenpairs of a Hermitian matrix; takes the real-symmetric path when the imaginary part
// vanishes identically.
struct Eigensystem {
  Eigen::VectorXd values;
  Eigen::MatrixXd real_vectors;     // set when is_real
  Eigen::MatrixXcd complex_vectors;  // set otherwise
  bool is_real = false;
};

std::string diagnostics(const Eigen::MatrixXcd& h) {
  std::ostringstream out;
  out << "dimension " << h.rows() << ", max |H| " << h.cwiseAbs().maxCoeff()
      << ", hermiticity residual " << (h - h.adjoint()).cwiseAbs().maxCoeff();
  return out.str();
}

Eigensystem eigh(const Eigen::MatrixXcd& h) {
  if (h.rows() != h.cols()) throw NumericError("Hamiltonian matrix is not square");
  if (!h.allFinite()) throw NumericError("Hamiltonian has non-finite entries (" + diagnostics(h) + ")");
  Eigensystem out;
  if (h.imag().isZero(0.0)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.real());
    if (es.info() != Eigen::Success) throw NumericError("eigensolver failed: " + diagnostics(h));
    out.values = es.eigenvalues();
    out.real_vectors = es.eigenvectors();
    out.is_real = true;
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    if (es.info() != Eigen::Success) throw NumericError("eigensolver failed: " + diagnostics(h));
    out.values = es.eigenvalues();
    out.complex_vectors = es.eigenvectors();
  }
  return out;
}

Eigen::VectorXcd column(const Eigensystem& es, Eigen::Index j) {
  if (es.is_real) return es.real_vectors.col(j).cast<cplx>();
  return es.complex_vectors.col(j);
}

void fix_phase(Eigen::VectorXcd& v) {
  Eigen::Index best = 0;
  v.cwiseAbs2().maxCoeff(&best);
  const cplx a = v[best];
  v *= std::conj(a) / std::abs(a);
  v[best] = cplx(v[best].real(), 0.0);
}

double checked_real(cplx value) {
  if (std::abs(value.imag()) > kImagTol) {
    throw NumericError("expectation value has imaginary part " + std::to_string(value.imag()));
  }
  return value.real();
}

}  // namespace

// ---------------------------------------------------------------------------
// HamiltonianModel

HamiltonianModel::HamiltonianModel(BasisPtr basis, Eigen::VectorXd coefficients,
                                   double identity_offset)
    : basis_(std::move(basis)), coefficients_(std::move(coefficients)),
      identity_offset_(identity_offset) {
  if (!basis_) throw ConfigError("Hamiltonian model needs a basis");
  if (coefficients_.size() != static_cast<Eigen::Index>(basis_->size())) {
    throw ConfigError("coefficient count " + std::to_string(coefficients_.size()) +
                      " does not match basis size " + std::to_string(basis_->size()));
  }
  if (!coefficients_.allFinite() || !std::isfinite(identity_offset_)) {
    throw NumericError("Hamiltonian coefficients must be finite");
  }
}

HamiltonianModel HamiltonianModel::zero(BasisPtr basis) {
  const auto n = static_cast<Eigen::Index>(basis->size());
  return HamiltonianModel(std::move(basis), Eigen::VectorXd::Zero(n), 0.0);
}

void HamiltonianModel::set_coefficients(Eigen::VectorXd coefficients) {
  if (coefficients.size() != coefficients_.size()) throw ConfigError("coefficient count changed");
  if (!coefficients.allFinite()) throw NumericError("Hamiltonian coefficients must be finite");
  coefficients_ = std::move(coefficients);
}

void HamiltonianModel::set_identity_offset(double offset) {
  if (!std::isfinite(offset)) throw NumericError("identity offset must be finite");
  identity_offset_ = offset;
}

Eigen::MatrixXcd realize_hamiltonian(const HamiltonianModel& model) {
  const int n = model.num_sites();
  require_dense(n);
  const std::uint64_t dim = dim_of(n);
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
  const auto& basis = model.basis();
  for (std::size_t j = 0; j < basis.size(); ++j) {
    const double mu = model.coefficients()[static_cast<Eigen::Index>(j)];
    if (mu == 0.0) continue;
    const PauliAction act = basis[j].action(n);
    for (std::uint64_t a = 0; a < dim; ++a) h(a ^ act.flip, a) += mu * act.phase(a);
  }
  h.diagonal().array() += model.identity_offset();
  return h;
}

// ---------------------------------------------------------------------------
// Gibbs and ground states

DensityMatrix gibbs_state(const Eigen::MatrixXcd& hamiltonian, double beta) {
  return thermal_state(hamiltonian, beta).rho;
}

ThermalState thermal_state(const Eigen::MatrixXcd& hamiltonian, double beta) {
  if (!std::isfinite(beta)) throw DomainError("inverse temperature must be finite");
  const int n = sites_of_dim(hamiltonian.rows());
  const Eigensystem es = eigh(hamiltonian);

  // Boltzmann weights relative to the ground energy; columns whose weight underflows
  // below 1e-300 of the largest are dropped.
  const double e0 = beta >= 0.0 ? es.values[0] : es.values[es.values.size() - 1];
  Eigen::VectorXd w = (-beta * (es.values.array() - e0)).exp();
  const double shifted_z = w.sum();
  w /= shifted_z;
  std::vector<Eigen::Index> keep;
  const double wmax = w.maxCoeff();
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w[j] > 1e-300 * wmax) keep.push_back(j);
  }

  DensityMatrix rho;
  rho.num_sites = n;
  const auto dim = hamiltonian.rows();
  const auto r = static_cast<Eigen::Index>(keep.size());
  if (es.is_real) {
    Eigen::MatrixXd b(dim, r);
    for (Eigen::Index c = 0; c < r; ++c) b.col(c) = es.real_vectors.col(keep[c]) * std::sqrt(w[keep[c]]);
    Eigen::MatrixXd m = b * b.transpose();
    rho.matrix = m.cast<cplx>();
  } else {
    Eigen::MatrixXcd b(dim, r);
    for (Eigen::Index c = 0; c < r; ++c) b.col(c) = es.complex_vectors.col(keep[c]) * std::sqrt(w[keep[c]]);
    rho.matrix = b * b.adjoint();
  }
  return ThermalState{std::move(rho), std::log(shifted_z) - beta * e0};
}

ThermalFamily::ThermalFamily(const Eigen::MatrixXcd& hamiltonian)
    : num_sites_(sites_of_dim(hamiltonian.rows())) {
  Eigensystem es = eigh(hamiltonian);
  energies_ = std::move(es.values);
  vectors_ = es.is_real ? es.real_vectors.cast<cplx>() : std::move(es.complex_vectors);
}

Eigen::VectorXd ThermalFamily::diagonal(const PauliTerm& term) const {
  const auto dim = vectors_.rows();
  const PauliAction act = term.action(num_sites_);
  const auto flip = static_cast<Eigen::Index>(act.flip);
  std::vector<cplx> phase(static_cast<std::size_t>(dim));
  for (Eigen::Index a = 0; a < dim; ++a) phase[static_cast<std::size_t>(a)] = act.phase(static_cast<std::uint64_t>(a));
  Eigen::VectorXd out(dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    const cplx* v = vectors_.col(c).data();
    cplx t{0.0, 0.0};
    for (Eigen::Index a = 0; a < dim; ++a) t += std::conj(v[a ^ flip]) * phase[static_cast<std::size_t>(a)] * v[a];
    out[c] = t.real();
  }
  return out;
}

Eigen::MatrixXd ThermalFamily::diagonals(const OperatorBasis& basis) const {
  if (basis.num_sites() != num_sites_) throw DimensionError("basis and Hamiltonian differ in chain length");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(basis.size()), vectors_.cols());
  for (std::size_t i = 0; i < basis.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = diagonal(basis[i]).transpose();
  return out;
}

Eigen::VectorXd ThermalFamily::boltzmann_weights(double beta) const {
  if (!std::isfinite(beta)) throw DomainError("inverse temperature must be finite");
  const double e0 = beta >= 0.0 ? energies_[0] : energies_[energies_.size() - 1];
  Eigen::VectorXd w = (-beta * (energies_.array() - e0)).exp();
  return w / w.sum();
}

std::vector<SectorProbabilities> ThermalFamily::sector_probabilities(const OperatorBasis& basis,
                                                                     const Eigen::MatrixXd& diagonals,
                                                                     double beta) const {
  if (diagonals.rows() != static_cast<Eigen::Index>(basis.size()) || diagonals.cols() != energies_.size()) {
    throw DimensionError("diagonal table does not match the basis and spectrum");
  }
  const Eigen::VectorXd e = diagonals * boltzmann_weights(beta);
  std::vector<SectorProbabilities> out;
  out.reserve(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const double x = e[static_cast<Eigen::Index>(i)] / basis[i].prefactor();
    out.push_back({0.5 * (1.0 + x), 0.5 * (1.0 - x)});
  }
  return out;
}

std::vector<SectorProbabilities> ThermalFamily::sector_probabilities(const OperatorBasis& basis,
                                                                     double beta) const {
  return sector_probabilities(basis, diagonals(basis), beta);
}

GroundState ground_state(const Eigen::MatrixXcd& hamiltonian, double degeneracy_tol) {
  const int n = sites_of_dim(hamiltonian.rows());
  const Eigensystem es = eigh(hamiltonian);
  GroundState gs;
  gs.state.amplitudes = column(es, 0);
  fix_phase(gs.state.amplitudes);
  gs.state.energy = es.values[0];
  gs.state.num_sites = n;
  gs.gap = es.values.size() > 1 ? es.values[1] - es.values[0] : 0.0;
  gs.degenerate = es.values.size() > 1 && gs.gap < degeneracy_tol;
  return gs;
}

std::vector<StateVector> lowest_eigenstates(const Eigen::MatrixXcd& hamiltonian, int count) {
  const int n = sites_of_dim(hamiltonian.rows());
  const Eigensystem es = eigh(hamiltonian);
  const auto m = std::min<Eigen::Index>(count, es.values.size());
  std::vector<StateVector> out;
  for (Eigen::Index j = 0; j < m; ++j) {
    StateVector s{column(es, j), es.values[j], n};
    fix_phase(s.amplitudes);
    out.push_back(std::move(s));
  }
  return out;
}

Eigen::VectorXd spectrum(const Eigen::MatrixXcd& hamiltonian) {
  if (hamiltonian.imag().isZero(0.0)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hamiltonian.real(), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericError("eigensolver failed: " + diagnostics(hamiltonian));
    return es.eigenvalues();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hamiltonian, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("eigensolver failed: " + diagnostics(hamiltonian));
  return es.eigenvalues();
}

// ---------------------------------------------------------------------------
// Expectations

double expectation(const DensityMatrix& rho, const Eigen::MatrixXcd& op) {
  if (op.rows() != rho.matrix.rows() || op.cols() != rho.matrix.cols()) {
    throw DimensionError("operator and density matrix dimensions differ");
  }
  // tr[rho O] = sum_ab rho_ab O_ba
  return checked_real((rho.matrix.array() * op.transpose().array()).sum());
}

double expectation(const StateVector& psi, const Eigen::MatrixXcd& op) {
  if (op.rows() != psi.amplitudes.size()) throw DimensionError("operator and state dimensions differ");
  return checked_real(psi.amplitudes.dot(op * psi.amplitudes));
}

double expectation(const DensityMatrix& rho, const PauliTerm& term) {
  const PauliAction act = term.action(rho.num_sites);
  const std::uint64_t dim = dim_of(rho.num_sites);
  if (static_cast<std::uint64_t>(rho.matrix.rows()) != dim) {
    throw DimensionError("density matrix dimension does not match its site count");
  }
  // tr[rho O] = sum_a rho(a, a^flip) phase(a)
  cplx acc = 0.0;
  for (std::uint64_t a = 0; a < dim; ++a) acc += rho.matrix(a, a ^ act.flip) * act.phase(a);
  return checked_real(acc);
}

double expectation(const StateVector& psi, const PauliTerm& term) {
  const PauliAction act = term.action(psi.num_sites);
  const std::uint64_t dim = dim_of(psi.num_sites);
  if (static_cast<std::uint64_t>(psi.amplitudes.size()) != dim) {
    throw DimensionError("state dimension does not match its site count");
  }
  // Real states have identically vanishing expectations of imaginary (odd-y) strings.
  if (!term.is_real() && psi.amplitudes.imag().isZero(0.0)) return 0.0;
  cplx acc = 0.0;
  for (std::uint64_t a = 0; a < dim; ++a) {
    acc += std::conj(psi.amplitudes[static_cast<Eigen::Index>(a ^ act.flip)]) * act.phase(a) *
           psi.amplitudes[static_cast<Eigen::Index>(a)];
  }
  return checked_real(acc);
}

namespace {

SectorProbabilities to_sectors(double value, double c) {
  const double x = value / c;
  return {0.5 * (1.0 + x), 0.5 * (1.0 - x)};
}

}  // namespace

SectorProbabilities sector_probabilities(const DensityMatrix& rho, const PauliTerm& term) {
  if (!term.is_real() && rho.matrix.imag().isZero(0.0)) return {0.5, 0.5};
  return to_sectors(expectation(rho, term), term.prefactor());
}

SectorProbabilities sector_probabilities(const StateVector& psi, const PauliTerm& term) {
  return to_sectors(expectation(psi, term), term.prefactor());
}

std::vector<SectorProbabilities> sector_probabilities(const DensityMatrix& rho,
                                                      const OperatorBasis& basis) {
  std::vector<SectorProbabilities> out;
  out.reserve(basis.size());
  for (const auto& t : basis) out.push_back(sector_probabilities(rho, t));
  return out;
}

std::vector<SectorProbabilities> sector_probabilities(const StateVector& psi,
                                                      const OperatorBasis& basis) {
  std::vector<SectorProbabilities> out;
  out.reserve(basis.size());
  for (const auto& t : basis) out.push_back(sector_probabilities(psi, t));
  return out;
}

// ---------------------------------------------------------------------------
// Partial trace

DensityMatrix partial_trace(const DensityMatrix& rho, SiteRange keep) {
  const int n = rho.num_sites;
  if (keep.first < 0 || keep.last >= n || keep.first > keep.last) {
    throw IndexError("kept site range outside [0, " + std::to_string(n) + ")");
  }
  // Index layout (site 0 most significant): a = (left, kept, right).
  const int n_right = n - 1 - keep.last;
  const int n_keep = keep.size();
  const std::uint64_t d_left = dim_of(keep.first);
  const std::uint64_t d_keep = dim_of(n_keep);
  const std::uint64_t d_right = dim_of(n_right);

  DensityMatrix out;
  out.num_sites = n_keep;
  out.matrix = Eigen::MatrixXcd::Zero(d_keep, d_keep);
  for (std::uint64_t l = 0; l < d_left; ++l) {
    for (std::uint64_t r = 0; r < d_right; ++r) {
      const std::uint64_t base = (l << (n_keep + n_right)) | r;
      for (std::uint64_t i = 0; i < d_keep; ++i) {
        const auto ai = static_cast<Eigen::Index>(base | (i << n_right));
        for (std::uint64_t j = 0; j < d_keep; ++j) {
          out.matrix(i, j) += rho.matrix(ai, static_cast<Eigen::Index>(base | (j << n_right)));
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Effective temperature

double thermal_energy(std::span<const double> energies, double beta) {
  const double e0 = energies.front();
  double z = 0.0, ez = 0.0;
  for (double e : energies) {
    const double w = std::exp(-beta * (e - e0));
    z += w;
    ez += w * (e - e0);
  }
  return e0 + ez / z;
}

double solve_effective_beta(const HamiltonianModel& model, double target_energy) {
  const Eigen::VectorXd ev = spectrum(realize_hamiltonian(model));
  const std::span<const double> energies(ev.data(), static_cast<std::size_t>(ev.size()));
  const double width = ev[ev.size() - 1] - ev[0];
  const double tol = 1e-10 * std::max(width, 1e-300);
  constexpr double kBetaMax = 500.0;

  const double e_inf = thermal_energy(energies, 0.0);
  if (std::abs(target_energy - e_inf) <= tol) return 0.0;
  if (target_energy > e_inf) {
    throw DomainError("target energy lies above the infinite-temperature energy");
  }
  if (target_energy <= ev[0]) {
    throw DomainError("target energy lies at or below the ground-state energy");
  }
  if (thermal_energy(energies, kBetaMax) > target_energy + tol) {
    throw DomainError("target energy not reached for beta <= 500");
  }

  double lo = 0.0, hi = kBetaMax;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double e = thermal_energy(energies, mid);
    if (std::abs(e - target_energy) <= tol) return mid;
    if (e > target_energy) lo = mid; else hi = mid;
    if (hi - lo <= 0.0) break;
  }
  return 0.5 * (lo + hi);
}

void validate_density_matrix(const DensityMatrix& rho) {
  const auto& m = rho.matrix;
  const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kDensityTol) throw NumericError("density matrix not Hermitian: " + std::to_string(herm));
  const cplx tr = m.trace();
  if (std::abs(tr - 1.0) > kDensityTol) throw NumericError("density matrix trace deviates from 1");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -kDensityTol) {
    throw NumericError("density matrix has a negative eigenvalue");
  }
}

}  // namespace hamlearn

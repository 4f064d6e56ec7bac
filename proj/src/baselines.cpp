#include "hamlearn/baselines.hpp"

#include "hamlearn/errors.hpp"
#include "hamlearn/rng.hpp"

#include <Eigen/SVD>

#include <chrono>
#include <cmath>
#include <limits>

namespace hamlearn {

namespace {

constexpr int kDivergenceSteps = 10;

bool anticommute(const PauliTerm& a, const PauliTerm& b) {
  int clashes = 0;
  std::size_t i = 0, j = 0;
  while (i < a.sites().size() && j < b.sites().size()) {
    if (a.sites()[i] < b.sites()[j]) {
      ++i;
    } else if (a.sites()[i] > b.sites()[j]) {
      ++j;
    } else {
      if (a.labels()[i] != b.labels()[j]) ++clashes;
      ++i;
      ++j;
    }
  }
  return clashes % 2 == 1;
}

}  // namespace

void GdConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("gd.beta must be positive");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("gd.eta must be positive");
  if (max_iters < 1) throw ConfigError("gd.max_iters must be >= 1");
  if (!(grad_tol >= 0.0)) throw ConfigError("gd.grad_tol must be >= 0");
}

GdObjective gd_objective(const HamiltonianModel& model, std::span<const double> expectations,
                         double beta) {
  const auto n = static_cast<Eigen::Index>(model.basis().size());
  if (static_cast<Eigen::Index>(expectations.size()) != n) {
    throw DimensionError("expectation count differs from the basis size");
  }
  const auto thermal = thermal_state(realize_hamiltonian(model), beta);
  GdObjective out;
  out.probs = sector_probabilities(thermal.rho, model.basis());
  out.gradient.resize(n);
  // The identity offset only shifts log Z by -beta * offset; remove it so F depends on mu alone.
  out.value = thermal.log_partition + beta * model.identity_offset();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double c = model.basis()[static_cast<std::size_t>(j)].prefactor();
    const auto& q = out.probs[static_cast<std::size_t>(j)];
    const double model_e = c * (q.plus - q.minus);
    out.value += beta * model.coefficients()[j] * expectations[static_cast<std::size_t>(j)];
    out.gradient[j] = beta * (expectations[static_cast<std::size_t>(j)] - model_e);
  }
  return out;
}

LearningResult gd_log_partition(const MeasurementSet& data, const GdConfig& config,
                                const std::optional<Eigen::VectorXd>& target) {
  config.validate();
  const auto e = data.expectations();
  LearningResult result{initial_model(data.basis_ptr(), config.init), {}, Termination::MaxIters, {}};
  result.trace.method = "gd";
  auto& model = result.model;

  double previous = std::numeric_limits<double>::infinity();
  int increases = 0;
  auto t0 = std::chrono::steady_clock::now();
  for (int k = 0; k < config.max_iters; ++k) {
    const auto obj = gd_objective(model, e, config.beta);
    const auto q = [&] {
      auto p = obj.probs;
      for (auto& s : p) {
        s.plus = std::max(s.plus, kProbabilityFloor);
        s.minus = std::max(s.minus, kProbabilityFloor);
      }
      return p;
    }();
    const auto m = nll(q, data);
    TraceRecord rec;
    rec.k = k;
    rec.nll = m.value;
    rec.relative_entropy = m.relative_entropy();
    if (target) rec.delta_mu = hamiltonian_distance(*target, model.coefficients());
    rec.max_ratio_dev = max_ratio_deviation(q, data);
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    t0 = std::chrono::steady_clock::now();
    result.trace.records.push_back(rec);

    if (obj.gradient.lpNorm<Eigen::Infinity>() < config.grad_tol) {
      result.termination = Termination::Converged;
      return result;
    }
    increases = obj.value > previous ? increases + 1 : 0;
    if (increases >= kDivergenceSteps) {
      throw StepSizeError("gradient descent objective increased " + std::to_string(kDivergenceSteps) +
                          " consecutive steps; reduce eta");
    }
    previous = obj.value;
    if (k + 1 < config.max_iters) model.set_coefficients(model.coefficients() - config.eta * obj.gradient);
  }
  return result;
}

Eigen::MatrixXd correlation_matrix(const DensityMatrix& rho, const OperatorBasis& basis,
                                   const OperatorBasis& constraints) {
  const int n = rho.num_sites;
  if (basis.num_sites() != n || constraints.num_sites() != n) {
    throw DimensionError("state, basis and constraints differ in chain length");
  }
  const std::uint64_t dim = std::uint64_t{1} << n;
  const auto& r = rho.matrix;
  std::vector<PauliAction> ops, cons;
  for (const auto& t : basis) ops.push_back(t.action(n));
  for (const auto& t : constraints) cons.push_back(t.action(n));

  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(constraints.size()),
                                            static_cast<Eigen::Index>(basis.size()));
  for (std::size_t m = 0; m < constraints.size(); ++m) {
    const auto& a = cons[m];
    for (std::size_t j = 0; j < basis.size(); ++j) {
      // Commuting strings give tr(rho [O, A]) = 0 exactly.
      if (!anticommute(basis[j], constraints[m])) continue;
      const auto& o = ops[j];
      const std::uint64_t f = a.flip ^ o.flip;
      // tr(rho O A) = sum_a rho(a, a^f) phase_A(a) phase_O(a ^ flip_A); [O, A] = 2 O A here.
      cplx t{0.0, 0.0};
      for (std::uint64_t x = 0; x < dim; ++x) {
        t += std::conj(r(static_cast<Eigen::Index>(x ^ f), static_cast<Eigen::Index>(x))) *
             a.phase(x) * o.phase(x ^ a.flip);
      }
      k(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) = (cplx(0.0, -2.0) * t).real();
    }
  }
  return k;
}

CmResult correlation_matrix_method(const DensityMatrix& rho, const OperatorBasis& basis,
                                   const OperatorBasis& constraints, double noise_delta,
                                   std::uint64_t noise_seed) {
  if (constraints.size() < basis.size()) {
    throw ConfigError("constraint basis must have at least as many terms as the learned basis");
  }
  if (!(noise_delta >= 0.0)) throw DomainError("noise strength must be >= 0");
  Eigen::MatrixXd k = correlation_matrix(rho, basis, constraints);
  if (noise_delta > 0.0) {
    auto rng = CounterRng::substream(noise_seed, 0);
    for (Eigen::Index m = 0; m < k.rows(); ++m) {
      for (Eigen::Index j = 0; j < k.cols(); ++j) k(m, j) += noise_delta * standard_normal(rng);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(k, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const Eigen::Index last = sv.size() - 1;
  CmResult out;
  out.mu_hat = svd.matrixV().col(last);
  Eigen::Index imax = 0;
  out.mu_hat.cwiseAbs().maxCoeff(&imax);
  if (out.mu_hat[imax] < 0.0) out.mu_hat = -out.mu_hat;
  out.mu_hat.normalize();
  out.sigma_min = sv[last];
  out.sigma_next = last > 0 ? sv[last - 1] : std::numeric_limits<double>::infinity();
  out.ill_conditioned = out.sigma_next - out.sigma_min < 1e-12;
  return out;
}

BasisPtr default_constraint_basis(int num_sites) { return build_klocal_basis(num_sites, 3); }

Eigen::VectorXd scale_fixed(const Eigen::VectorXd& target, const Eigen::VectorXd& mu_hat) {
  if (target.size() != mu_hat.size()) throw DimensionError("coefficient vectors differ in length");
  const double denom = mu_hat.squaredNorm();
  if (denom == 0.0) throw DomainError("kernel vector is zero");
  return (target.dot(mu_hat) / denom) * mu_hat;
}

double scale_fixed_distance(const Eigen::VectorXd& target, const Eigen::VectorXd& mu_hat) {
  return hamiltonian_distance(target, scale_fixed(target, mu_hat));
}

}  // namespace hamlearn

#include "hamlearn/mle.hpp"

#include "hamlearn/errors.hpp"
#include "hamlearn/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace hamlearn {

namespace {

constexpr double kSingularQ = 1e-300;
constexpr int kMaxBackoff = 5;

void check_sizes(std::span<const SectorProbabilities> q, const MeasurementSet& data) {
  if (q.size() != data.size()) {
    throw DimensionError("model probabilities cover " + std::to_string(q.size()) +
                         " terms, data " + std::to_string(data.size()));
  }
}

// (1 + x) log(1 + x) - x with x = p/q - 1; q times this is p log(p/q) - p + q >= 0, whose sum
// over both sectors is the KL divergence without the cancellation of M - M0.
double kl_kernel(double p, double q) {
  if (q <= 0.0) return 0.0;
  if (p == 0.0) return 1.0;
  const double x = (p - q) / q;
  if (std::abs(x) < 0.1) {
    double term = x * x;
    double sum = 0.0;
    for (int n = 2; n < 40; ++n) {
      const double add = term / (n * (n - 1.0));
      sum += (n % 2 == 0) ? add : -add;
      if (std::abs(add) < 1e-18 * sum) break;
      term *= x;
    }
    return sum;
  }
  return (1.0 + x) * std::log1p(x) - x;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

const char* to_string(GradientKind kind) {
  return kind == GradientKind::Raw ? "raw" : "rescaled";
}

GradientKind gradient_kind_from_string(const std::string& name) {
  if (name == "raw") return GradientKind::Raw;
  if (name == "rescaled") return GradientKind::Rescaled;
  throw ConfigError("unknown gradient kind '" + name + "' (expected raw or rescaled)");
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::MaxIters: return "max_iters";
    case Termination::Singularity: return "singularity";
  }
  return "unknown";
}

HamiltonianModel initial_model(const BasisPtr& basis, const InitSpec& init) {
  if (const auto* given = std::get_if<HamiltonianModel>(&init)) {
    if (!(given->basis() == *basis)) throw ConfigError("initial model uses a different basis");
    return *given;
  }
  if (const auto* r = std::get_if<RandomInit>(&init)) {
    if (!(r->range >= 0.0)) throw ConfigError("random init range must be >= 0");
    auto rng = CounterRng::substream(r->seed, 0);
    Eigen::VectorXd mu(static_cast<Eigen::Index>(basis->size()));
    for (Eigen::Index j = 0; j < mu.size(); ++j) mu[j] = uniform(rng, -r->range, r->range);
    return HamiltonianModel(basis, std::move(mu));
  }
  return HamiltonianModel::zero(basis);
}

void LearnerConfig::validate(bool allow_zero_gamma) const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be positive");
  const bool gamma_ok = allow_zero_gamma ? gamma >= 0.0 : gamma > 0.0;
  if (!gamma_ok || !std::isfinite(gamma)) throw ConfigError("gamma must be positive");
  if (g < 2) throw ConfigError("tuning parameter g must be >= 2");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
}

LearnerConfig LearnerConfig::raw() {
  LearnerConfig c;
  c.gamma = 0.1;
  c.gradient = GradientKind::Raw;
  return c;
}

LearnerConfig LearnerConfig::rescaled() {
  LearnerConfig c;
  c.gamma = 1.0;
  c.gradient = GradientKind::Rescaled;
  c.g = 2;
  return c;
}

double tuning_function(double x, int g) {
  if (g < 2) throw DomainError("tuning parameter g must be >= 2");
  if (!(x > 0.0)) throw DomainError("tuning function needs x > 0");
  if (std::isinf(x)) return static_cast<double>(g);
  return g * x / (x + g - 1.0);
}

std::vector<SectorWeights> likelihood_gradient(std::span<const SectorProbabilities> model_probs,
                                               const MeasurementSet& data, GradientKind kind,
                                               int g) {
  check_sizes(model_probs, data);
  if (kind == GradientKind::Rescaled && g < 2) throw DomainError("tuning parameter g must be >= 2");
  const auto rel = data.relative_weights();
  auto weight = [&](double p, double q, std::size_t i) {
    if (q < kSingularQ) {
      throw SingularityError("model probability " + std::to_string(q) + " of term " +
                             data.basis()[i].label() + " is below 1e-300");
    }
    if (p == 0.0) return 0.0;
    const double x = p / q;
    return rel[i] * (kind == GradientKind::Raw ? x : tuning_function(x, g));
  };
  std::vector<SectorWeights> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[i].plus = weight(data[i].p_plus, model_probs[i].plus, i);
    out[i].minus = weight(data[i].p_minus, model_probs[i].minus, i);
  }
  return out;
}

NegLogLikelihood nll(std::span<const SectorProbabilities> model_probs, const MeasurementSet& data) {
  check_sizes(model_probs, data);
  const auto rel = data.relative_weights();
  NegLogLikelihood out;
  auto add = [&](double p, double q, double w, std::size_t i) {
    if (p > 0.0 && !(q > 0.0)) {
      throw SingularityError("infinite negative log-likelihood: q = 0 where p > 0 for term " +
                             data.basis()[i].label());
    }
    if (p > 0.0) {
      out.value -= w * p * std::log(q);
      out.minimum -= w * p * std::log(p);
    }
    out.relative += w * q * kl_kernel(p, q);
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    add(data[i].p_plus, model_probs[i].plus, rel[i], i);
    add(data[i].p_minus, model_probs[i].minus, rel[i], i);
  }
  return out;
}

double max_ratio_deviation(std::span<const SectorProbabilities> model_probs,
                           const MeasurementSet& data) {
  check_sizes(model_probs, data);
  double worst = 0.0;
  auto dev = [](double p, double q) {
    if (q <= 0.0) return p > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return std::abs(p / q - 1.0);
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    worst = std::max({worst, dev(data[i].p_plus, model_probs[i].plus),
                      dev(data[i].p_minus, model_probs[i].minus)});
  }
  return worst;
}

Evaluator gibbs_evaluator(double beta) {
  return [beta](const HamiltonianModel& model) {
    // The identity offset never changes the state; leaving it out keeps the spectrum small.
    const HamiltonianModel traceless(model.basis_ptr(), model.coefficients(), 0.0);
    const auto rho = gibbs_state(realize_hamiltonian(traceless), beta);
    return ModelEvaluation{sector_probabilities(rho, model.basis()), std::nullopt, false};
  };
}

StepResult iterate_step(const HamiltonianModel& model, const MeasurementSet& data,
                        const LearnerConfig& config) {
  config.validate(true);
  if (!(model.basis() == data.basis())) throw DataError("model and data use different bases");
  const auto q = gibbs_evaluator(config.beta)(model).probs;
  StepMetrics metrics{nll(q, data), max_ratio_deviation(q, data)};
  const auto weights = likelihood_gradient(q, data, config.gradient, config.g);
  const auto delta = projector_weights_to_coefficients(data.basis(), weights);
  HamiltonianModel next(model.basis_ptr(), model.coefficients() - config.gamma * delta.coefficients,
                        model.identity_offset() - config.gamma * delta.identity);
  return StepResult{std::move(next), metrics};
}

LearningResult run_learning(const MeasurementSet& data, const LearnerConfig& config,
                            const std::optional<Eigen::VectorXd>& target) {
  return run_learning_with(data, config, gibbs_evaluator(config.beta), target, "mle");
}

LearningResult run_learning_with(const MeasurementSet& data, const LearnerConfig& config,
                                 const Evaluator& evaluate,
                                 const std::optional<Eigen::VectorXd>& target,
                                 std::string method) {
  config.validate();
  if (target && target->size() != static_cast<Eigen::Index>(data.size())) {
    throw DimensionError("target has " + std::to_string(target->size()) + " coefficients, basis " +
                         std::to_string(data.size()));
  }
  LearningResult result{initial_model(data.basis_ptr(), config.init), {}, Termination::MaxIters, {}};
  result.trace.method = std::move(method);
  auto& model = result.model;

  auto t0 = std::chrono::steady_clock::now();
  ModelEvaluation eval;
  try {
    eval = evaluate(model);
  } catch (const SingularityError& e) {
    result.termination = Termination::Singularity;
    result.message = e.what();
    return result;
  }

  for (int k = 0; k < config.max_iters; ++k) {
    try {
      const auto m = nll(eval.probs, data);
      TraceRecord rec;
      rec.k = k;
      rec.nll = m.value;
      rec.relative_entropy = m.relative_entropy();
      if (target) rec.delta_mu = hamiltonian_distance(*target, model.coefficients());
      rec.max_ratio_dev = max_ratio_deviation(eval.probs, data);
      rec.fidelity = eval.fidelity;
      rec.degenerate = eval.degenerate;

      if (rec.relative_entropy < config.epsilon) {
        rec.wall_ms = elapsed_ms(t0);
        result.trace.records.push_back(rec);
        result.termination = Termination::Converged;
        return result;
      }
      if (k + 1 == config.max_iters) {
        rec.wall_ms = elapsed_ms(t0);
        result.trace.records.push_back(rec);
        break;
      }

      const auto weights = likelihood_gradient(eval.probs, data, config.gradient, config.g);
      const auto delta = projector_weights_to_coefficients(data.basis(), weights);
      double gamma = config.gamma;
      auto propose = [&](double step) {
        return HamiltonianModel(model.basis_ptr(), model.coefficients() - step * delta.coefficients,
                                model.identity_offset() - step * delta.identity);
      };
      HamiltonianModel next = propose(gamma);
      ModelEvaluation next_eval = evaluate(next);
      if (config.backoff) {
        for (int tries = 0; tries < kMaxBackoff && nll(next_eval.probs, data).value > m.value; ++tries) {
          gamma *= 0.5;
          next = propose(gamma);
          next_eval = evaluate(next);
        }
      }
      rec.wall_ms = elapsed_ms(t0);
      result.trace.records.push_back(rec);
      t0 = std::chrono::steady_clock::now();
      model = std::move(next);
      eval = std::move(next_eval);
    } catch (const SingularityError& e) {
      result.termination = Termination::Singularity;
      result.message = e.what();
      return result;
    }
  }
  result.termination = Termination::MaxIters;
  return result;
}

double hamiltonian_distance(const Eigen::VectorXd& target, const Eigen::VectorXd& learned) {
  if (target.size() != learned.size()) {
    throw DimensionError("coefficient vectors differ in length");
  }
  const double norm = target.norm();
  if (norm == 0.0) throw DomainError("target Hamiltonian has zero norm");
  return (target - learned).norm() / norm;
}

Eigen::MatrixXcd dense_weight_operator(const OperatorBasis& basis,
                                       std::span<const SectorWeights> weights) {
  const auto delta = projector_weights_to_coefficients(basis, weights);
  // Reuse the sparse Hamiltonian assembly: sum w P = identity I + sum_j delta_j O_j.
  auto ptr = std::make_shared<const OperatorBasis>(basis);
  return realize_hamiltonian(HamiltonianModel(ptr, delta.coefficients, delta.identity));
}

double verify_mle_condition(const HamiltonianModel& model, const MeasurementSet& data, double beta) {
  const auto rho = gibbs_state(realize_hamiltonian(model), beta);
  const auto q = sector_probabilities(rho, model.basis());
  const auto weights = likelihood_gradient(q, data, GradientKind::Raw);
  const Eigen::MatrixXcd r = dense_weight_operator(model.basis(), weights);
  return (r * rho.matrix - rho.matrix).norm();
}

double delta_k_quadrature(const HamiltonianModel& model, const MeasurementSet& data, double beta,
                          int n_quadrature) {
  if (n_quadrature < 2 || n_quadrature % 2 != 0) {
    throw DomainError("Simpson quadrature needs an even number of intervals >= 2");
  }
  const Eigen::MatrixXcd h = realize_hamiltonian(model);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const Eigen::VectorXd e = eig.eigenvalues().array() - eig.eigenvalues()[0];
  const auto rho = gibbs_state(h, beta);
  const auto q = sector_probabilities(rho, model.basis());
  const auto weights = likelihood_gradient(q, data, GradientKind::Raw);
  const Eigen::MatrixXcd r = dense_weight_operator(model.basis(), weights);
  const Eigen::MatrixXd r2 = (eig.eigenvectors().adjoint() * r * eig.eigenvectors()).cwiseAbs2();
  const Eigen::VectorXd boltz = (-beta * e).array().exp();
  const double z = boltz.sum();

  // integrand(s) = sum_ab |R_ab|^2 exp(-beta (1-s) E_a) exp(-beta s E_b) / Z
  auto integrand = [&](double s) {
    const Eigen::VectorXd left = (-beta * (1.0 - s) * e).array().exp();
    const Eigen::VectorXd right = (-beta * s * e).array().exp();
    return left.dot(r2 * right) / z;
  };
  const double h_step = 1.0 / n_quadrature;
  double sum = integrand(0.0) + integrand(1.0);
  for (int i = 1; i < n_quadrature; ++i) sum += (i % 2 ? 4.0 : 2.0) * integrand(i * h_step);
  return sum * h_step / 3.0;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string trace_to_csv(const IterationTrace& trace, bool include_timing) {
  std::ostringstream out;
  out << "# " << kTraceSchema << '\n';
  out << "method,k,M,rel_entropy,delta_mu,max_R_dev,wall_ms,fidelity\n";
  for (const auto& r : trace.records) {
    out << trace.method << ',' << r.k << ',' << format_double(r.nll) << ','
        << format_double(r.relative_entropy) << ',';
    if (r.delta_mu) out << format_double(*r.delta_mu);
    out << ',' << format_double(r.max_ratio_dev) << ',';
    if (include_timing) out << format_double(r.wall_ms);
    out << ',';
    if (r.fidelity) out << format_double(*r.fidelity);
    out << '\n';
  }
  return out.str();
}

}  // namespace hamlearn

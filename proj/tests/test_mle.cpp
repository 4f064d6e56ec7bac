#include "oracles.hpp"

#include "hamlearn/errors.hpp"
#include "hamlearn/mle.hpp"
#include "hamlearn/model_zoo.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace hamlearn;
using Eigen::MatrixXcd;

namespace {

BasisPtr single_sz() {
  return std::make_shared<const OperatorBasis>(
      1, std::vector<PauliTerm>{PauliTerm({0}, {PauliAxis::Z}, 0.5)});
}

MeasurementSet gibbs_data(const HamiltonianModel& m, double beta) {
  return exact_probabilities(gibbs_state(realize_hamiltonian(m), beta), m.basis_ptr());
}

std::vector<SectorProbabilities> model_probs(const HamiltonianModel& m, double beta) {
  return sector_probabilities(gibbs_state(realize_hamiltonian(m), beta), m.basis());
}

}  // namespace

TEST_CASE("tuning function") {
  for (int g : {2, 3, 7}) CHECK(tuning_function(1.0, g) == 1.0);
  CHECK(tuning_function(3.0, 2) == 1.5);
  for (double x : {10.0, 1e3, 1e9}) CHECK(tuning_function(x, 2) < 2.0);
  double previous = 0.0;
  for (double x = 1e-6; x < 1e6; x *= 1.7) {
    const double f = tuning_function(x, 3);
    CHECK(f > previous);
    CHECK(f > 0.0);
    CHECK(f < 3.0);
    previous = f;
  }
  CHECK_THROWS_AS(tuning_function(0.0, 2), DomainError);
  CHECK_THROWS_AS(tuning_function(-1.0, 2), DomainError);
  CHECK_THROWS_AS(tuning_function(1.0, 1), DomainError);
}

TEST_CASE("likelihood gradient examples") {
  const MeasurementSet data(single_sz(), {TermRecord{std::nullopt, 1.0, 0.0}});
  const std::vector<SectorProbabilities> q{{0.5, 0.5}};
  const auto raw = likelihood_gradient(q, data, GradientKind::Raw);
  CHECK(raw[0].plus == 2.0);
  CHECK(raw[0].minus == 0.0);
  const auto res = likelihood_gradient(q, data, GradientKind::Rescaled, 2);
  CHECK(res[0].plus == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(res[0].minus == 0.0);

  const std::vector<SectorProbabilities> tiny{{1e-301, 1.0 - 1e-301}};
  CHECK_THROWS_AS(likelihood_gradient(tiny, data, GradientKind::Raw), SingularityError);
  const std::vector<SectorProbabilities> wrong(2);
  CHECK_THROWS_AS(likelihood_gradient(wrong, data, GradientKind::Raw), DimensionError);
}

TEST_CASE("gradient at the fixed point is the identity") {
  const auto m = random_2local_chain(3, 21);
  const auto data = gibbs_data(m, 1.0);
  const auto q = model_probs(m, 1.0);
  for (auto kind : {GradientKind::Raw, GradientKind::Rescaled}) {
    const auto w = likelihood_gradient(q, data, kind);
    const auto d = projector_weights_to_coefficients(m.basis(), w);
    CHECK(d.coefficients.lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(d.identity == doctest::Approx(1.0).epsilon(1e-12));
    const MatrixXcd r = dense_weight_operator(m.basis(), w);
    CHECK((r - MatrixXcd::Identity(8, 8)).norm() <= 1e-10);
  }
}

TEST_CASE("tr[rho R] = 1 for any model") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto target = random_2local_chain(3, s);
    const auto model = random_2local_chain(3, 50 + s);
    const auto data = gibbs_data(target, 1.0);
    const auto rho = gibbs_state(realize_hamiltonian(model), 1.0);
    const auto q = sector_probabilities(rho, model.basis());
    const MatrixXcd r = dense_weight_operator(model.basis(), likelihood_gradient(q, data, GradientKind::Raw));
    CHECK((rho.matrix * r).trace().real() == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("negative log-likelihood examples") {
  const auto m = random_2local_chain(3, 2);
  const auto data = gibbs_data(m, 1.0);
  const auto same = nll(model_probs(m, 1.0), data);
  CHECK(same.value == doctest::Approx(same.minimum).epsilon(1e-12));
  CHECK(std::abs(same.relative_entropy()) <= 1e-14);

  const DensityMatrix mixed{MatrixXcd::Identity(8, 8) / 8.0, 3};
  const auto flat = exact_probabilities(mixed, m.basis_ptr());
  const std::vector<SectorProbabilities> half(flat.size(), SectorProbabilities{0.5, 0.5});
  const auto h = nll(half, flat);
  CHECK(h.value == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(h.minimum == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto other = random_2local_chain(3, 30 + s);
    const auto q = model_probs(other, 1.0);
    const auto r = nll(q, data);
    const double kl = oracle::weighted_kl(data, q);
    CHECK(r.relative_entropy() == doctest::Approx(kl).epsilon(1e-10));
    CHECK(r.value - r.minimum == doctest::Approx(kl).epsilon(1e-8));
    CHECK(r.value >= r.minimum);
  }

  const MeasurementSet certain(single_sz(), {TermRecord{std::nullopt, 0.5, 0.5}});
  const std::vector<SectorProbabilities> zero{{1.0, 0.0}};
  CHECK_THROWS_AS(nll(zero, certain), SingularityError);
}

TEST_CASE("relative entropy stays accurate below the rounding level of M") {
  const MeasurementSet data(single_sz(), {TermRecord{std::nullopt, 0.3, 0.7}});
  const double eps = 1e-9;
  const std::vector<SectorProbabilities> q{{0.3 + eps, 0.7 - eps}};
  // KL ~ eps^2 / 2 (1/0.3 + 1/0.7)
  const double expected = 0.5 * eps * eps * (1.0 / 0.3 + 1.0 / 0.7);
  CHECK(nll(q, data).relative_entropy() == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("iterate_step examples") {
  const auto m = random_2local_chain(3, 3);
  const auto data = gibbs_data(m, 1.0);
  LearnerConfig cfg;
  cfg.gamma = 0.7;
  const auto fixed = iterate_step(m, data, cfg);
  CHECK((fixed.model.coefficients() - m.coefficients()).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(fixed.model.identity_offset() == doctest::Approx(m.identity_offset() - 0.7).epsilon(1e-12));
  CHECK(std::abs(fixed.metrics.nll.relative_entropy()) <= 1e-14);

  const auto start = HamiltonianModel::zero(m.basis_ptr());
  cfg.gamma = 0.0;
  const auto still = iterate_step(start, data, cfg);
  CHECK(still.model.coefficients() == start.coefficients());
  CHECK(still.model.identity_offset() == start.identity_offset());

  cfg.gamma = -1.0;
  CHECK_THROWS_AS(iterate_step(start, data, cfg), ConfigError);
  cfg.gamma = 1.0;
  CHECK_THROWS_AS(iterate_step(HamiltonianModel::zero(build_klocal_basis(3, 1)), data, cfg), DataError);
}

TEST_CASE("iterate_step agrees with the dense R oracle") {
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto target = random_2local_chain(3, 40 + s);
    const auto data = gibbs_data(target, 1.0);
    for (bool rescaled : {false, true}) {
      LearnerConfig cfg = rescaled ? LearnerConfig::rescaled() : LearnerConfig::raw();
      HamiltonianModel model = s % 2 ? random_2local_chain(3, 90 + s) : HamiltonianModel::zero(target.basis_ptr());
      const auto step = iterate_step(model, data, cfg);
      const auto ref = oracle::dense_r_step(model, data, 1.0, cfg.gamma, rescaled);
      CHECK((step.model.coefficients() - ref.coefficients).lpNorm<Eigen::Infinity>() <= 1e-12);
      CHECK(step.model.identity_offset() == doctest::Approx(ref.identity).epsilon(1e-12));
    }
  }
}

TEST_CASE("hamiltonian distance") {
  Eigen::VectorXd mu(3);
  mu << 1.0, -2.0, 0.5;
  CHECK(hamiltonian_distance(mu, mu) == 0.0);
  CHECK(hamiltonian_distance(mu, Eigen::VectorXd::Zero(3)) == 1.0);
  CHECK(hamiltonian_distance(mu, 2.0 * mu) == 1.0);
  CHECK_THROWS_AS(hamiltonian_distance(Eigen::VectorXd::Zero(3), mu), DomainError);
  CHECK_THROWS_AS(hamiltonian_distance(mu, Eigen::VectorXd::Zero(2)), DimensionError);
}

TEST_CASE("run_learning termination") {
  const auto m = random_2local_chain(3, 4);
  const auto data = gibbs_data(m, 1.0);
  LearnerConfig cfg;
  cfg.epsilon = 1e300;
  cfg.max_iters = 1;
  const auto one = run_learning(data, cfg);
  CHECK(one.trace.records.size() == 1);
  CHECK(one.termination == Termination::Converged);

  cfg.epsilon = 1e-12;
  cfg.max_iters = 5;
  const auto five = run_learning(data, cfg, m.coefficients());
  CHECK(five.termination == Termination::MaxIters);
  REQUIRE(five.trace.records.size() == 5);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(five.trace.records[k].k == int(k));
    CHECK(std::isfinite(five.trace.records[k].nll));
    CHECK(five.trace.records[k].delta_mu.has_value());
  }
  CHECK(*five.trace.records[0].delta_mu == 1.0);

  cfg.max_iters = 0;
  CHECK_THROWS_AS(run_learning(data, cfg), ConfigError);
  cfg = LearnerConfig{};
  cfg.g = 1;
  CHECK_THROWS_AS(run_learning(data, cfg), ConfigError);
  cfg = LearnerConfig{};
  cfg.epsilon = 0.0;
  CHECK_THROWS_AS(run_learning(data, cfg), ConfigError);
}

TEST_CASE("singular model probabilities end the run with the trace so far") {
  const MeasurementSet data(single_sz(), {TermRecord{std::nullopt, 0.5, 0.5}});
  Eigen::VectorXd mu(1);
  mu << 3000.0;
  LearnerConfig cfg;
  cfg.init = HamiltonianModel(single_sz(), mu);
  const auto r = run_learning(data, cfg);
  CHECK(r.termination == Termination::Singularity);
  CHECK_FALSE(r.message.empty());
}

TEST_CASE("exact data converges and recovers the target") {
  const auto m = random_2local_chain(3, 5);
  const auto data = gibbs_data(m, 1.0);
  LearnerConfig cfg = LearnerConfig::rescaled();
  cfg.max_iters = 20000;
  const auto r = run_learning(data, cfg, m.coefficients());
  CHECK(r.termination == Termination::Converged);
  CHECK(r.trace.records.back().relative_entropy < 1e-12);
  CHECK(*r.trace.records.back().delta_mu < 1e-3);
  // The relative entropy falls by many orders of magnitude along the run.
  CHECK(r.trace.records.front().relative_entropy > 1e6 * r.trace.records.back().relative_entropy);
}

TEST_CASE("monotone likelihood with the raw gradient") {
  for (int L : {3, 4, 5}) {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto m = random_2local_chain(L, 300 + s);
      auto data = gibbs_data(m, 1.0);
      if (s % 2) data = add_gaussian_noise(data, 1e-3, s);
      LearnerConfig cfg = LearnerConfig::raw();
      cfg.gamma = 0.01;
      cfg.epsilon = 1e-300;
      cfg.max_iters = 201;
      const auto r = run_learning(data, cfg);
      REQUIRE(r.trace.records.size() == 201);
      int violations = 0;
      for (std::size_t k = 0; k + 1 < r.trace.records.size(); ++k) {
        if (r.trace.records[k + 1].nll > r.trace.records[k].nll + 1e-10) ++violations;
      }
      CHECK(violations == 0);
    }
  }
}

TEST_CASE("a step from a converged model barely moves it") {
  const auto m = random_2local_chain(3, 6);
  const auto data = gibbs_data(m, 1.0);
  // Default raw step; the residual step size is proportional to gamma.
  LearnerConfig cfg = LearnerConfig::raw();
  cfg.epsilon = 1e-14;
  cfg.max_iters = 100000;
  const auto r = run_learning(data, cfg);
  REQUIRE(r.termination == Termination::Converged);
  const auto step = iterate_step(r.model, data, cfg);
  CHECK((step.model.coefficients() - r.model.coefficients()).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("identity offset of the initial model does not change the trace") {
  const auto m = random_2local_chain(3, 7);
  const auto data = gibbs_data(m, 1.0);
  LearnerConfig cfg;
  cfg.max_iters = 40;
  const auto a = run_learning(data, cfg, m.coefficients());
  cfg.init = HamiltonianModel(m.basis_ptr(), Eigen::VectorXd::Zero(27), 12.75);
  const auto b = run_learning(data, cfg, m.coefficients());
  REQUIRE(a.trace.records.size() == b.trace.records.size());
  for (std::size_t k = 0; k < a.trace.records.size(); ++k) {
    CHECK(std::abs(a.trace.records[k].nll - b.trace.records[k].nll) <= 1e-12);
    CHECK(std::abs(*a.trace.records[k].delta_mu - *b.trace.records[k].delta_mu) <= 1e-12);
  }
}

TEST_CASE("raw and rescaled gradients reach the same model, rescaled faster") {
  const auto m = random_2local_chain(4, 1);
  const auto data = gibbs_data(m, 1.0);
  LearnerConfig raw = LearnerConfig::raw();
  LearnerConfig res = LearnerConfig::rescaled();
  raw.epsilon = res.epsilon = 1e-18;
  raw.max_iters = res.max_iters = 200000;
  const auto a = run_learning(data, raw);
  const auto b = run_learning(data, res);
  REQUIRE(a.termination == Termination::Converged);
  REQUIRE(b.termination == Termination::Converged);
  CHECK((a.model.coefficients() - b.model.coefficients()).norm() <= 1e-6);
  CHECK(b.trace.records.size() < a.trace.records.size());
}

TEST_CASE("backoff keeps the likelihood from rising") {
  const auto m = random_2local_chain(3, 8);
  const auto data = gibbs_data(m, 2.0);
  LearnerConfig cfg = LearnerConfig::raw();
  cfg.beta = 2.0;
  cfg.gamma = 200.0;
  cfg.max_iters = 30;
  cfg.epsilon = 1e-300;
  const auto plain = run_learning(data, cfg);
  cfg.backoff = true;
  const auto safe = run_learning(data, cfg);
  auto rises = [](const LearningResult& r) {
    int n = 0;
    for (std::size_t k = 0; k + 1 < r.trace.records.size(); ++k) {
      if (r.trace.records[k + 1].nll > r.trace.records[k].nll) ++n;
    }
    return n;
  };
  CHECK(rises(plain) > 0);
  CHECK(rises(safe) < rises(plain));
}

TEST_CASE("learned error scales with the data noise") {
  const auto m = random_2local_chain(3, 9);
  const auto exact = gibbs_data(m, 1.0);
  LearnerConfig cfg = LearnerConfig::rescaled();
  cfg.gamma = static_cast<double>(exact.size());
  cfg.epsilon = 1e-30;
  cfg.max_iters = 3000;
  std::vector<double> err;
  for (double delta : {1e-4, 1e-6}) {
    const auto noisy = add_gaussian_noise(exact, delta, 77);
    const auto r = run_learning(noisy, cfg, m.coefficients());
    err.push_back(*r.trace.records.back().delta_mu);
  }
  const double ratio = err[0] / err[1];
  CHECK(ratio >= 10.0);
  CHECK(ratio <= 1000.0);
}

TEST_CASE("maximum-likelihood condition R rho = rho") {
  const auto m = random_2local_chain(4, 10);
  const auto data = gibbs_data(m, 1.0);
  CHECK(verify_mle_condition(m, data, 1.0) <= 1e-10);

  LearnerConfig cfg = LearnerConfig::rescaled();
  cfg.max_iters = 50000;
  const auto r = run_learning(data, cfg);
  REQUIRE(r.termination == Termination::Converged);
  CHECK(verify_mle_condition(r.model, data, 1.0) <= 1e-5);

  CHECK(verify_mle_condition(random_2local_chain(4, 11), data, 1.0) > 0.01);
}

TEST_CASE("Delta_k quadrature") {
  const auto m = random_2local_chain(3, 12);
  const auto data = gibbs_data(m, 1.0);
  CHECK(delta_k_quadrature(m, data, 1.0) == doctest::Approx(1.0).epsilon(1e-9));

  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto target = random_2local_chain(3, 500 + s);
    const auto model = random_2local_chain(3, 600 + s);
    const auto d = gibbs_data(target, 1.0);
    const double a = delta_k_quadrature(model, d, 1.0, 200);
    const double b = delta_k_quadrature(model, d, 1.0, 400);
    CHECK(a >= 1.0 - 1e-9);
    CHECK(std::abs(a - b) <= 1e-8 * std::max(1.0, std::abs(a)));
  }

  // Diagonal target and model commute with R, so Delta_k = tr[rho R^2].
  const auto zbasis = custom_basis(3, {"z", "zz"});
  Eigen::VectorXd mt(zbasis->size()), mm(zbasis->size());
  for (Eigen::Index j = 0; j < mt.size(); ++j) {
    mt[j] = 0.3 * double(j + 1) - 0.7;
    mm[j] = -0.2 * double(j) + 0.4;
  }
  const HamiltonianModel target(zbasis, mt), model(zbasis, mm);
  const auto d = gibbs_data(target, 1.0);
  const auto rho = gibbs_state(realize_hamiltonian(model), 1.0);
  const MatrixXcd r = dense_weight_operator(*zbasis, likelihood_gradient(sector_probabilities(rho, *zbasis), d, GradientKind::Raw));
  const double expected = (rho.matrix * r * r).trace().real();
  CHECK(delta_k_quadrature(model, d, 1.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected >= 1.0);

  CHECK_THROWS_AS(delta_k_quadrature(m, data, 1.0, 3), DomainError);
}

TEST_CASE("trace CSV") {
  IterationTrace t;
  t.method = "mle";
  TraceRecord a;
  a.k = 0;
  a.nll = 0.5;
  a.relative_entropy = 0.25;
  a.delta_mu = 1.0;
  a.max_ratio_dev = 2.0;
  a.wall_ms = 3.5;
  TraceRecord b = a;
  b.k = 1;
  b.delta_mu.reset();
  b.fidelity = 0.875;
  t.records = {a, b};
  const auto csv = trace_to_csv(t);
  CHECK(csv ==
        "# hamlearn.trace/1\n"
        "method,k,M,rel_entropy,delta_mu,max_R_dev,wall_ms,fidelity\n"
        "mle,0,0.5,0.25,1,2,,\n"
        "mle,1,0.5,0.25,,2,,0.875\n");
  const auto timed = trace_to_csv(t, true);
  CHECK(timed.find("mle,0,0.5,0.25,1,2,3.5,\n") != std::string::npos);

  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e-300) == "1e-300");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("initial models") {
  const auto b = build_klocal_basis(3, 2);
  CHECK(initial_model(b, ZeroInit{}).coefficients().norm() == 0.0);
  const auto r1 = initial_model(b, RandomInit{5, 0.5});
  const auto r2 = initial_model(b, RandomInit{5, 0.5});
  CHECK(r1.coefficients() == r2.coefficients());
  CHECK(r1.coefficients().lpNorm<Eigen::Infinity>() <= 0.5);
  CHECK(r1.coefficients().norm() > 0.0);
  CHECK_THROWS_AS(initial_model(b, HamiltonianModel::zero(build_klocal_basis(3, 1))), ConfigError);
  CHECK(gradient_kind_from_string("raw") == GradientKind::Raw);
  CHECK(std::string(to_string(GradientKind::Rescaled)) == "rescaled");
  CHECK_THROWS_AS(gradient_kind_from_string("steep"), ConfigError);
}

#include "hamlearn/local_patch.hpp"

#include "hamlearn/errors.hpp"
#include "hamlearn/io.hpp"

#include <algorithm>
#include <limits>

namespace hamlearn {

using nlohmann::json;

namespace {

constexpr int kNoCut = std::numeric_limits<int>::max();

bool inside(const PauliTerm& term, const Patch& patch) {
  return term.first_site() >= patch.range.first && term.last_site() <= patch.range.last;
}

}  // namespace

std::vector<std::size_t> PatchPlan::terms_of(std::size_t p) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == p) out.push_back(i);
  }
  return out;
}

std::vector<Patch> tile_patches(int num_sites, int patch_size, int margin, int locality) {
  if (num_sites < 1) throw ConfigError("patch plan needs L >= 1");
  if (locality < 1) throw ConfigError("patch plan needs k >= 1");
  if (margin < 0) throw ConfigError("patch margin must be >= 0");
  if (patch_size >= num_sites) return {Patch{SiteRange{0, num_sites - 1}, margin}};
  if (patch_size <= 2 * margin + locality) {
    throw PlanningError("patch size " + std::to_string(patch_size) + " must exceed 2*Lambda + k = " +
                        std::to_string(2 * margin + locality));
  }
  const int stride = patch_size - 2 * margin - (locality - 1);
  std::vector<Patch> out;
  int start = 0;
  for (; start + patch_size < num_sites; start += stride) {
    out.push_back(Patch{SiteRange{start, start + patch_size - 1}, margin});
  }
  out.push_back(Patch{SiteRange{num_sites - patch_size, num_sites - 1}, margin});
  return out;
}

int interior_distance(const PauliTerm& term, const Patch& patch, int num_sites) {
  int d = kNoCut;
  if (patch.range.first > 0) d = std::min(d, term.first_site() - patch.range.first);
  if (patch.range.last < num_sites - 1) d = std::min(d, patch.range.last - term.last_site());
  return d;
}

PatchPlan plan_patches(const OperatorBasis& basis, int patch_size, int margin) {
  PatchPlan plan;
  plan.num_sites = basis.num_sites();
  plan.patch_size = std::min(patch_size, basis.num_sites());
  plan.margin = margin;
  plan.locality = basis.locality();
  plan.patches = tile_patches(basis.num_sites(), patch_size, margin, basis.locality());
  plan.assignment.reserve(basis.size());
  for (const auto& term : basis) {
    std::optional<std::size_t> best;
    int best_distance = -1;
    for (std::size_t p = 0; p < plan.patches.size(); ++p) {
      if (!inside(term, plan.patches[p])) continue;
      const int d = interior_distance(term, plan.patches[p], plan.num_sites);
      if (d < margin) continue;
      if (d > best_distance) {
        best_distance = d;
        best = p;
      }
    }
    if (!best) throw PlanningError("no patch keeps term " + term.label() + " away from the cuts");
    plan.assignment.push_back(*best);
  }
  return plan;
}

PatchPlan plan_patches(int num_sites, int patch_size, int margin, int locality) {
  return plan_patches(*build_klocal_basis(num_sites, locality), patch_size, margin);
}

std::vector<SectorProbabilities> patch_expectations(const HamiltonianModel& model,
                                                    const PatchPlan& plan, double beta) {
  const auto& basis = model.basis();
  if (plan.num_sites != basis.num_sites() || plan.assignment.size() != basis.size()) {
    throw DataError("patch plan does not match the model basis");
  }
  std::vector<SectorProbabilities> out(basis.size());
  for (std::size_t p = 0; p < plan.patches.size(); ++p) {
    const auto assigned = plan.terms_of(p);
    if (assigned.empty()) continue;
    const Patch& patch = plan.patches[p];
    const int n = patch.size();
    require_dense(n);
    const int shift = -patch.start();

    // Truncated Hamiltonian: every model term supported inside the patch, in basis order.
    const std::uint64_t dim = std::uint64_t{1} << n;
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t j = 0; j < basis.size(); ++j) {
      const double mu = model.coefficients()[static_cast<Eigen::Index>(j)];
      if (mu == 0.0 || !inside(basis[j], patch)) continue;
      const PauliAction act = basis[j].shifted(shift).action(n);
      for (std::uint64_t a = 0; a < dim; ++a) h(a ^ act.flip, a) += mu * act.phase(a);
    }
    const ThermalFamily family(h);
    const Eigen::VectorXd w = family.boltzmann_weights(beta);
    for (std::size_t i : assigned) {
      const double x = family.diagonal(basis[i].shifted(shift)).dot(w) / basis[i].prefactor();
      out[i] = {0.5 * (1.0 + x), 0.5 * (1.0 - x)};
    }
  }
  return out;
}

Evaluator patch_evaluator(const PatchPlan& plan, double beta) {
  return [plan, beta](const HamiltonianModel& model) {
    return ModelEvaluation{patch_expectations(model, plan, beta), std::nullopt, false};
  };
}

LearningResult run_patched_learning(const MeasurementSet& data, const LearnerConfig& config,
                                    const PatchPlan& plan,
                                    const std::optional<Eigen::VectorXd>& target) {
  if (plan.num_sites != data.basis().num_sites() || plan.assignment.size() != data.size()) {
    throw DataError("patch plan does not match the data basis");
  }
  return run_learning_with(data, config, patch_evaluator(plan, config.beta), target, "mle-patched");
}

json patch_plan_to_json(const PatchPlan& plan) {
  json patches = json::array();
  for (const auto& p : plan.patches) {
    patches.push_back(json{{"first", p.range.first}, {"last", p.range.last}, {"margin", p.margin}});
  }
  return json{{"schema", kPatchPlanSchema}, {"L", plan.num_sites},     {"L_A", plan.patch_size},
              {"Lambda", plan.margin},      {"k", plan.locality},      {"patches", patches},
              {"assignment", plan.assignment}};
}

PatchPlan patch_plan_from_json(const json& j) {
  require_schema(j, kPatchPlanSchema);
  try {
    PatchPlan plan;
    plan.num_sites = j.at("L").get<int>();
    plan.patch_size = j.at("L_A").get<int>();
    plan.margin = j.at("Lambda").get<int>();
    plan.locality = j.at("k").get<int>();
    for (const auto& p : j.at("patches")) {
      plan.patches.push_back(
          Patch{SiteRange{p.at("first").get<int>(), p.at("last").get<int>()}, p.at("margin").get<int>()});
    }
    plan.assignment = j.at("assignment").get<std::vector<std::size_t>>();
    for (auto a : plan.assignment) {
      if (a >= plan.patches.size()) throw LoadError("patch plan assigns a term to a missing patch");
    }
    return plan;
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed patch plan: ") + e.what());
  }
}

}  // namespace hamlearn

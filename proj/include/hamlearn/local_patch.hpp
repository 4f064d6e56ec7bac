#pragma once

#include "hamlearn/mle.hpp"

#include <json.hpp>

#include <optional>
#include <vector>

namespace hamlearn {

struct Patch {
  SiteRange range;
  int margin = 0;  // required distance from every cut edge

  int start() const { return range.first; }
  int size() const { return range.size(); }
};

/// Overlapping subchains and the patch that evaluates each basis term.
struct PatchPlan {
  int num_sites = 0;
  int patch_size = 0;
  int margin = 0;
  int locality = 0;
  std::vector<Patch> patches;
  std::vector<std::size_t> assignment;  // term index -> patch index

  /// Terms assigned to patch p, in basis order.
  std::vector<std::size_t> terms_of(std::size_t p) const;
};

/// Left edges 0, s, 2s, ... (while the patch ends before the chain does) plus a final patch flush
/// with the right end, s = L_A - 2 Lambda - (k - 1). A patch of size >= L is the whole chain.
/// Throws PlanningError when L_A <= 2 Lambda + k and L_A < L.
std::vector<Patch> tile_patches(int num_sites, int patch_size, int margin, int locality);

/// Plan for an explicit basis: each term goes to the patch where it keeps at least `margin`
/// sites from every cut edge, preferring the largest such distance (lowest index on ties).
PatchPlan plan_patches(const OperatorBasis& basis, int patch_size, int margin);

/// Plan for the full k-local basis of an L-site chain.
PatchPlan plan_patches(int num_sites, int patch_size, int margin, int locality);

/// Distance from the term to the nearest cut edge of the patch (a large value when both patch
/// ends are chain ends).
int interior_distance(const PauliTerm& term, const Patch& patch, int num_sites);

/// Sector probabilities of every basis term from the Gibbs state of the truncated Hamiltonian
/// on its assigned patch (model terms fully inside the patch, boundary couplings dropped).
std::vector<SectorProbabilities> patch_expectations(const HamiltonianModel& model,
                                                    const PatchPlan& plan, double beta);

Evaluator patch_evaluator(const PatchPlan& plan, double beta);

/// The learner with patch_expectations in place of the global Gibbs state.
LearningResult run_patched_learning(const MeasurementSet& data, const LearnerConfig& config,
                                    const PatchPlan& plan,
                                    const std::optional<Eigen::VectorXd>& target = std::nullopt);

inline constexpr const char* kPatchPlanSchema = "hamlearn.patchplan/1";

nlohmann::json patch_plan_to_json(const PatchPlan& plan);
PatchPlan patch_plan_from_json(const nlohmann::json& j);

}  // namespace hamlearn

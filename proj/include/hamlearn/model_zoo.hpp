#pragma once

#include "hamlearn/operators.hpp"
#include "hamlearn/states.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace hamlearn {

/// Random chain: every 2-local coefficient i.i.d. uniform on [-1, 1], drawn in canonical basis
/// order from CounterRng::substream(seed, 0). Spin convention, open boundary.
HamiltonianModel random_2local_chain(int num_sites, std::uint64_t seed);

/// J sum sz sz + g_z sum sz + g_x sum sx with bare Pauli matrices.
/// Basis order: zz bonds, then z sites, then x sites.
HamiltonianModel ltfim(int num_sites, double J = 1.0, double g_x = 0.9045, double g_z = 0.8090);

/// J sum Sz Sz + g sum Sx with S = sigma / 2. Basis order: zz bonds, then x sites.
HamiltonianModel tfim(int num_sites, double J = 1.0, double g = 1.0);

/// Jordan-Wigner image of the interacting Majorana chain:
///   t sum sz - t sum sx sx - g sum sz sz - g sum sx(I)sx    (bare Pauli matrices)
/// Basis order: z sites, xx bonds, zz bonds, x.x next-nearest pairs (4L - 4 terms).
HamiltonianModel majorana_chain_spin(int num_sites, double t, double g = -1.0);

/// Translation-invariant patterns such as "zz", "x.x" or "z" placed at every fitting left site,
/// in descriptor order; explicit terms such as "x0 z1" are taken as written.
BasisPtr custom_basis(int num_sites, const std::vector<std::string>& descriptors,
                      SpinConvention convention = SpinConvention::Spin);

/// Re-expresses `model` over a basis that contains each of its operators (prefactors may differ).
Eigen::VectorXd embed_coefficients(const HamiltonianModel& model, const OperatorBasis& target);

/// Family tag plus parameters; serialized into run manifests.
struct ModelSpec {
  std::string family;  // random_2local | ltfim | tfim | majorana
  int num_sites = 0;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;
};

HamiltonianModel make_model(const ModelSpec& spec);

nlohmann::json model_spec_to_json(const ModelSpec& spec);
/// Throws ConfigError naming the offending field.
ModelSpec model_spec_from_json(const nlohmann::json& j, std::uint64_t default_seed = 0);

/// "term,c,mu" rows for the bar-chart tables.
std::string coefficients_to_csv(const HamiltonianModel& model);

}  // namespace hamlearn

#include "hamlearn/model_zoo.hpp"

#include "hamlearn/errors.hpp"
#include "hamlearn/mle.hpp"
#include "hamlearn/rng.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace hamlearn {

using nlohmann::json;

namespace {

void require_sites(int num_sites, int minimum, const char* family) {
  if (num_sites < minimum) {
    throw DomainError(std::string(family) + " needs L >= " + std::to_string(minimum));
  }
}

/// Appends a translated copy of `pattern` ("x.x", "zz") at every fitting left site.
void place_pattern(int num_sites, const std::string& pattern, SpinConvention convention, std::vector<PauliTerm>& out) {
  if (pattern.empty() || pattern.front() == '.' || pattern.back() == '.') {
    throw ConfigError("bad term pattern '" + pattern + "'");
  }
  std::vector<int> offsets;
  std::vector<PauliAxis> labels;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] == '.') continue;
    offsets.push_back(static_cast<int>(i));
    labels.push_back(axis_from_char(pattern[i]));
  }
  const double c = convention_prefactor(convention, static_cast<int>(offsets.size()));
  const int width = static_cast<int>(pattern.size());
  for (int s = 0; s + width <= num_sites; ++s) {
    std::vector<int> sites;
    for (int o : offsets) sites.push_back(s + o);
    out.emplace_back(std::move(sites), labels, c);
  }
}

HamiltonianModel from_families(int num_sites, const std::vector<std::pair<std::string, double>>& families,
                               SpinConvention convention) {
  std::vector<PauliTerm> terms;
  std::vector<double> mu;
  for (const auto& [pattern, value] : families) {
    const auto before = terms.size();
    place_pattern(num_sites, pattern, convention, terms);
    mu.insert(mu.end(), terms.size() - before, value);
  }
  auto basis = std::make_shared<const OperatorBasis>(num_sites, std::move(terms));
  return HamiltonianModel(std::move(basis),
                          Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size())));
}

double param(const ModelSpec& spec, const std::string& name, double fallback) {
  const auto it = spec.params.find(name);
  return it == spec.params.end() ? fallback : it->second;
}

}  // namespace

HamiltonianModel random_2local_chain(int num_sites, std::uint64_t seed) {
  require_sites(num_sites, 2, "random_2local_chain");
  auto basis = build_klocal_basis(num_sites, 2);
  auto rng = CounterRng::substream(seed, 0);
  Eigen::VectorXd mu(static_cast<Eigen::Index>(basis->size()));
  for (Eigen::Index j = 0; j < mu.size(); ++j) mu[j] = uniform(rng, -1.0, 1.0);
  return HamiltonianModel(std::move(basis), std::move(mu));
}

HamiltonianModel ltfim(int num_sites, double J, double g_x, double g_z) {
  require_sites(num_sites, 2, "ltfim");
  return from_families(num_sites, {{"zz", J}, {"z", g_z}, {"x", g_x}}, SpinConvention::Pauli);
}

HamiltonianModel tfim(int num_sites, double J, double g) {
  require_sites(num_sites, 2, "tfim");
  return from_families(num_sites, {{"zz", J}, {"x", g}}, SpinConvention::Spin);
}

HamiltonianModel majorana_chain_spin(int num_sites, double t, double g) {
  require_sites(num_sites, 3, "majorana_chain_spin");
  return from_families(num_sites, {{"z", t}, {"xx", -t}, {"zz", -g}, {"x.x", -g}},
                       SpinConvention::Pauli);
}

BasisPtr custom_basis(int num_sites, const std::vector<std::string>& descriptors,
                      SpinConvention convention) {
  if (descriptors.empty()) throw ConfigError("custom basis needs at least one descriptor");
  std::vector<PauliTerm> terms;
  for (const auto& d : descriptors) {
    const bool explicit_term = std::any_of(d.begin(), d.end(), [](unsigned char ch) { return std::isdigit(ch); });
    if (explicit_term) {
      auto term = PauliTerm::parse(d, 1.0);
      terms.emplace_back(term.sites(), term.labels(), convention_prefactor(convention, term.weight()));
    } else {
      const auto before = terms.size();
      place_pattern(num_sites, d, convention, terms);
      if (terms.size() == before) throw IndexError("pattern '" + d + "' does not fit on the chain");
    }
  }
  return std::make_shared<const OperatorBasis>(num_sites, std::move(terms));
}

Eigen::VectorXd embed_coefficients(const HamiltonianModel& model, const OperatorBasis& target) {
  if (model.num_sites() != target.num_sites()) throw DimensionError("chain lengths differ");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(target.size()));
  for (std::size_t j = 0; j < model.basis().size(); ++j) {
    const auto& term = model.basis()[j];
    const auto idx = target.find(term);
    if (!idx) throw DataError("term " + term.label() + " is not in the target basis");
    out[static_cast<Eigen::Index>(*idx)] =
        model.coefficients()[static_cast<Eigen::Index>(j)] * term.prefactor() / target[*idx].prefactor();
  }
  return out;
}

HamiltonianModel make_model(const ModelSpec& spec) {
  const int L = spec.num_sites;
  if (spec.family == "random_2local") return random_2local_chain(L, spec.seed);
  if (spec.family == "ltfim") {
    return ltfim(L, param(spec, "J", 1.0), param(spec, "g_x", 0.9045), param(spec, "g_z", 0.8090));
  }
  if (spec.family == "tfim") return tfim(L, param(spec, "J", 1.0), param(spec, "g", 1.0));
  if (spec.family == "majorana") return majorana_chain_spin(L, param(spec, "t", 0.5), param(spec, "g", -1.0));
  throw ConfigError("model.family: unknown family '" + spec.family + "'");
}

json model_spec_to_json(const ModelSpec& spec) {
  return json{{"family", spec.family}, {"L", spec.num_sites}, {"params", spec.params}, {"seed", spec.seed}};
}

ModelSpec model_spec_from_json(const json& j, std::uint64_t default_seed) {
  if (!j.is_object()) throw ConfigError("model: expected an object");
  ModelSpec spec;
  if (!j.contains("family") || !j.at("family").is_string()) throw ConfigError("model.family: missing");
  spec.family = j.at("family").get<std::string>();
  if (!j.contains("L") || !j.at("L").is_number_integer()) throw ConfigError("model.L: missing or not an integer");
  spec.num_sites = j.at("L").get<int>();
  if (spec.num_sites < 1) throw ConfigError("model.L: must be positive");
  spec.seed = default_seed;
  if (j.contains("seed")) {
    const auto& seed = j.at("seed");
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) throw ConfigError("model.seed: expected a non-negative integer");
    spec.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("params")) {
    if (!j.at("params").is_object()) throw ConfigError("model.params: expected an object");
    for (const auto& [key, value] : j.at("params").items()) {
      if (!value.is_number()) throw ConfigError("model.params." + key + ": expected a number");
      spec.params[key] = value.get<double>();
    }
  }
  static const std::vector<std::string> known{"random_2local", "ltfim", "tfim", "majorana"};
  if (std::find(known.begin(), known.end(), spec.family) == known.end()) {
    throw ConfigError("model.family: unknown family '" + spec.family + "'");
  }
  return spec;
}

std::string coefficients_to_csv(const HamiltonianModel& model) {
  std::ostringstream out;
  out << "# hamlearn.coefficients/1\nterm,c,mu\n";
  for (std::size_t j = 0; j < model.basis().size(); ++j) {
    out << model.basis()[j].label() << ',' << format_double(model.basis()[j].prefactor()) << ','
        << format_double(model.coefficients()[static_cast<Eigen::Index>(j)]) << '\n';
  }
  return out.str();
}

}  // namespace hamlearn

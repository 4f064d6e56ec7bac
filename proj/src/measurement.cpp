#include "hamlearn/measurement.hpp"

#include "hamlearn/errors.hpp"
#include "hamlearn/io.hpp"
#include "hamlearn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hamlearn {

using nlohmann::json;

namespace {

constexpr double kNormTol = 1e-12;

template <typename State>
MeasurementSet exact_from(const State& state, BasisPtr basis, std::string source) {
  if (state.num_sites != basis->num_sites()) {
    throw DimensionError("state has " + std::to_string(state.num_sites) + " sites, basis " +
                         std::to_string(basis->num_sites()));
  }
  std::vector<TermRecord> records;
  records.reserve(basis->size());
  for (const auto& term : *basis) {
    const auto p = sector_probabilities(state, term);
    // Clip round-off outside [0, 1]; p_- is defined as the complement so the pair sums to 1.
    const double plus = std::clamp(p.plus, 0.0, 1.0);
    records.push_back(TermRecord{std::nullopt, plus, 1.0 - plus});
  }
  Provenance prov;
  prov.source = std::move(source);
  return MeasurementSet(std::move(basis), std::move(records), std::move(prov));
}

}  // namespace

MeasurementSet::MeasurementSet(BasisPtr basis, std::vector<TermRecord> records,
                               Provenance provenance)
    : basis_(std::move(basis)), records_(std::move(records)), provenance_(std::move(provenance)) {
  if (!basis_) throw DataError("measurement set needs a basis");
  if (records_.size() != basis_->size()) {
    throw DataError("measurement set has " + std::to_string(records_.size()) +
                    " records for a basis of " + std::to_string(basis_->size()) + " terms");
  }
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    const auto name = (*basis_)[i].label();
    if (!(r.p_plus >= 0.0 && r.p_plus <= 1.0 && r.p_minus >= 0.0 && r.p_minus <= 1.0)) {
      throw DataError("probabilities outside [0, 1] for term " + name);
    }
    if (std::abs(r.p_plus + r.p_minus - 1.0) > kNormTol) {
      throw DataError("probabilities of term " + name + " do not sum to 1");
    }
    if (r.shots && *r.shots == 0) throw DataError("zero shot count for term " + name);
  }
}

bool MeasurementSet::all_exact() const {
  return std::all_of(records_.begin(), records_.end(), [](const TermRecord& r) { return r.exact(); });
}

std::vector<double> MeasurementSet::relative_weights() const {
  double total = 0.0;
  for (const auto& r : records_) total += r.weight();
  std::vector<double> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.weight() / total);
  return out;
}

std::vector<double> MeasurementSet::expectations() const {
  std::vector<double> out;
  out.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    out.push_back((*basis_)[i].prefactor() * (records_[i].p_plus - records_[i].p_minus));
  }
  return out;
}

MeasurementSet exact_probabilities(const DensityMatrix& rho, BasisPtr basis, std::string source) {
  return exact_from(rho, std::move(basis), std::move(source));
}

MeasurementSet exact_probabilities(const StateVector& psi, BasisPtr basis, std::string source) {
  return exact_from(psi, std::move(basis), std::move(source));
}

MeasurementSet exact_probabilities(const std::vector<SectorProbabilities>& probs, BasisPtr basis,
                                   std::string source) {
  if (probs.size() != basis->size()) throw DimensionError("probability count differs from the basis size");
  std::vector<TermRecord> records;
  records.reserve(probs.size());
  for (const auto& p : probs) {
    const double plus = std::clamp(p.plus, 0.0, 1.0);
    records.push_back(TermRecord{std::nullopt, plus, 1.0 - plus});
  }
  Provenance prov;
  prov.source = std::move(source);
  return MeasurementSet(std::move(basis), std::move(records), std::move(prov));
}

MeasurementSet sample_shots(const MeasurementSet& exact, std::uint64_t shots, std::uint64_t seed) {
  if (!exact.all_exact()) throw DataError("shot sampling needs exact probabilities");
  if (shots < 1) throw DomainError("shot count must be at least 1");
  std::vector<TermRecord> records;
  records.reserve(exact.size());
  for (std::size_t i = 0; i < exact.size(); ++i) {
    auto rng = CounterRng::substream(seed, i);
    const double p = exact[i].p_plus;
    std::uint64_t hits = 0;
    for (std::uint64_t s = 0; s < shots; ++s) hits += uniform01(rng) < p ? 1 : 0;
    const double n = static_cast<double>(shots);
    records.push_back(TermRecord{shots, static_cast<double>(hits) / n,
                                 static_cast<double>(shots - hits) / n});
  }
  Provenance prov = exact.provenance();
  prov.sample_seed = seed;
  return MeasurementSet(exact.basis_ptr(), std::move(records), std::move(prov));
}

MeasurementSet add_gaussian_noise(const MeasurementSet& data, double delta, std::uint64_t seed) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw DomainError("noise strength must be >= 0");
  if (delta == 0.0) return data;
  std::vector<TermRecord> records;
  records.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto rng = CounterRng::substream(seed, i);
    const double c = data.basis()[i].prefactor();
    const auto& r = data[i];
    const double value = c * (r.p_plus - r.p_minus) + delta * standard_normal(rng);
    double plus = std::clamp(0.5 + value / (2.0 * c), kProbabilityFloor, 1.0 - kProbabilityFloor);
    double minus = std::clamp(0.5 - value / (2.0 * c), kProbabilityFloor, 1.0 - kProbabilityFloor);
    const double norm = plus + minus;
    records.push_back(TermRecord{r.shots, plus / norm, minus / norm});
  }
  Provenance prov = data.provenance();
  prov.noise_delta = delta;
  prov.noise_seed = seed;
  return MeasurementSet(data.basis_ptr(), std::move(records), std::move(prov));
}

// ---------------------------------------------------------------------------
// Persistence: one header line, then one record per term.

namespace {

json provenance_to_json(const Provenance& p) {
  json j{{"source", p.source}, {"noise_delta", p.noise_delta}};
  j["noise_seed"] = p.noise_seed ? json(*p.noise_seed) : json(nullptr);
  j["sample_seed"] = p.sample_seed ? json(*p.sample_seed) : json(nullptr);
  return j;
}

Provenance provenance_from_json(const json& j) {
  Provenance p;
  p.source = j.at("source").get<std::string>();
  p.noise_delta = j.at("noise_delta").get<double>();
  if (!j.at("noise_seed").is_null()) p.noise_seed = j.at("noise_seed").get<std::uint64_t>();
  if (!j.at("sample_seed").is_null()) p.sample_seed = j.at("sample_seed").get<std::uint64_t>();
  return p;
}

}  // namespace

std::string dataset_to_string(const MeasurementSet& data) {
  const auto& basis = data.basis();
  std::ostringstream out;
  json header{{"schema", kDatasetSchema},
              {"L", basis.num_sites()},
              {"k", basis.locality()},
              {"terms", basis.size()},
              {"provenance", provenance_to_json(data.provenance())}};
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data[i];
    json rec{{"i", i}, {"term", basis[i].label()}, {"c", basis[i].prefactor()}};
    rec["N"] = r.shots ? json(*r.shots) : json("exact");
    rec["p"] = {r.p_plus, r.p_minus};
    out << rec.dump() << '\n';
  }
  return out.str();
}

MeasurementSet dataset_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw LoadError("dataset is empty");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw LoadError(std::string("dataset header is not valid JSON: ") + e.what());
  }
  require_schema(header, kDatasetSchema);

  const int num_sites = header.at("L").get<int>();
  const int k = header.at("k").get<int>();
  const auto count = header.at("terms").get<std::size_t>();
  std::vector<PauliTerm> terms;
  std::vector<TermRecord> records;
  terms.reserve(count);
  records.reserve(count);
  try {
    while (records.size() < count && std::getline(in, line)) {
      if (line.empty()) continue;
      const json rec = json::parse(line);
      if (rec.at("i").get<std::size_t>() != records.size()) throw LoadError("dataset records out of order");
      terms.push_back(term_from_json(rec));
      TermRecord r;
      if (!rec.at("N").is_string()) r.shots = rec.at("N").get<std::uint64_t>();
      else if (rec.at("N").get<std::string>() != "exact") throw LoadError("bad shot count field");
      r.p_plus = rec.at("p").at(0).get<double>();
      r.p_minus = rec.at("p").at(1).get<double>();
      records.push_back(r);
    }
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed dataset record: ") + e.what());
  }
  if (records.size() != count) {
    throw LoadError("dataset truncated: header announces " + std::to_string(count) +
                    " terms, found " + std::to_string(records.size()));
  }
  auto basis = std::make_shared<const OperatorBasis>(num_sites, k, std::move(terms));
  return MeasurementSet(std::move(basis), std::move(records),
                        provenance_from_json(header.at("provenance")));
}

void save_dataset(const MeasurementSet& data, const std::filesystem::path& path) {
  write_file_atomic(path, dataset_to_string(data));
}

MeasurementSet load_dataset(const std::filesystem::path& path) {
  return dataset_from_string(read_file(path));
}

}  // namespace hamlearn

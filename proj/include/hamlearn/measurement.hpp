#pragma once

#include "hamlearn/operators.hpp"
#include "hamlearn/states.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hamlearn {

inline constexpr const char* kDatasetSchema = "hamlearn.dataset/1";

/// Floor applied to noisy probabilities so that log p and 1/q stay finite.
inline constexpr double kProbabilityFloor = 1e-15;

/// Outcome statistics of one measured term. `shots` is N_i; exact (noise-free expectation)
/// records carry no shot count and a nominal weight of 1.
struct TermRecord {
  std::optional<std::uint64_t> shots;
  double p_plus = 0.5;
  double p_minus = 0.5;

  bool exact() const { return !shots.has_value(); }
  double weight() const { return shots ? static_cast<double>(*shots) : 1.0; }
  bool operator==(const TermRecord&) const = default;
};

struct Provenance {
  std::string source;  // e.g. "gibbs beta=1 random_2local L=7 seed=3"
  double noise_delta = 0.0;
  std::optional<std::uint64_t> noise_seed;
  std::optional<std::uint64_t> sample_seed;
  bool operator==(const Provenance&) const = default;
};

/// Per-term outcome statistics {O_i, N_i, p_lambda_i} over an operator basis.
class MeasurementSet {
 public:
  MeasurementSet(BasisPtr basis, std::vector<TermRecord> records, Provenance provenance = {});

  const BasisPtr& basis_ptr() const { return basis_; }
  const OperatorBasis& basis() const { return *basis_; }
  const std::vector<TermRecord>& records() const { return records_; }
  const TermRecord& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const { return records_.size(); }
  const Provenance& provenance() const { return provenance_; }

  bool all_exact() const;
  /// N_i / N_tot per term.
  std::vector<double> relative_weights() const;
  /// <O_i> = c_i (p_+ - p_-) per term.
  std::vector<double> expectations() const;

 private:
  BasisPtr basis_;
  std::vector<TermRecord> records_;
  Provenance provenance_;
};

MeasurementSet exact_probabilities(const DensityMatrix& rho, BasisPtr basis, std::string source = "");
MeasurementSet exact_probabilities(const StateVector& psi, BasisPtr basis, std::string source = "");
/// Exact records from precomputed sector probabilities (clipped to [0, 1], p_- = 1 - p_+).
MeasurementSet exact_probabilities(const std::vector<SectorProbabilities>& probs, BasisPtr basis,
                                   std::string source = "");

/// Per-term binomial draw of N shots; term i uses CounterRng::substream(seed, i).
MeasurementSet sample_shots(const MeasurementSet& exact, std::uint64_t shots, std::uint64_t seed);

/// <O_i> -> <O_i> + delta * z_i with z_i ~ N(0, 1) drawn from CounterRng::substream(seed, i),
/// then p = 1/2 +- <O_i>'/(2c) clamped to [1e-15, 1 - 1e-15] and renormalized.
MeasurementSet add_gaussian_noise(const MeasurementSet& data, double delta, std::uint64_t seed);

void save_dataset(const MeasurementSet& data, const std::filesystem::path& path);
MeasurementSet load_dataset(const std::filesystem::path& path);

/// Dataset text (header manifest line + one JSON record per term).
std::string dataset_to_string(const MeasurementSet& data);
MeasurementSet dataset_from_string(const std::string& text);

}  // namespace hamlearn

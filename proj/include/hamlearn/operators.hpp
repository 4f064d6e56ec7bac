#pragma once

#include <Eigen/Dense>

#include <bit>
#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hamlearn {

using cplx = std::complex<double>;

/// Dense routines refuse Hilbert spaces above 2^kMaxDenseSites.
inline constexpr int kMaxDenseSites = 14;

/// Throws DimensionError when `num_sites` exceeds the dense cap.
void require_dense(int num_sites);

enum class PauliAxis : std::uint8_t { X, Y, Z };

char axis_char(PauliAxis axis);
PauliAxis axis_from_char(char c);

/// Spin: S^a = sigma^a / 2, so an n-site product carries prefactor 2^-n.
/// Pauli: bare sigma strings, prefactor 1.
enum class SpinConvention { Spin, Pauli };

double convention_prefactor(SpinConvention convention, int num_sites);

enum class Boundary { Open, Periodic };

/// Bit-level action of a Pauli string on computational basis states.
///
/// Site s is bit (L-1-s), so site 0 is the leftmost Kronecker factor.
/// The operator maps |a> to phase(a) |a ^ flip>, phase(a) = base * (-1)^popcount(a & sign_mask).
struct PauliAction {
  std::uint64_t flip = 0;
  std::uint64_t sign_mask = 0;
  cplx base{1.0, 0.0};

  cplx phase(std::uint64_t a) const {
    return (std::popcount(a & sign_mask) & 1) ? -base : base;
  }
};

/// c * (sigma^{a_1}_{s_1} ... sigma^{a_n}_{s_n}) with c > 0; its spectrum is {+c, -c}.
class PauliTerm {
 public:
  PauliTerm(std::vector<int> sites, std::vector<PauliAxis> labels, double prefactor);

  /// Parses a compact label such as "x0 z1" or "z3".
  static PauliTerm parse(const std::string& label, double prefactor);

  const std::vector<int>& sites() const { return sites_; }
  const std::vector<PauliAxis>& labels() const { return labels_; }
  double prefactor() const { return prefactor_; }

  int first_site() const { return sites_.front(); }
  int last_site() const { return sites_.back(); }
  int span() const { return last_site() - first_site() + 1; }
  int weight() const { return static_cast<int>(sites_.size()); }
  int num_y() const;
  /// True when the realized matrix is real (even number of sigma^y factors).
  bool is_real() const { return num_y() % 2 == 0; }

  PauliTerm shifted(int offset) const;
  /// Site s maps to bit L-1-s; at most 63 sites.
  PauliAction action(int num_sites) const;

  /// "x0 z1" style label (prefactor not included).
  std::string label() const;

  /// Same sites and axes (prefactor ignored).
  bool same_operator(const PauliTerm& other) const;
  bool operator==(const PauliTerm& other) const = default;

 private:
  std::vector<int> sites_;
  std::vector<PauliAxis> labels_;
  double prefactor_;
};

/// An ordered, duplicate-free list of Pauli terms on an open chain of `num_sites` sites.
/// Every term acts on at most `locality` contiguous sites.
class OperatorBasis {
 public:
  /// Locality is inferred as the widest term span.
  OperatorBasis(int num_sites, std::vector<PauliTerm> terms);
  /// A negative locality is inferred the same way.
  OperatorBasis(int num_sites, int locality, std::vector<PauliTerm> terms);

  int num_sites() const { return num_sites_; }
  int locality() const { return locality_; }
  std::size_t size() const { return terms_.size(); }
  const PauliTerm& operator[](std::size_t i) const { return terms_[i]; }
  const std::vector<PauliTerm>& terms() const { return terms_; }
  auto begin() const { return terms_.begin(); }
  auto end() const { return terms_.end(); }

  std::optional<std::size_t> find(const PauliTerm& term) const;

  bool operator==(const OperatorBasis& other) const = default;

 private:
  int num_sites_;
  int locality_;
  std::vector<PauliTerm> terms_;
};

using BasisPtr = std::shared_ptr<const OperatorBasis>;

/// All k-local Pauli terms of an open chain in canonical order: single-site terms by site then
/// axis (x, y, z), then two-site terms by left site then axis pair (xx, xy, ..., zz), then
/// wider spans by left site with interior identities allowed ("x.x" sorts before "xxx").
/// For k = 2 and L >= 2 this gives 12L - 9 terms; k = 3 adds 36(L - 2).
BasisPtr build_klocal_basis(int num_sites, int k, Boundary boundary = Boundary::Open,
                            SpinConvention convention = SpinConvention::Spin);

/// Dense 2^L x 2^L matrix of a term.
Eigen::MatrixXcd realize_matrix(const PauliTerm& term, int num_sites);

struct SpectralDecomposition {
  std::vector<double> eigenvalues;          // {+c, -c}
  std::vector<Eigen::MatrixXcd> projectors;  // P_+ = (I + O/c)/2, P_- = (I - O/c)/2
};

SpectralDecomposition spectral_projectors(const PauliTerm& term, int num_sites);

/// Weights of the two spectral sectors of one term.
struct SectorWeights {
  double plus = 0.0;
  double minus = 0.0;
};

/// Ordinary-basis form of sum_i (w_i+ P_i+ + w_i- P_i-).
struct CoefficientDelta {
  Eigen::VectorXd coefficients;  // (w+ - w-) / (2c) per term
  double identity = 0.0;         // sum (w+ + w-) / 2
};

CoefficientDelta projector_weights_to_coefficients(const OperatorBasis& basis,
                                                   std::span<const SectorWeights> weights);

}  // namespace hamlearn

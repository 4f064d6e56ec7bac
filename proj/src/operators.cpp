#include "hamlearn/operators.hpp"

#include "hamlearn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hamlearn {

void require_dense(int num_sites) {
  if (num_sites < 1) throw ConfigError("site count must be positive");
  if (num_sites > kMaxDenseSites) {
    throw DimensionError("dense Hilbert space 2^" + std::to_string(num_sites) +
                         " exceeds the cap 2^" + std::to_string(kMaxDenseSites));
  }
}

char axis_char(PauliAxis axis) {
  switch (axis) {
    case PauliAxis::X: return 'x';
    case PauliAxis::Y: return 'y';
    case PauliAxis::Z: return 'z';
  }
  return '?';
}

PauliAxis axis_from_char(char c) {
  switch (c) {
    case 'x': case 'X': return PauliAxis::X;
    case 'y': case 'Y': return PauliAxis::Y;
    case 'z': case 'Z': return PauliAxis::Z;
    default: break;
  }
  throw ConfigError(std::string("unknown Pauli axis '") + c + "'");
}

double convention_prefactor(SpinConvention convention, int num_sites) {
  return convention == SpinConvention::Spin ? std::ldexp(1.0, -num_sites) : 1.0;
}

// ---------------------------------------------------------------------------
// PauliTerm

PauliTerm::PauliTerm(std::vector<int> sites, std::vector<PauliAxis> labels, double prefactor)
    : sites_(std::move(sites)), labels_(std::move(labels)), prefactor_(prefactor) {
  if (sites_.empty()) throw ConfigError("Pauli term needs at least one site");
  if (sites_.size() != labels_.size()) {
    throw ConfigError("Pauli term: sites and labels differ in length");
  }
  if (!(prefactor_ > 0.0) || !std::isfinite(prefactor_)) {
    throw ConfigError("Pauli term prefactor must be positive and finite");
  }
  if (sites_.front() < 0) throw IndexError("negative site index");
  for (std::size_t i = 1; i < sites_.size(); ++i) {
    if (sites_[i] <= sites_[i - 1]) {
      throw ConfigError("Pauli term sites must be strictly increasing");
    }
  }
}

PauliTerm PauliTerm::parse(const std::string& label, double prefactor) {
  std::istringstream in(label);
  std::string token;
  std::vector<int> sites;
  std::vector<PauliAxis> labels;
  while (in >> token) {
    if (token.size() < 2) throw ConfigError("bad Pauli token '" + token + "'");
    labels.push_back(axis_from_char(token[0]));
    try {
      std::size_t used = 0;
      sites.push_back(std::stoi(token.substr(1), &used));
      if (used != token.size() - 1) throw ConfigError("bad Pauli token '" + token + "'");
    } catch (const std::logic_error&) {
      throw ConfigError("bad Pauli token '" + token + "'");
    }
  }
  return PauliTerm(std::move(sites), std::move(labels), prefactor);
}

int PauliTerm::num_y() const {
  return static_cast<int>(std::count(labels_.begin(), labels_.end(), PauliAxis::Y));
}

PauliTerm PauliTerm::shifted(int offset) const {
  std::vector<int> sites = sites_;
  for (int& s : sites) s += offset;
  return PauliTerm(std::move(sites), labels_, prefactor_);
}

PauliAction PauliTerm::action(int num_sites) const {
  if (last_site() >= num_sites) {
    throw IndexError("term " + label() + " does not fit on " + std::to_string(num_sites) +
                     " sites");
  }
  if (num_sites > 63) throw DimensionError("bit-level Pauli actions support at most 63 sites");
  PauliAction act;
  // i^{n_y} X^x Z^z site by site; Y = i X Z.
  static constexpr cplx kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    const std::uint64_t bit = std::uint64_t{1} << (num_sites - 1 - sites_[i]);
    if (labels_[i] != PauliAxis::Z) act.flip |= bit;
    if (labels_[i] != PauliAxis::X) act.sign_mask |= bit;
  }
  act.base = prefactor_ * kIPow[num_y() % 4];
  return act;
}

std::string PauliTerm::label() const {
  std::string out;
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    if (i) out += ' ';
    out += axis_char(labels_[i]);
    out += std::to_string(sites_[i]);
  }
  return out;
}

bool PauliTerm::same_operator(const PauliTerm& other) const {
  return sites_ == other.sites_ && labels_ == other.labels_;
}

// ---------------------------------------------------------------------------
// OperatorBasis

namespace {

int widest_span(const std::vector<PauliTerm>& terms) {
  int k = 0;
  for (const auto& t : terms) k = std::max(k, t.span());
  return k;
}

}  // namespace

OperatorBasis::OperatorBasis(int num_sites, std::vector<PauliTerm> terms)
    : OperatorBasis(num_sites, -1, std::move(terms)) {}

OperatorBasis::OperatorBasis(int num_sites, int locality, std::vector<PauliTerm> terms)
    : num_sites_(num_sites), locality_(locality), terms_(std::move(terms)) {
  if (num_sites_ < 1) throw ConfigError("basis needs at least one site");
  if (terms_.empty()) throw ConfigError("operator basis is empty");
  if (locality_ < 0) locality_ = widest_span(terms_);
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const auto& t = terms_[i];
    if (t.last_site() >= num_sites_) {
      throw IndexError("term " + t.label() + " outside chain of " + std::to_string(num_sites_) +
                       " sites");
    }
    if (t.span() > locality_) {
      throw ConfigError("term " + t.label() + " exceeds locality " + std::to_string(locality_));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (terms_[j].same_operator(t)) throw ConfigError("duplicate term " + t.label());
    }
  }
}

std::optional<std::size_t> OperatorBasis::find(const PauliTerm& term) const {
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (terms_[i].same_operator(term)) return i;
  }
  return std::nullopt;
}

BasisPtr build_klocal_basis(int num_sites, int k, Boundary boundary, SpinConvention convention) {
  if (num_sites < 1) throw ConfigError("k-local basis needs L >= 1");
  if (k < 1 || k > 3) throw ConfigError("k-local basis supports k in {1, 2, 3}");
  if (boundary != Boundary::Open) throw ConfigError("only open boundaries are supported");

  constexpr PauliAxis kAxes[3] = {PauliAxis::X, PauliAxis::Y, PauliAxis::Z};
  std::vector<PauliTerm> terms;
  // Grouped by span; within a span by left site, then interior factors (identity first) with
  // the rightmost factor varying fastest.
  for (int w = 1; w <= std::min(k, num_sites); ++w) {
    for (int s = 0; s + w <= num_sites; ++s) {
      // Digit 0 = identity (interior only), 1..3 = x, y, z.
      std::vector<int> digits(static_cast<std::size_t>(w), 0);
      digits.front() = 1;
      digits.back() = 1;
      while (true) {
        std::vector<int> sites;
        std::vector<PauliAxis> labels;
        for (int i = 0; i < w; ++i) {
          if (digits[i] == 0) continue;
          sites.push_back(s + i);
          labels.push_back(kAxes[digits[i] - 1]);
        }
        const double c = convention_prefactor(convention, static_cast<int>(sites.size()));
        terms.emplace_back(std::move(sites), std::move(labels), c);
        int pos = w - 1;
        for (; pos >= 0; --pos) {
          const int lo = (pos == 0 || pos == w - 1) ? 1 : 0;
          if (++digits[pos] <= 3) break;
          digits[pos] = lo;
        }
        if (pos < 0) break;
      }
    }
  }
  return std::make_shared<const OperatorBasis>(num_sites, k, std::move(terms));
}

Eigen::MatrixXcd realize_matrix(const PauliTerm& term, int num_sites) {
  require_dense(num_sites);
  const PauliAction act = term.action(num_sites);
  const std::uint64_t dim = std::uint64_t{1} << num_sites;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  for (std::uint64_t a = 0; a < dim; ++a) m(a ^ act.flip, a) = act.phase(a);
  return m;
}

SpectralDecomposition spectral_projectors(const PauliTerm& term, int num_sites) {
  const Eigen::MatrixXcd op = realize_matrix(term, num_sites);
  const double c = term.prefactor();
  const auto identity = Eigen::MatrixXcd::Identity(op.rows(), op.cols());
  SpectralDecomposition out;
  out.eigenvalues = {c, -c};
  out.projectors.push_back(0.5 * (identity + op / c));
  out.projectors.push_back(0.5 * (identity - op / c));
  return out;
}

CoefficientDelta projector_weights_to_coefficients(const OperatorBasis& basis,
                                                   std::span<const SectorWeights> weights) {
  if (weights.size() != basis.size()) {
    throw DataError("sector weights given for " + std::to_string(weights.size()) +
                    " terms, basis has " + std::to_string(basis.size()));
  }
  CoefficientDelta out;
  out.coefficients.resize(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const auto& w = weights[i];
    if (!std::isfinite(w.plus) || !std::isfinite(w.minus)) {
      throw DataError("missing sector weight for term " + basis[i].label());
    }
    out.coefficients[static_cast<Eigen::Index>(i)] = (w.plus - w.minus) / (2.0 * basis[i].prefactor());
    out.identity += 0.5 * (w.plus + w.minus);
  }
  return out;
}

}  // namespace hamlearn

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <sstream>
#include <tuple>
#include <utility>

#include "spin1q/statevector.hpp"

namespace spin1q {

// Pauli string on n <= 64 qubits in symplectic form: the factor on qubit q is
// i^(x_q z_q) X^(x_q) Z^(z_q), with qubit q stored at mask bit (n-1-q) so that mask
// bits line up with amplitude-index bits of StateVector. The i^(x z) factor makes
// the (1,1) pattern exactly Y, so every string is Hermitian.
class PauliString {
 public:
  PauliString() = default;

  static PauliString identity(int n) { return PauliString(n, 0, 0); }

  static PauliString from_masks(int n, std::uint64_t x, std::uint64_t z) {
    if (n < 0 || n > 64) throw std::invalid_argument("PauliString: qubit count outside [0, 64]");
    if (n < 64 && ((x | z) >> n) != 0)
      throw std::invalid_argument("PauliString: mask bits beyond qubit count");
    return PauliString(n, x, z);
  }

  // One character per qubit, leftmost = qubit 0, e.g. "XIZY".
  static PauliString from_label(const std::string& label) {
    const int n = static_cast<int>(label.size());
    PauliString p = from_masks(n, 0, 0);
    for (int q = 0; q < n; ++q) p.set_op(q, label[q]);
    return p;
  }

  static PauliString single(int n, int qubit, char op) {
    PauliString p = from_masks(n, 0, 0);
    p.set_op(qubit, op);
    return p;
  }

  int n_qubits() const { return n_; }
  std::uint64_t x_mask() const { return x_; }
  std::uint64_t z_mask() const { return z_; }

  void set_op(int qubit, char op) {
    if (qubit < 0 || qubit >= n_) throw std::invalid_argument("PauliString: qubit out of range");
    const std::uint64_t bit = std::uint64_t{1} << (n_ - 1 - qubit);
    x_ &= ~bit;
    z_ &= ~bit;
    switch (op) {
      case 'I': break;
      case 'X': x_ |= bit; break;
      case 'Y': x_ |= bit; z_ |= bit; break;
      case 'Z': z_ |= bit; break;
      default:
        throw std::invalid_argument(std::string("PauliString: invalid operator '") + op + "'");
    }
  }

  char op_at(int qubit) const {
    if (qubit < 0 || qubit >= n_) throw std::invalid_argument("PauliString: qubit out of range");
    const std::uint64_t bit = std::uint64_t{1} << (n_ - 1 - qubit);
    const bool x = x_ & bit, z = z_ & bit;
    return x ? (z ? 'Y' : 'X') : (z ? 'Z' : 'I');
  }

  std::string label() const {
    std::string s(static_cast<std::size_t>(n_), 'I');
    for (int q = 0; q < n_; ++q) s[static_cast<std::size_t>(q)] = op_at(q);
    return s;
  }

  int weight() const { return std::popcount(x_ | z_); }
  bool is_identity() const { return (x_ | z_) == 0; }
  // True when the string contains an odd number of Y factors. Generators of this
  // parity have purely imaginary matrix entries, so exp(-i theta P) preserves real
  // amplitudes.
  bool odd_y_count() const { return std::popcount(x_ & z_) & 1; }

  friend bool operator==(const PauliString& a, const PauliString& b) = default;
  // Canonical term order inside a PauliSum.
  friend bool operator<(const PauliString& a, const PauliString& b) {
    return std::tie(a.n_, a.x_, a.z_) < std::tie(b.n_, b.x_, b.z_);
  }

 private:
  PauliString(int n, std::uint64_t x, std::uint64_t z) : n_(n), x_(x), z_(z) {}

  int n_ = 0;
  std::uint64_t x_ = 0;
  std::uint64_t z_ = 0;
};

// Product of two strings: P Q = i^quarter R with quarter in {0,1,2,3}.
struct PauliProduct {
  int phase_quarter = 0;
  PauliString string;

  cplx phase() const {
    switch (phase_quarter & 3) {
      case 0: return {1.0, 0.0};
      case 1: return {0.0, 1.0};
      case 2: return {-1.0, 0.0};
      default: return {0.0, -1.0};
    }
  }
};

inline PauliProduct multiply(const PauliString& p, const PauliString& q) {
  if (p.n_qubits() != q.n_qubits())
    throw std::invalid_argument("multiply: qubit count mismatch");
  const std::uint64_t xr = p.x_mask() ^ q.x_mask();
  const std::uint64_t zr = p.z_mask() ^ q.z_mask();
  // Collect the i^(x z) factors of the operands and the result, plus the
  // anticommutation sign from moving Z factors of p past X factors of q.
  int k = std::popcount(p.x_mask() & p.z_mask()) + std::popcount(q.x_mask() & q.z_mask()) -
          std::popcount(xr & zr) + 2 * std::popcount(p.z_mask() & q.x_mask());
  k = ((k % 4) + 4) % 4;
  return {k, PauliString::from_masks(p.n_qubits(), xr, zr)};
}

// Re-index a string on a small register to qubits [offset, offset + local n) of an
// n_total register, identity elsewhere.
inline PauliString embed(const PauliString& local, int n_total, int offset) {
  const int nl = local.n_qubits();
  if (offset < 0 || offset + nl > n_total)
    throw std::invalid_argument("embed: target window out of range");
  const int shift = n_total - nl - offset;
  return PauliString::from_masks(n_total, local.x_mask() << shift, local.z_mask() << shift);
}

// P|psi>, using P|b> = i^(|x&z|) (-1)^(|z&b|) |b^x>.
inline void apply_inplace(const PauliString& p, StateVector& psi) {
  if (p.n_qubits() != psi.n_qubits())
    throw std::invalid_argument("apply: qubit count mismatch");
  const std::uint64_t x = p.x_mask(), z = p.z_mask();
  cplx ig;
  switch (std::popcount(x & z) & 3) {
    case 0: ig = {1.0, 0.0}; break;
    case 1: ig = {0.0, 1.0}; break;
    case 2: ig = {-1.0, 0.0}; break;
    default: ig = {0.0, -1.0}; break;
  }
  const std::size_t d = psi.dim();
  if (x == 0) {
    for (std::size_t b = 0; b < d; ++b) {
      const double sign = (std::popcount(z & b) & 1) ? -1.0 : 1.0;
      psi[b] *= ig * sign;
    }
    return;
  }
  const std::uint64_t pivot = std::uint64_t{1} << (63 - std::countl_zero(x));
  for (std::size_t b = 0; b < d; ++b) {
    if (b & pivot) continue;
    const std::size_t c = b ^ x;
    const double sb = (std::popcount(z & b) & 1) ? -1.0 : 1.0;
    const double sc = (std::popcount(z & c) & 1) ? -1.0 : 1.0;
    const cplx ab = psi[b], ac = psi[c];
    psi[b] = ig * sc * ac;
    psi[c] = ig * sb * ab;
  }
}

inline StateVector apply_string(const PauliString& p, const StateVector& psi) {
  StateVector out = psi;
  apply_inplace(p, out);
  return out;
}

// exp(-i theta P)|psi> = cos(theta)|psi> - i sin(theta) P|psi>, in place.
// P must not be the identity; rotating by a global phase is always a bug upstream.
inline void exp_apply_inplace(const PauliString& p, double theta, StateVector& psi) {
  if (p.n_qubits() != psi.n_qubits())
    throw std::invalid_argument("exp_apply: qubit count mismatch");
  if (p.is_identity()) throw std::invalid_argument("exp_apply: identity generator");
  const double c = std::cos(theta), s = std::sin(theta);
  const std::uint64_t x = p.x_mask(), z = p.z_mask();
  cplx ig;
  switch (std::popcount(x & z) & 3) {
    case 0: ig = {1.0, 0.0}; break;
    case 1: ig = {0.0, 1.0}; break;
    case 2: ig = {-1.0, 0.0}; break;
    default: ig = {0.0, -1.0}; break;
  }
  const cplx mis = cplx(0.0, -1.0) * s;  // -i sin(theta)
  const std::size_t d = psi.dim();
  if (x == 0) {
    for (std::size_t b = 0; b < d; ++b) {
      const double sign = (std::popcount(z & b) & 1) ? -1.0 : 1.0;
      psi[b] *= c + mis * ig * sign;
    }
    return;
  }
  const std::uint64_t pivot = std::uint64_t{1} << (63 - std::countl_zero(x));
  for (std::size_t b = 0; b < d; ++b) {
    if (b & pivot) continue;
    const std::size_t cc = b ^ x;
    const double sb = (std::popcount(z & b) & 1) ? -1.0 : 1.0;
    const double sc = (std::popcount(z & cc) & 1) ? -1.0 : 1.0;
    const cplx ab = psi[b], ac = psi[cc];
    psi[b] = c * ab + mis * ig * sc * ac;
    psi[cc] = c * ac + mis * ig * sb * ab;
  }
}

inline StateVector exp_apply(const PauliString& p, double theta, const StateVector& psi) {
  StateVector out = psi;
  exp_apply_inplace(p, theta, out);
  return out;
}

// Real linear combination of Pauli strings, kept canonical: terms sorted by mask,
// equal strings merged, coefficients with |c| <= tol::coeff_prune dropped. Operators
// here are Hermitian by construction; building one whose merged coefficients keep an
// imaginary part above tol::imag_residue throws instead of silently truncating.
class PauliSum {
 public:
  struct Term {
    double coeff;
    PauliString string;
  };

  explicit PauliSum(int n) : n_(n) {
    if (n < 0 || n > 64) throw std::invalid_argument("PauliSum: qubit count outside [0, 64]");
  }

  static PauliSum from_terms(int n, std::vector<std::pair<cplx, PauliString>> raw) {
    PauliSum s(n);
    std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) {
      return a.second < b.second;
    });
    std::size_t i = 0;
    while (i < raw.size()) {
      if (raw[i].second.n_qubits() != n)
        throw std::invalid_argument("PauliSum: term qubit count mismatch");
      cplx c = raw[i].first;
      std::size_t j = i + 1;
      while (j < raw.size() && raw[j].second == raw[i].second) c += raw[j++].first;
      if (std::abs(c) > tol::coeff_prune) {
        if (std::abs(c.imag()) > tol::imag_residue)
          throw std::runtime_error("PauliSum: non-Hermitian result, imaginary coefficient " +
                                   std::to_string(c.imag()) + " on " + raw[i].second.label());
        s.terms_.push_back({c.real(), raw[i].second});
      }
      i = j;
    }
    return s;
  }

  static PauliSum single(double coeff, const PauliString& p) {
    return from_terms(p.n_qubits(), {{cplx(coeff, 0.0), p}});
  }

  int n_qubits() const { return n_; }
  const std::vector<Term>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  friend bool operator==(const PauliSum& a, const PauliSum& b) {
    if (a.n_ != b.n_ || a.terms_.size() != b.terms_.size()) return false;
    for (std::size_t i = 0; i < a.terms_.size(); ++i)
      if (!(a.terms_[i].string == b.terms_[i].string) ||
          a.terms_[i].coeff != b.terms_[i].coeff)
        return false;
    return true;
  }

 private:
  int n_;
  std::vector<Term> terms_;
};

inline bool approx_equal(const PauliSum& a, const PauliSum& b, double atol = 1e-12) {
  if (a.n_qubits() != b.n_qubits()) return false;
  // Coefficients near the prune threshold may survive in one operand only; compare
  // on the union of terms.
  std::map<std::pair<std::uint64_t, std::uint64_t>, double> diff;
  for (const auto& t : a.terms()) diff[{t.string.x_mask(), t.string.z_mask()}] += t.coeff;
  for (const auto& t : b.terms()) diff[{t.string.x_mask(), t.string.z_mask()}] -= t.coeff;
  for (const auto& [mask, c] : diff)
    if (std::abs(c) > atol) return false;
  return true;
}

inline PauliSum sum_add(const PauliSum& a, const PauliSum& b) {
  if (a.n_qubits() != b.n_qubits()) throw std::invalid_argument("sum_add: qubit count mismatch");
  std::vector<std::pair<cplx, PauliString>> raw;
  raw.reserve(a.size() + b.size());
  for (const auto& t : a.terms()) raw.emplace_back(cplx(t.coeff, 0.0), t.string);
  for (const auto& t : b.terms()) raw.emplace_back(cplx(t.coeff, 0.0), t.string);
  return PauliSum::from_terms(a.n_qubits(), std::move(raw));
}

inline PauliSum sum_scale(double c, const PauliSum& a) {
  std::vector<std::pair<cplx, PauliString>> raw;
  raw.reserve(a.size());
  for (const auto& t : a.terms()) raw.emplace_back(cplx(c * t.coeff, 0.0), t.string);
  return PauliSum::from_terms(a.n_qubits(), std::move(raw));
}

// Operator product, canonicalized. Throws if the result fails the Hermiticity
// residue check, which catches products of non-commuting operands that have no
// real-coefficient representation.
inline PauliSum sum_multiply(const PauliSum& a, const PauliSum& b) {
  if (a.n_qubits() != b.n_qubits())
    throw std::invalid_argument("sum_multiply: qubit count mismatch");
  std::vector<std::pair<cplx, PauliString>> raw;
  raw.reserve(a.size() * b.size());
  for (const auto& ta : a.terms())
    for (const auto& tb : b.terms()) {
      PauliProduct pr = multiply(ta.string, tb.string);
      raw.emplace_back(ta.coeff * tb.coeff * pr.phase(), pr.string);
    }
  return PauliSum::from_terms(a.n_qubits(), std::move(raw));
}

// (ab + ba)/2. Unlike sum_multiply of either order alone, the symmetrized product of
// two Hermitian sums is Hermitian, so the imaginary parts cancel inside one
// canonicalization pass instead of tripping the residue check.
inline PauliSum sum_anticommutator(const PauliSum& a, const PauliSum& b) {
  if (a.n_qubits() != b.n_qubits())
    throw std::invalid_argument("sum_anticommutator: qubit count mismatch");
  std::vector<std::pair<cplx, PauliString>> raw;
  raw.reserve(2 * a.size() * b.size());
  for (const auto& ta : a.terms())
    for (const auto& tb : b.terms()) {
      PauliProduct ab = multiply(ta.string, tb.string);
      PauliProduct ba = multiply(tb.string, ta.string);
      const cplx c = 0.5 * ta.coeff * tb.coeff;
      raw.emplace_back(c * ab.phase(), ab.string);
      raw.emplace_back(c * ba.phase(), ba.string);
    }
  return PauliSum::from_terms(a.n_qubits(), std::move(raw));
}

// H|psi>, accumulated term by term without normalizing.
inline StateVector apply_sum(const PauliSum& h, const StateVector& psi) {
  if (h.n_qubits() != psi.n_qubits())
    throw std::invalid_argument("apply_sum: qubit count mismatch");
  StateVector out(psi.n_qubits());
  const std::size_t d = psi.dim();
  for (const auto& t : h.terms()) {
    const std::uint64_t x = t.string.x_mask(), z = t.string.z_mask();
    cplx ig;
    switch (std::popcount(x & z) & 3) {
      case 0: ig = {1.0, 0.0}; break;
      case 1: ig = {0.0, 1.0}; break;
      case 2: ig = {-1.0, 0.0}; break;
      default: ig = {0.0, -1.0}; break;
    }
    const cplx w = t.coeff * ig;
    for (std::size_t b = 0; b < d; ++b) {
      const cplx v = (std::popcount(z & b) & 1) ? -w * psi[b] : w * psi[b];
      out[b ^ x] += v;
    }
  }
  return out;
}

// <psi|H|psi> for a unit-norm state. The imaginary residue is checked against
// tol::imag_residue; Hermitian sums leave only rounding there.
inline double expectation(const PauliSum& h, const StateVector& psi) {
  if (h.n_qubits() != psi.n_qubits())
    throw std::invalid_argument("expectation: qubit count mismatch");
  if (std::abs(psi.norm() - 1.0) > tol::norm_check)
    throw std::invalid_argument("expectation: state is not normalized");
  const std::size_t d = psi.dim();
  cplx acc(0.0, 0.0);
  for (const auto& t : h.terms()) {
    const std::uint64_t x = t.string.x_mask(), z = t.string.z_mask();
    cplx ig;
    switch (std::popcount(x & z) & 3) {
      case 0: ig = {1.0, 0.0}; break;
      case 1: ig = {0.0, 1.0}; break;
      case 2: ig = {-1.0, 0.0}; break;
      default: ig = {0.0, -1.0}; break;
    }
    cplx term(0.0, 0.0);
    for (std::size_t b = 0; b < d; ++b) {
      const cplx v = (std::popcount(z & b) & 1) ? -psi[b] : psi[b];
      term += std::conj(psi[b ^ x]) * v;
    }
    acc += t.coeff * ig * term;
  }
  if (std::abs(acc.imag()) > 100 * tol::imag_residue)
    throw std::runtime_error("expectation: imaginary residue " + std::to_string(acc.imag()));
  return acc.real();
}

// <H^2> - <H>^2 via the norm of H|psi>; clamped at zero against rounding.
inline double variance(const PauliSum& h, const StateVector& psi) {
  if (std::abs(psi.norm() - 1.0) > tol::norm_check)
    throw std::invalid_argument("variance: state is not normalized");
  StateVector hpsi = apply_sum(h, psi);
  const cplx e = inner(psi, hpsi);
  const double v = hpsi.norm_sq() - std::norm(e);
  return v > 0.0 ? v : 0.0;
}

// Text form "c*LABEL + c*LABEL + ..."; coefficients in max_digits10 so the
// round trip through parse_sum is exact. Empty sums render as "0".
inline std::string format_sum(const PauliSum& s) {
  if (s.empty()) return "0";
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& t : s.terms()) {
    if (!first) os << " + ";
    os << t.coeff << "*" << t.string.label();
    first = false;
  }
  return os.str();
}

inline PauliSum parse_sum(const std::string& text, int n) {
  std::vector<std::pair<cplx, PauliString>> raw;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) {
    if (tok == "+" || tok == "0") continue;
    const auto star = tok.find('*');
    if (star == std::string::npos)
      throw std::invalid_argument("parse_sum: malformed term \"" + tok + "\"");
    const double c = std::stod(tok.substr(0, star));
    raw.emplace_back(cplx(c, 0.0), PauliString::from_label(tok.substr(star + 1)));
  }
  return PauliSum::from_terms(n, std::move(raw));
}

}  // namespace spin1q

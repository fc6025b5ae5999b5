#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace spin1q {

using cplx = std::complex<double>;

namespace tol {
// Coefficients with |c| <= coeff_prune are dropped when a PauliSum is canonicalized.
inline constexpr double coeff_prune = 1e-14;
// Larger imaginary residues on coefficients of a Hermitian operator are an error.
inline constexpr double imag_residue = 1e-12;
// Expectation values require the state norm to match unity within this bound.
inline constexpr double norm_check = 1e-10;
}  // namespace tol

// Dense complex statevector over n qubits. Qubit 0 is the leftmost character of a
// bitstring and the most significant bit of the amplitude index, so the basis label
// read left to right equals the index read MSB to LSB.
class StateVector {
 public:
  static constexpr int kDefaultQubitCap = 24;

  explicit StateVector(int n_qubits, int qubit_cap = kDefaultQubitCap) : n_(n_qubits) {
    if (n_qubits < 0 || n_qubits > qubit_cap || qubit_cap > 30)
      throw std::invalid_argument("StateVector: qubit count " + std::to_string(n_qubits) +
                                  " outside [0, " + std::to_string(qubit_cap) + "]");
    amps_.assign(std::size_t{1} << n_, cplx(0.0, 0.0));
  }

  // |bits> with bits a string over {0,1}; "10" gives amplitude 1 at index 2.
  static StateVector basis_state(const std::string& bits, int qubit_cap = kDefaultQubitCap) {
    StateVector psi(static_cast<int>(bits.size()), qubit_cap);
    std::size_t idx = 0;
    for (char c : bits) {
      if (c != '0' && c != '1')
        throw std::invalid_argument("basis_state: invalid bit character in \"" + bits + "\"");
      idx = (idx << 1) | static_cast<std::size_t>(c - '0');
    }
    psi.amps_[idx] = 1.0;
    return psi;
  }

  int n_qubits() const { return n_; }
  std::size_t dim() const { return amps_.size(); }

  cplx& operator[](std::size_t i) { return amps_[i]; }
  const cplx& operator[](std::size_t i) const { return amps_[i]; }
  std::vector<cplx>& amplitudes() { return amps_; }
  const std::vector<cplx>& amplitudes() const { return amps_; }

  double norm_sq() const {
    double s = 0.0;
    for (const cplx& a : amps_) s += std::norm(a);
    return s;
  }
  double norm() const { return std::sqrt(norm_sq()); }

  void normalize() {
    double n = norm();
    if (n == 0.0) throw std::runtime_error("StateVector: cannot normalize the zero vector");
    double inv = 1.0 / n;
    for (cplx& a : amps_) a *= inv;
  }

  // Largest |Im amplitude|; z-basis references evolved by odd-Y generators stay real,
  // so this is the cheap probe for that invariant.
  double max_imag() const {
    double m = 0.0;
    for (const cplx& a : amps_) m = std::max(m, std::abs(a.imag()));
    return m;
  }

 private:
  int n_;
  std::vector<cplx> amps_;
};

// <a|b>
inline cplx inner(const StateVector& a, const StateVector& b) {
  if (a.n_qubits() != b.n_qubits())
    throw std::invalid_argument("inner: qubit count mismatch");
  cplx s(0.0, 0.0);
  const std::size_t d = a.dim();
  for (std::size_t i = 0; i < d; ++i) s += std::conj(a[i]) * b[i];
  return s;
}

// In-place H^{(x) n}: one Hadamard per qubit.
inline void hadamard_all_inplace(StateVector& psi) {
  const int n = psi.n_qubits();
  const std::size_t d = psi.dim();
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int q = 0; q < n; ++q) {
    const std::size_t bit = std::size_t{1} << (n - 1 - q);
    for (std::size_t i = 0; i < d; ++i) {
      if (i & bit) continue;
      const cplx lo = psi[i];
      const cplx hi = psi[i | bit];
      psi[i] = (lo + hi) * inv_sqrt2;
      psi[i | bit] = (lo - hi) * inv_sqrt2;
    }
  }
}

inline StateVector hadamard_all(const StateVector& psi) {
  StateVector out = psi;
  hadamard_all_inplace(out);
  return out;
}

// Raw little-endian (re, im) f64 pairs in index order, for offline inspection.
inline void dump_amplitudes(const StateVector& psi, std::ostream& os) {
  static_assert(sizeof(cplx) == 2 * sizeof(double));
  for (std::size_t i = 0; i < psi.dim(); ++i) {
    double re_im[2] = {psi[i].real(), psi[i].imag()};
    os.write(reinterpret_cast<const char*>(re_im), sizeof(re_im));
  }
}

}  // namespace spin1q

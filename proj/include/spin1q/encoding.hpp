#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spin1q/pauli.hpp"
#include "spin1q/statevector.hpp"

namespace spin1q {

// Spin-1 levels are written as digits {0,1,2} with magnetization m = 1 - digit, so
// "0" is m=+1 and "2" is m=-1. Each encoding maps one level to a small qubit
// register; sites are laid out left to right, site s on qubits
// [s*qubits_per_site, (s+1)*qubits_per_site).
enum class Encoding { standard, gray, unary, multiplet };

inline constexpr std::array<Encoding, 4> kAllEncodings = {
    Encoding::standard, Encoding::gray, Encoding::unary, Encoding::multiplet};

inline int qubits_per_site(Encoding e) { return e == Encoding::unary ? 3 : 2; }

inline const char* encoding_name(Encoding e) {
  switch (e) {
    case Encoding::standard: return "standard";
    case Encoding::gray: return "gray";
    case Encoding::unary: return "unary";
    default: return "multiplet";
  }
}

inline Encoding parse_encoding(const std::string& name) {
  for (Encoding e : kAllEncodings)
    if (name == encoding_name(e)) return e;
  throw std::invalid_argument("unknown encoding \"" + name + "\"");
}

// Spin-1 matrices in the level basis (m = +1, 0, -1): Sz = diag(1, 0, -1) and the
// ladder-built transverse components with 1/sqrt(2) entries.
inline const std::array<Eigen::Matrix3cd, 3>& spin1_matrices() {
  static const std::array<Eigen::Matrix3cd, 3> mats = [] {
    std::array<Eigen::Matrix3cd, 3> m;
    const double r = 1.0 / std::sqrt(2.0);
    m[0] << 0, r, 0, r, 0, r, 0, r, 0;
    m[1] << 0, cplx(0, -r), 0, cplx(0, r), 0, cplx(0, -r), 0, cplx(0, r), 0;
    m[2] << 1, 0, 0, 0, 0, 0, 0, 0, -1;
    return m;
  }();
  return mats;
}

// Qubit image of one spin-1 level: (local bit pattern, amplitude) branches. Only the
// multiplet level 1 has more than one branch.
inline const std::vector<std::pair<std::uint32_t, double>>& level_image(Encoding e, int level) {
  if (level < 0 || level > 2) throw std::invalid_argument("level_image: level outside {0,1,2}");
  static const double r = 1.0 / std::sqrt(2.0);
  static const std::vector<std::pair<std::uint32_t, double>> tbl[4][3] = {
      // standard: 00, 01, 10
      {{{0b00, 1.0}}, {{0b01, 1.0}}, {{0b10, 1.0}}},
      // gray: 00, 01, 11
      {{{0b00, 1.0}}, {{0b01, 1.0}}, {{0b11, 1.0}}},
      // unary: 001, 010, 100
      {{{0b001, 1.0}}, {{0b010, 1.0}}, {{0b100, 1.0}}},
      // multiplet triplet: 00, (01 + 10)/sqrt(2), 11
      {{{0b00, 1.0}}, {{0b01, r}, {0b10, r}}, {{0b11, 1.0}}},
  };
  return tbl[static_cast<int>(e)][level];
}

// |spins> as a qubit product state, spins a string over {0,1,2} of length L.
inline StateVector encode_basis(const std::string& spins, Encoding e,
                                int qubit_cap = StateVector::kDefaultQubitCap) {
  const int L = static_cast<int>(spins.size());
  const int n = qubits_per_site(e);
  StateVector psi(n * L, qubit_cap);
  std::vector<std::pair<std::size_t, double>> branches = {{0, 1.0}};
  for (char c : spins) {
    if (c < '0' || c > '2')
      throw std::invalid_argument("encode_basis: invalid level character in \"" + spins + "\"");
    std::vector<std::pair<std::size_t, double>> next;
    for (const auto& [idx, amp] : branches)
      for (const auto& [bits, w] : level_image(e, c - '0'))
        next.emplace_back((idx << n) | bits, amp * w);
    branches.swap(next);
  }
  for (const auto& [idx, amp] : branches) psi[idx] += amp;
  return psi;
}

// Starting state for a variational run: the encoded spin string, optionally pushed to
// the qubit x basis by a Hadamard on every qubit.
inline StateVector reference_state(const std::string& spins, char basis, Encoding e,
                                   int qubit_cap = StateVector::kDefaultQubitCap) {
  StateVector psi = encode_basis(spins, e, qubit_cap);
  if (basis == 'x') {
    hadamard_all_inplace(psi);
  } else if (basis != 'z') {
    throw std::invalid_argument(std::string("reference_state: basis must be 'z' or 'x', got '") +
                                basis + "'");
  }
  return psi;
}

namespace detail {

// Transition operator |a><b| on one qubit as a two-term complex combination.
inline std::array<std::pair<cplx, char>, 2> qubit_transition(int a, int b) {
  if (a == 0 && b == 0) return {{{0.5, 'I'}, {0.5, 'Z'}}};
  if (a == 1 && b == 1) return {{{0.5, 'I'}, {-0.5, 'Z'}}};
  if (a == 0 && b == 1) return {{{0.5, 'X'}, {cplx(0.0, 0.5), 'Y'}}};
  return {{{0.5, 'X'}, {cplx(0.0, -0.5), 'Y'}}};
}

// Outer-product image sum_ij M(i,j) |img_i><img_j| for encodings whose levels map to
// single bitstrings. The complement of the image subspace is annihilated for free.
inline PauliSum outer_product_image(const Eigen::Matrix3cd& m, Encoding e) {
  const int n = qubits_per_site(e);
  std::vector<std::pair<cplx, PauliString>> raw;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (std::abs(m(i, j)) == 0.0) continue;
      const std::uint32_t bi = level_image(e, i)[0].first;
      const std::uint32_t bj = level_image(e, j)[0].first;
      // expand the product of per-qubit two-term transitions
      std::vector<std::pair<cplx, std::string>> partial = {{m(i, j), std::string()}};
      for (int q = 0; q < n; ++q) {
        const int ai = (bi >> (n - 1 - q)) & 1;
        const int aj = (bj >> (n - 1 - q)) & 1;
        std::vector<std::pair<cplx, std::string>> next;
        for (const auto& [c, lbl] : partial)
          for (const auto& [w, op] : qubit_transition(ai, aj))
            next.emplace_back(c * w, lbl + op);
        partial.swap(next);
      }
      for (const auto& [c, lbl] : partial) raw.emplace_back(c, PauliString::from_label(lbl));
    }
  return PauliSum::from_terms(n, std::move(raw));
}

// Multiplet images of the nine-dimensional Hermitian operator basis on one site:
// identity, dipoles, and five quadrupole combinations, each zero on the two-qubit
// singlet.
inline const std::array<Eigen::Matrix3cd, 9>& multiplet_basis_matrices() {
  static const std::array<Eigen::Matrix3cd, 9> mats = [] {
    const auto& s = spin1_matrices();
    std::array<Eigen::Matrix3cd, 9> b;
    b[0] = Eigen::Matrix3cd::Identity();
    b[1] = s[0];
    b[2] = s[1];
    b[3] = s[2];
    b[4] = 0.5 * (s[0] * s[1] + s[1] * s[0]);
    b[5] = 0.5 * (s[0] * s[2] + s[2] * s[0]);
    b[6] = 0.5 * (s[1] * s[2] + s[2] * s[1]);
    b[7] = s[2] * s[2];
    b[8] = s[0] * s[0] - s[1] * s[1];
    return b;
  }();
  return mats;
}

inline PauliSum multiplet_spin_component(int axis) {
  const char op = axis == 0 ? 'X' : axis == 1 ? 'Y' : 'Z';
  return PauliSum::from_terms(2, {{cplx(0.5, 0.0), PauliString::single(2, 0, op)},
                                  {cplx(0.5, 0.0), PauliString::single(2, 1, op)}});
}

inline const std::array<PauliSum, 9>& multiplet_basis_images() {
  static const std::array<PauliSum, 9> imgs = [] {
    const PauliSum sx = multiplet_spin_component(0);
    const PauliSum sy = multiplet_spin_component(1);
    const PauliSum sz = multiplet_spin_component(2);
    const PauliSum sx2 = sum_multiply(sx, sx);
    const PauliSum sy2 = sum_multiply(sy, sy);
    const PauliSum sz2 = sum_multiply(sz, sz);
    return std::array<PauliSum, 9>{
        sum_scale(0.5, sum_add(sum_add(sx2, sy2), sz2)),  // image of the identity
        sx,
        sy,
        sz,
        sum_anticommutator(sx, sy),
        sum_anticommutator(sx, sz),
        sum_anticommutator(sy, sz),
        sz2,
        sum_add(sx2, sum_scale(-1.0, sy2)),
    };
  }();
  return imgs;
}

// Coordinates of a Hermitian 3x3 matrix in the multiplet operator basis. The basis
// spans all Hermitian matrices, so the solve is exact up to rounding.
inline Eigen::Matrix<double, 9, 1> multiplet_coordinates(const Eigen::Matrix3cd& m) {
  auto vec9 = [](const Eigen::Matrix3cd& a) {
    Eigen::Matrix<double, 9, 1> v;
    v << a(0, 0).real(), a(1, 1).real(), a(2, 2).real(), a(0, 1).real(), a(0, 1).imag(),
        a(0, 2).real(), a(0, 2).imag(), a(1, 2).real(), a(1, 2).imag();
    return v;
  };
  static const Eigen::Matrix<double, 9, 9> basis = [] {
    Eigen::Matrix<double, 9, 9> b;
    const auto& mats = multiplet_basis_matrices();
    for (int k = 0; k < 9; ++k)
      b.col(k) << mats[k](0, 0).real(), mats[k](1, 1).real(), mats[k](2, 2).real(),
          mats[k](0, 1).real(), mats[k](0, 1).imag(), mats[k](0, 2).real(),
          mats[k](0, 2).imag(), mats[k](1, 2).real(), mats[k](1, 2).imag();
    return b;
  }();
  const Eigen::Matrix<double, 9, 1> rhs = vec9(m);
  const Eigen::Matrix<double, 9, 1> c = basis.colPivHouseholderQr().solve(rhs);
  if ((basis * c - rhs).cwiseAbs().maxCoeff() > 1e-10)
    throw std::runtime_error("multiplet_coordinates: operator basis solve failed");
  return c;
}

}  // namespace detail

// Qubit image of a Hermitian single-site operator, on qubits_per_site(e) qubits.
// All four encodings annihilate the non-image complement of their site register.
inline PauliSum encode_site_operator(const Eigen::Matrix3cd& m, Encoding e) {
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("encode_site_operator: matrix is not Hermitian");
  if (e != Encoding::multiplet) return detail::outer_product_image(m, e);
  const Eigen::Matrix<double, 9, 1> c = detail::multiplet_coordinates(m);
  const auto& imgs = detail::multiplet_basis_images();
  PauliSum out(2);
  for (int k = 0; k < 9; ++k)
    if (std::abs(c(k)) > tol::coeff_prune) out = sum_add(out, sum_scale(c(k), imgs[k]));
  return out;
}

// Shift every term of a site-local sum onto qubits [offset, offset + width).
inline PauliSum sum_embed(const PauliSum& local, int n_total, int offset) {
  std::vector<std::pair<cplx, PauliString>> raw;
  raw.reserve(local.size());
  for (const auto& t : local.terms())
    raw.emplace_back(cplx(t.coeff, 0.0), embed(t.string, n_total, offset));
  return PauliSum::from_terms(n_total, std::move(raw));
}

// Image of the spin component S_axis (axis 0,1,2 = x,y,z) on one site of an L-site
// chain, embedded in the full register.
inline PauliSum spin_component(int axis, int site, Encoding e, int L) {
  if (axis < 0 || axis > 2) throw std::invalid_argument("spin_component: axis outside {0,1,2}");
  if (site < 0 || site >= L) throw std::invalid_argument("spin_component: site out of range");
  const int n = qubits_per_site(e);
  const PauliSum local = e == Encoding::multiplet
                             ? detail::multiplet_spin_component(axis)
                             : detail::outer_product_image(spin1_matrices()[axis], e);
  return sum_embed(local, n * L, n * site);
}

// Projector onto the physical image of one site register, embedded. For the
// bitstring encodings this is the image of the 3x3 identity; for the multiplet
// encoding it is half the total-spin square, which the identity image equals.
inline PauliSum site_projector(int site, Encoding e, int L) {
  if (site < 0 || site >= L) throw std::invalid_argument("site_projector: site out of range");
  const int n = qubits_per_site(e);
  const PauliSum local = e == Encoding::multiplet
                             ? detail::multiplet_basis_images()[0]
                             : detail::outer_product_image(Eigen::Matrix3cd::Identity(), e);
  return sum_embed(local, n * L, n * site);
}

inline std::vector<PauliSum> all_site_projectors(Encoding e, int L) {
  std::vector<PauliSum> out;
  out.reserve(static_cast<std::size_t>(L));
  for (int s = 0; s < L; ++s) out.push_back(site_projector(s, e, L));
  return out;
}

// <psi| P_1 P_2 ... P_L |psi>, the weight of psi inside the full physical subspace.
// The site projectors commute, so the product order is irrelevant.
inline double projector_expectation(const StateVector& psi,
                                    const std::vector<PauliSum>& site_projectors) {
  StateVector w = psi;
  for (const PauliSum& p : site_projectors) w = apply_sum(p, w);
  double v = inner(psi, w).real();
  if (v < 0.0) v = 0.0;
  if (v > 1.0) v = 1.0;
  return v;
}

// Lift a 3^L spin-chain vector into the qubit register, site by site.
inline StateVector embed_spin_state(const Eigen::VectorXd& v, int L, Encoding e,
                                    int qubit_cap = StateVector::kDefaultQubitCap) {
  std::size_t dim3 = 1;
  for (int i = 0; i < L; ++i) dim3 *= 3;
  if (static_cast<std::size_t>(v.size()) != dim3)
    throw std::invalid_argument("embed_spin_state: vector length is not 3^L");
  const int n = qubits_per_site(e);
  StateVector psi(n * L, qubit_cap);

  std::vector<cplx> cur(dim3);
  for (std::size_t i = 0; i < dim3; ++i) cur[i] = v(static_cast<Eigen::Index>(i));
  std::size_t spin_rest = dim3;
  std::size_t qubit_done = 1;
  for (int s = 0; s < L; ++s) {
    spin_rest /= 3;
    std::vector<cplx> next(qubit_done * (std::size_t{1} << n) * spin_rest, cplx(0.0, 0.0));
    for (std::size_t q = 0; q < qubit_done; ++q)
      for (int level = 0; level < 3; ++level)
        for (const auto& [bits, amp] : level_image(e, level)) {
          const std::size_t src = (q * 3 + static_cast<std::size_t>(level)) * spin_rest;
          const std::size_t dst = ((q << n) | bits) * spin_rest;
          for (std::size_t r = 0; r < spin_rest; ++r) next[dst + r] += amp * cur[src + r];
        }
    cur.swap(next);
    qubit_done <<= n;
  }
  for (std::size_t i = 0; i < cur.size(); ++i) psi[i] = cur[i];
  return psi;
}

}  // namespace spin1q

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spin1q/encoding.hpp"
#include "spin1q/pauli.hpp"

namespace spin1q {

enum class Boundary { open, periodic, twisted };

inline const char* boundary_name(Boundary b) {
  switch (b) {
    case Boundary::open: return "open";
    case Boundary::periodic: return "periodic";
    default: return "twisted";
  }
}

inline Boundary parse_boundary(const std::string& name) {
  if (name == "open") return Boundary::open;
  if (name == "periodic") return Boundary::periodic;
  if (name == "twisted") return Boundary::twisted;
  throw std::invalid_argument("unknown boundary \"" + name + "\"");
}

// Spin-1 chain H = sum_j [ J (Sx_j Sx_j+1 + Sy_j Sy_j+1) + delta Sz_j Sz_j+1 ]
//                + sum_j [ D (Sz_j)^2 + hx Sx_j ].
// The twisted boundary keeps the ring geometry of the periodic one but flips the
// sign of the planar (J) part on the wrap-around bond only.
struct ModelSpec {
  int L = 2;
  double J = 0.0;
  double delta = 0.0;
  double D = 0.0;
  double hx = 0.0;
  Boundary boundary = Boundary::open;

  void validate() const {
    if (L < 1) throw std::invalid_argument("ModelSpec: L must be at least 1");
    if (L == 1 && boundary != Boundary::open)
      throw std::invalid_argument("ModelSpec: ring boundaries need at least 2 sites");
  }

  std::size_t spin_dim() const {
    std::size_t d = 1;
    for (int i = 0; i < L; ++i) d *= 3;
    return d;
  }

  bool operator==(const ModelSpec&) const = default;
};

// Transverse-field chain with single-ion anisotropy, no planar exchange.
inline ModelSpec bc_model(int L, Boundary b = Boundary::open) {
  return {L, 0.0, -1.0, -0.1, -1.405, b};
}

// Planar-exchange chain with single-ion anisotropy, no field.
inline ModelSpec xxz_model(int L, Boundary b = Boundary::open) {
  return {L, 1.0, 0.1, 0.385, 0.0, b};
}

namespace detail {

struct Bond {
  int a, b;
  double planar;  // J on this bond, sign-flipped on a twisted wrap-around
};

inline std::vector<Bond> chain_bonds(const ModelSpec& spec) {
  std::vector<Bond> bonds;
  for (int j = 0; j + 1 < spec.L; ++j) bonds.push_back({j, j + 1, spec.J});
  if (spec.boundary != Boundary::open && spec.L > 1)
    bonds.push_back({spec.L - 1, 0, spec.boundary == Boundary::twisted ? -spec.J : spec.J});
  return bonds;
}

}  // namespace detail

// Qubit image of the chain Hamiltonian under one encoding: every spin matrix is
// replaced by its per-site image and products are expanded into Pauli strings.
inline PauliSum build_qubit_hamiltonian(const ModelSpec& spec, Encoding e) {
  spec.validate();
  const int n = qubits_per_site(e);
  const int nq = n * spec.L;
  std::vector<PauliSum> sx, sy, sz;
  for (int s = 0; s < spec.L; ++s) {
    sx.push_back(spin_component(0, s, e, spec.L));
    sy.push_back(spin_component(1, s, e, spec.L));
    sz.push_back(spin_component(2, s, e, spec.L));
  }
  PauliSum h(nq);
  for (const auto& bond : detail::chain_bonds(spec)) {
    if (bond.planar != 0.0) {
      h = sum_add(h, sum_scale(bond.planar, sum_multiply(sx[bond.a], sx[bond.b])));
      h = sum_add(h, sum_scale(bond.planar, sum_multiply(sy[bond.a], sy[bond.b])));
    }
    if (spec.delta != 0.0)
      h = sum_add(h, sum_scale(spec.delta, sum_multiply(sz[bond.a], sz[bond.b])));
  }
  for (int s = 0; s < spec.L; ++s) {
    if (spec.D != 0.0) h = sum_add(h, sum_scale(spec.D, sum_multiply(sz[s], sz[s])));
    if (spec.hx != 0.0) h = sum_add(h, sum_scale(spec.hx, sx[s]));
  }
  return h;
}

// Matrix-free H on the 3^L spin basis. All couplings are real in this basis (Sy
// only ever appears squared within a bond), so vectors stay real throughout.
class Spin1Chain {
 public:
  explicit Spin1Chain(const ModelSpec& spec) : spec_(spec) {
    spec.validate();
    // real 3x3 spin matrices in the level basis
    Eigen::Matrix3d sx, sz;
    const double r = 1.0 / std::sqrt(2.0);
    sx << 0, r, 0, r, 0, r, 0, r, 0;
    sz << 1, 0, 0, 0, 0, 0, 0, 0, -1;
    // The planar bond operator SxSx + SySy = (S+S- + S-S+)/2 is real even though
    // Sy alone is not; build it from the ladder maps (S+ lowers the level digit).
    Eigen::Matrix3d sp = Eigen::Matrix3d::Zero(), sm = Eigen::Matrix3d::Zero();
    sp(0, 1) = sp(1, 2) = std::sqrt(2.0);
    sm(1, 0) = sm(2, 1) = std::sqrt(2.0);

    auto kron9 = [](const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
      Eigen::Matrix<double, 9, 9> out;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out.block<3, 3>(3 * i, 3 * j) = a(i, j) * b;
      return out;
    };
    const Eigen::Matrix<double, 9, 9> planar = 0.5 * (kron9(sp, sm) + kron9(sm, sp));
    const Eigen::Matrix<double, 9, 9> zz = kron9(sz, sz);

    for (const auto& bond : detail::chain_bonds(spec_)) {
      const Eigen::Matrix<double, 9, 9> m = bond.planar * planar + spec_.delta * zz;
      bond_terms_.push_back({bond.a, bond.b, sparsify(m)});
    }
    const Eigen::Matrix3d site = spec_.D * (sz * sz) + spec_.hx * sx;
    if (site.cwiseAbs().maxCoeff() > 0.0)
      for (int s = 0; s < spec_.L; ++s) site_terms_.push_back({s, sparsify(site)});
    strides_.resize(static_cast<std::size_t>(spec_.L));
    std::size_t st = 1;
    for (int s = spec_.L - 1; s >= 0; --s) {
      strides_[static_cast<std::size_t>(s)] = st;
      st *= 3;
    }
  }

  const ModelSpec& spec() const { return spec_; }
  std::size_t dim() const { return spec_.spin_dim(); }

  void apply(const double* in, double* out) const {
    const std::ptrdiff_t d = static_cast<std::ptrdiff_t>(dim());
    std::fill(out, out + d, 0.0);
    for (const auto& t : site_terms_) {
      const std::ptrdiff_t st =
          static_cast<std::ptrdiff_t>(strides_[static_cast<std::size_t>(t.site)]);
      for (std::ptrdiff_t idx = 0; idx < d; ++idx) {
        const int row = static_cast<int>((idx / st) % 3);
        double acc = 0.0;
        for (const auto& [col, w] : t.entries[static_cast<std::size_t>(row)])
          acc += w * in[idx + (col - row) * st];
        out[idx] += acc;
      }
    }
    for (const auto& t : bond_terms_) {
      const std::ptrdiff_t sa = static_cast<std::ptrdiff_t>(strides_[static_cast<std::size_t>(t.a)]);
      const std::ptrdiff_t sb = static_cast<std::ptrdiff_t>(strides_[static_cast<std::size_t>(t.b)]);
      for (std::ptrdiff_t idx = 0; idx < d; ++idx) {
        const int da = static_cast<int>((idx / sa) % 3);
        const int db = static_cast<int>((idx / sb) % 3);
        const int row = 3 * da + db;
        double acc = 0.0;
        for (const auto& [col, w] : t.entries[static_cast<std::size_t>(row)])
          acc += w * in[idx + (col / 3 - da) * sa + (col % 3 - db) * sb];
        out[idx] += acc;
      }
    }
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    if (static_cast<std::size_t>(v.size()) != dim())
      throw std::invalid_argument("Spin1Chain::apply: dimension mismatch");
    Eigen::VectorXd out(v.size());
    apply(v.data(), out.data());
    return out;
  }

 private:
  using Row = std::vector<std::pair<int, double>>;

  template <typename Mat>
  static std::vector<Row> sparsify(const Mat& m) {
    std::vector<Row> rows(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        if (m(i, j) != 0.0) rows[static_cast<std::size_t>(i)].emplace_back(static_cast<int>(j), m(i, j));
    return rows;
  }

  struct SiteTerm {
    int site;
    std::vector<Row> entries;  // 3 rows
  };
  struct BondTerm {
    int a, b;
    std::vector<Row> entries;  // 9 rows, index 3*da + db
  };

  ModelSpec spec_;
  std::vector<SiteTerm> site_terms_;
  std::vector<BondTerm> bond_terms_;
  std::vector<std::size_t> strides_;
};

// Column-by-column dense form of the spin-basis Hamiltonian; intended for small L.
inline Eigen::MatrixXd dense_spin1_hamiltonian(const ModelSpec& spec) {
  Spin1Chain chain(spec);
  const std::size_t d = chain.dim();
  if (d > 20000) throw std::invalid_argument("dense_spin1_hamiltonian: dimension too large");
  Eigen::MatrixXd h(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) {
    unit(static_cast<Eigen::Index>(j)) = 1.0;
    h.col(static_cast<Eigen::Index>(j)) = chain.apply(unit);
    unit(static_cast<Eigen::Index>(j)) = 0.0;
  }
  return h;
}

}  // namespace spin1q

#pragma once

// Truncated wavenumber lattices on Z^N, N in {1, 2}.
//
// Positions are l1-degree-major: sorted by |j_1| + ... + |j_N|, ties broken
// lexicographically on the components. Position 0 is always the zero index.
// Every coefficient vector and matrix in the library uses this layout.

#include <algorithm>
#include <array>
#include <cstdlib>
#include <memory>
#include <optional>
#include <vector>

#include "ktn/error.hpp"

namespace ktn {

/// Integer wavenumber. Unused trailing components are zero.
struct MultiIndex {
  std::array<int, 2> j{0, 0};

  constexpr int operator[](std::size_t i) const { return j[i]; }
  constexpr int& operator[](std::size_t i) { return j[i]; }

  constexpr int l1() const { return std::abs(j[0]) + std::abs(j[1]); }

  friend constexpr bool operator==(const MultiIndex&, const MultiIndex&) = default;
  friend constexpr auto operator<=>(const MultiIndex&, const MultiIndex&) = default;

  constexpr MultiIndex operator-() const { return MultiIndex{{-j[0], -j[1]}}; }
};

/// Componentwise sum; no wraparound (the character group law gamma_a gamma_b = gamma_{a+b}).
constexpr MultiIndex shift(const MultiIndex& a, const MultiIndex& delta) {
  return MultiIndex{{a[0] + delta[0], a[1] + delta[1]}};
}

class WavenumberLattice {
 public:
  WavenumberLattice(int dim, int max_wavenumber) : dim_(dim), J_(max_wavenumber) {
    if (dim != 1 && dim != 2) throw InvalidDimension(dim);
    if (max_wavenumber < 0) throw ValidationError("maximal wavenumber must be nonnegative");

    const int side = 2 * J_ + 1;
    order_.reserve(static_cast<std::size_t>(dim == 1 ? side : side * side));
    if (dim == 1) {
      for (int a = -J_; a <= J_; ++a) order_.push_back(MultiIndex{{a, 0}});
    } else {
      for (int a = -J_; a <= J_; ++a)
        for (int b = -J_; b <= J_; ++b) order_.push_back(MultiIndex{{a, b}});
    }
    std::stable_sort(order_.begin(), order_.end(), [](const MultiIndex& x, const MultiIndex& y) {
      if (x.l1() != y.l1()) return x.l1() < y.l1();
      return x < y;
    });

    table_.assign(order_.size(), 0);
    for (std::size_t k = 0; k < order_.size(); ++k) table_[offset(order_[k])] = k;
  }

  int dim() const { return dim_; }
  int max_wavenumber() const { return J_; }
  std::size_t size() const { return order_.size(); }
  const std::vector<MultiIndex>& order() const { return order_; }
  const MultiIndex& operator[](std::size_t k) const { return order_[k]; }

  bool contains(const MultiIndex& j) const {
    if (std::abs(j[0]) > J_) return false;
    if (dim_ == 1) return j[1] == 0;
    return std::abs(j[1]) <= J_;
  }

  /// Linear position, or nullopt when j lies outside the band.
  std::optional<std::size_t> position_of(const MultiIndex& j) const {
    if (!contains(j)) return std::nullopt;
    return table_[offset(j)];
  }

  /// Position of -j_k; the lattice is symmetric so this always exists.
  std::size_t reflected(std::size_t k) const { return table_[offset(-order_[k])]; }

  friend bool operator==(const WavenumberLattice& a, const WavenumberLattice& b) {
    return a.dim_ == b.dim_ && a.J_ == b.J_;
  }

 private:
  std::size_t offset(const MultiIndex& j) const {
    const std::size_t side = static_cast<std::size_t>(2 * J_ + 1);
    const std::size_t a = static_cast<std::size_t>(j[0] + J_);
    if (dim_ == 1) return a;
    return a * side + static_cast<std::size_t>(j[1] + J_);
  }

  int dim_;
  int J_;
  std::vector<MultiIndex> order_;
  std::vector<std::size_t> table_;
};

using LatticePtr = std::shared_ptr<const WavenumberLattice>;

inline LatticePtr build_lattice(int dim, int max_wavenumber) {
  return std::make_shared<const WavenumberLattice>(dim, max_wavenumber);
}

inline std::optional<std::size_t> position_of(const WavenumberLattice& lat, const MultiIndex& j) {
  return lat.position_of(j);
}

}  // namespace ktn

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ftkoop/errors.hpp"

namespace ftkoop {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// A monomial prod_i x_i^{exponents[i]} over the plant state.
struct Monomial {
  std::vector<int> exponents;

  template <typename Derived>
  typename Derived::Scalar operator()(const Eigen::MatrixBase<Derived>& x) const {
    using Scalar = typename Derived::Scalar;
    Scalar value(1);
    for (std::size_t i = 0; i < exponents.size(); ++i) {
      for (int k = 0; k < exponents[i]; ++k) value *= x(static_cast<Eigen::Index>(i));
    }
    return value;
  }

  std::string to_string() const;
  bool operator==(const Monomial&) const = default;
};

/// Ordered list of candidate observables. Index k (1-based) is stable for the
/// lifetime of the catalog.
class ObservableCatalog {
 public:
  ObservableCatalog(int state_dim, std::vector<Monomial> entries);

  int state_dim() const { return state_dim_; }
  int size() const { return static_cast<int>(entries_.size()); }
  /// 1-based access.
  const Monomial& entry(int k) const;
  const std::vector<Monomial>& entries() const { return entries_; }

 private:
  int state_dim_;
  std::vector<Monomial> entries_;
};

/// x1, x2, x1 x2, x1^2, x2^2, x1^2 x2, x1 x2^2, x1^2 x2^2, x1^4.
ObservableCatalog default_catalog();

/// Non-empty ascending selection theta of catalog indices.
class ObservableLibrary {
 public:
  /// Indices are 1-based; they are sorted, and duplicates or out-of-range
  /// values are rejected.
  ObservableLibrary(const ObservableCatalog& catalog, std::vector<int> theta);

  const std::vector<int>& theta() const { return theta_; }
  int n_xi() const { return static_cast<int>(theta_.size()); }
  int state_dim() const { return state_dim_; }
  int catalog_size() const { return catalog_size_; }
  const std::vector<Monomial>& terms() const { return terms_; }

  std::string to_string() const;

  bool operator==(const ObservableLibrary& other) const {
    return theta_ == other.theta_ && catalog_size_ == other.catalog_size_;
  }

 private:
  std::vector<int> theta_;
  std::vector<Monomial> terms_;
  int state_dim_;
  int catalog_size_;
};

/// xi_theta(x): component i is catalog entry theta(i) evaluated at x.
template <typename Derived>
VectorX<typename Derived::Scalar> lift(const ObservableLibrary& lib,
                                       const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != lib.state_dim()) {
    throw InputError("lift: state has dimension " + std::to_string(x.size()) +
                     ", library expects " + std::to_string(lib.state_dim()));
  }
  VectorX<typename Derived::Scalar> xi(lib.n_xi());
  for (int i = 0; i < lib.n_xi(); ++i) xi(i) = lib.terms()[static_cast<std::size_t>(i)](x);
  return xi;
}

/// Fixed-length inclusion mask over a catalog; bit k-1 stands for index k.
struct LibraryMask {
  std::vector<std::uint8_t> bits;

  int size() const { return static_cast<int>(bits.size()); }
  int popcount() const;
  /// Bit string with index 1 first, e.g. "110100001".
  std::string to_string() const;
  /// Value of the bit string read as a binary literal (index 1 is the most
  /// significant bit). Used as the deterministic tie-break.
  std::uint64_t value() const;
  Eigen::VectorXd as_vector() const;

  static LibraryMask parse(const std::string& bit_string);
  /// Inverse of value() for a catalog of size n.
  static LibraryMask from_value(std::uint64_t value, int n);

  bool operator==(const LibraryMask&) const = default;
};

LibraryMask encode_mask(const ObservableLibrary& lib);
/// Throws EmptyLibraryError on an all-zero mask.
ObservableLibrary decode_mask(const ObservableCatalog& catalog, const LibraryMask& mask);

}  // namespace ftkoop

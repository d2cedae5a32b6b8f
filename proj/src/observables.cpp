#include "ftkoop/observables.hpp"

#include <algorithm>
#include <sstream>

namespace ftkoop {

std::string Monomial::to_string() const {
  std::ostringstream os;
  bool first = true;
  for (std::size_t i = 0; i < exponents.size(); ++i) {
    if (exponents[i] == 0) continue;
    if (!first) os << "*";
    os << "x" << (i + 1);
    if (exponents[i] != 1) os << "^" << exponents[i];
    first = false;
  }
  if (first) os << "1";
  return os.str();
}

ObservableCatalog::ObservableCatalog(int state_dim, std::vector<Monomial> entries)
    : state_dim_(state_dim), entries_(std::move(entries)) {
  if (state_dim_ < 1) throw InputError("catalog: state dimension must be positive");
  if (entries_.empty()) throw InputError("catalog: no entries");
  for (const auto& m : entries_) {
    if (static_cast<int>(m.exponents.size()) != state_dim_) {
      throw InputError("catalog: monomial " + m.to_string() + " has wrong arity");
    }
    for (int e : m.exponents) {
      if (e < 0) throw InputError("catalog: negative exponent in " + m.to_string());
    }
  }
}

const Monomial& ObservableCatalog::entry(int k) const {
  if (k < 1 || k > size()) throw InputError("catalog: index " + std::to_string(k) + " out of range");
  return entries_[static_cast<std::size_t>(k - 1)];
}

ObservableCatalog default_catalog() {
  return ObservableCatalog(2, {{{1, 0}},
                               {{0, 1}},
                               {{1, 1}},
                               {{2, 0}},
                               {{0, 2}},
                               {{2, 1}},
                               {{1, 2}},
                               {{2, 2}},
                               {{4, 0}}});
}

ObservableLibrary::ObservableLibrary(const ObservableCatalog& catalog, std::vector<int> theta)
    : theta_(std::move(theta)), state_dim_(catalog.state_dim()), catalog_size_(catalog.size()) {
  if (theta_.empty()) throw EmptyLibraryError("library: theta must be non-empty");
  std::sort(theta_.begin(), theta_.end());
  if (std::adjacent_find(theta_.begin(), theta_.end()) != theta_.end()) {
    throw InputError("library: duplicate index in theta");
  }
  terms_.reserve(theta_.size());
  for (int k : theta_) terms_.push_back(catalog.entry(k));
}

std::string ObservableLibrary::to_string() const {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < theta_.size(); ++i) os << (i ? "," : "") << theta_[i];
  os << "}";
  return os.str();
}

int LibraryMask::popcount() const {
  return static_cast<int>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::string LibraryMask::to_string() const {
  std::string s;
  s.reserve(bits.size());
  for (auto b : bits) s.push_back(b ? '1' : '0');
  return s;
}

std::uint64_t LibraryMask::value() const {
  std::uint64_t v = 0;
  for (auto b : bits) v = (v << 1) | (b ? 1u : 0u);
  return v;
}

Eigen::VectorXd LibraryMask::as_vector() const {
  Eigen::VectorXd v(size());
  for (int i = 0; i < size(); ++i) v(i) = bits[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  return v;
}

LibraryMask LibraryMask::parse(const std::string& bit_string) {
  LibraryMask mask;
  for (char c : bit_string) {
    if (c != '0' && c != '1') throw InputError("mask: invalid character in '" + bit_string + "'");
    mask.bits.push_back(c == '1' ? 1 : 0);
  }
  if (mask.bits.empty()) throw InputError("mask: empty bit string");
  return mask;
}

LibraryMask LibraryMask::from_value(std::uint64_t value, int n) {
  LibraryMask mask;
  mask.bits.resize(static_cast<std::size_t>(n));
  for (int i = n - 1; i >= 0; --i) {
    mask.bits[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(value & 1u);
    value >>= 1;
  }
  return mask;
}

LibraryMask encode_mask(const ObservableLibrary& lib) {
  LibraryMask mask;
  mask.bits.assign(static_cast<std::size_t>(lib.catalog_size()), 0);
  for (int k : lib.theta()) mask.bits[static_cast<std::size_t>(k - 1)] = 1;
  return mask;
}

ObservableLibrary decode_mask(const ObservableCatalog& catalog, const LibraryMask& mask) {
  if (mask.size() != catalog.size()) {
    throw InputError("mask: length " + std::to_string(mask.size()) + " does not match catalog size " +
                     std::to_string(catalog.size()));
  }
  std::vector<int> theta;
  for (int i = 0; i < mask.size(); ++i) {
    if (mask.bits[static_cast<std::size_t>(i)]) theta.push_back(i + 1);
  }
  if (theta.empty()) throw EmptyLibraryError("mask: all-zero mask selects no observables");
  return ObservableLibrary(catalog, std::move(theta));
}

}  // namespace ftkoop

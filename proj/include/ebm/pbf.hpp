#pragma once

// Fourier analysis of pseudo-Boolean functions f : {-1,+1}^N -> R.
//
// Conventions used throughout the library:
//  * site i <-> bit i of a 64-bit mask;
//  * a configuration is encoded by the integer whose bit i is set iff s_i = +1,
//    and dense tables over configurations are indexed by that code;
//  * a subset I of sites is a mask, and dense spectra are indexed by mask.
// With this encoding chi_I(s) = (-1)^popcount(I & ~code).

#include <bit>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace ebm {

using Mask = std::uint64_t;

inline constexpr int kMaxSites = 64;
inline constexpr int kDefaultEnumerationLimit = 20;

// Largest N for which dense 2^N tables are built. Shared process-wide.
int enumeration_limit();
void set_enumeration_limit(int n);
// Throws LimitError naming `what` when n_sites exceeds the limit.
void require_enumerable(int n_sites, std::string_view what);

inline int parity_sign(Mask code, Mask subset) {
  return (std::popcount(subset & ~code) & 1) ? -1 : 1;
}

inline Mask full_mask(int n_sites) {
  return n_sites >= 64 ? ~Mask{0} : ((Mask{1} << n_sites) - 1);
}

class SubsetIndex {
 public:
  constexpr SubsetIndex() = default;
  constexpr explicit SubsetIndex(Mask mask) : mask_(mask) {}
  // Zero-based site indices.
  static SubsetIndex of(std::initializer_list<int> sites);

  constexpr Mask mask() const { return mask_; }
  int order() const { return std::popcount(mask_); }
  bool contains(int site) const { return (mask_ >> site) & 1U; }
  bool fits(int n_sites) const { return (mask_ & ~full_mask(n_sites)) == 0; }
  bool empty() const { return mask_ == 0; }
  SubsetIndex symmetric_difference(SubsetIndex other) const { return SubsetIndex(mask_ ^ other.mask_); }
  std::vector<int> sites() const;

  friend constexpr auto operator<=>(SubsetIndex, SubsetIndex) = default;

 private:
  Mask mask_ = 0;
};

class SpinConfiguration {
 public:
  // Every entry must be -1 or +1.
  explicit SpinConfiguration(std::vector<int> spins);
  static SpinConfiguration from_code(Mask code, int n_sites);
  // Bridge from {0,1} values through s = 2v - 1.
  static SpinConfiguration from_binary(std::span<const int> values);

  int n_sites() const { return static_cast<int>(spins_.size()); }
  int operator[](int i) const { return spins_[static_cast<std::size_t>(i)]; }
  std::span<const std::int8_t> spins() const { return spins_; }
  Mask code() const;
  std::vector<int> to_binary() const;

  friend bool operator==(const SpinConfiguration&, const SpinConfiguration&) = default;

 private:
  SpinConfiguration() = default;
  std::vector<std::int8_t> spins_;
};

// chi_I(s) = prod_{i in I} s_i, and 1 for the empty set.
double parity(const SpinConfiguration& s, SubsetIndex subset);

// All subsets with 1 <= |I| <= max_order of n_sites sites, ascending by mask.
std::vector<Mask> subsets_up_to(int n_sites, int max_order);
// Number of such subsets.
std::size_t count_subsets_up_to(int n_sites, int max_order);

// Real coefficients indexed by subsets of [N]. Dense vectors hold all 2^N
// entries; truncated vectors hold a sparse, mask-sorted list restricted to
// subsets of order <= max_order (absent entries read as zero).
class SubsetVector {
 public:
  using Entry = std::pair<Mask, double>;
  enum class Representation { dense, truncated };

  SubsetVector() = default;
  SubsetVector(int n_sites, std::vector<double> dense_values);
  SubsetVector(int n_sites, int max_order, std::vector<Entry> entries);
  static SubsetVector zeros_dense(int n_sites);
  // Explicit zero entries for every subset with 1 <= |I| <= max_order.
  static SubsetVector zeros_truncated(int n_sites, int max_order);

  int n_sites() const { return n_sites_; }
  int max_order() const { return max_order_; }
  Representation representation() const { return repr_; }
  bool is_dense() const { return repr_ == Representation::dense; }
  std::size_t size() const { return values_.size(); }

  double operator[](Mask mask) const;  // zero when absent
  double& at(Mask mask);               // dense: any mask; truncated: must be stored
  void set(Mask mask, double value);   // truncated: inserts if absent

  // Stored masks in ascending order (dense: 0..2^N-1).
  Mask mask_at(std::size_t k) const { return is_dense() ? static_cast<Mask>(k) : masks_[k]; }
  double value_at(std::size_t k) const { return values_[k]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  template <class Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t k = 0; k < values_.size(); ++k) fn(mask_at(k), values_[k]);
  }

  // Root sum of squares of the entries of order exactly n.
  double norm_at_order(int n) const;
  // Largest |value| over nonempty subsets.
  double sup_norm() const;
  // Restrict to subsets of order <= max_order (sparse output).
  SubsetVector truncated_to(int max_order) const;

 protected:
  void check_mask(Mask mask) const;

  int n_sites_ = 0;
  int max_order_ = 0;
  Representation repr_ = Representation::dense;
  std::vector<Mask> masks_;  // truncated only
  std::vector<double> values_;
};

class FourierSpectrum : public SubsetVector {
 public:
  using SubsetVector::SubsetVector;
  explicit FourierSpectrum(SubsetVector v) : SubsetVector(std::move(v)) {}
};

// phi_I = -Ehat(I) for nonempty I; the empty-set entry is always zero.
class EffectiveCouplings : public SubsetVector {
 public:
  EffectiveCouplings() = default;
  EffectiveCouplings(int n_sites, std::vector<double> dense_values);
  EffectiveCouplings(int n_sites, int max_order, std::vector<Entry> entries);
  explicit EffectiveCouplings(SubsetVector v);
  static EffectiveCouplings zeros(int n_sites) { return EffectiveCouplings(SubsetVector::zeros_dense(n_sites)); }

 private:
  void check_no_empty() const;
};

// <chi_I> for nonempty I; every entry in [-1, 1].
class MomentVector : public SubsetVector {
 public:
  MomentVector() = default;
  explicit MomentVector(SubsetVector v);
};

// Deterministic evaluation contract s -> E(s). Oracles built from a table
// keep it and hand it back from tabulate() without re-evaluating.
class EnergyOracle {
 public:
  using Fn = std::function<double(const SpinConfiguration&)>;

  EnergyOracle(int n_sites, Fn fn);
  static EnergyOracle from_table(int n_sites, std::vector<double> values);
  // f(s) = sum_I coeff(I) chi_I(s), usable beyond the enumeration limit.
  static EnergyOracle from_spectrum(SubsetVector spectrum);

  int n_sites() const { return n_sites_; }
  double operator()(const SpinConfiguration& s) const;
  double at_code(Mask code) const;
  // Values for every configuration, indexed by configuration code.
  std::vector<double> tabulate() const;

 private:
  int n_sites_;
  Fn fn_;
  std::shared_ptr<const std::vector<double>> table_;
};

// Slow reference: 2^-N sum_s f(s) chi_I(s).
double fourier_coefficient_direct(const EnergyOracle& f, SubsetIndex subset);

// Dense spectrum of a configuration-indexed table, O(N 2^N).
FourierSpectrum fast_transform(std::span<const double> values);
// f(s) = sum_I fhat(I) chi_I(s) for every configuration; dense spectra only.
std::vector<double> inverse_transform(const FourierSpectrum& spectrum);
// Expansion evaluated at one configuration; works for either representation.
double evaluate_expansion(const SubsetVector& spectrum, const SpinConfiguration& s);
double evaluate_expansion(const SubsetVector& spectrum, Mask code);

double inner_product(const EnergyOracle& f, const EnergyOracle& g);

// Inf_i[f] = sum_{I containing i} fhat(I)^2.
double influence(const FourierSpectrum& spectrum, int site);
// I[f] = sum_n n W_{=n}.
double total_influence(const FourierSpectrum& spectrum);
// W_{=n} and W_{>=n}.
double spectral_weight_at(const FourierSpectrum& spectrum, int order);
double spectral_weight_above(const FourierSpectrum& spectrum, int order);

EffectiveCouplings effective_couplings_from_energy(const EnergyOracle& energy);
EffectiveCouplings effective_couplings_from_table(std::span<const double> energies);

}  // namespace ebm

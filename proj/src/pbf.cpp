#include "ebm/pbf.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "ebm/error.hpp"
#include "ebm/kernels.hpp"

namespace ebm {
namespace {

std::atomic<int> g_enumeration_limit{kDefaultEnumerationLimit};

int log2_exact(std::size_t n) {
  if (n == 0 || (n & (n - 1)) != 0) {
    throw DimensionError("table length " + std::to_string(n) + " is not a power of two");
  }
  return std::countr_zero(n);
}

void check_sites(int n_sites) {
  if (n_sites < 1 || n_sites > kMaxSites) {
    throw DimensionError("site count must be in [1, 64], got " + std::to_string(n_sites));
  }
}

}  // namespace

int enumeration_limit() { return g_enumeration_limit.load(std::memory_order_relaxed); }

void set_enumeration_limit(int n) {
  if (n < 1 || n > 30) throw DomainError("enumeration limit must be in [1, 30]");
  g_enumeration_limit.store(n, std::memory_order_relaxed);
}

void require_enumerable(int n_sites, std::string_view what) {
  if (n_sites > enumeration_limit()) {
    throw LimitError(std::string(what) + ": N=" + std::to_string(n_sites) +
                     " exceeds the enumeration limit " + std::to_string(enumeration_limit()));
  }
}

// --- SubsetIndex / SpinConfiguration --------------------------------------

SubsetIndex SubsetIndex::of(std::initializer_list<int> sites) {
  Mask m = 0;
  for (int i : sites) {
    if (i < 0 || i >= kMaxSites) throw DimensionError("site index out of range");
    m |= Mask{1} << i;
  }
  return SubsetIndex(m);
}

std::vector<int> SubsetIndex::sites() const {
  std::vector<int> out;
  for (Mask m = mask_; m != 0; m &= m - 1) out.push_back(std::countr_zero(m));
  return out;
}

SpinConfiguration::SpinConfiguration(std::vector<int> spins) {
  check_sites(static_cast<int>(spins.size()));
  spins_.reserve(spins.size());
  for (int v : spins) {
    if (v != 1 && v != -1) throw DomainError("spin values must be -1 or +1");
    spins_.push_back(static_cast<std::int8_t>(v));
  }
}

SpinConfiguration SpinConfiguration::from_code(Mask code, int n_sites) {
  check_sites(n_sites);
  if ((code & ~full_mask(n_sites)) != 0) throw DimensionError("configuration code wider than n_sites");
  SpinConfiguration s;
  s.spins_.resize(static_cast<std::size_t>(n_sites));
  for (int i = 0; i < n_sites; ++i) s.spins_[static_cast<std::size_t>(i)] = ((code >> i) & 1U) ? 1 : -1;
  return s;
}

SpinConfiguration SpinConfiguration::from_binary(std::span<const int> values) {
  std::vector<int> spins;
  spins.reserve(values.size());
  for (int v : values) {
    if (v != 0 && v != 1) throw DomainError("binary values must be 0 or 1");
    spins.push_back(2 * v - 1);
  }
  return SpinConfiguration(std::move(spins));
}

Mask SpinConfiguration::code() const {
  Mask c = 0;
  for (std::size_t i = 0; i < spins_.size(); ++i) {
    if (spins_[i] > 0) c |= Mask{1} << i;
  }
  return c;
}

std::vector<int> SpinConfiguration::to_binary() const {
  std::vector<int> v;
  v.reserve(spins_.size());
  for (auto s : spins_) v.push_back((s + 1) / 2);
  return v;
}

double parity(const SpinConfiguration& s, SubsetIndex subset) {
  if (!subset.fits(s.n_sites())) {
    throw DimensionError("subset mask does not fit in " + std::to_string(s.n_sites()) + " sites");
  }
  int prod = 1;
  for (Mask m = subset.mask(); m != 0; m &= m - 1) prod *= s[std::countr_zero(m)];
  return prod;
}

namespace {

void append_combinations(int n_sites, int remaining, int first, Mask prefix, std::vector<Mask>& out) {
  if (remaining == 0) {
    out.push_back(prefix);
    return;
  }
  for (int i = first; i <= n_sites - remaining; ++i) {
    append_combinations(n_sites, remaining - 1, i + 1, prefix | (Mask{1} << i), out);
  }
}

}  // namespace

std::vector<Mask> subsets_up_to(int n_sites, int max_order) {
  check_sites(n_sites);
  max_order = std::clamp(max_order, 0, n_sites);
  std::vector<Mask> out;
  out.reserve(count_subsets_up_to(n_sites, max_order));
  for (int k = 1; k <= max_order; ++k) append_combinations(n_sites, k, 0, 0, out);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t count_subsets_up_to(int n_sites, int max_order) {
  std::size_t total = 0;
  double binom = 1.0;
  for (int k = 1; k <= std::min(max_order, n_sites); ++k) {
    binom = binom * (n_sites - k + 1) / k;
    total += static_cast<std::size_t>(std::llround(binom));
  }
  return total;
}

// --- SubsetVector ----------------------------------------------------------

SubsetVector::SubsetVector(int n_sites, std::vector<double> dense_values)
    : n_sites_(n_sites), max_order_(n_sites), repr_(Representation::dense), values_(std::move(dense_values)) {
  check_sites(n_sites);
  if (n_sites > 30 || values_.size() != (std::size_t{1} << n_sites)) {
    throw DimensionError("dense subset vector needs exactly 2^N entries");
  }
}

SubsetVector::SubsetVector(int n_sites, int max_order, std::vector<Entry> entries)
    : n_sites_(n_sites), max_order_(max_order), repr_(Representation::truncated) {
  check_sites(n_sites);
  if (max_order < 0 || max_order > n_sites) throw DomainError("max_order out of range");
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.first < b.first; });
  masks_.reserve(entries.size());
  values_.reserve(entries.size());
  for (const auto& [mask, value] : entries) {
    check_mask(mask);
    if (std::popcount(mask) > max_order) throw DomainError("entry order exceeds max_order of truncated vector");
    if (!masks_.empty() && masks_.back() == mask) throw DomainError("duplicate subset in truncated vector");
    masks_.push_back(mask);
    values_.push_back(value);
  }
}

SubsetVector SubsetVector::zeros_dense(int n_sites) {
  check_sites(n_sites);
  if (n_sites > 30) throw LimitError("dense subset vector too large");
  return SubsetVector(n_sites, std::vector<double>(std::size_t{1} << n_sites, 0.0));
}

SubsetVector SubsetVector::zeros_truncated(int n_sites, int max_order) {
  std::vector<Entry> entries;
  for (Mask m : subsets_up_to(n_sites, max_order)) entries.emplace_back(m, 0.0);
  return SubsetVector(n_sites, max_order, std::move(entries));
}

void SubsetVector::check_mask(Mask mask) const {
  if ((mask & ~full_mask(n_sites_)) != 0) {
    throw DimensionError("subset mask does not fit in " + std::to_string(n_sites_) + " sites");
  }
}

double SubsetVector::operator[](Mask mask) const {
  check_mask(mask);
  if (is_dense()) return values_[static_cast<std::size_t>(mask)];
  auto it = std::lower_bound(masks_.begin(), masks_.end(), mask);
  if (it == masks_.end() || *it != mask) return 0.0;
  return values_[static_cast<std::size_t>(it - masks_.begin())];
}

double& SubsetVector::at(Mask mask) {
  check_mask(mask);
  if (is_dense()) return values_[static_cast<std::size_t>(mask)];
  auto it = std::lower_bound(masks_.begin(), masks_.end(), mask);
  if (it == masks_.end() || *it != mask) throw DomainError("subset not stored in truncated vector");
  return values_[static_cast<std::size_t>(it - masks_.begin())];
}

void SubsetVector::set(Mask mask, double value) {
  check_mask(mask);
  if (is_dense()) {
    values_[static_cast<std::size_t>(mask)] = value;
    return;
  }
  if (std::popcount(mask) > max_order_) throw DomainError("entry order exceeds max_order of truncated vector");
  auto it = std::lower_bound(masks_.begin(), masks_.end(), mask);
  const auto pos = it - masks_.begin();
  if (it != masks_.end() && *it == mask) {
    values_[static_cast<std::size_t>(pos)] = value;
  } else {
    masks_.insert(it, mask);
    values_.insert(values_.begin() + pos, value);
  }
}

double SubsetVector::norm_at_order(int n) const {
  double acc = 0.0;
  for_each([&](Mask m, double v) {
    if (std::popcount(m) == n) acc += v * v;
  });
  return std::sqrt(acc);
}

double SubsetVector::sup_norm() const {
  double best = 0.0;
  for_each([&](Mask m, double v) {
    if (m != 0) best = std::max(best, std::fabs(v));
  });
  return best;
}

SubsetVector SubsetVector::truncated_to(int max_order) const {
  max_order = std::clamp(max_order, 0, n_sites_);
  std::vector<Entry> entries;
  for_each([&](Mask m, double v) {
    if (std::popcount(m) <= max_order) entries.emplace_back(m, v);
  });
  return SubsetVector(n_sites_, max_order, std::move(entries));
}

EffectiveCouplings::EffectiveCouplings(int n_sites, std::vector<double> dense_values)
    : SubsetVector(n_sites, std::move(dense_values)) {
  check_no_empty();
}

EffectiveCouplings::EffectiveCouplings(int n_sites, int max_order, std::vector<Entry> entries)
    : SubsetVector(n_sites, max_order, std::move(entries)) {
  check_no_empty();
}

EffectiveCouplings::EffectiveCouplings(SubsetVector v) : SubsetVector(std::move(v)) { check_no_empty(); }

void EffectiveCouplings::check_no_empty() const {
  if ((*this)[0] != 0.0) throw DomainError("effective couplings carry no empty-set entry");
}

MomentVector::MomentVector(SubsetVector v) : SubsetVector(std::move(v)) {
  for_each([](Mask m, double x) {
    if (m != 0 && !(std::fabs(x) <= 1.0 + 1e-9)) throw DomainError("moment outside [-1, 1]");
  });
}

// --- EnergyOracle ----------------------------------------------------------

EnergyOracle::EnergyOracle(int n_sites, Fn fn) : n_sites_(n_sites), fn_(std::move(fn)) {
  check_sites(n_sites);
  if (!fn_) throw DomainError("energy oracle needs a callable");
}

EnergyOracle EnergyOracle::from_table(int n_sites, std::vector<double> values) {
  check_sites(n_sites);
  if (n_sites > 30 || values.size() != (std::size_t{1} << n_sites)) {
    throw DimensionError("energy table needs exactly 2^N entries");
  }
  auto table = std::make_shared<const std::vector<double>>(std::move(values));
  EnergyOracle oracle(n_sites, [table](const SpinConfiguration& s) { return (*table)[s.code()]; });
  oracle.table_ = std::move(table);
  return oracle;
}

EnergyOracle EnergyOracle::from_spectrum(SubsetVector spectrum) {
  const int n = spectrum.n_sites();
  auto shared = std::make_shared<const SubsetVector>(std::move(spectrum));
  return EnergyOracle(n, [shared](const SpinConfiguration& s) { return evaluate_expansion(*shared, s); });
}

double EnergyOracle::operator()(const SpinConfiguration& s) const {
  if (s.n_sites() != n_sites_) throw DimensionError("energy oracle evaluated on a configuration of the wrong size");
  return fn_(s);
}

double EnergyOracle::at_code(Mask code) const {
  if (table_) return (*table_)[static_cast<std::size_t>(code)];
  return fn_(SpinConfiguration::from_code(code, n_sites_));
}

std::vector<double> EnergyOracle::tabulate() const {
  require_enumerable(n_sites_, "tabulate");
  if (table_) return *table_;
  const std::size_t size = std::size_t{1} << n_sites_;
  std::vector<double> out(size);
  for (std::size_t c = 0; c < size; ++c) out[c] = fn_(SpinConfiguration::from_code(c, n_sites_));
  return out;
}

// --- transforms ------------------------------------------------------------

double fourier_coefficient_direct(const EnergyOracle& f, SubsetIndex subset) {
  const int n = f.n_sites();
  require_enumerable(n, "fourier_coefficient_direct");
  if (!subset.fits(n)) throw DimensionError("subset mask does not fit the oracle's sites");
  const std::size_t size = std::size_t{1} << n;
  double acc = 0.0;
  for (std::size_t c = 0; c < size; ++c) acc += f.at_code(c) * parity_sign(c, subset.mask());
  return acc / static_cast<double>(size);
}

// The unnormalised butterfly computes W[I] = sum_x f[x] (-1)^popcount(I & x).
// Since chi_I(x) = (-1)^|I| (-1)^popcount(I & x), fhat(I) = (-1)^|I| W[I] / 2^N.
FourierSpectrum fast_transform(std::span<const double> values) {
  const int n = log2_exact(values.size());
  if (n == 0) throw DimensionError("transform needs at least one site");
  require_enumerable(n, "fast_transform");
  std::vector<double> work(values.begin(), values.end());
  kernels::fwht(work);
  const double scale = 1.0 / static_cast<double>(work.size());
  for (std::size_t m = 0; m < work.size(); ++m) {
    work[m] *= (std::popcount(m) & 1) ? -scale : scale;
  }
  return FourierSpectrum(n, std::move(work));
}

std::vector<double> inverse_transform(const FourierSpectrum& spectrum) {
  if (!spectrum.is_dense()) throw DomainError("inverse_transform needs a dense spectrum; use evaluate_expansion");
  std::vector<double> work(spectrum.values().begin(), spectrum.values().end());
  for (std::size_t m = 0; m < work.size(); ++m) {
    if (std::popcount(m) & 1) work[m] = -work[m];
  }
  kernels::fwht(work);
  return work;
}

double evaluate_expansion(const SubsetVector& spectrum, Mask code) {
  double acc = 0.0;
  spectrum.for_each([&](Mask m, double v) {
    if (v != 0.0) acc += v * parity_sign(code, m);
  });
  return acc;
}

double evaluate_expansion(const SubsetVector& spectrum, const SpinConfiguration& s) {
  if (s.n_sites() != spectrum.n_sites()) throw DimensionError("configuration size differs from the spectrum");
  return evaluate_expansion(spectrum, s.code());
}

double inner_product(const EnergyOracle& f, const EnergyOracle& g) {
  if (f.n_sites() != g.n_sites()) throw DimensionError("inner product of functions on different site counts");
  require_enumerable(f.n_sites(), "inner_product");
  const std::size_t size = std::size_t{1} << f.n_sites();
  double acc = 0.0;
  for (std::size_t c = 0; c < size; ++c) acc += f.at_code(c) * g.at_code(c);
  return acc / static_cast<double>(size);
}

double influence(const FourierSpectrum& spectrum, int site) {
  if (site < 0 || site >= spectrum.n_sites()) throw DimensionError("influence: site index out of range");
  const Mask bit = Mask{1} << site;
  double acc = 0.0;
  spectrum.for_each([&](Mask m, double v) {
    if (m & bit) acc += v * v;
  });
  return acc;
}

double total_influence(const FourierSpectrum& spectrum) {
  double acc = 0.0;
  spectrum.for_each([&](Mask m, double v) { acc += std::popcount(m) * v * v; });
  return acc;
}

double spectral_weight_at(const FourierSpectrum& spectrum, int order) {
  if (order < 0 || order > spectrum.n_sites()) throw DomainError("order out of range");
  double acc = 0.0;
  spectrum.for_each([&](Mask m, double v) {
    if (std::popcount(m) == order) acc += v * v;
  });
  return acc;
}

double spectral_weight_above(const FourierSpectrum& spectrum, int order) {
  if (order < 1 || order > spectrum.n_sites()) throw DomainError("order must be in [1, N]");
  double acc = 0.0;
  spectrum.for_each([&](Mask m, double v) {
    if (std::popcount(m) >= order) acc += v * v;
  });
  return acc;
}

EffectiveCouplings effective_couplings_from_table(std::span<const double> energies) {
  FourierSpectrum spec = fast_transform(energies);
  std::vector<double> phi(spec.values().begin(), spec.values().end());
  phi[0] = 0.0;
  for (std::size_t m = 1; m < phi.size(); ++m) phi[m] = -phi[m];
  return EffectiveCouplings(spec.n_sites(), std::move(phi));
}

EffectiveCouplings effective_couplings_from_energy(const EnergyOracle& energy) {
  require_enumerable(energy.n_sites(), "effective_couplings_from_energy");
  const auto table = energy.tabulate();
  return effective_couplings_from_table(table);
}

}  // namespace ebm

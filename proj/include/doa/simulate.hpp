#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "doa/array_model.hpp"

namespace doa {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counter-based generator: output i of stream (seed, stream) is a pure
/// function of (seed, stream, i). Satisfies UniformRandomBitGenerator.
class StreamRng {
 public:
  using result_type = std::uint64_t;

  StreamRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_(splitmix64(seed) ^ splitmix64(~stream * 0xD1B54A32D192ED03ULL)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * counter_++); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct Scenario {
  ArrayGeometry geometry{8, 0.5};
  std::vector<double> source_angles_deg;
  std::vector<double> source_powers;  // empty means all 1
  double snr_db = 20.0;               // +inf means noiseless
  long n_snapshots = 100;
  bool coherent = false;
  std::uint64_t seed = 0;

  [[nodiscard]] std::vector<double> powers() const {
    if (source_powers.empty()) return std::vector<double>(source_angles_deg.size(), 1.0);
    return source_powers;
  }

  /// mean(powers) / 10^(snr/10); 1 when there are no sources.
  [[nodiscard]] double noise_var() const {
    if (std::isinf(snr_db) && snr_db > 0) return 0.0;
    const auto p = powers();
    const double mean_power =
        p.empty() ? 1.0 : std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
    return mean_power / std::pow(10.0, snr_db / 10.0);
  }

  void validate() const {
    for (double a : source_angles_deg) check_angle(a);
    if (!source_powers.empty() && source_powers.size() != source_angles_deg.size())
      fail(ErrorKind::invalid_input, "Scenario: source_powers length must match source angles");
    for (double p : source_powers)
      if (!(p > 0.0)) fail(ErrorKind::invalid_input, "Scenario: source powers must be positive");
    if (n_snapshots < 1) fail(ErrorKind::invalid_input, "Scenario: n_snapshots must be >= 1");
    if (std::isnan(snr_db) || (std::isinf(snr_db) && snr_db < 0))
      fail(ErrorKind::invalid_input, "Scenario: snr_db must be a number or +inf");
  }
};

/// Theoretical covariance of a scenario (n_snapshots sentinel 0).
inline CovarianceEstimate scenario_covariance(const Scenario& s) {
  s.validate();
  std::optional<std::vector<cplx>> coherence;
  if (s.coherent) coherence = in_phase_weights(s.source_angles_deg.size());
  return exact_covariance(s.geometry, s.source_angles_deg, s.powers(), s.noise_var(), coherence);
}

namespace detail {

// Circular complex Gaussian with E|z|^2 = var.
template <typename Rng>
cplx complex_gaussian(Rng& rng, std::normal_distribution<double>& unit, double var) {
  const double scale = std::sqrt(var / 2.0);
  const double re = unit(rng);
  const double im = unit(rng);
  return {scale * re, scale * im};
}

}  // namespace detail

/// Draws K x N source waveforms and the M x N snapshots X = A S + noise from
/// the stream (scenario.seed, trial_index).
struct SimulatedData {
  CMatrix sources;
  SnapshotMatrix snapshots;
};

inline SimulatedData simulate(const Scenario& s, std::uint64_t trial_index = 0) {
  s.validate();
  StreamRng rng(s.seed, trial_index);
  std::normal_distribution<double> unit(0.0, 1.0);

  const auto m = s.geometry.size();
  const auto n = static_cast<Eigen::Index>(s.n_snapshots);
  const auto k = static_cast<Eigen::Index>(s.source_angles_deg.size());
  const auto powers = s.powers();

  CMatrix src(k, n);
  if (s.coherent && k > 0) {
    const auto weights = in_phase_weights(static_cast<std::size_t>(k));
    for (Eigen::Index t = 0; t < n; ++t) {
      const cplx u = detail::complex_gaussian(rng, unit, 1.0);
      for (Eigen::Index i = 0; i < k; ++i)
        src(i, t) = weights[static_cast<std::size_t>(i)] * std::sqrt(powers[static_cast<std::size_t>(i)]) * u;
    }
  } else {
    for (Eigen::Index t = 0; t < n; ++t)
      for (Eigen::Index i = 0; i < k; ++i)
        src(i, t) = detail::complex_gaussian(rng, unit, powers[static_cast<std::size_t>(i)]);
  }

  CMatrix x = CMatrix::Zero(m, n);
  if (k > 0) x = manifold_matrix(s.geometry, s.source_angles_deg) * src;
  const double nv = s.noise_var();
  if (nv > 0.0)
    for (Eigen::Index t = 0; t < n; ++t)
      for (Eigen::Index i = 0; i < m; ++i) x(i, t) += detail::complex_gaussian(rng, unit, nv);

  return {std::move(src), SnapshotMatrix(std::move(x), s.geometry)};
}

inline SnapshotMatrix generate_snapshots(const Scenario& s, std::uint64_t trial_index = 0) {
  return simulate(s, trial_index).snapshots;
}

}  // namespace doa

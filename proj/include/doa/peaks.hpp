#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "doa/array_model.hpp"

namespace doa {

namespace detail {

// Vertex abscissa of the parabola through three points.
inline double parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
  const double d01 = x0 - x1, d02 = x0 - x2, d12 = x1 - x2;
  const double denom = d01 * d02 * d12;
  const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
  const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
  if (!(a < 0.0)) return x1;
  const double v = -b / (2.0 * a);
  return std::clamp(v, std::min(x0, x2), std::max(x0, x2));
}

}  // namespace detail

/// The `k_sources` largest interior local maxima (strictly above both
/// neighbours), each refined by a 3-point parabolic fit. Returns fewer angles
/// and `complete = false` when the spectrum has fewer peaks.
inline DoaEstimate find_peaks(const SpatialSpectrum& spectrum, int k_sources) {
  if (k_sources < 1) fail(ErrorKind::invalid_input, "find_peaks: k_sources must be >= 1");
  const auto& x = spectrum.angles_deg;
  const auto& y = spectrum.values;
  if (x.size() != y.size()) fail(ErrorKind::invalid_input, "find_peaks: length mismatch");

  std::vector<std::size_t> peaks;
  for (std::size_t i = 1; i + 1 < y.size(); ++i)
    if (y[i] > y[i - 1] && y[i] > y[i + 1]) peaks.push_back(i);
  std::stable_sort(peaks.begin(), peaks.end(),
                   [&](std::size_t a, std::size_t b) { return y[a] > y[b]; });

  DoaEstimate est;
  est.diagnostics["peaks_found"] = static_cast<double>(peaks.size());
  const auto take = std::min(peaks.size(), static_cast<std::size_t>(k_sources));
  for (std::size_t p = 0; p < take; ++p) {
    const std::size_t i = peaks[p];
    est.angles_deg.push_back(
        detail::parabola_vertex(x[i - 1], y[i - 1], x[i], y[i], x[i + 1], y[i + 1]));
  }
  std::sort(est.angles_deg.begin(), est.angles_deg.end());
  est.complete = take == static_cast<std::size_t>(k_sources);
  return est;
}

/// Peak picking for sparse power profiles: grid points at least as large as
/// the left neighbour and larger than the right one (endpoints compare with
/// their single neighbour), above `rel_threshold`·max, largest first. A
/// `max_count` of 0 keeps every such peak.
inline std::vector<std::size_t> profile_peaks(const std::vector<double>& values,
                                              double rel_threshold, std::size_t max_count = 0) {
  std::vector<std::size_t> out;
  if (values.empty()) return out;
  const double peak = *std::max_element(values.begin(), values.end());
  if (!(peak > 0.0)) return out;
  const double floor = rel_threshold * peak;
  const std::size_t n = values.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = values[i];
    if (!(v > 0.0) || v < floor) continue;
    const bool left_ok = i == 0 || v >= values[i - 1];
    const bool right_ok = i + 1 == n || v > values[i + 1];
    if (left_ok && right_ok) out.push_back(i);
  }
  std::stable_sort(out.begin(), out.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  if (max_count > 0 && out.size() > max_count) out.resize(max_count);
  return out;
}

}  // namespace doa

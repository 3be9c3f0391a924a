#pragma once

// Estimate/truth matching, RMSE and resolution metrics, and the Monte Carlo
// campaign runner.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "doa/estimators.hpp"
#include "doa/simulate.hpp"

namespace doa {

struct MatchResult {
  double rmse_deg = 0.0;
  std::vector<std::size_t> assignment;  // truth k is matched to estimates[assignment[k]]
  std::vector<double> errors_deg;       // estimate - truth, per true source
  bool greedy = false;
};

/// Minimum-squared-error assignment of estimates to true angles: exhaustive
/// over permutations for K <= 6, greedy nearest-pair beyond that.
inline MatchResult match_and_rmse(const std::vector<double>& estimates_deg, const std::vector<double>& truth_deg) {
  if (estimates_deg.size() != truth_deg.size())
    fail(ErrorKind::invalid_input, "match_and_rmse: estimate and truth lengths differ");
  const std::size_t k = truth_deg.size();
  MatchResult out;
  if (k == 0) return out;

  std::vector<std::size_t> best(k);
  if (k <= 6) {
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    double best_sse = std::numeric_limits<double>::infinity();
    do {
      double sse = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        const double e = estimates_deg[perm[i]] - truth_deg[i];
        sse += e * e;
      }
      if (sse < best_sse) {
        best_sse = sse;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    out.greedy = true;
    std::vector<bool> used_est(k, false), used_truth(k, false);
    for (std::size_t step = 0; step < k; ++step) {
      double best_d = std::numeric_limits<double>::infinity();
      std::size_t bi = 0, bj = 0;
      for (std::size_t i = 0; i < k; ++i) {
        if (used_truth[i]) continue;
        for (std::size_t j = 0; j < k; ++j) {
          if (used_est[j]) continue;
          const double d = std::abs(estimates_deg[j] - truth_deg[i]);
          if (d < best_d) {
            best_d = d;
            bi = i;
            bj = j;
          }
        }
      }
      used_truth[bi] = used_est[bj] = true;
      best[bi] = bj;
    }
  }
  out.assignment = best;
  double sse = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double e = estimates_deg[best[i]] - truth_deg[i];
    out.errors_deg.push_back(e);
    sse += e * e;
  }
  out.rmse_deg = std::sqrt(sse / static_cast<double>(k));
  return out;
}

/// Smallest gap between true angles; infinite for a single source.
inline double min_separation(std::vector<double> truth_deg) {
  std::sort(truth_deg.begin(), truth_deg.end());
  double sep = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < truth_deg.size(); ++i) sep = std::min(sep, truth_deg[i] - truth_deg[i - 1]);
  return sep;
}

struct TrialRecord {
  std::string method;
  double snr_db = 0.0;
  long n_snapshots = 0;
  int m_sensors = 0;
  std::size_t trial = 0;
  std::vector<double> truth_deg;
  std::vector<double> angles_deg;  // sorted
  std::optional<double> rmse_deg;  // absent when the estimator failed
  bool resolved = false;
  double wall_time_s = 0.0;
  bool failed = false;
  std::string error;
};

/// A trial is resolved when all K sources were found and every matched error
/// is below half the smallest true separation.
inline bool is_resolved(const std::vector<double>& estimates_deg, const std::vector<double>& truth_deg) {
  if (truth_deg.empty() || estimates_deg.size() != truth_deg.size()) return false;
  const double half = 0.5 * min_separation(truth_deg);
  const auto m = match_and_rmse(estimates_deg, truth_deg);
  return std::all_of(m.errors_deg.begin(), m.errors_deg.end(), [&](double e) { return std::abs(e) < half; });
}

inline double resolution_probability(const std::vector<TrialRecord>& records) {
  if (records.empty()) fail(ErrorKind::invalid_input, "resolution_probability: no records");
  const auto hits = std::count_if(records.begin(), records.end(), [](const TrialRecord& r) { return r.resolved; });
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

/// K angles uniform on [lo, hi] with every pair at least `min_sep_deg`
/// apart, by rejection sampling; sorted.
template <typename Rng>
std::vector<double> random_source_angles(Rng& rng, std::size_t k, double lo_deg = -60.0, double hi_deg = 60.0,
                                         double min_sep_deg = 5.0) {
  if (k > 1 && (hi_deg - lo_deg) < min_sep_deg * static_cast<double>(k - 1))
    fail(ErrorKind::invalid_input, "random_source_angles: range too small for the separation");
  std::uniform_real_distribution<double> u(lo_deg, hi_deg);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    std::vector<double> a(k);
    for (auto& v : a) v = u(rng);
    std::sort(a.begin(), a.end());
    if (k < 2 || min_separation(a) >= min_sep_deg) return a;
  }
  fail(ErrorKind::estimation_failure, "random_source_angles: could not place sources");
}

struct CampaignConfig {
  Scenario base;  // geometry, sources, powers, coherence; snr, N and seed come from the lists below
  std::size_t random_sources = 0;  // > 0: redraw this many angles per trial, ignoring base angles
  std::vector<std::string> methods;
  std::vector<double> snr_db_list;
  std::vector<long> n_list;
  std::size_t trials = 0;
  std::uint64_t master_seed = 0;
  unsigned workers = 1;
  bool record_timing = true;  // false writes 0 wall time, for byte-stable output
  MethodParams params;

  void validate() const {
    if (methods.empty()) fail(ErrorKind::invalid_input, "campaign: no methods");
    for (const auto& m : methods) detail::check_method(m);
    if (snr_db_list.empty() || n_list.empty()) fail(ErrorKind::invalid_input, "campaign: empty SNR or N list");
    for (long n : n_list)
      if (n < 1) fail(ErrorKind::invalid_input, "campaign: snapshot counts must be >= 1");
    if (base.source_angles_deg.empty() && random_sources == 0) fail(ErrorKind::invalid_input, "campaign: no sources");
    if (random_sources > 0 && !base.source_powers.empty() && base.source_powers.size() != random_sources)
      fail(ErrorKind::invalid_input, "campaign: source_powers length must match random_sources");
    if (workers < 1) fail(ErrorKind::invalid_input, "campaign: workers must be >= 1");
  }
};

namespace detail {

inline TrialRecord run_trial(const std::string& method, const SnapshotMatrix& x, const Scenario& s,
                             std::size_t trial, const MethodParams& params, bool timing) {
  TrialRecord rec;
  rec.method = method;
  rec.snr_db = s.snr_db;
  rec.n_snapshots = s.n_snapshots;
  rec.m_sensors = s.geometry.m_sensors();
  rec.trial = trial;
  rec.truth_deg = s.source_angles_deg;
  std::sort(rec.truth_deg.begin(), rec.truth_deg.end());
  const int k = static_cast<int>(rec.truth_deg.size());
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const DoaEstimate est = estimate(method, x, k, params);
    rec.angles_deg = est.angles_deg;
    if (!est.complete) {
      rec.failed = true;
      rec.error = "found " + std::to_string(est.angles_deg.size()) + " of " + std::to_string(k) + " sources";
    } else {
      rec.rmse_deg = match_and_rmse(rec.angles_deg, rec.truth_deg).rmse_deg;
      rec.resolved = is_resolved(rec.angles_deg, rec.truth_deg);
    }
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
    rec.angles_deg.clear();
  }
  if (timing) rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace detail

/// Every (SNR, N, trial) cell draws its data from stream hash(master_seed,
/// cell index) and all methods see the same data. Random source placement,
/// when enabled, uses a separate stream keyed the same way. Records come back ordered
/// by method, SNR, N, trial, whatever the worker count.
inline std::vector<TrialRecord> run_campaign(const CampaignConfig& cfg) {
  cfg.validate();
  const std::size_t n_snr = cfg.snr_db_list.size(), n_n = cfg.n_list.size(), n_m = cfg.methods.size();
  const std::size_t items = n_snr * n_n * cfg.trials;
  std::vector<TrialRecord> records(items * n_m);
  if (items == 0) return records;

  auto work = [&](std::size_t item) {
    const std::size_t t = item % cfg.trials;
    const std::size_t ni = (item / cfg.trials) % n_n;
    const std::size_t si = item / (cfg.trials * n_n);
    Scenario s = cfg.base;
    s.snr_db = cfg.snr_db_list[si];
    s.n_snapshots = cfg.n_list[ni];
    s.seed = cfg.master_seed;
    if (cfg.random_sources > 0) {
      StreamRng placement(splitmix64(cfg.master_seed ^ 0xA5A5A5A5A5A5A5A5ULL), item);
      s.source_angles_deg = random_source_angles(placement, cfg.random_sources);
    }
    const SnapshotMatrix x = generate_snapshots(s, item);
    for (std::size_t mi = 0; mi < n_m; ++mi)
      records[mi * items + item] = detail::run_trial(cfg.methods[mi], x, s, t, cfg.params, cfg.record_timing);
  };

  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(cfg.workers, items));
  if (workers <= 1) {
    for (std::size_t i = 0; i < items; ++i) work(i);
    return records;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < items; i = next++) work(i);
    });
  pool.clear();  // joins
  return records;
}

struct CellSummary {
  std::string method;
  double snr_db = 0.0;
  long n_snapshots = 0;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double rmse_deg = std::numeric_limits<double>::quiet_NaN();  // pooled over successful trials and sources
  double mean_trial_rmse_deg = std::numeric_limits<double>::quiet_NaN();
  double resolution_probability = 0.0;
  double failure_rate = 0.0;
  double mean_wall_time_s = 0.0;
};

/// sqrt(1/(T K) sum_t sum_k (est - truth)^2) over the successful records,
/// re-matching each record's angles to its truth.
inline double pooled_rmse(const std::vector<TrialRecord>& records) {
  double sse = 0.0;
  std::size_t count = 0;
  for (const auto& r : records) {
    if (r.failed) continue;
    const auto m = match_and_rmse(r.angles_deg, r.truth_deg);
    for (double e : m.errors_deg) sse += e * e;
    count += m.errors_deg.size();
  }
  return count == 0 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(sse / static_cast<double>(count));
}

/// One row per (method, SNR, N) cell, in first-appearance order.
inline std::vector<CellSummary> summarize(const std::vector<TrialRecord>& records) {
  using Key = std::tuple<std::string, double, long>;
  std::vector<Key> order;
  std::map<Key, std::vector<const TrialRecord*>> cells;
  for (const auto& r : records) {
    Key key{r.method, r.snr_db, r.n_snapshots};
    auto [it, inserted] = cells.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }
  std::vector<CellSummary> out;
  for (const auto& key : order) {
    const auto& rs = cells[key];
    CellSummary c;
    std::tie(c.method, c.snr_db, c.n_snapshots) = key;
    c.trials = rs.size();
    double sq = 0.0, sum = 0.0, time = 0.0;
    std::size_t ok = 0, resolved = 0;
    for (const auto* r : rs) {
      time += r->wall_time_s;
      if (r->resolved) ++resolved;
      if (r->failed) {
        ++c.failures;
        continue;
      }
      ++ok;
      sq += *r->rmse_deg * *r->rmse_deg;
      sum += *r->rmse_deg;
    }
    if (ok > 0) {
      c.rmse_deg = std::sqrt(sq / static_cast<double>(ok));
      c.mean_trial_rmse_deg = sum / static_cast<double>(ok);
    }
    c.resolution_probability = static_cast<double>(resolved) / static_cast<double>(c.trials);
    c.failure_rate = static_cast<double>(c.failures) / static_cast<double>(c.trials);
    c.mean_wall_time_s = time / static_cast<double>(c.trials);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace doa

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "doa/eval.hpp"

using namespace doa;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

TrialRecord record(bool resolved) {
  TrialRecord r;
  r.resolved = resolved;
  return r;
}

CampaignConfig small_campaign() {
  CampaignConfig c;
  c.base.geometry = ArrayGeometry(6);
  c.base.source_angles_deg = {-12.0, 14.0};
  c.methods = {"music", "esprit", "das"};
  c.snr_db_list = {0.0, 10.0};
  c.n_list = {20, 50};
  c.trials = 4;
  c.master_seed = 77;
  c.record_timing = false;
  return c;
}

bool same_records(const std::vector<TrialRecord>& a, const std::vector<TrialRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &x = a[i], &y = b[i];
    if (x.method != y.method || x.snr_db != y.snr_db || x.n_snapshots != y.n_snapshots || x.trial != y.trial ||
        x.truth_deg != y.truth_deg || x.angles_deg != y.angles_deg || x.rmse_deg != y.rmse_deg ||
        x.resolved != y.resolved || x.failed != y.failed || x.wall_time_s != y.wall_time_s)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("match_and_rmse examples") {
  const std::vector<double> truth = {-10.0, 5.0, 30.0};
  CHECK(match_and_rmse(truth, truth).rmse_deg == 0.0);
  CHECK_THAT(match_and_rmse({-9.0, 6.0, 31.0}, truth).rmse_deg, WithinAbs(1.0, 1e-12));

  const auto rev = match_and_rmse({31.0, 6.0, -9.0}, truth);
  CHECK_THAT(rev.rmse_deg, WithinAbs(1.0, 1e-12));
  CHECK(rev.assignment == std::vector<std::size_t>{2, 1, 0});
  CHECK_FALSE(rev.greedy);

  // Nearest-first is not always optimal: truth {0, 2}, estimates {1, 3.5}.
  // Pairing 0-1, 2-3.5 costs 1 + 2.25; the swap costs 12.25 + 1.
  const auto opt = match_and_rmse({3.5, 1.0}, {0.0, 2.0});
  CHECK_THAT(opt.rmse_deg, WithinAbs(std::sqrt(3.25 / 2.0), 1e-12));

  CHECK_THROWS_AS(match_and_rmse({1.0}, {1.0, 2.0}), Error);
}

TEST_CASE("match_and_rmse is invariant to reordering both lists") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-80.0, 80.0);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 1 + static_cast<std::size_t>(t % 6);
    std::vector<double> truth(k), est(k);
    for (std::size_t i = 0; i < k; ++i) {
      truth[i] = u(rng);
      est[i] = truth[i] + n(rng);
    }
    const double base = match_and_rmse(est, truth).rmse_deg;
    std::shuffle(truth.begin(), truth.end(), rng);
    std::shuffle(est.begin(), est.end(), rng);
    CHECK_THAT(match_and_rmse(est, truth).rmse_deg, WithinAbs(base, 1e-12));

    // Brute force over every permutation agrees with the reported optimum.
    std::vector<std::size_t> perm(k);
    for (std::size_t i = 0; i < k; ++i) perm[i] = i;
    double best = std::numeric_limits<double>::infinity();
    do {
      double sse = 0.0;
      for (std::size_t i = 0; i < k; ++i) sse += std::pow(est[perm[i]] - truth[i], 2);
      best = std::min(best, sse);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK_THAT(base, WithinAbs(std::sqrt(best / static_cast<double>(k)), 1e-12));
  }
}

TEST_CASE("match_and_rmse falls back to greedy above six sources") {
  std::vector<double> truth, est;
  for (int i = 0; i < 8; ++i) {
    truth.push_back(-70.0 + 20.0 * i);
    est.push_back(-70.0 + 20.0 * i + 0.5);
  }
  std::reverse(est.begin(), est.end());
  const auto m = match_and_rmse(est, truth);
  CHECK(m.greedy);
  CHECK_THAT(m.rmse_deg, WithinAbs(0.5, 1e-12));
}

TEST_CASE("resolution") {
  CHECK(min_separation({30.0, -10.0, 5.0}) == 15.0);
  CHECK(is_resolved({-9.0, 11.0}, {-10.0, 10.0}));
  CHECK_FALSE(is_resolved({0.5, 11.0}, {-10.0, 10.0}));
  CHECK_FALSE(is_resolved({10.0}, {-10.0, 10.0}));

  std::vector<TrialRecord> all(10, record(true)), none(10, record(false)), most(10, record(true));
  most[3].resolved = false;
  CHECK(resolution_probability(all) == 1.0);
  CHECK(resolution_probability(none) == 0.0);
  CHECK_THAT(resolution_probability(most), WithinAbs(0.9, 1e-15));
  CHECK_THROWS_AS(resolution_probability({}), Error);
}

TEST_CASE("random_source_angles") {
  StreamRng rng(3, 0);
  for (int t = 0; t < 200; ++t) {
    const auto a = random_source_angles(rng, 4);
    REQUIRE(a.size() == 4);
    CHECK(std::is_sorted(a.begin(), a.end()));
    CHECK(a.front() >= -60.0);
    CHECK(a.back() <= 60.0);
    CHECK(min_separation(a) >= 5.0);
  }
  CHECK_THROWS_AS(random_source_angles(rng, 30), Error);
}

TEST_CASE("run_campaign record layout") {
  auto c = small_campaign();
  const auto recs = run_campaign(c);
  REQUIRE(recs.size() == 3 * 2 * 2 * 4);
  CHECK(recs.front().method == "music");
  CHECK(recs.back().method == "das");
  for (const auto& r : recs) {
    CHECK(r.m_sensors == 6);
    CHECK(std::is_sorted(r.angles_deg.begin(), r.angles_deg.end()));
    CHECK(r.rmse_deg.has_value() == !r.failed);
    CHECK(r.wall_time_s == 0.0);
  }
  // Every method sees the same truth for a given cell.
  for (std::size_t i = 0; i < 16; ++i) CHECK(recs[i].truth_deg == recs[i + 16].truth_deg);

  c.trials = 0;
  CHECK(run_campaign(c).empty());

  c.trials = 1;
  c.methods = {"nope"};
  CHECK_THROWS_AS(run_campaign(c), Error);
}

TEST_CASE("run_campaign is deterministic across runs and worker counts") {
  auto c = small_campaign();
  c.random_sources = 2;
  const auto a = run_campaign(c);
  const auto b = run_campaign(c);
  CHECK(same_records(a, b));
  c.workers = 8;
  CHECK(same_records(a, run_campaign(c)));

  c.master_seed = 78;
  CHECK_FALSE(same_records(a, run_campaign(c)));
}

TEST_CASE("failed trials are recorded, not thrown") {
  CampaignConfig c;
  c.base.geometry = ArrayGeometry(4);
  c.base.source_angles_deg = {-10.0, 10.0};
  c.methods = {"l1_svd", "music"};
  c.snr_db_list = {10.0};
  c.n_list = {2};  // l1_svd needs K < min(M, N)
  c.trials = 3;
  c.record_timing = false;
  const auto recs = run_campaign(c);
  REQUIRE(recs.size() == 6);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(recs[i].failed);
    CHECK_FALSE(recs[i].rmse_deg.has_value());
    CHECK_FALSE(recs[i].error.empty());
  }
  const auto cells = summarize(recs);
  REQUIRE(cells.size() == 2);
  CHECK(cells[0].failures == 3);
  CHECK(cells[0].failure_rate == 1.0);
  CHECK(std::isnan(cells[0].rmse_deg));
}

TEST_CASE("pooled RMSE agrees across code paths") {
  auto c = small_campaign();
  c.methods = {"music"};
  c.snr_db_list = {5.0};
  c.n_list = {40};
  c.trials = 25;
  const auto recs = run_campaign(c);

  // Double sum over trials and sources written out directly.
  double sse = 0.0;
  std::size_t count = 0;
  for (const auto& r : recs) {
    if (r.failed) continue;
    auto est = r.angles_deg, truth = r.truth_deg;
    std::sort(est.begin(), est.end());
    std::sort(truth.begin(), truth.end());
    double best = std::numeric_limits<double>::infinity();
    do {
      double s = 0.0;
      for (std::size_t k = 0; k < truth.size(); ++k) s += std::pow(est[k] - truth[k], 2);
      best = std::min(best, s);
    } while (std::next_permutation(est.begin(), est.end()));
    sse += best;
    count += truth.size();
  }
  REQUIRE(count > 0);
  const double direct = std::sqrt(sse / static_cast<double>(count));
  CHECK_THAT(pooled_rmse(recs), WithinRel(direct, 1e-12));
  const auto cells = summarize(recs);
  REQUIRE(cells.size() == 1);
  CHECK_THAT(cells[0].rmse_deg, WithinRel(direct, 1e-12));
  CHECK(cells[0].trials == 25);
}

#include <catch_amalgamated.hpp>

#include <random>

#include "doa/peaks.hpp"
#include "doa/simulate.hpp"
#include "doa/subspace.hpp"

using namespace doa;
using Catch::Matchers::WithinAbs;

namespace {

CMatrix random_unitary(std::mt19937_64& rng, Eigen::Index k) {
  std::normal_distribution<double> n;
  CMatrix a(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) a(i, j) = {n(rng), n(rng)};
  Eigen::HouseholderQR<CMatrix> qr(a);
  return qr.householderQ() * CMatrix::Identity(k, k);
}

// MDL written out from the definition: likelihood ratio of the smallest
// M-k eigenvalues (geometric over arithmetic mean) to the power N(M-k).
double mdl_direct(const std::vector<double>& ev, long n, int k) {
  const int m = static_cast<int>(ev.size());
  double prod_log = 0.0, sum = 0.0;
  for (int i = k; i < m; ++i) {
    prod_log += std::log(ev[static_cast<std::size_t>(i)]);
    sum += ev[static_cast<std::size_t>(i)];
  }
  const double tail = m - k;
  const double log_ratio = prod_log / tail - std::log(sum / tail);
  return -static_cast<double>(n) * tail * log_ratio + 0.5 * k * (2.0 * m - k) * std::log(static_cast<double>(n));
}

}  // namespace

TEST_CASE("subspace_split") {
  CMatrix d = CMatrix::Identity(4, 4);
  d(0, 0) = 5.0;
  const auto s = subspace_split(CovarianceEstimate{d, 0}, 1);
  CHECK_THAT(std::abs(s.signal_basis(0, 0)), WithinAbs(1.0, 1e-12));
  CHECK(s.noise_basis.cols() == 3);
  CHECK_THAT(s.eigen_gap, WithinAbs(5.0, 1e-12));

  const ArrayGeometry g(8);
  const auto cov = exact_covariance(g, {-10.0, 10.0}, {1.0, 1.0}, 1.0);
  const auto split = subspace_split(cov, 2);
  const CMatrix complete = split.signal_basis * split.signal_basis.adjoint() + split.noise_basis * split.noise_basis.adjoint();
  CHECK((complete - CMatrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);
  for (double th : {-10.0, 10.0}) CHECK((split.noise_basis.adjoint() * steering_vector(g, th)).norm() < 1e-8);

  CHECK_THROWS_AS(subspace_split(cov, 8), Error);
  CHECK_THROWS_AS(subspace_split(cov, 0), Error);
}

TEST_CASE("source enumeration examples") {
  CHECK(estimate_source_count(std::vector<double>(6, 2.0), 100, Criterion::aic) == 0);
  CHECK(estimate_source_count(std::vector<double>(6, 2.0), 100, Criterion::mdl) == 0);

  const std::vector<double> ev = {100, 50, 1, 1, 1, 1, 1, 1};
  int best = 0;
  for (int k = 1; k < 8; ++k)
    if (mdl_direct(ev, 500, k) < mdl_direct(ev, 500, best)) best = k;
  CHECK(best == 2);
  CHECK(estimate_source_count(ev, 500, Criterion::mdl) == 2);
  for (int k = 0; k < 8; ++k)
    CHECK_THAT(information_criterion(ev, 500, k, Criterion::mdl), WithinAbs(mdl_direct(ev, 500, k), 1e-8));

  std::vector<std::string> warnings;
  CHECK_NOTHROW(estimate_source_count(std::vector<double>{3.0, 1.0, 0.0, -1e-15}, 10, Criterion::mdl, &warnings));
  CHECK(warnings.size() == 1);
  CHECK_THROWS_AS(estimate_source_count(ev, 0, Criterion::mdl), Error);
}

TEST_CASE("MDL never picks more sources than AIC; both are scale invariant") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::uniform_int_distribution<long> nn(10, 2000);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> ev(8);
    for (auto& e : ev) e = std::pow(10.0, u(rng));
    std::sort(ev.begin(), ev.end(), std::greater<>());
    const long n = nn(rng);
    const int aic = estimate_source_count(ev, n, Criterion::aic);
    const int mdl = estimate_source_count(ev, n, Criterion::mdl);
    CHECK(mdl <= aic);
    std::vector<double> scaled = ev;
    for (auto& e : scaled) e *= 37.5;
    CHECK(estimate_source_count(scaled, n, Criterion::aic) == aic);
    CHECK(estimate_source_count(scaled, n, Criterion::mdl) == mdl);
  }
}

TEST_CASE("music_spectrum") {
  const ArrayGeometry g(8);
  const auto grid = make_grid(-90.0, 90.0, 0.1);
  const auto cov = exact_covariance(g, {-20.0, 30.0}, {1.0, 1.0}, 0.1);
  const auto spec = music_spectrum(subspace_split(cov, 2), g, grid);
  CHECK(spec.values[700] >= 1e12);   // -20
  CHECK(spec.values[1200] >= 1e12);  // 30
  for (double v : spec.values) CHECK(v > 0.0);

  const auto scaled = music_spectrum(subspace_split(CovarianceEstimate{4.0 * cov.matrix, 0}, 2), g, grid);
  const auto p1 = find_peaks(spec, 2), p2 = find_peaks(scaled, 2);
  CHECK(p1.angles_deg == p2.angles_deg);

  // K = M-1 leaves one noise vector; the spectrum is 1/|u^H a|^2.
  const auto full = subspace_split(exact_covariance(g, {-40.0, -20.0, 0.0, 15.0, 30.0, 45.0, 60.0},
                                                    std::vector<double>(7, 1.0), 0.1),
                                   7);
  const auto one = music_spectrum(full, g, make_grid(-90.0, 90.0, 1.0));
  const CVector u = full.noise_basis.col(0);
  for (std::size_t i = 0; i < one.angles_deg.size(); i += 7) {
    const double direct = 1.0 / std::max(std::norm(u.dot(steering_vector(g, one.angles_deg[i]))), 1e-30);
    CHECK_THAT(one.values[i] / direct, WithinAbs(1.0, 1e-9));
  }
}

TEST_CASE("root_music coefficients are conjugate symmetric") {
  const ArrayGeometry g(6);
  Scenario s;
  s.geometry = g;
  s.source_angles_deg = {-7.0, 22.0};
  s.seed = 5;
  const auto split = subspace_split(sample_covariance(generate_snapshots(s)), 2);
  const auto c = root_music_coefficients(split.noise_basis);
  REQUIRE(c.size() == 11);
  for (int k = 1; k < 6; ++k) CHECK(std::abs(c[static_cast<std::size_t>(5 - k)] - std::conj(c[static_cast<std::size_t>(5 + k)])) < 1e-12);
}

TEST_CASE("root_music on exact covariances") {
  const ArrayGeometry g(8);
  const auto one = root_music(subspace_split(exact_covariance(g, {20.0}, {1.0}, 0.01), 1), g, 1);
  CHECK_THAT(one.angles_deg[0], WithinAbs(20.0, 1e-6));
  const auto zero = root_music(subspace_split(exact_covariance(g, {0.0}, {1.0}, 0.01), 1), g, 1);
  CHECK_THAT(zero.angles_deg[0], WithinAbs(0.0, 1e-6));
  const auto three = root_music(subspace_split(exact_covariance(g, {-10.0, 12.3, 40.0}, {1.0, 2.0, 0.5}, 0.0), 3), g, 3);
  CHECK_THAT(three.angles_deg[0], WithinAbs(-10.0, 1e-6));
  CHECK_THAT(three.angles_deg[1], WithinAbs(12.3, 1e-6));
  CHECK_THAT(three.angles_deg[2], WithinAbs(40.0, 1e-6));

  CHECK_THROWS_AS(root_music(subspace_split(exact_covariance(ArrayGeometry(8, 0.6), {0.0}, {1.0}, 0.1), 1),
                             ArrayGeometry(8, 0.6), 1),
                  Error);
}

TEST_CASE("paired_disk_roots keeps one representative per reciprocal pair") {
  const cplx a = std::polar(0.9, 0.4), b = std::polar(1.0, -1.0);
  const auto reps = paired_disk_roots({a, 1.0 / std::conj(a), b, b});
  REQUIRE(reps.size() == 2);
  CHECK(std::abs(reps[0].z - b) < 1e-12);
  CHECK(std::abs(reps[1].z - a) < 1e-12);
}

TEST_CASE("esprit") {
  const ArrayGeometry g(8);
  const auto pair = esprit(subspace_split(exact_covariance(g, {-10.0, 10.0}, {1.0, 1.0}, 0.1), 2), g, 2);
  CHECK_THAT(pair.angles_deg[0], WithinAbs(-10.0, 1e-8));
  CHECK_THAT(pair.angles_deg[1], WithinAbs(10.0, 1e-8));

  const auto zero = esprit(subspace_split(exact_covariance(g, {0.0}, {1.0}, 0.1), 1), g, 1);
  CHECK_THAT(zero.angles_deg[0], WithinAbs(0.0, 1e-10));

  // Any unitary mix of the signal basis gives the same angles.
  Scenario s;
  s.source_angles_deg = {-25.0, 5.0, 31.0};
  s.seed = 2;
  auto split = subspace_split(sample_covariance(generate_snapshots(s)), 3);
  const auto base = esprit(split, s.geometry, 3);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 5; ++t) {
    auto mixed = split;
    mixed.signal_basis = split.signal_basis * random_unitary(rng, 3);
    const auto est = esprit(mixed, s.geometry, 3);
    for (int i = 0; i < 3; ++i) CHECK_THAT(est.angles_deg[static_cast<std::size_t>(i)], WithinAbs(base.angles_deg[static_cast<std::size_t>(i)], 1e-10));
  }
}

TEST_CASE("unitary_esprit") {
  const ArrayGeometry g(8);
  const auto cov = exact_covariance(g, {-15.0, 25.0}, {1.0, 1.0}, 0.1);
  const auto u = unitary_esprit(cov, g, 2);
  const auto e = esprit(subspace_split(cov, 2), g, 2);
  for (int i = 0; i < 2; ++i) CHECK_THAT(u.angles_deg[static_cast<std::size_t>(i)], WithinAbs(e.angles_deg[static_cast<std::size_t>(i)], 1e-6));
  CHECK_THAT(u.angles_deg[0], WithinAbs(-15.0, 1e-6));

  const auto zero = unitary_esprit(exact_covariance(g, {0.0}, {1.0}, 0.1), g, 1);
  CHECK_THAT(zero.angles_deg[0], WithinAbs(0.0, 1e-10));

  for (int m : {5, 7}) {
    const ArrayGeometry go(m);
    const auto odd = unitary_esprit(exact_covariance(go, {-30.0, 8.0}, {1.0, 1.0}, 0.05), go, 2);
    CHECK_THAT(odd.angles_deg[0], WithinAbs(-30.0, 1e-6));
    CHECK_THAT(odd.angles_deg[1], WithinAbs(8.0, 1e-6));
  }
}

TEST_CASE("coherent pair: unitary ESPRIT recovers it, plain ESPRIT does not") {
  const ArrayGeometry g(8);
  const auto coh = exact_covariance(g, {-10.0, 10.0}, {1.0, 1.0}, 0.01, in_phase_weights(2));
  const auto u = unitary_esprit(coh, g, 2);
  CHECK_THAT(u.angles_deg[0], WithinAbs(-10.0, 0.1));
  CHECK_THAT(u.angles_deg[1], WithinAbs(10.0, 0.1));

  bool plain_ok = false;
  try {
    const auto e = esprit(subspace_split(coh, 2), g, 2);
    plain_ok = std::abs(e.angles_deg[0] + 10.0) < 0.1 && std::abs(e.angles_deg[1] - 10.0) < 0.1;
  } catch (const Error&) {
  }
  CHECK_FALSE(plain_ok);
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "stagpatch/assignment.hpp"
#include "stagpatch/error.hpp"
#include "stagpatch/spectra.hpp"

using namespace stagpatch;

namespace {

// Largest distance after an optimal pairing of two equally sized lists.
double matched_distance(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  REQUIRE(a.size() == b.size());
  Eigen::MatrixXd c(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) c(i, j) = std::abs(a[i] - b[j]);
  auto m = min_cost_assignment(c);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, c(i, m.row_to_col[i]));
  return worst;
}

std::vector<cplx> dense_spectrum(const PatchGridSpec& s, const SchemeId& scheme, const PhysicalParams& p) {
  return eig(assemble_jacobian(CouplingOperator::build(s, scheme), p).J).values;
}

}  // namespace

TEST_SUITE("assignment") {

TEST_CASE("hungarian matches brute force on small problems") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int rows = 1 + trial % 4, cols = rows + trial % 3;
    Eigen::MatrixXd c(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) c(i, j) = u(rng);
    std::vector<int> perm(cols);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
      double s = 0.0;
      for (int i = 0; i < rows; ++i) s += c(i, perm[i]);
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    auto a = min_cost_assignment(c);
    CHECK(a.cost == doctest::Approx(best).epsilon(1e-12));
    std::vector<int> cols_used = a.row_to_col;
    std::sort(cols_used.begin(), cols_used.end());
    CHECK(std::adjacent_find(cols_used.begin(), cols_used.end()) == cols_used.end());
  }
  CHECK_THROWS_AS(min_cost_assignment(Eigen::MatrixXd::Zero(3, 2)), ContractError);
}

}

TEST_SUITE("spectra") {

TEST_CASE("eig on textbook matrices") {
  Eigen::MatrixXd d = Eigen::Vector3d(3.0, -1.0, 0.5).asDiagonal();
  auto e = eig(d, true);
  std::vector<double> re;
  for (cplx z : e.values) {
    CHECK(z.imag() == 0.0);
    re.push_back(z.real());
  }
  std::sort(re.begin(), re.end());
  CHECK(re == std::vector<double>{-1.0, 0.5, 3.0});

  Eigen::MatrixXd rot(2, 2);
  rot << 0, -1, 1, 0;
  auto r = eig(rot, true);
  CHECK(matched_distance(r.values, {cplx(0, 1), cplx(0, -1)}) < 1e-15);
  CHECK(r.max_residual < 1e-14);

  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(eig(bad), NumericalError);
}

TEST_CASE("jacobian columns are impulse responses and match probes") {
  auto s = build_patch_grid(10, 6, 0.1);
  PhysicalParams p{1e-6, 1e-4};
  auto op = CouplingOperator::spectral(s);
  auto jac = assemble_jacobian(op, p);
  CHECK(jac.J.rows() == 1475);
  CHECK(jac.probe_error <= 1e-12);
  for (std::size_t k : {std::size_t(0), std::size_t(17), std::size_t(800), std::size_t(1474)}) {
    PatchState x = PatchState::zeros(s);
    x.values[k] = 1.0;
    auto f = coupled_rhs(x, op, p);
    for (std::size_t r = 0; r < f.values.size(); ++r) REQUIRE(jac.J(r, k) == f.values[r]);
  }
  // also the macro centre of patch (3,0)
  PatchState x = PatchState::zeros(s);
  const std::size_t k = s.slot({3, 0, 0, 0, Field::U, Region::Interior});
  x.values[k] = 1.0;
  auto f = coupled_rhs(x, op, p);
  for (std::size_t r = 0; r < f.values.size(); ++r) REQUIRE(jac.J(r, k) == f.values[r]);

  SUBCASE("spectral ideal waves are neutral and the spectrum is conjugation closed") {
    auto ideal = eig(assemble_jacobian(op, {}).J, true).values;
    double re = 0.0;
    for (cplx z : ideal) re = std::max(re, std::abs(z.real()));
    CHECK(re <= 1e-10);
    std::vector<cplx> conj(ideal.size());
    std::transform(ideal.begin(), ideal.end(), conj.begin(), [](cplx z) { return std::conj(z); });
    CHECK(matched_distance(ideal, conj) <= 1e-10);
  }
  SUBCASE("classification census and spectral exactness") {
    auto cs = classify(eig(jac.J).values, s, p);
    CHECK(cs.macro.size() == 75);
    CHECK(cs.micro.size() == 1400);
    CHECK(cs.max_residual() <= 1e-10);
    CHECK(!cs.review);
    auto c = census(cs);
    CHECK(c.macro_max_re > -0.001);
    CHECK(c.micro_max_re < -0.01);
    CHECK(c.micro_upper + c.micro_lower + c.micro_real == 1400);
    CHECK(*eigenvalue_error(cs, 1, 0) <= 1e-10);
  }
}

TEST_CASE("full-domain jacobian reproduces the analytic eigenvalues") {
  for (int n : {6, 10}) {
    auto g = build_micro_grid(n);
    for (PhysicalParams p : {PhysicalParams{}, PhysicalParams{1e-3, 1e-2}, PhysicalParams{0.2, 0.7}}) {
      auto num = eig(assemble_full_domain_jacobian(g, p), true).values;
      std::vector<cplx> ana;
      for (const auto& t : analytic_full_domain_set(g, p))
        for (cplx z : t.values()) ana.push_back(z);
      CHECK(ana.size() == num.size());
      CHECK(matched_distance(ana, num) <= 1e-10);
    }
  }
}

TEST_CASE("bloch blocks reproduce the dense spectrum") {
  PhysicalParams p{1e-3, 1e-2};
  for (int N : {6, 10}) {
    auto s = build_patch_grid(N, 6, 0.2);
    for (auto scheme : all_schemes()) {
      auto dense = dense_spectrum(s, scheme, p);
      auto bloch = bloch_spectrum(s, scheme, p);
      CHECK(bloch.dimension() == s.state_count());
      CHECK(matched_distance(dense, bloch.flattened()) <= 1e-9);
    }
  }
}

TEST_CASE("bloch blocks of opposite wavenumbers are conjugate") {
  auto s = build_patch_grid(10, 6, 0.1);
  auto b = bloch_blocks(s, SchemeId::square_p(4), {1e-3, 1e-2}, {{1, 2}, {-1, -2}});
  CHECK((b[0] - b[1].conjugate()).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("extended precision blocks agree with working precision") {
  auto s = build_patch_grid(6, 6, 0.1);
  PhysicalParams p{1e-6, 1e-4};
  for (auto scheme : {SchemeId::spectral(), SchemeId::square_p(6)}) {
    auto w = classify(bloch_spectrum(s, scheme, p, Precision::Working));
    auto x = classify(bloch_spectrum(s, scheme, p, Precision::Extended));
    auto e = roundoff_errors(x, w);
    CHECK(e.macro <= 1e-11);
    CHECK(e.micro <= 1e-9);
    auto same = roundoff_errors(w, w);
    CHECK(same.macro == 0.0);
    CHECK(same.micro == 0.0);
  }
  auto other = classify(bloch_spectrum(s, SchemeId::spectral(), {0.001, 0.0}));
  auto base = classify(bloch_spectrum(s, SchemeId::spectral(), {}));
  CHECK_THROWS_AS(roundoff_errors(base, other), ContractError);
}

TEST_CASE("bloch classification agrees with the dense classification") {
  auto s = build_patch_grid(10, 6, 0.1);
  PhysicalParams p{1e-3, 1e-2};
  auto scheme = SchemeId::square_p(2);
  auto dense = classify(dense_spectrum(s, scheme, p), s, p);
  auto bloch = classify(bloch_spectrum(s, scheme, p));
  CHECK(bloch.macro.size() == 75);
  CHECK(bloch.micro.size() == 1400);
  // Eigenvalue-only matching is reliable while errors stay below the
  // spacing between neighbouring wavenumbers' eigenvalues.
  for (const auto& m : dense.macro) {
    if (std::abs(m.k_x) > 1 || std::abs(m.k_y) > 1) continue;
    const auto* b = bloch.find(m.k_x, m.k_y, m.member);
    REQUIRE(b != nullptr);
    CHECK(std::abs(b->numeric - m.numeric) <= 1e-9);
  }
  // Per-wavenumber matching follows the p2 dispersion sin(k Delta)/Delta.
  const auto* b = bloch.find(0, 2, 1);
  CHECK(std::abs(b->numeric.imag() - std::sin(2 * s.Delta) / s.Delta) < 0.01);
  CHECK(bloch.find(1, 0, 1)->residual > 0.0);
  CHECK(bloch.find(1, 0, 1)->residual < 0.1);
}

TEST_CASE("exact analytic input classifies with zero residuals") {
  auto s = build_patch_grid(6, 6, 0.1);
  PhysicalParams p{1e-3, 1e-2};
  std::vector<cplx> eigs;
  for (const auto& t : analytic_macroscale_set(s, p))
    for (cplx z : t.values()) eigs.push_back(z);
  const std::size_t macro = eigs.size();
  for (std::size_t k = 0; eigs.size() < s.state_count(); ++k) eigs.push_back(cplx(-5.0 - 0.01 * k, 100.0 + k));
  std::reverse(eigs.begin(), eigs.end());
  auto cs = classify(eigs, s, p);
  CHECK(cs.macro.size() == macro);
  CHECK(cs.max_residual() == 0.0);
  CHECK(cs.micro.size() == s.state_count() - macro);
  CHECK_THROWS_AS(classify(std::vector<cplx>(5), s, p), ContractError);
}

TEST_CASE("eigenvalue error definition") {
  auto s = build_patch_grid(6, 6, 0.1);
  std::vector<cplx> eigs;
  for (const auto& t : analytic_macroscale_set(s, {}))
    for (cplx z : t.values()) eigs.push_back(z);
  while (eigs.size() < s.state_count()) eigs.push_back(cplx(-50.0, 7.0 * eigs.size()));
  auto cs = classify(eigs, s, {});
  CHECK(*eigenvalue_error(cs, 1, 0) == 0.0);
  CHECK(!eigenvalue_error(cs, 0, 0).has_value());
  CHECK_THROWS_AS(eigenvalue_error(cs, 7, 0), ContractError);
}

TEST_CASE("power law fits") {
  std::vector<std::pair<double, double>> pts;
  for (double d : {0.1, 0.2, 0.4, 0.8}) pts.push_back({d, std::pow(d, 4)});
  auto f = consistency_fit(pts);
  CHECK(f.exponent == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(f.prefactor == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pinned_prefactor(pts, 4.0) == doctest::Approx(1.0).epsilon(1e-12));

  pts.push_back({0.05, 1e-9});
  pts.push_back({0.025, 0.0});
  auto g = consistency_fit(pts, 1e-8);
  CHECK(g.filtered.size() == 2);
  CHECK(g.used.size() == 4);
  CHECK(g.exponent == doctest::Approx(4.0));
  CHECK_THROWS_AS(consistency_fit({{0.1, 1.0}, {0.2, 2.0}}), ParameterError);
}

TEST_CASE("spectrum csv rows") {
  auto s = build_patch_grid(6, 6, 0.1);
  auto cs = classify(bloch_spectrum(s, SchemeId::spectral(), {1e-6, 1e-4}));
  std::ostringstream os;
  write_spectrum_csv_header(os);
  write_spectrum_csv(os, cs, SchemeId::spectral());
  const std::string text = os.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(s.state_count() + 1));
  CHECK(text.rfind("scheme,N,n,r,c_D,c_V,re,im,class,k_x,k_y,residual,asinh_re,asinh_im\n", 0) == 0);
}

}

TEST_SUITE("spectra") {

TEST_CASE("real-form block spectrum equals the dense spectrum") {
  auto s = build_patch_grid(10, 6, 0.2);
  PhysicalParams p{1e-6, 1e-4};
  for (auto scheme : {SchemeId::spectral(), SchemeId::square_p(4)}) {
    auto dense = dense_spectrum(s, scheme, p);
    auto real = real_form_spectrum(s, scheme, p);
    CHECK(real.size() == s.state_count());
    CHECK(matched_distance(dense, real) <= 1e-9);
  }
}

}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <set>

#include <Eigen/Dense>

#include "stagpatch/error.hpp"
#include "stagpatch/microscale.hpp"

using namespace stagpatch;
using cplx = std::complex<double>;

namespace {

constexpr double kPi = 3.141592653589793;

std::vector<cplx> sorted(std::vector<cplx> v) {
  std::sort(v.begin(), v.end(), [](cplx a, cplx b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return v;
}

// RHS of a complex state through the real operator.
std::vector<cplx> complex_rhs(const MicroGridSpec& g, const std::vector<cplx>& z, const PhysicalParams& p) {
  FullDomainState re = make_full_domain_state(g), im = make_full_domain_state(g);
  for (std::size_t k = 0; k < z.size(); ++k) {
    re.values[k] = z[k].real();
    im.values[k] = z[k].imag();
  }
  auto dre = full_domain_rhs(re, p), dim = full_domain_rhs(im, p);
  std::vector<cplx> out(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = {dre.values[k], dim.values[k]};
  return out;
}

// 3x3 multiplier of a single Fourier mode, found by injecting the mode on
// one field at a time and projecting the response back onto the mode.
Eigen::Matrix3cd mode_multiplier(const MicroGridSpec& g, int kx, int ky, const PhysicalParams& p,
                                 double& leak) {
  Eigen::Matrix3cd A;
  leak = 0.0;
  const auto nodes = g.nodes();
  for (int src = 0; src < 3; ++src) {
    std::vector<cplx> z(nodes.size(), 0.0);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (static_cast<int>(nodes[k].kind) != src) continue;
      auto x = g.position(nodes[k].i, nodes[k].j);
      z[k] = std::polar(1.0, kx * x[0] + ky * x[1]);
    }
    auto dz = complex_rhs(g, z, p);
    cplx coef[3] = {0.0, 0.0, 0.0};
    bool have[3] = {false, false, false};
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const int f = static_cast<int>(nodes[k].kind);
      auto x = g.position(nodes[k].i, nodes[k].j);
      const cplx ratio = dz[k] / std::polar(1.0, kx * x[0] + ky * x[1]);
      if (!have[f]) {
        coef[f] = ratio;
        have[f] = true;
      }
      leak = std::max(leak, std::abs(ratio - coef[f]));
    }
    for (int f = 0; f < 3; ++f) A(f, src) = coef[f];
  }
  return A;
}

}  // namespace

TEST_SUITE("microscale") {

TEST_CASE("zero state has zero derivative") {
  auto g = build_micro_grid(6);
  auto d = full_domain_rhs(make_full_domain_state(g), {0.001, 0.01});
  for (double v : d.values) CHECK(v == 0.0);
}

TEST_CASE("uniform u decays by drag only") {
  auto g = build_micro_grid(10);
  auto s = make_full_domain_state(g);
  for (auto node : g.nodes())
    if (node.kind == Field::U) s.values[g.slot(node.i, node.j)] = 1.0;
  auto d = full_domain_rhs(s, {0.001, 0.37});
  for (auto node : g.nodes()) {
    const double v = d.values[g.slot(node.i, node.j)];
    if (node.kind == Field::U) CHECK(v == doctest::Approx(-0.001).epsilon(1e-14));
    else CHECK(std::abs(v) < 1e-15);
  }
}

TEST_CASE("shape mismatch is a contract error") {
  auto g = build_micro_grid(6);
  FullDomainState s{g, std::vector<double>(5, 0.0)};
  CHECK_THROWS_AS(full_domain_rhs(s, {}), ContractError);
  CHECK_THROWS_AS(full_domain_rhs(make_full_domain_state(g), {-1.0, 0.0}), ParameterError);
}

TEST_CASE("single Fourier mode multiplier reproduces analytic eigenvalues") {
  for (int n : {6, 10, 14}) {
    auto g = build_micro_grid(n);
    for (PhysicalParams p : {PhysicalParams{1e-6, 1e-4}, PhysicalParams{0.0, 0.0}, PhysicalParams{0.001, 0.5}}) {
      for (auto [kx, ky] : {std::pair{1, 0}, std::pair{0, 1}, std::pair{1, 1}, std::pair{-1, 2}}) {
        double leak = 0.0;
        auto A = mode_multiplier(g, kx, ky, p, leak);
        CHECK(leak < 1e-11);
        Eigen::ComplexEigenSolver<Eigen::Matrix3cd> es(A);
        std::vector<cplx> num(es.eigenvalues().data(), es.eigenvalues().data() + 3);
        auto t = analytic_eigs(kx, ky, g.delta, p);
        auto ana = t.values();
        auto a = sorted({ana.begin(), ana.end()}), b = sorted(num);
        for (int k = 0; k < 3; ++k) CHECK(std::abs(a[k] - b[k]) < 1e-9 * std::max(1.0, std::abs(a[k])));
      }
    }
  }
}

TEST_CASE("analytic eigenvalue special cases") {
  PhysicalParams p{0.003, 0.02};
  auto t0 = analytic_eigs(0, 0, 0.1, p);
  CHECK(t0.vortex == cplx(-0.003, 0.0));
  CHECK(std::abs(t0.wave_plus - cplx(0.0, 0.0)) < 1e-18);
  CHECK(std::abs(t0.wave_minus - cplx(-0.003, 0.0)) < 1e-18);

  const double delta = kPi / 150;
  auto ideal = analytic_eigs(2, -1, delta, {});
  const double w = std::sqrt(std::pow(std::sin(2 * delta) / delta, 2) + std::pow(std::sin(delta) / delta, 2));
  CHECK(ideal.vortex == cplx(0.0, 0.0));
  CHECK(ideal.wave_plus.real() == 0.0);
  CHECK(ideal.wave_plus.imag() == doctest::Approx(w).epsilon(1e-15));
  CHECK(ideal.wave_minus == std::conj(ideal.wave_plus));

  // c_D = 1e-6, c_V = 1e-4, (1,0): cross-check against the cubic characteristic
  // polynomial lambda (lambda+g)^2 + w^2 (lambda+g) evaluated at the roots.
  PhysicalParams pp{1e-6, 1e-4};
  auto t = analytic_eigs(1, 0, delta, pp);
  const double w2 = std::pow(std::sin(delta) / delta, 2);
  const double gamma = pp.c_D + pp.c_V * w2;
  for (cplx l : t.values()) {
    const cplx poly = l * (l + gamma) * (l + gamma) + w2 * (l + gamma);
    CHECK(std::abs(poly) < 1e-14);
  }
  CHECK(t.vortex.real() == doctest::Approx(-gamma));
  CHECK(t.wave_plus.real() == doctest::Approx(-gamma / 2));
}

TEST_CASE("overdamped pair is real and sorted") {
  auto t = analytic_eigs(1, 0, 0.1, {0.0, 50.0});
  CHECK(t.wave_plus.imag() == 0.0);
  CHECK(t.wave_minus.imag() == 0.0);
  CHECK(t.wave_plus.real() > t.wave_minus.real());
  CHECK(t.wave_plus.real() <= 0.0);
}

TEST_CASE("analytic real parts are nonpositive across a sweep") {
  for (double cD : {0.0, 1e-6, 1e-3, 1.0})
    for (double cV : {0.0, 1e-4, 1e-2, 10.0})
      for (double delta : {1e-5, 1e-3, kPi / 150, 0.5})
        for (int kx = -4; kx <= 4; ++kx)
          for (int ky = -4; ky <= 4; ++ky)
            for (cplx l : analytic_eigs(kx, ky, delta, {cD, cV}).values()) CHECK(l.real() <= 0.0);
}

TEST_CASE("macroscale analytic set sizes") {
  PhysicalParams p{1e-6, 1e-4};
  auto s10 = analytic_macroscale_set(build_patch_grid(10, 6, 0.1), p);
  CHECK(s10.size() == 25);
  CHECK(3 * s10.size() == 75);
  auto s6 = analytic_macroscale_set(build_patch_grid(6, 6, 0.1), p);
  CHECK(s6.size() == 9);
  std::set<std::pair<int, int>> ks;
  for (auto& t : s10) ks.insert({t.k_x, t.k_y});
  CHECK(ks.size() == 25);
}

TEST_CASE("linearity and conservation") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> dist;
  auto g = build_micro_grid(10);
  PhysicalParams p{0.01, 0.3};
  auto x = make_full_domain_state(g), y = make_full_domain_state(g), z = make_full_domain_state(g);
  for (std::size_t k = 0; k < x.values.size(); ++k) {
    x.values[k] = dist(rng);
    y.values[k] = dist(rng);
    z.values[k] = 1.7 * x.values[k] - 0.4 * y.values[k];
  }
  auto fx = full_domain_rhs(x, p), fy = full_domain_rhs(y, p), fz = full_domain_rhs(z, p);
  double scale = 0.0, err = 0.0;
  for (std::size_t k = 0; k < x.values.size(); ++k) {
    scale = std::max(scale, std::abs(fz.values[k]));
    err = std::max(err, std::abs(fz.values[k] - (1.7 * fx.values[k] - 0.4 * fy.values[k])));
  }
  CHECK(err <= 1e-12 * scale);

  double sum = 0.0, mag = 0.0;
  for (auto node : g.nodes())
    if (node.kind == Field::H) {
      sum += fx.values[g.slot(node.i, node.j)];
      mag += std::abs(fx.values[g.slot(node.i, node.j)]);
    }
  CHECK(std::abs(sum) <= 1e-12 * mag);
}

}

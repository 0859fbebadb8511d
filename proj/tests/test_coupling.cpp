#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "stagpatch/coupling.hpp"
#include "stagpatch/error.hpp"

using namespace stagpatch;
using cplx = std::complex<double>;

namespace {

// Samples of f at every macro lattice point of every field.
template <class F>
MacroValues sample_macros(const PatchGridSpec& s, F f) {
  MacroValues mv = MacroValues::zeros(s.M());
  for (Field fld : kAllFields) {
    auto o = field_offset(fld);
    for (int J = 0; J < s.M(); ++J)
      for (int I = 0; I < s.M(); ++I)
        mv.at(fld, I, J) = f((2 * I + o[0]) * s.Delta, (2 * J + o[1]) * s.Delta, fld);
  }
  return mv;
}

}  // namespace

TEST_SUITE("coupling") {

TEST_CASE("scheme names round-trip") {
  for (auto s : all_schemes()) CHECK(SchemeId::parse(s.name()) == s);
  CHECK_THROWS_AS(SchemeId::parse("square-p3"), ParameterError);
  CHECK_THROWS_AS(SchemeId::parse("bogus"), ParameterError);
}

TEST_CASE("lagrange basis examples") {
  std::vector<double> nodes{-2, 0, 2};
  auto w0 = lagrange_basis(nodes, 0.0);
  CHECK(w0[0] == 0.0);
  CHECK(w0[1] == 1.0);
  CHECK(w0[2] == 0.0);
  auto w1 = lagrange_basis(nodes, 1.0);
  CHECK(w1[0] == doctest::Approx(-1.0 / 8).epsilon(1e-15));
  CHECK(w1[1] == doctest::Approx(3.0 / 4).epsilon(1e-15));
  CHECK(w1[2] == doctest::Approx(3.0 / 8).epsilon(1e-15));
  CHECK(w1[0] + w1[1] + w1[2] == doctest::Approx(1.0).epsilon(1e-15));
  // centre basis polynomial of the 3x3 tensor stencil at the origin
  CHECK(w0[1] * w0[1] == 1.0);
  std::vector<double> dup{0, 1, 1};
  CHECK_THROWS_AS(lagrange_basis(dup, 0.5), ParameterError);
}

TEST_CASE("lagrange cardinality and partition of unity") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int p : {2, 4, 6, 8}) {
    for (int parity : {0, 1}) {
      std::vector<int> nodes;
      if (parity == 0)
        for (int s = -p / 2; s <= p / 2; ++s) nodes.push_back(2 * s);
      else
        for (int r = -(p - 1); r <= p - 1; r += 2) nodes.push_back(r);
      for (std::size_t t = 0; t < nodes.size(); ++t) {
        auto w = lagrange_weights<double>(nodes, static_cast<double>(nodes[t]));
        for (std::size_t s = 0; s < nodes.size(); ++s) CHECK(std::abs(w[s] - (s == t ? 1.0 : 0.0)) <= 1e-12);
      }
      for (int trial = 0; trial < 20; ++trial) {
        auto w = lagrange_weights<double>(nodes, u(rng));
        double sum = 0.0;
        for (double x : w) sum += x;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
      }
    }
  }
}

TEST_CASE("dft2 conventions") {
  const int M = 5;
  std::vector<double> c(M * M, 2.5);
  auto C = dft2(std::span<const double>(c), M);
  CHECK(C.K == 2);
  CHECK(std::abs(C.at(0, 0) - cplx(2.5 * M * M)) < 1e-12);
  for (int ky = -2; ky <= 2; ++ky)
    for (int kx = -2; kx <= 2; ++kx)
      if (kx || ky) CHECK(std::abs(C.at(kx, ky)) < 1e-12);

  const double step = 2 * 3.141592653589793 / M;
  std::vector<cplx> mode(M * M);
  for (int J = 0; J < M; ++J)
    for (int I = 0; I < M; ++I) mode[I + M * J] = std::polar(1.0, step * I);
  auto E = dft2(std::span<const cplx>(mode), M);
  for (int ky = -2; ky <= 2; ++ky)
    for (int kx = -2; kx <= 2; ++kx) {
      const cplx expect = (kx == 1 && ky == 0) ? cplx(M * M) : cplx(0.0);
      CHECK(std::abs(E.at(kx, ky) - expect) < 1e-12);
    }
  CHECK_THROWS_AS(dft2(std::span<const double>(c.data(), 16), 4), ParameterError);
}

TEST_CASE("dft2 round trip") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> d;
  for (int M : {3, 5, 7, 13}) {
    std::vector<double> x(M * M);
    for (auto& v : x) v = d(rng);
    auto C = dft2(std::span<const double>(x), M);
    const double step = 2 * 3.141592653589793 / M;
    double scale = 0.0, err = 0.0;
    for (int J = 0; J < M; ++J)
      for (int I = 0; I < M; ++I) {
        scale = std::max(scale, std::abs(x[I + M * J]));
        err = std::max(err, std::abs(inverse_dft2_at(C, step * I, step * J) - cplx(x[I + M * J])));
      }
    CHECK(err <= 1e-13 * scale);
  }
}

TEST_CASE("spectral coupling: constants and resolved modes") {
  auto s = build_patch_grid(10, 6, 0.1);
  for (Realisation real : {Realisation::Functional, Realisation::Matrix}) {
    auto op = CouplingOperator::spectral(s, real);
    auto cst = op.edge_values(sample_macros(s, [](double, double, Field) { return 3.25; }));
    for (double v : cst.values) CHECK(std::abs(v - 3.25) <= 1e-12);

    auto mv = sample_macros(s, [](double x, double y, Field) { return std::cos(x + y); });
    auto ev = op.edge_values(mv);
    double err = 0.0;
    for (std::size_t e = 0; e < ev.values.size(); ++e) {
      auto pos = s.position(s.edge_node(e));
      err = std::max(err, std::abs(ev.values[e] - std::cos(pos[0] + pos[1])));
    }
    CHECK(err <= 1e-12);
  }
  // every resolved Fourier mode, sine and cosine parts
  auto op = CouplingOperator::spectral(s);
  for (int ky = -2; ky <= 2; ++ky)
    for (int kx = -2; kx <= 2; ++kx) {
      for (int phase = 0; phase < 2; ++phase) {
        auto f = [&](double x, double y) { return phase ? std::sin(kx * x + ky * y) : std::cos(kx * x + ky * y); };
        auto ev = op.edge_values(sample_macros(s, [&](double x, double y, Field) { return f(x, y); }));
        double err = 0.0;
        for (std::size_t e = 0; e < ev.values.size(); ++e) {
          auto pos = s.position(s.edge_node(e));
          err = std::max(err, std::abs(ev.values[e] - f(pos[0], pos[1])));
        }
        CHECK(err <= 1e-11);
      }
    }
}

TEST_CASE("spectral realisations agree") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d;
  for (int N : {6, 10, 14}) {
    auto s = build_patch_grid(N, 6, 0.3);
    auto f = CouplingOperator::spectral(s, Realisation::Functional);
    auto m = CouplingOperator::spectral(s, Realisation::Matrix);
    MacroValues mv = MacroValues::zeros(s.M());
    for (auto& v : mv.values) v = d(rng);
    auto a = f.edge_values(mv), b = m.edge_values(mv);
    double err = 0.0;
    for (std::size_t e = 0; e < a.values.size(); ++e) err = std::max(err, std::abs(a.values[e] - b.values[e]));
    CHECK(err <= 1e-12);
  }
}

TEST_CASE("square-p2 v stencil on v-centred patch matches the 3x3 table") {
  auto s = build_patch_grid(10, 6, 0.1);
  auto stencils = square_p_stencils(s, 2);
  bool found = false;
  for (const auto& st : stencils) {
    if (st.edge_field == Field::V && st.patch_kind == Field::V) {
      found = true;
      CHECK(st.x_nodes == std::vector<int>{-2, 0, 2});
      CHECK(st.y_nodes == std::vector<int>{-2, 0, 2});
      CHECK(st.offsets.size() == 9);
    }
    if (st.edge_field == Field::V && st.patch_kind == Field::H) {
      CHECK(st.x_nodes.size() == 3);
      CHECK(st.y_nodes.size() == 2);
    }
    if (st.edge_field == Field::V && st.patch_kind == Field::U) {
      CHECK(st.x_nodes.size() == 2);
      CHECK(st.y_nodes.size() == 2);
    }
  }
  CHECK(found);
}

TEST_CASE("square-p stencils: partition of unity, cardinality and exactness") {
  auto s = build_patch_grid(26, 6, 0.3);
  for (int p : {2, 4, 6, 8}) {
    for (const auto& st : square_p_stencils(s, p)) {
      for (std::size_t e = 0; e < st.edge_nodes.size(); ++e) {
        const auto& w = st.weights[e];
        double sum = 0.0;
        for (double x : w) sum += x;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        // monomials up to the per-axis node count reproduce exactly
        const double xi = 2 * s.r / s.n * st.edge_nodes[e].i;
        const double eta = 2 * s.r / s.n * st.edge_nodes[e].j;
        for (std::size_t a = 0; a < st.x_nodes.size(); ++a)
          for (std::size_t b = 0; b < st.y_nodes.size(); ++b) {
            double acc = 0.0;
            std::size_t k = 0;
            for (int yn : st.y_nodes)
              for (int xn : st.x_nodes) acc += w[k++] * std::pow(xn, a) * std::pow(yn, b);
            const double expect = std::pow(xi, a) * std::pow(eta, b);
            CHECK(std::abs(acc - expect) <= 1e-10 * std::max(1.0, std::pow(p, a + b)));
          }
      }
    }
  }
}

TEST_CASE("square-p matrix interpolates low-degree polynomials at edge nodes") {
  auto s = build_patch_grid(26, 6, 0.2);
  const int M = s.M();
  for (int p : {2, 4, 6, 8}) {
    auto op = CouplingOperator::square_p(s, p);
    // a polynomial of total degree p-1 in physical coordinates
    auto poly = [&](double x, double y) {
      double v = 0.0;
      for (int a = 0; a <= p - 1; ++a)
        for (int b = 0; a + b <= p - 1; ++b) v += 0.1 * (1 + a - b) * std::pow(x - 3.0, a) * std::pow(y - 3.0, b);
      return v;
    };
    auto ev = op.edge_values(sample_macros(s, [&](double x, double y, Field) { return poly(x, y); }));
    int checked = 0;
    for (std::size_t e = 0; e < ev.values.size(); ++e) {
      auto node = s.edge_node(e);
      // only targets whose stencil stays inside the unwrapped lattice
      const int cI = node.patch_I / 2, cJ = node.patch_J / 2;
      if (cI < p / 2 + 1 || cI > M - p / 2 - 2 || cJ < p / 2 + 1 || cJ > M - p / 2 - 2) continue;
      auto pos = s.position(node);
      CHECK(std::abs(ev.values[e] - poly(pos[0], pos[1])) <= 1e-10 * std::max(1.0, std::abs(poly(pos[0], pos[1]))));
      ++checked;
    }
    CHECK(checked > 0);
  }
}

TEST_CASE("couplings map constants to constants and commute with cell shifts") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> d;
  auto s = build_patch_grid(10, 6, 0.25);
  const int M = s.M();
  for (auto scheme : all_schemes()) {
    auto op = CouplingOperator::build(s, scheme);
    auto cst = op.edge_values(sample_macros(s, [](double, double, Field f) { return f == Field::U ? -1.5 : 0.75; }));
    for (std::size_t e = 0; e < cst.values.size(); ++e) {
      const double expect = s.edge_node(e).kind == Field::U ? -1.5 : 0.75;
      CHECK(std::abs(cst.values[e] - expect) <= 1e-12);
    }
    const auto& mat = op.matrix();
    for (std::size_t r = 0; r < mat.rows; ++r) {
      double sum = 0.0;
      for (std::size_t k = mat.row_ptr[r]; k < mat.row_ptr[r + 1]; ++k) sum += mat.weight[k];
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }

    MacroValues mv = MacroValues::zeros(M);
    for (auto& v : mv.values) v = d(rng);
    MacroValues shifted = MacroValues::zeros(M);
    for (Field f : kAllFields)
      for (int J = 0; J < M; ++J)
        for (int I = 0; I < M; ++I) shifted.at(f, wrap_index(I + 1, M), wrap_index(J + 2, M)) = mv.at(f, I, J);
    auto a = op.edge_values(mv), b = op.edge_values(shifted);
    const std::size_t ce = s.layout->cell_edges;
    double err = 0.0;
    for (int J = 0; J < M; ++J)
      for (int I = 0; I < M; ++I) {
        const std::size_t src = I + M * J;
        const std::size_t dst = wrap_index(I + 1, M) + M * wrap_index(J + 2, M);
        for (std::size_t q = 0; q < ce; ++q) err = std::max(err, std::abs(a.values[src * ce + q] - b.values[dst * ce + q]));
      }
    CHECK(err <= 1e-10);
  }
}

TEST_CASE("extended precision weights round to the double weights") {
  auto s = build_patch_grid(10, 6, 0.1);
  for (auto scheme : all_schemes()) {
    auto md = build_coupling_matrix<double>(s, scheme);
    auto mx = build_coupling_matrix<dd_real>(s, scheme);
    REQUIRE(md.nnz() == mx.nnz());
    double err = 0.0;
    for (std::size_t k = 0; k < md.nnz(); ++k) err = std::max(err, std::abs(md.weight[k] - to_double(mx.weight[k])));
    CHECK(err < 1e-14);
  }
}

}

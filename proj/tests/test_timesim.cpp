#include <doctest.h>

#include <cmath>
#include <sstream>

#include "stagpatch/error.hpp"
#include "stagpatch/patchscheme.hpp"
#include "stagpatch/spectra.hpp"
#include "stagpatch/timesim.hpp"

using namespace stagpatch;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

double max_abs(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST_SUITE("timesim") {

TEST_CASE("auto dt picks the advective or diffusive limit") {
  const double pi = 3.141592653589793;
  CHECK(auto_dt(pi / 150, {}) == doctest::Approx(0.5 * pi / 150).epsilon(1e-15));
  CHECK(auto_dt(pi / 150, {0.1, 0.0}) == doctest::Approx(0.5 * pi / 150).epsilon(1e-15));
  const double d = 1e-3;
  CHECK(2.0 * d * d / 0.01 < d);
  CHECK(auto_dt(d, {0.0, 0.01}) == doctest::Approx(0.5 * 2.0 * d * d / 0.01).epsilon(1e-15));
  CHECK_THROWS_AS(auto_dt(0.0, {}), ParameterError);
}

TEST_CASE("RK4 steps") {
  RhsFunction zero = [](const double*, double* out) { out[0] = out[1] = 0.0; };
  std::vector<double> x{1.5, -2.0};
  CHECK(rk4_step(x, zero, 0.3) == x);

  const double lambda = -0.7, dt = 0.1, z = lambda * dt;
  RhsFunction scalar = [lambda](const double* in, double* out) { out[0] = lambda * in[0]; };
  const double taylor = 1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0;
  CHECK(std::abs(rk4_step({1.0}, scalar, dt)[0] - taylor) <= 1e-15);

  // x' = i w x as a rotation; amplification is the Taylor sum at i w dt.
  const double w = 3.0;
  RhsFunction rot = [w](const double* in, double* out) {
    out[0] = -w * in[1];
    out[1] = w * in[0];
  };
  const std::complex<double> zi(0.0, w * dt);
  const std::complex<double> amp = 1.0 + zi + zi * zi / 2.0 + zi * zi * zi / 6.0 + zi * zi * zi * zi / 24.0;
  auto y = rk4_step({1.0, 0.0}, rot, dt);
  CHECK(std::abs(y[0] - amp.real()) <= 1e-15);
  CHECK(std::abs(y[1] - amp.imag()) <= 1e-15);

  RhsFunction blow = [](const double*, double* out) { out[0] = std::nan(""); };
  Rk4 rk(1);
  std::vector<double> v{1.0};
  CHECK_THROWS_WITH_AS(rk.step(v, blow, 0.1, 17), doctest::Contains("step 17"), NumericalError);
}

TEST_CASE("uniform u decays with the drag rate") {
  auto s = build_patch_grid(6, 6, 0.2);
  auto sys = make_patch_system(CouplingOperator::square_p(s, 4), {0.5, 0.01});
  RhsFunction rhs = [&sys](const double* in, double* out) { sys.rhs(in, out); };
  std::vector<double> x(s.state_count(), 0.0);
  for (std::size_t k = 0; k < x.size(); ++k)
    if (s.node(k).kind == Field::U) x[k] = 1.0;
  Rk4 rk(x.size());
  for (int k = 1; k <= 1000; ++k) rk.step(x, rhs, 1e-3, k);
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (s.node(k).kind == Field::U) CHECK(std::abs(x[k] - std::exp(-0.5)) <= 1e-8);
    else CHECK(std::abs(x[k]) <= 1e-12);
  }
}

TEST_CASE("ideal waves stay bounded at the auto step") {
  SimConfig c;
  c.scheme = SchemeId::spectral();
  c.N = 6;
  c.n = 6;
  c.r = 0.2;
  c.params = {};
  c.domain = Domain::Full;
  c.dt = auto_dt(build_patch_grid(6, 6, 0.2), c.params);
  c.end_time = 1000 * c.dt;
  auto full = simulate(c);
  CHECK(full.steps == 1000);
  CHECK(full.snapshots.back().diagnostics.l2 <= full.snapshots.front().diagnostics.l2 * (1.0 + 1e-6));

  // The patch Jacobian is not normal: the Euclidean norm oscillates by a few
  // percent without secular growth.
  c.domain = Domain::Patch;
  c.end_time = 4000 * c.dt;
  c.snapshot_interval = 100 * c.dt;
  for (auto scheme : {SchemeId::spectral(), SchemeId::square_p(4)}) {
    c.scheme = scheme;
    auto res = simulate(c);
    const double n0 = res.snapshots.front().diagnostics.l2;
    for (const auto& snap : res.snapshots) {
      CHECK(snap.diagnostics.l2 <= 1.1 * n0);
      CHECK(snap.diagnostics.l2 >= 0.5 * n0);
    }
  }
}

TEST_CASE("zero initial state stays zero") {
  SimConfig c;
  c.N = 6;
  c.n = 6;
  c.r = 0.2;
  c.end_time = 0.5;
  c.snapshot_interval = 0.1;
  c.initial.kind = InitialKind::Zero;
  auto res = simulate(c);
  CHECK(res.snapshots.size() >= 5);
  for (const auto& snap : res.snapshots) CHECK(max_abs(snap.values) == 0.0);
  CHECK(res.total_h_drift == 0.0);
}

TEST_CASE("patch trajectory matches the matched full-domain trajectory") {
  SimConfig c;
  c.scheme = SchemeId::spectral();
  c.N = 6;
  c.n = 6;
  c.r = 0.2;
  c.params = {1e-3, 1e-2};
  c.end_time = 1.0;
  c.snapshot_interval = 0.1;
  c.initial.kind = InitialKind::Modes;
  CHECK(c.matched_full_n() == 90);
  auto patch = simulate(c);
  c.domain = Domain::Full;
  auto full = simulate(c);
  CHECK(full.full_spec.n == 90);
  CHECK(patch.dt == full.dt);
  REQUIRE(patch.snapshots.size() == full.snapshots.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < patch.snapshots.size(); ++k) {
    CHECK(patch.snapshots[k].time == full.snapshots[k].time);
    auto a = patch_centre_values(patch.patch_spec, patch.snapshots[k].values);
    auto b = full_values_at_patch_centres(patch.patch_spec, full.full_spec, full.snapshots[k].values);
    worst = std::max(worst, max_abs_diff(a, b));
  }
  CHECK(worst <= 1e-8);
  CHECK(full.snapshots.back().time == 1.0);

  SimConfig bad = c;
  bad.r = 0.35;
  CHECK_THROWS_AS(bad.matched_full_n(), ParameterError);
}

TEST_CASE("total h drift and norm bound") {
  for (auto scheme : {SchemeId::spectral(), SchemeId::square_p(4)}) {
    SimConfig c;
    c.scheme = scheme;
    c.N = 10;
    c.n = 6;
    c.r = 0.2;
    c.end_time = 1.0;
    c.snapshot_interval = 0.25;
    auto res = simulate(c);
    CHECK(res.total_h_drift <= 1e-8);

    auto spec = bloch_spectrum(res.patch_spec, scheme, c.params);
    double max_re = -1e300;
    for (auto z : spec.flattened()) max_re = std::max(max_re, z.real());
    const double n0 = res.snapshots.front().diagnostics.l2;
    for (const auto& snap : res.snapshots)
      CHECK(snap.diagnostics.l2 <= n0 * std::exp((max_re + 1e-8) * snap.time) * (1.0 + 1e-12));
  }
}

TEST_CASE("hump simulation on the square-p4 patch grid") {
  SimConfig c;  // defaults: square-p4, N=18, n=6, r=0.1, t=2
  c.snapshot_interval = 0.25;
  auto res = simulate(c);
  CHECK(res.snapshots.back().time == 2.0);
  CHECK(res.snapshots.size() >= 9);
  for (const auto& snap : res.snapshots) {
    CHECK(std::isfinite(snap.diagnostics.l2));
    CHECK(snap.diagnostics.max_abs_h <= 1.0 + 1e-12);
  }
  // After the hump has spread, the peak height does not grow again.
  double envelope = 0.0;
  for (std::size_t k = res.snapshots.size(); k-- > 0;) {
    if (res.snapshots[k].time < 1.0) break;
    envelope = std::max(envelope, res.snapshots[k].diagnostics.max_abs_h);
  }
  double earlier = 0.0;
  for (const auto& snap : res.snapshots)
    if (snap.time <= 1.0 && snap.time >= 0.5) earlier = std::max(earlier, snap.diagnostics.max_abs_h);
  CHECK(envelope <= earlier);
  CHECK(res.total_h_drift <= 1e-8);
}

TEST_CASE("simulation output is deterministic and diagnostics recompute exactly") {
  SimConfig c;
  c.N = 6;
  c.n = 6;
  c.r = 0.2;
  c.end_time = 0.3;
  c.snapshot_interval = 0.1;
  auto a = simulate(c), b = simulate(c);
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
    std::ostringstream sa, sb;
    write_snapshot_csv(sa, a, a.snapshots[k]);
    write_snapshot_csv(sb, b, b.snapshots[k]);
    CHECK(sa.str() == sb.str());
    auto d = diagnose(a.patch_spec, a.snapshots[k].values);
    CHECK(d.l2 == a.snapshots[k].diagnostics.l2);
    CHECK(d.total_h == a.snapshots[k].diagnostics.total_h);
    CHECK(d.max_abs_h == a.snapshots[k].diagnostics.max_abs_h);
  }
  c.domain = Domain::Full;
  auto f = simulate(c);
  std::ostringstream sf;
  write_snapshot_csv(sf, f, f.snapshots.back());
  CHECK(sf.str().rfind("i,j,kind,value\n", 0) == 0);
}

TEST_CASE("configuration validation") {
  SimConfig c;
  c.end_time = -1.0;
  CHECK_THROWS_AS(simulate(c), ParameterError);
  c = SimConfig{};
  c.N = 8;
  CHECK_THROWS_AS(simulate(c), ParameterError);
  c = SimConfig{};
  c.dt = -0.1;
  CHECK_THROWS_AS(simulate(c), ParameterError);
  CHECK(parse_domain("full") == Domain::Full);
  CHECK(parse_initial_kind("modes") == InitialKind::Modes);
  CHECK_THROWS_AS(parse_initial_kind("hump"), ParameterError);
}

}

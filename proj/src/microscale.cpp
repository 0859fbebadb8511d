#include "stagpatch/microscale.hpp"

#include <cmath>
#include <string>

#include "stagpatch/error.hpp"

namespace stagpatch {

void PhysicalParams::validate() const {
  if (!(c_D >= 0.0) || !std::isfinite(c_D))
    throw ParameterError("drag coefficient c_D must be finite and >= 0");
  if (!(c_V >= 0.0) || !std::isfinite(c_V))
    throw ParameterError("viscosity coefficient c_V must be finite and >= 0");
}

FullDomainState make_full_domain_state(const MicroGridSpec& spec) {
  return FullDomainState{spec, std::vector<double>(spec.state_count(), 0.0)};
}

FullDomainState full_domain_rhs(const FullDomainState& state, const PhysicalParams& params) {
  if (state.values.size() != state.spec.state_count())
    throw ContractError("full-domain state has " + std::to_string(state.values.size()) +
                        " values, grid expects " + std::to_string(state.spec.state_count()));
  params.validate();
  FullDomainState out{state.spec, std::vector<double>(state.values.size())};
  auto w = WaveCoefficients<double>::make(state.spec.delta, params);
  full_domain_rhs_into<double>(state.spec, w, state.values.data(), out.values.data());
  return out;
}

namespace {

EigTriple eigs_from_angles(double ax, double ay, double delta, const PhysicalParams& p) {
  const double sx = std::sin(ax) / delta;
  const double sy = std::sin(ay) / delta;
  const double omega2 = sx * sx + sy * sy;
  const double gamma = p.c_D + p.c_V * omega2;
  EigTriple t;
  t.vortex = {-gamma, 0.0};
  const double disc = omega2 - 0.25 * gamma * gamma;
  if (disc >= 0.0) {
    const double s = std::sqrt(disc);
    t.wave_plus = {-0.5 * gamma, s};
    t.wave_minus = {-0.5 * gamma, -s};
  } else {
    const double s = std::sqrt(-disc);
    t.wave_plus = {-0.5 * gamma + s, 0.0};
    t.wave_minus = {-0.5 * gamma - s, 0.0};
  }
  return t;
}

}  // namespace

double omega_micro(int k_x, int k_y, double delta) {
  const double sx = std::sin(k_x * delta) / delta;
  const double sy = std::sin(k_y * delta) / delta;
  return std::sqrt(sx * sx + sy * sy);
}

EigTriple analytic_eigs(int k_x, int k_y, double delta, const PhysicalParams& params) {
  if (!(delta > 0.0)) throw ParameterError("micro spacing delta must be positive");
  EigTriple t = eigs_from_angles(k_x * delta, k_y * delta, delta, params);
  t.k_x = k_x;
  t.k_y = k_y;
  return t;
}

std::vector<EigTriple> analytic_macroscale_set(const PatchGridSpec& spec,
                                               const PhysicalParams& params) {
  std::vector<EigTriple> out;
  const auto ks = resolved_wavenumbers(spec.M());
  out.reserve(ks.size() * ks.size());
  for (int ky : ks)
    for (int kx : ks) out.push_back(analytic_eigs(kx, ky, spec.delta, params));
  return out;
}

std::vector<EigTriple> analytic_full_domain_set(const MicroGridSpec& spec,
                                                const PhysicalParams& params) {
  std::vector<EigTriple> out;
  const auto ks = resolved_wavenumbers(spec.half());
  const double two_pi = 2.0 * 3.141592653589793;
  out.reserve(ks.size() * ks.size());
  for (int ky : ks) {
    for (int kx : ks) {
      EigTriple t = eigs_from_angles(two_pi * kx / spec.n, two_pi * ky / spec.n, spec.delta, params);
      t.k_x = kx;
      t.k_y = ky;
      out.push_back(t);
    }
  }
  return out;
}

}  // namespace stagpatch

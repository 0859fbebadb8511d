#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "stagpatch/grid.hpp"

namespace stagpatch {

struct PhysicalParams {
  double c_D = 0.0;  // drag
  double c_V = 0.0;  // viscosity

  void validate() const;
  bool operator==(const PhysicalParams&) const = default;
};

// Coefficients of the staggered micro model at spacing delta, in the
// arithmetic used for evaluation.
template <class Real>
struct WaveCoefficients {
  Real inv_2delta{};
  Real inv_4delta2{};
  Real c_D{};
  Real c_V{};

  static WaveCoefficients make(const Real& delta, const PhysicalParams& p) {
    WaveCoefficients w;
    w.inv_2delta = Real(1) / (Real(2) * delta);
    w.inv_4delta2 = Real(1) / (Real(4) * delta * delta);
    w.c_D = Real(p.c_D);
    w.c_V = Real(p.c_V);
    return w;
  }
};

// Point stencils of the linear wave micro model. Neighbour naming: e/w are
// +x/-x, n/s are +y/-y; a trailing 2 means two micro steps away.
template <class Real>
inline Real rate_h(const Real& ue, const Real& uw, const Real& vn, const Real& vs,
                   const WaveCoefficients<Real>& w) {
  return -((ue - uw) + (vn - vs)) * w.inv_2delta;
}

template <class Real>
inline Real rate_u(const Real& he, const Real& hw, const Real& c, const Real& e2, const Real& w2,
                   const Real& n2, const Real& s2, const WaveCoefficients<Real>& w) {
  return -(he - hw) * w.inv_2delta - w.c_D * c +
         w.c_V * (((w2 - Real(2) * c + e2) + (s2 - Real(2) * c + n2)) * w.inv_4delta2);
}

template <class Real>
inline Real rate_v(const Real& hn, const Real& hs, const Real& c, const Real& e2, const Real& w2,
                   const Real& n2, const Real& s2, const WaveCoefficients<Real>& w) {
  return -(hn - hs) * w.inv_2delta - w.c_D * c +
         w.c_V * (((w2 - Real(2) * c + e2) + (s2 - Real(2) * c + n2)) * w.inv_4delta2);
}

// Micro model seen through a neighbour accessor at(di, dj); the patch
// scheme only depends on this interface and on the stencil footprint.
struct LinearWaveModel {
  static StencilShape shape() { return wave_stencil_shape(true); }

  template <class Real, class At>
  static Real rate(Field f, const At& at, const WaveCoefficients<Real>& w) {
    switch (f) {
      case Field::H:
        return rate_h(at(1, 0), at(-1, 0), at(0, 1), at(0, -1), w);
      case Field::U:
        return rate_u(at(1, 0), at(-1, 0), at(0, 0), at(2, 0), at(-2, 0), at(0, 2), at(0, -2), w);
      case Field::V:
        return rate_v(at(0, 1), at(0, -1), at(0, 0), at(2, 0), at(-2, 0), at(0, 2), at(0, -2), w);
    }
    return Real(0);
  }
};

struct FullDomainState {
  MicroGridSpec spec;
  std::vector<double> values;
};

FullDomainState make_full_domain_state(const MicroGridSpec& spec);

// Periodic full-domain right-hand side on the block layout of MicroGridSpec.
template <class Real>
void full_domain_rhs_into(const MicroGridSpec& spec, const WaveCoefficients<Real>& w,
                          const Real* x, Real* out) {
  const int m = spec.half();
  const std::size_t mm = static_cast<std::size_t>(m) * m;
  const Real* h = x;
  const Real* u = x + mm;
  const Real* v = x + 2 * mm;
  Real* dh = out;
  Real* du = out + mm;
  Real* dv = out + 2 * mm;
  for (int b = 0; b < m; ++b) {
    const int bm = b == 0 ? m - 1 : b - 1;
    const int bp = b == m - 1 ? 0 : b + 1;
    const std::size_t row = static_cast<std::size_t>(m) * b;
    const std::size_t row_m = static_cast<std::size_t>(m) * bm;
    const std::size_t row_p = static_cast<std::size_t>(m) * bp;
    for (int a = 0; a < m; ++a) {
      const int am = a == 0 ? m - 1 : a - 1;
      const int ap = a == m - 1 ? 0 : a + 1;
      // h(2a,2b): u at 2a+-1 -> u[a], u[a-1]; v at 2b+-1 -> v[b], v[b-1]
      dh[row + a] = rate_h(u[row + a], u[row + am], v[row + a], v[row_m + a], w);
      // u(2a+1,2b): h at 2a+2, 2a
      du[row + a] = rate_u(h[row + ap], h[row + a], u[row + a], u[row + ap], u[row + am],
                           u[row_p + a], u[row_m + a], w);
      // v(2a,2b+1): h at 2b+2, 2b
      dv[row + a] = rate_v(h[row_p + a], h[row + a], v[row + a], v[row + ap], v[row + am],
                           v[row_p + a], v[row_m + a], w);
    }
  }
}

FullDomainState full_domain_rhs(const FullDomainState& state, const PhysicalParams& params);

struct EigTriple {
  std::complex<double> vortex;
  std::complex<double> wave_plus;
  std::complex<double> wave_minus;
  int k_x = 0;
  int k_y = 0;

  std::array<std::complex<double>, 3> values() const { return {vortex, wave_plus, wave_minus}; }
};

double omega_micro(int k_x, int k_y, double delta);

// Eigenvalues of the full-domain model for a single Fourier mode.
EigTriple analytic_eigs(int k_x, int k_y, double delta, const PhysicalParams& params);

// Triples for every wavenumber resolved by the (N/2)x(N/2) macro lattice.
std::vector<EigTriple> analytic_macroscale_set(const PatchGridSpec& spec,
                                               const PhysicalParams& params);

// Triples for every mode of a full-domain micro grid of period 2*pi.
std::vector<EigTriple> analytic_full_domain_set(const MicroGridSpec& spec,
                                                const PhysicalParams& params);

}  // namespace stagpatch

#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stagpatch/grid.hpp"

namespace stagpatch {

enum class CouplingKind { Spectral, SquareP };
enum class Realisation { Functional, Matrix };

struct SchemeId {
  CouplingKind kind = CouplingKind::Spectral;
  int p = 0;  // interpolation order for SquareP

  std::string name() const;
  static SchemeId parse(const std::string& text);
  static SchemeId spectral() { return {CouplingKind::Spectral, 0}; }
  static SchemeId square_p(int p) { return {CouplingKind::SquareP, p}; }
  bool operator==(const SchemeId&) const = default;
};

std::vector<SchemeId> all_schemes();

// Patch-centre values: three MxM arrays stored back to back (H, U, V), each
// indexed I + M*J over macro-cells.
struct MacroValues {
  int M = 0;
  std::vector<double> values;

  static MacroValues zeros(int M) { return {M, std::vector<double>(3 * static_cast<std::size_t>(M) * M, 0.0)}; }
  std::span<double> of(Field f) {
    const std::size_t mm = static_cast<std::size_t>(M) * M;
    return {values.data() + static_cast<int>(f) * mm, mm};
  }
  std::span<const double> of(Field f) const {
    const std::size_t mm = static_cast<std::size_t>(M) * M;
    return {values.data() + static_cast<int>(f) * mm, mm};
  }
  double& at(Field f, int I, int J) { return of(f)[static_cast<std::size_t>(I) + static_cast<std::size_t>(M) * J]; }
  double at(Field f, int I, int J) const { return of(f)[static_cast<std::size_t>(I) + static_cast<std::size_t>(M) * J]; }
};

// Values on every patch's edge nodes, laid out cell by cell as in
// PatchGridSpec::edge_slot.
struct EdgeValues {
  std::vector<double> values;
};

// 1D Lagrange cardinal weights of nodes evaluated at point.
std::vector<double> lagrange_basis(std::span<const double> nodes, double point);

template <class Real>
std::vector<Real> lagrange_weights(std::span<const int> nodes, const Real& point);

// Spectral interpolation weight of one sample of an M-point periodic lattice
// (M odd) at physical offset theta: (1/M) sum_{|k|<=(M-1)/2} cos(k theta).
template <class Real>
Real dirichlet_kernel(int M, const Real& theta);

// -------------------------------------------------------------- DFT

struct SpectralCoefficients {
  int M = 0;
  int K = 0;
  std::vector<std::complex<double>> c;  // (kx+K) + (2K+1)*(ky+K)

  std::complex<double> at(int kx, int ky) const {
    return c[static_cast<std::size_t>(kx + K) + static_cast<std::size_t>(2 * K + 1) * (ky + K)];
  }
};

// Forward transform without normalisation, sample I at angle 2*pi*I/M.
SpectralCoefficients dft2(std::span<const std::complex<double>> samples, int M);
SpectralCoefficients dft2(std::span<const double> samples, int M);

// Inverse transform evaluated at lattice-angle coordinates (x, y), where
// sample I sits at x = 2*pi*I/M.
std::complex<double> inverse_dft2_at(const SpectralCoefficients& coeffs, double x, double y);

// -------------------------------------------------------------- stencils

template <class Real>
struct CouplingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> col;
  std::vector<Real> weight;

  std::size_t nnz() const { return weight.size(); }

  void apply(const Real* macro, Real* edges) const {
    for (std::size_t r = 0; r < rows; ++r) {
      Real s(0);
      for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += weight[k] * macro[col[k]];
      edges[r] = s;
    }
  }
};

// One precomputed stencil: the source nodes (in units of Delta relative to
// the target patch centre) used for every edge node of one field on one
// patch kind.
struct Stencil {
  Field edge_field = Field::H;
  Field patch_kind = Field::H;
  Field source_kind = Field::H;
  std::vector<int> x_nodes;
  std::vector<int> y_nodes;
  std::vector<std::array<int, 2>> offsets;   // macro-cell offsets, x fastest
  std::vector<LocalNode> edge_nodes;
  std::vector<std::vector<double>> weights;  // per edge node, per offset
};

std::vector<Stencil> square_p_stencils(const PatchGridSpec& spec, int p);

// Coupling rows as (cell offset, field, weight) relative to the cell of the
// target patch, one list per cell-local edge slot.
template <class Real>
struct TemplateEntry {
  int dI = 0;
  int dJ = 0;
  Real w{};
};

template <class Real>
std::vector<std::vector<TemplateEntry<Real>>> coupling_template(const PatchGridSpec& spec,
                                                                const SchemeId& scheme);

template <class Real>
CouplingMatrix<Real> build_coupling_matrix(const PatchGridSpec& spec, const SchemeId& scheme);

class CouplingOperator {
 public:
  static CouplingOperator build(const PatchGridSpec& spec, const SchemeId& scheme,
                                Realisation realisation = Realisation::Matrix);
  static CouplingOperator spectral(const PatchGridSpec& spec,
                                   Realisation realisation = Realisation::Matrix) {
    return build(spec, SchemeId::spectral(), realisation);
  }
  static CouplingOperator square_p(const PatchGridSpec& spec, int p) {
    return build(spec, SchemeId::square_p(p));
  }

  const PatchGridSpec& spec() const { return spec_; }
  const SchemeId& scheme() const { return scheme_; }
  Realisation realisation() const { return realisation_; }
  const CouplingMatrix<double>& matrix() const;

  EdgeValues edge_values(const MacroValues& macros) const;
  // Raw form: macro holds 3*M*M values, edges receives spec().edge_count().
  void apply(const double* macro, double* edges) const;

 private:
  PatchGridSpec spec_;
  SchemeId scheme_;
  Realisation realisation_ = Realisation::Matrix;
  CouplingMatrix<double> matrix_;
};

EdgeValues spectral_edge_values(const MacroValues& macros, const PatchGridSpec& spec);

CouplingOperator build_square_p(const PatchGridSpec& spec, int p);

}  // namespace stagpatch

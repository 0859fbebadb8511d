#pragma once

#include <cmath>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "stagpatch/coupling.hpp"
#include "stagpatch/grid.hpp"
#include "stagpatch/microscale.hpp"

namespace stagpatch {

// Interior values of all patches, laid out as in PatchGridSpec::slot.
struct PatchState {
  PatchGridSpec spec;
  std::vector<double> values;

  static PatchState zeros(const PatchGridSpec& spec) {
    return {spec, std::vector<double>(spec.state_count(), 0.0)};
  }
  double& operator[](const NodeIndex& node) { return values[spec.slot(node)]; }
  double operator[](const NodeIndex& node) const { return values[spec.slot(node)]; }
};

template <class Real>
void extract_macro_into(const PatchGridSpec& spec, const Real* x, Real* macro) {
  const PatchLayout& layout = *spec.layout;
  const std::size_t cells = spec.cell_count();
  for (const auto& pk : layout.kinds) {
    Real* dst = macro + static_cast<int>(pk.kind) * cells;
    const std::size_t off = pk.interior_offset + pk.centre;
    for (std::size_t c = 0; c < cells; ++c) dst[c] = x[c * layout.cell_interior + off];
  }
}

MacroValues extract_macro_values(const PatchState& state);

// Box positions of each patch kind's interior and edge nodes inside a
// padded scratch square, so stencils read neighbours by fixed strides.
struct PatchStencilTables {
  int width = 0;
  std::array<std::vector<int>, 3> interior_box;
  std::array<std::vector<int>, 3> edge_box;
  std::array<std::vector<Field>, 3> interior_field;

  explicit PatchStencilTables(const PatchLayout& layout);
  PatchStencilTables() = default;
};

// Micro model inside every patch, closed by the given edge values.
template <class Real, class Model = LinearWaveModel>
void patch_rhs_into(const PatchGridSpec& spec, const PatchStencilTables& tables,
                    const WaveCoefficients<Real>& w, const Real* x, const Real* edges, Real* out,
                    std::vector<Real>& scratch) {
  const PatchLayout& layout = *spec.layout;
  const int W = tables.width;
  scratch.resize(static_cast<std::size_t>(W) * W);
  Real* s = scratch.data();
  const std::size_t cells = spec.cell_count();
  for (std::size_t c = 0; c < cells; ++c) {
    for (const auto& pk : layout.kinds) {
      const int kind = static_cast<int>(pk.kind);
      const Real* xi = x + c * layout.cell_interior + pk.interior_offset;
      const Real* ei = edges + c * layout.cell_edges + pk.edge_offset;
      Real* oi = out + c * layout.cell_interior + pk.interior_offset;
      const auto& ibox = tables.interior_box[kind];
      const auto& ebox = tables.edge_box[kind];
      const auto& fld = tables.interior_field[kind];
      for (std::size_t q = 0; q < ibox.size(); ++q) s[ibox[q]] = xi[q];
      for (std::size_t e = 0; e < ebox.size(); ++e) s[ebox[e]] = ei[e];
      for (std::size_t q = 0; q < ibox.size(); ++q) {
        const Real* p = s + ibox[q];
        auto at = [p, W](int di, int dj) -> const Real& { return p[di + W * dj]; };
        oi[q] = Model::rate(fld[q], at, w);
      }
    }
  }
}

PatchState patch_rhs(const PatchState& state, const EdgeValues& edges, const PhysicalParams& params);

PatchState coupled_rhs(const PatchState& state, const CouplingOperator& coupling,
                       const PhysicalParams& params);

// Reusable evaluator of the coupled patch system x' = F(x, x^E(x)) in the
// chosen arithmetic. Holds scratch buffers; one instance per thread.
template <class Real>
class PatchSystem {
 public:
  using Apply = std::function<void(const Real*, Real*)>;

  PatchSystem(const PatchGridSpec& spec, Apply coupling, const PhysicalParams& params);

  const PatchGridSpec& spec() const { return spec_; }
  std::size_t size() const { return spec_.state_count(); }

  void rhs(const Real* x, Real* out);
  void edges(const Real* x, Real* edges);
  void patch_rhs(const Real* x, const Real* edges, Real* out);

 private:
  PatchGridSpec spec_;
  Apply coupling_;
  WaveCoefficients<Real> w_;
  PatchStencilTables tables_;
  std::vector<Real> macro_;
  std::vector<Real> edges_;
  std::vector<Real> scratch_;
};

PatchSystem<double> make_patch_system(const CouplingOperator& coupling, const PhysicalParams& params);
PatchSystem<dd_real> make_patch_system_extended(const PatchGridSpec& spec, const SchemeId& scheme,
                                                const PhysicalParams& params);

// Sum of h over the interior h nodes of the h-centred patches; preserved
// exactly by the coupled system for any partition-of-unity coupling.
double total_h(const PatchState& state);
std::vector<double> total_h_weights(const PatchGridSpec& spec);

// Rotate a state by whole macro-cells (periodic wrap).
PatchState shift_cells(const PatchState& state, int cells_x, int cells_y);

// Physical position of every interior slot.
std::vector<std::array<double, 2>> patch_positions(const PatchGridSpec& spec);

// Snapshot formats. CSV rows: patch_I,patch_J,i,j,kind,value with values in
// shortest round-trip form; binary: header then raw doubles.
void write_patch_state_csv(std::ostream& os, const PatchState& state);
PatchState read_patch_state_csv(std::istream& is, const PatchGridSpec& spec);
void write_patch_state_binary(std::ostream& os, const PatchState& state);
PatchState read_patch_state_binary(std::istream& is);

std::string format_double(double v);
double parse_double(const std::string& text);

}  // namespace stagpatch

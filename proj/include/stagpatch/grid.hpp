#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stagpatch/double_double.hpp"

namespace stagpatch {

enum class Field : std::uint8_t { H = 0, U = 1, V = 2 };
enum class Region : std::uint8_t { Interior = 0, Edge = 1 };

inline constexpr std::array<Field, 3> kAllFields{Field::H, Field::U, Field::V};

char field_char(Field f);
Field field_from_char(char c);

// Staggered parity rule: h at (even,even), u at (odd,even), v at (even,odd).
std::optional<Field> field_at_parity(int i, int j);

// Parity offset of a field's lattice relative to the h lattice.
inline std::array<int, 2> field_offset(Field f) {
  switch (f) {
    case Field::U: return {1, 0};
    case Field::V: return {0, 1};
    default: return {0, 0};
  }
}

inline int wrap_index(int a, int m) {
  int r = a % m;
  return r < 0 ? r + m : r;
}

inline constexpr int kFullDomain = -1;

struct NodeIndex {
  // Macro-grid indices of the patch centre (0 <= I,J < N); the patch kind
  // follows from their parity. kFullDomain for full-domain nodes.
  int patch_I = kFullDomain;
  int patch_J = kFullDomain;
  int i = 0;
  int j = 0;
  Field kind = Field::H;
  Region region = Region::Interior;

  bool full_domain() const { return patch_I == kFullDomain; }
  bool operator==(const NodeIndex&) const = default;
};

// ---------------------------------------------------------------- full domain

std::size_t micro_state_count(int n);

struct MicroGridSpec {
  int n = 0;
  double delta = 0.0;
  std::array<double, 2> origin{0.0, 0.0};

  int half() const { return n / 2; }
  double period() const { return n * delta; }
  std::size_t state_count() const { return micro_state_count(n); }
  std::size_t cell_count() const { return static_cast<std::size_t>(n / 2) * (n / 2); }

  // Layout: three (n/2)x(n/2) blocks for h, u, v; entry (a,b) of the h block
  // is node (2a,2b), of the u block (2a+1,2b), of the v block (2a,2b+1).
  std::size_t slot(int i, int j) const;
  NodeIndex node(std::size_t slot) const;
  std::vector<NodeIndex> nodes() const;
  std::array<double, 2> position(int i, int j) const {
    return {origin[0] + i * delta, origin[1] + j * delta};
  }
};

MicroGridSpec build_micro_grid(int n, double L = 2.0 * 3.141592653589793);

// ---------------------------------------------------------------- patches

struct LocalNode {
  int i = 0;
  int j = 0;
  Field field = Field::H;
  bool operator==(const LocalNode&) const = default;
};

struct PatchKindLayout {
  Field kind = Field::H;
  std::vector<LocalNode> interior;  // ordered by j, then i
  std::vector<LocalNode> edges;     // ordered by field, then j, then i
  std::size_t centre = 0;           // position of (0,0) within interior
  std::size_t interior_offset = 0;  // within a macro-cell
  std::size_t edge_offset = 0;      // within a macro-cell's edge list

  // Lookup over the padded box |i|,|j| <= half_width; -1 when absent.
  int half_width = 0;
  std::vector<int> interior_lookup;
  std::vector<int> edge_lookup;

  int interior_slot(int i, int j) const;
  int edge_slot(int i, int j) const;
};

// Per-field stencil footprints of the micro model; edge nodes are whatever
// these footprints reach outside the interior square.
struct StencilShape {
  std::array<std::vector<std::pair<int, int>>, 3> offsets;
  int reach() const;
};

StencilShape wave_stencil_shape(bool viscous = true);

struct PatchLayout {
  int n = 0;
  int m = 0;  // n/2; interior spans |i|,|j| <= m-1
  std::array<PatchKindLayout, 3> kinds;
  std::size_t cell_interior = 0;
  std::size_t cell_edges = 0;

  const PatchKindLayout& of(Field f) const { return kinds[static_cast<int>(f)]; }
};

PatchLayout derive_patch_layout(int n, const StencilShape& shape);

struct PatchGridSpec {
  int N = 0;
  int n = 0;
  double r = 0.0;
  double L = 0.0;
  double Delta = 0.0;
  double delta = 0.0;
  std::shared_ptr<const PatchLayout> layout;

  int M() const { return N / 2; }
  std::size_t cell_count() const { return static_cast<std::size_t>(M()) * M(); }
  std::size_t state_count() const { return cell_count() * layout->cell_interior; }
  std::size_t edge_count() const { return cell_count() * layout->cell_edges; }
  std::size_t macro_count() const { return 3 * cell_count(); }

  // Spacings evaluated directly in the requested arithmetic.
  template <class Real>
  Real Delta_as() const {
    return Real(2) * pi_v<Real>() / Real(N);
  }
  template <class Real>
  Real delta_as() const {
    return Real(4) * pi_v<Real>() * Real(r) / Real(N * n);
  }

  bool same_geometry(const PatchGridSpec& o) const {
    return N == o.N && n == o.n && r == o.r && L == o.L;
  }

  // Macro-cell of a patch and the patch kind from macro-index parity.
  static Field patch_kind(int I, int J);
  std::size_t cell_of(int I, int J) const;

  std::array<double, 2> patch_centre(int I, int J) const {
    return {I * Delta, J * Delta};
  }
  std::array<double, 2> position(const NodeIndex& node) const;

  std::size_t slot(const NodeIndex& node) const;
  NodeIndex node(std::size_t slot) const;
  std::size_t edge_slot(const NodeIndex& node) const;
  NodeIndex edge_node(std::size_t edge_slot) const;
};

PatchGridSpec build_patch_grid(int N, int n, double r, double L = 2.0 * 3.141592653589793);

std::size_t patch_state_count_formula(int N, int n);

std::vector<NodeIndex> interior_node_set(const PatchGridSpec& spec, int I, int J);
std::vector<NodeIndex> edge_node_set(const PatchGridSpec& spec, int I, int J);

// Every interior stencil neighbour lies in interior or edge set.
bool stencil_closed(const PatchLayout& layout, const StencilShape& shape);

// Resolved wavenumbers on an m x m periodic lattice: centred on zero, with
// the Nyquist wavenumber placed on the positive side when m is even.
std::vector<int> resolved_wavenumbers(int m);

}  // namespace stagpatch

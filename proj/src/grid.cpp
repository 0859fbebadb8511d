#include "stagpatch/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stagpatch/error.hpp"

namespace stagpatch {

char field_char(Field f) {
  switch (f) {
    case Field::H: return 'h';
    case Field::U: return 'u';
    case Field::V: return 'v';
  }
  return '?';
}

Field field_from_char(char c) {
  switch (c) {
    case 'h': case 'H': return Field::H;
    case 'u': case 'U': return Field::U;
    case 'v': case 'V': return Field::V;
    default: break;
  }
  throw ParameterError(std::string("unknown field kind '") + c + "'");
}

std::optional<Field> field_at_parity(int i, int j) {
  bool io = (i & 1) != 0;
  bool jo = (j & 1) != 0;
  if (!io && !jo) return Field::H;
  if (io && !jo) return Field::U;
  if (!io && jo) return Field::V;
  return std::nullopt;
}

// ---------------------------------------------------------------- full domain

std::size_t micro_state_count(int n) {
  if (n < 2 || n % 2 != 0)
    throw ParameterError("micro-grid interval count n must be even and positive, got " +
                         std::to_string(n));
  return 3 * static_cast<std::size_t>(n) * n / 4;
}

MicroGridSpec build_micro_grid(int n, double L) {
  if (n % 2 != 0)
    throw ParameterError("micro-grid interval count n must be even (staggering), got " +
                         std::to_string(n));
  if (n < 4)
    throw ParameterError("micro-grid interval count n must be >= 4 (second differences), got " +
                         std::to_string(n));
  if (!(L > 0.0) || !std::isfinite(L))
    throw ParameterError("domain period L must be positive");
  MicroGridSpec spec;
  spec.n = n;
  spec.delta = L / n;
  return spec;
}

std::size_t MicroGridSpec::slot(int i, int j) const {
  i = wrap_index(i, n);
  j = wrap_index(j, n);
  auto f = field_at_parity(i, j);
  if (!f) {
    std::ostringstream msg;
    msg << "node (" << i << "," << j << ") carries no variable";
    throw ContractError(msg.str());
  }
  const std::size_t h = static_cast<std::size_t>(n / 2);
  const std::size_t a = static_cast<std::size_t>(i / 2);
  const std::size_t b = static_cast<std::size_t>(j / 2);
  return static_cast<std::size_t>(*f) * h * h + a + h * b;
}

NodeIndex MicroGridSpec::node(std::size_t s) const {
  const std::size_t h = static_cast<std::size_t>(n / 2);
  if (s >= 3 * h * h) throw ContractError("full-domain slot out of range");
  Field f = static_cast<Field>(s / (h * h));
  std::size_t rest = s % (h * h);
  auto off = field_offset(f);
  NodeIndex node;
  node.i = 2 * static_cast<int>(rest % h) + off[0];
  node.j = 2 * static_cast<int>(rest / h) + off[1];
  node.kind = f;
  return node;
}

std::vector<NodeIndex> MicroGridSpec::nodes() const {
  std::vector<NodeIndex> out;
  out.reserve(state_count());
  for (std::size_t s = 0; s < state_count(); ++s) out.push_back(node(s));
  return out;
}

// ---------------------------------------------------------------- patch layout

int StencilShape::reach() const {
  int r = 0;
  for (const auto& list : offsets)
    for (auto [di, dj] : list) r = std::max({r, std::abs(di), std::abs(dj)});
  return r;
}

StencilShape wave_stencil_shape(bool viscous) {
  StencilShape s;
  s.offsets[0] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  s.offsets[1] = {{1, 0}, {-1, 0}};
  s.offsets[2] = {{0, 1}, {0, -1}};
  if (viscous) {
    for (int f = 1; f <= 2; ++f) {
      s.offsets[f].insert(s.offsets[f].end(), {{2, 0}, {-2, 0}, {0, 2}, {0, -2}});
    }
  }
  return s;
}

int PatchKindLayout::interior_slot(int i, int j) const {
  if (std::abs(i) > half_width || std::abs(j) > half_width) return -1;
  const int w = 2 * half_width + 1;
  return interior_lookup[(i + half_width) + w * (j + half_width)];
}

int PatchKindLayout::edge_slot(int i, int j) const {
  if (std::abs(i) > half_width || std::abs(j) > half_width) return -1;
  const int w = 2 * half_width + 1;
  return edge_lookup[(i + half_width) + w * (j + half_width)];
}

PatchLayout derive_patch_layout(int n, const StencilShape& shape) {
  if (n < 4 || n % 2 != 0)
    throw ParameterError("sub-patch interval count n must be even and >= 4, got " +
                         std::to_string(n));
  PatchLayout layout;
  layout.n = n;
  layout.m = n / 2;
  const int lim = layout.m - 1;
  const int hw = lim + shape.reach();
  const int w = 2 * hw + 1;

  std::size_t interior_off = 0;
  std::size_t edge_off = 0;
  for (Field kind : kAllFields) {
    PatchKindLayout& pk = layout.kinds[static_cast<int>(kind)];
    pk.kind = kind;
    pk.half_width = hw;
    pk.interior_lookup.assign(static_cast<std::size_t>(w) * w, -1);
    pk.edge_lookup.assign(static_cast<std::size_t>(w) * w, -1);
    const auto off = field_offset(kind);
    auto local_field = [&](int i, int j) { return field_at_parity(i + off[0], j + off[1]); };

    for (int j = -lim; j <= lim; ++j) {
      for (int i = -lim; i <= lim; ++i) {
        auto f = local_field(i, j);
        if (!f) continue;
        if (i == 0 && j == 0) pk.centre = pk.interior.size();
        pk.interior_lookup[(i + hw) + w * (j + hw)] = static_cast<int>(pk.interior.size());
        pk.interior.push_back({i, j, *f});
      }
    }

    std::vector<LocalNode> edges;
    for (const LocalNode& node : pk.interior) {
      for (auto [di, dj] : shape.offsets[static_cast<int>(node.field)]) {
        const int i = node.i + di;
        const int j = node.j + dj;
        if (std::abs(i) <= lim && std::abs(j) <= lim) continue;
        auto f = local_field(i, j);
        if (!f) throw ContractError("stencil reaches a node without a variable");
        LocalNode e{i, j, *f};
        if (std::find(edges.begin(), edges.end(), e) == edges.end()) edges.push_back(e);
      }
    }
    std::sort(edges.begin(), edges.end(), [](const LocalNode& a, const LocalNode& b) {
      if (a.field != b.field) return a.field < b.field;
      if (a.j != b.j) return a.j < b.j;
      return a.i < b.i;
    });
    pk.edges = std::move(edges);
    for (std::size_t e = 0; e < pk.edges.size(); ++e) {
      const auto& node = pk.edges[e];
      pk.edge_lookup[(node.i + hw) + w * (node.j + hw)] = static_cast<int>(e);
    }

    pk.interior_offset = interior_off;
    pk.edge_offset = edge_off;
    interior_off += pk.interior.size();
    edge_off += pk.edges.size();
  }
  layout.cell_interior = interior_off;
  layout.cell_edges = edge_off;
  return layout;
}

bool stencil_closed(const PatchLayout& layout, const StencilShape& shape) {
  for (const auto& pk : layout.kinds) {
    for (const auto& node : pk.interior) {
      for (auto [di, dj] : shape.offsets[static_cast<int>(node.field)]) {
        const int i = node.i + di;
        const int j = node.j + dj;
        if (pk.interior_slot(i, j) < 0 && pk.edge_slot(i, j) < 0) return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------- patch grid

std::size_t patch_state_count_formula(int N, int n) {
  // (N^2/4)(9n^2/4 - 4n + 2), kept in integers
  const std::size_t cells = static_cast<std::size_t>(N / 2) * (N / 2);
  const long long per_cell = (9LL * n * n) / 4 - 4LL * n + 2;
  return cells * static_cast<std::size_t>(per_cell);
}

PatchGridSpec build_patch_grid(int N, int n, double r, double L) {
  if (N < 2 || N % 2 != 0)
    throw ParameterError("macro-grid interval count N must be even, got " + std::to_string(N));
  if ((N / 2) % 2 == 0)
    throw ParameterError("Nyquist parity: N/2 must be odd, got N=" + std::to_string(N));
  if (n < 4 || n % 2 != 0)
    throw ParameterError("sub-patch interval count n must be even and >= 4, got " +
                         std::to_string(n));
  if ((n / 2) % 2 == 0)
    throw ParameterError("sub-patch parity: n/2 must be odd so every patch kind has a centre "
                         "row of its own field, got n=" + std::to_string(n));
  if (!(r > 0.0))
    throw ParameterError("patch ratio r must be positive");
  if (r > 0.5)
    throw ParameterError("patch geometry: r > 0.5 makes neighbouring patches overlap");
  const double two_pi = 2.0 * 3.141592653589793;
  if (std::abs(L - two_pi) > 1e-12)
    throw ParameterError("domain period L is fixed at 2*pi");

  PatchGridSpec spec;
  spec.N = N;
  spec.n = n;
  spec.r = r;
  spec.L = L;
  spec.Delta = spec.Delta_as<double>();
  spec.delta = spec.delta_as<double>();
  spec.layout = std::make_shared<const PatchLayout>(derive_patch_layout(n, wave_stencil_shape(true)));
  return spec;
}

Field PatchGridSpec::patch_kind(int I, int J) {
  auto f = field_at_parity(I, J);
  if (!f) throw ContractError("macro index (odd,odd) is not a patch centre");
  return *f;
}

std::size_t PatchGridSpec::cell_of(int I, int J) const {
  if (I < 0 || J < 0 || I >= N || J >= N) throw ContractError("patch index out of range");
  return static_cast<std::size_t>(I / 2) + static_cast<std::size_t>(M()) * (J / 2);
}

std::array<double, 2> PatchGridSpec::position(const NodeIndex& node) const {
  auto c = patch_centre(node.patch_I, node.patch_J);
  return {c[0] + node.i * delta, c[1] + node.j * delta};
}

std::size_t PatchGridSpec::slot(const NodeIndex& node) const {
  if (node.full_domain() || node.region != Region::Interior)
    throw ContractError("slot() requires an interior patch node");
  const Field kind = patch_kind(node.patch_I, node.patch_J);
  const auto& pk = layout->of(kind);
  const int q = pk.interior_slot(node.i, node.j);
  if (q < 0 || pk.interior[q].field != node.kind)
    throw ContractError("node is not an interior node of its patch");
  return cell_of(node.patch_I, node.patch_J) * layout->cell_interior + pk.interior_offset + q;
}

NodeIndex PatchGridSpec::node(std::size_t s) const {
  if (s >= state_count()) throw ContractError("patch state slot out of range");
  const std::size_t c = s / layout->cell_interior;
  const std::size_t q = s % layout->cell_interior;
  for (const auto& pk : layout->kinds) {
    if (q < pk.interior_offset + pk.interior.size()) {
      const auto& ln = pk.interior[q - pk.interior_offset];
      const auto off = field_offset(pk.kind);
      NodeIndex node;
      node.patch_I = 2 * static_cast<int>(c % M()) + off[0];
      node.patch_J = 2 * static_cast<int>(c / M()) + off[1];
      node.i = ln.i;
      node.j = ln.j;
      node.kind = ln.field;
      node.region = Region::Interior;
      return node;
    }
  }
  throw ContractError("corrupt patch layout");
}

std::size_t PatchGridSpec::edge_slot(const NodeIndex& node) const {
  if (node.full_domain() || node.region != Region::Edge)
    throw ContractError("edge_slot() requires an edge patch node");
  const Field kind = patch_kind(node.patch_I, node.patch_J);
  const auto& pk = layout->of(kind);
  const int e = pk.edge_slot(node.i, node.j);
  if (e < 0 || pk.edges[e].field != node.kind)
    throw ContractError("node is not an edge node of its patch");
  return cell_of(node.patch_I, node.patch_J) * layout->cell_edges + pk.edge_offset + e;
}

NodeIndex PatchGridSpec::edge_node(std::size_t s) const {
  if (s >= edge_count()) throw ContractError("edge slot out of range");
  const std::size_t c = s / layout->cell_edges;
  const std::size_t q = s % layout->cell_edges;
  for (const auto& pk : layout->kinds) {
    if (q < pk.edge_offset + pk.edges.size()) {
      const auto& ln = pk.edges[q - pk.edge_offset];
      const auto off = field_offset(pk.kind);
      NodeIndex node;
      node.patch_I = 2 * static_cast<int>(c % M()) + off[0];
      node.patch_J = 2 * static_cast<int>(c / M()) + off[1];
      node.i = ln.i;
      node.j = ln.j;
      node.kind = ln.field;
      node.region = Region::Edge;
      return node;
    }
  }
  throw ContractError("corrupt patch layout");
}

namespace {

std::vector<NodeIndex> patch_nodes(const PatchGridSpec& spec, int I, int J, Region region) {
  const Field kind = PatchGridSpec::patch_kind(I, J);
  spec.cell_of(I, J);
  const auto& pk = spec.layout->of(kind);
  const auto& list = region == Region::Interior ? pk.interior : pk.edges;
  std::vector<NodeIndex> out;
  out.reserve(list.size());
  for (const auto& ln : list) out.push_back({I, J, ln.i, ln.j, ln.field, region});
  return out;
}

}  // namespace

std::vector<NodeIndex> interior_node_set(const PatchGridSpec& spec, int I, int J) {
  return patch_nodes(spec, I, J, Region::Interior);
}

std::vector<NodeIndex> edge_node_set(const PatchGridSpec& spec, int I, int J) {
  return patch_nodes(spec, I, J, Region::Edge);
}

std::vector<int> resolved_wavenumbers(int m) {
  if (m < 1) throw ParameterError("lattice size must be positive");
  std::vector<int> ks;
  const int lo = m % 2 == 1 ? -(m - 1) / 2 : -(m / 2 - 1);
  for (int k = lo; k < lo + m; ++k) ks.push_back(k);
  return ks;
}

}  // namespace stagpatch

#include "stagpatch/patchscheme.hpp"

#include <charconv>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "stagpatch/error.hpp"

namespace stagpatch {

PatchStencilTables::PatchStencilTables(const PatchLayout& layout) {
  const int hw = layout.kinds[0].half_width;
  width = 2 * hw + 1;
  for (const auto& pk : layout.kinds) {
    const int k = static_cast<int>(pk.kind);
    for (const auto& node : pk.interior) {
      interior_box[k].push_back((node.i + hw) + width * (node.j + hw));
      interior_field[k].push_back(node.field);
    }
    for (const auto& node : pk.edges) edge_box[k].push_back((node.i + hw) + width * (node.j + hw));
  }
}

MacroValues extract_macro_values(const PatchState& state) {
  if (state.values.size() != state.spec.state_count())
    throw ContractError("patch state length does not match its grid");
  MacroValues mv = MacroValues::zeros(state.spec.M());
  extract_macro_into<double>(state.spec, state.values.data(), mv.values.data());
  return mv;
}

PatchState patch_rhs(const PatchState& state, const EdgeValues& edges, const PhysicalParams& params) {
  const PatchGridSpec& spec = state.spec;
  if (state.values.size() != spec.state_count())
    throw ContractError("patch state length does not match its grid");
  if (edges.values.size() != spec.edge_count()) {
    const std::size_t missing = std::min(edges.values.size(), spec.edge_count());
    std::ostringstream msg;
    msg << "edge values incomplete: " << edges.values.size() << " of " << spec.edge_count();
    if (missing < spec.edge_count()) {
      NodeIndex node = spec.edge_node(missing);
      msg << "; first missing node patch (" << node.patch_I << "," << node.patch_J << ") local ("
          << node.i << "," << node.j << ") kind " << field_char(node.kind);
    }
    throw ContractError(msg.str());
  }
  for (std::size_t e = 0; e < edges.values.size(); ++e) {
    if (std::isnan(edges.values[e])) {
      NodeIndex node = spec.edge_node(e);
      std::ostringstream msg;
      msg << "edge value missing at patch (" << node.patch_I << "," << node.patch_J << ") local ("
          << node.i << "," << node.j << ") kind " << field_char(node.kind);
      throw ContractError(msg.str());
    }
  }
  params.validate();
  PatchState out{spec, std::vector<double>(spec.state_count())};
  PatchStencilTables tables(*spec.layout);
  std::vector<double> scratch;
  auto w = WaveCoefficients<double>::make(spec.delta, params);
  patch_rhs_into<double>(spec, tables, w, state.values.data(), edges.values.data(),
                         out.values.data(), scratch);
  return out;
}

PatchState coupled_rhs(const PatchState& state, const CouplingOperator& coupling,
                       const PhysicalParams& params) {
  if (!state.spec.same_geometry(coupling.spec()))
    throw ContractError("patch state and coupling operator were built for different grids");
  if (state.values.size() != state.spec.state_count())
    throw ContractError("patch state length does not match its grid");
  MacroValues mv = extract_macro_values(state);
  EdgeValues ev = coupling.edge_values(mv);
  return patch_rhs(state, ev, params);
}

// ---------------------------------------------------------------- system

template <class Real>
PatchSystem<Real>::PatchSystem(const PatchGridSpec& spec, Apply coupling, const PhysicalParams& params)
    : spec_(spec),
      coupling_(std::move(coupling)),
      w_(WaveCoefficients<Real>::make(spec.delta_as<Real>(), params)),
      tables_(*spec.layout),
      macro_(spec.macro_count()),
      edges_(spec.edge_count()) {
  params.validate();
}

template <class Real>
void PatchSystem<Real>::edges(const Real* x, Real* edges) {
  extract_macro_into<Real>(spec_, x, macro_.data());
  coupling_(macro_.data(), edges);
}

template <class Real>
void PatchSystem<Real>::patch_rhs(const Real* x, const Real* edges, Real* out) {
  patch_rhs_into<Real>(spec_, tables_, w_, x, edges, out, scratch_);
}

template <class Real>
void PatchSystem<Real>::rhs(const Real* x, Real* out) {
  edges(x, edges_.data());
  patch_rhs_into<Real>(spec_, tables_, w_, x, edges_.data(), out, scratch_);
}

template class PatchSystem<double>;
template class PatchSystem<dd_real>;

PatchSystem<double> make_patch_system(const CouplingOperator& coupling, const PhysicalParams& params) {
  auto op = std::make_shared<const CouplingOperator>(coupling);
  return PatchSystem<double>(coupling.spec(),
                             [op](const double* macro, double* edges) { op->apply(macro, edges); },
                             params);
}

PatchSystem<dd_real> make_patch_system_extended(const PatchGridSpec& spec, const SchemeId& scheme,
                                                const PhysicalParams& params) {
  auto mat = std::make_shared<const CouplingMatrix<dd_real>>(build_coupling_matrix<dd_real>(spec, scheme));
  return PatchSystem<dd_real>(
      spec, [mat](const dd_real* macro, dd_real* edges) { mat->apply(macro, edges); }, params);
}

// ---------------------------------------------------------------- helpers

std::vector<double> total_h_weights(const PatchGridSpec& spec) {
  std::vector<double> w(spec.state_count(), 0.0);
  const PatchLayout& layout = *spec.layout;
  const auto& pk = layout.of(Field::H);
  for (std::size_t c = 0; c < spec.cell_count(); ++c)
    for (std::size_t q = 0; q < pk.interior.size(); ++q)
      if (pk.interior[q].field == Field::H) w[c * layout.cell_interior + pk.interior_offset + q] = 1.0;
  return w;
}

double total_h(const PatchState& state) {
  const auto w = total_h_weights(state.spec);
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k)
    if (w[k] != 0.0) s += state.values[k];
  return s;
}

PatchState shift_cells(const PatchState& state, int cells_x, int cells_y) {
  const PatchGridSpec& spec = state.spec;
  const int M = spec.M();
  const std::size_t ci = spec.layout->cell_interior;
  PatchState out{spec, std::vector<double>(state.values.size())};
  for (int J = 0; J < M; ++J) {
    for (int I = 0; I < M; ++I) {
      const std::size_t src = static_cast<std::size_t>(I) + static_cast<std::size_t>(M) * J;
      const std::size_t dst = static_cast<std::size_t>(wrap_index(I + cells_x, M)) +
                              static_cast<std::size_t>(M) * wrap_index(J + cells_y, M);
      std::copy_n(state.values.begin() + src * ci, ci, out.values.begin() + dst * ci);
    }
  }
  return out;
}

std::vector<std::array<double, 2>> patch_positions(const PatchGridSpec& spec) {
  std::vector<std::array<double, 2>> pos(spec.state_count());
  for (std::size_t s = 0; s < pos.size(); ++s) pos[s] = spec.position(spec.node(s));
  return pos;
}

// ---------------------------------------------------------------- snapshots

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ParameterError("cannot parse number '" + text + "'");
  return v;
}

void write_patch_state_csv(std::ostream& os, const PatchState& state) {
  os << "patch_I,patch_J,i,j,kind,value\n";
  for (std::size_t s = 0; s < state.values.size(); ++s) {
    const NodeIndex node = state.spec.node(s);
    os << node.patch_I << ',' << node.patch_J << ',' << node.i << ',' << node.j << ','
       << field_char(node.kind) << ',' << format_double(state.values[s]) << '\n';
  }
}

PatchState read_patch_state_csv(std::istream& is, const PatchGridSpec& spec) {
  PatchState state = PatchState::zeros(spec);
  std::vector<char> seen(spec.state_count(), 0);
  std::string line;
  if (!std::getline(is, line)) throw ParameterError("empty patch snapshot");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cols.push_back(cell);
    if (cols.size() != 6 || cols[4].size() != 1)
      throw ParameterError("malformed patch snapshot row: " + line);
    NodeIndex node{std::stoi(cols[0]), std::stoi(cols[1]), std::stoi(cols[2]), std::stoi(cols[3]),
                   field_from_char(cols[4][0]), Region::Interior};
    const std::size_t s = spec.slot(node);
    if (seen[s]) throw ParameterError("duplicate node in patch snapshot: " + line);
    seen[s] = 1;
    state.values[s] = parse_double(cols[5]);
    ++rows;
  }
  if (rows != spec.state_count())
    throw ParameterError("patch snapshot has " + std::to_string(rows) + " rows, grid needs " +
                         std::to_string(spec.state_count()));
  return state;
}

namespace {
constexpr char kMagic[8] = {'S', 'T', 'G', 'P', 'A', 'T', 'C', '1'};
}

void write_patch_state_binary(std::ostream& os, const PatchState& state) {
  os.write(kMagic, sizeof(kMagic));
  const std::int32_t dims[2] = {state.spec.N, state.spec.n};
  os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  os.write(reinterpret_cast<const char*>(&state.spec.r), sizeof(double));
  const std::uint64_t count = state.values.size();
  os.write(reinterpret_cast<const char*>(&count), sizeof(count));
  os.write(reinterpret_cast<const char*>(state.values.data()),
           static_cast<std::streamsize>(count * sizeof(double)));
}

PatchState read_patch_state_binary(std::istream& is) {
  char magic[8];
  std::int32_t dims[2];
  double r = 0.0;
  std::uint64_t count = 0;
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParameterError("not a patch state snapshot");
  is.read(reinterpret_cast<char*>(dims), sizeof(dims));
  is.read(reinterpret_cast<char*>(&r), sizeof(r));
  is.read(reinterpret_cast<char*>(&count), sizeof(count));
  PatchState state = PatchState::zeros(build_patch_grid(dims[0], dims[1], r));
  if (count != state.values.size()) throw ParameterError("snapshot length does not match its grid");
  is.read(reinterpret_cast<char*>(state.values.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw ParameterError("truncated patch snapshot");
  return state;
}

}  // namespace stagpatch

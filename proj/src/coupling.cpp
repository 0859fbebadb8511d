#include "stagpatch/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stagpatch/error.hpp"

namespace stagpatch {

std::string SchemeId::name() const {
  if (kind == CouplingKind::Spectral) return "spectral";
  return "square-p" + std::to_string(p);
}

SchemeId SchemeId::parse(const std::string& text) {
  if (text == "spectral") return spectral();
  const std::string prefix = "square-p";
  if (text.rfind(prefix, 0) == 0 && text.size() > prefix.size()) {
    const std::string digits = text.substr(prefix.size());
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      const int p = std::stoi(digits);
      if (p == 2 || p == 4 || p == 6 || p == 8) return square_p(p);
    }
  }
  throw ParameterError("unknown scheme '" + text +
                       "' (expected spectral, square-p2, square-p4, square-p6 or square-p8)");
}

std::vector<SchemeId> all_schemes() {
  return {SchemeId::spectral(), SchemeId::square_p(2), SchemeId::square_p(4),
          SchemeId::square_p(6), SchemeId::square_p(8)};
}

// ---------------------------------------------------------------- kernels

std::vector<double> lagrange_basis(std::span<const double> nodes, double point) {
  for (std::size_t a = 0; a < nodes.size(); ++a)
    for (std::size_t b = a + 1; b < nodes.size(); ++b)
      if (nodes[a] == nodes[b]) throw ParameterError("Lagrange nodes must be distinct");
  std::vector<double> w(nodes.size(), 1.0);
  for (std::size_t a = 0; a < nodes.size(); ++a)
    for (std::size_t b = 0; b < nodes.size(); ++b)
      if (b != a) w[a] *= (point - nodes[b]) / (nodes[a] - nodes[b]);
  return w;
}

template <class Real>
std::vector<Real> lagrange_weights(std::span<const int> nodes, const Real& point) {
  for (std::size_t a = 0; a < nodes.size(); ++a)
    for (std::size_t b = a + 1; b < nodes.size(); ++b)
      if (nodes[a] == nodes[b]) throw ParameterError("Lagrange nodes must be distinct");
  std::vector<Real> w(nodes.size(), Real(1));
  for (std::size_t a = 0; a < nodes.size(); ++a)
    for (std::size_t b = 0; b < nodes.size(); ++b)
      if (b != a) w[a] *= (point - Real(nodes[b])) / Real(nodes[a] - nodes[b]);
  return w;
}

template <class Real>
Real dirichlet_kernel(int M, const Real& theta) {
  using std::cos;
  const int K = (M - 1) / 2;
  Real s(1);
  for (int k = 1; k <= K; ++k) s += Real(2) * cos(Real(k) * theta);
  return s / Real(M);
}

template std::vector<double> lagrange_weights<double>(std::span<const int>, const double&);
template std::vector<dd_real> lagrange_weights<dd_real>(std::span<const int>, const dd_real&);
template double dirichlet_kernel<double>(int, const double&);
template dd_real dirichlet_kernel<dd_real>(int, const dd_real&);

// ---------------------------------------------------------------- DFT

SpectralCoefficients dft2(std::span<const std::complex<double>> samples, int M) {
  if (M < 1 || M % 2 == 0)
    throw ParameterError("Nyquist parity: the transform needs an odd lattice size, got " +
                         std::to_string(M));
  if (samples.size() != static_cast<std::size_t>(M) * M)
    throw ContractError("dft2 expects M*M samples");
  SpectralCoefficients out;
  out.M = M;
  out.K = (M - 1) / 2;
  const int nk = 2 * out.K + 1;
  out.c.assign(static_cast<std::size_t>(nk) * nk, {0.0, 0.0});
  const double step = 2.0 * 3.141592653589793 / M;
  // e^{-i k x_I} with k*I reduced mod M keeps the phase argument small.
  std::vector<std::complex<double>> root(M);
  for (int t = 0; t < M; ++t) root[t] = std::polar(1.0, -step * t);
  for (int ky = -out.K; ky <= out.K; ++ky) {
    for (int kx = -out.K; kx <= out.K; ++kx) {
      std::complex<double> s{0.0, 0.0};
      for (int J = 0; J < M; ++J)
        for (int I = 0; I < M; ++I)
          s += samples[static_cast<std::size_t>(I) + static_cast<std::size_t>(M) * J] *
               root[wrap_index(kx * I + ky * J, M)];
      out.c[static_cast<std::size_t>(kx + out.K) + static_cast<std::size_t>(nk) * (ky + out.K)] = s;
    }
  }
  return out;
}

SpectralCoefficients dft2(std::span<const double> samples, int M) {
  std::vector<std::complex<double>> z(samples.begin(), samples.end());
  return dft2(std::span<const std::complex<double>>(z), M);
}

std::complex<double> inverse_dft2_at(const SpectralCoefficients& coeffs, double x, double y) {
  const int K = coeffs.K;
  const int nk = 2 * K + 1;
  std::vector<std::complex<double>> ex(nk), ey(nk);
  for (int k = -K; k <= K; ++k) {
    ex[k + K] = std::polar(1.0, k * x);
    ey[k + K] = std::polar(1.0, k * y);
  }
  std::complex<double> s{0.0, 0.0};
  for (int ky = 0; ky < nk; ++ky) {
    std::complex<double> row{0.0, 0.0};
    for (int kx = 0; kx < nk; ++kx) row += coeffs.c[kx + static_cast<std::size_t>(nk) * ky] * ex[kx];
    s += row * ey[ky];
  }
  return s / static_cast<double>(coeffs.M * coeffs.M);
}

// ---------------------------------------------------------------- stencils

namespace {

// Source nodes along one axis, in units of Delta relative to the target
// patch centre. offset_parity is the target's lattice offset from the
// source lattice: aligned axes get p+1 nodes, staggered axes p nodes, both
// symmetric about the target.
std::vector<int> axis_nodes(int offset_parity, int p) {
  std::vector<int> nodes;
  if (offset_parity == 0) {
    for (int s = -p / 2; s <= p / 2; ++s) nodes.push_back(2 * s);
  } else {
    for (int rel = -(p - 1); rel <= p - 1; rel += 2) nodes.push_back(rel);
  }
  return nodes;
}

void check_order(int p) {
  if (p != 2 && p != 4 && p != 6 && p != 8)
    throw ParameterError("square-p order must be one of 2, 4, 6, 8, got " + std::to_string(p));
}

template <class Real>
Real delta_ratio(const PatchGridSpec& spec) {
  // delta / Delta = 2r/n
  return Real(2) * Real(spec.r) / Real(spec.n);
}

}  // namespace

std::vector<Stencil> square_p_stencils(const PatchGridSpec& spec, int p) {
  check_order(p);
  const double rho = delta_ratio<double>(spec);
  std::vector<Stencil> out;
  for (const auto& pk : spec.layout->kinds) {
    const auto op = field_offset(pk.kind);
    for (Field f : kAllFields) {
      Stencil st;
      st.edge_field = f;
      st.patch_kind = pk.kind;
      st.source_kind = f;
      for (const auto& e : pk.edges)
        if (e.field == f) st.edge_nodes.push_back(e);
      if (st.edge_nodes.empty()) continue;
      const auto of = field_offset(f);
      const int dx = op[0] - of[0];
      const int dy = op[1] - of[1];
      st.x_nodes = axis_nodes(dx, p);
      st.y_nodes = axis_nodes(dy, p);
      for (int yn : st.y_nodes)
        for (int xn : st.x_nodes) st.offsets.push_back({(xn + dx) / 2, (yn + dy) / 2});
      for (const auto& e : st.edge_nodes) {
        auto wx = lagrange_weights<double>(st.x_nodes, rho * e.i);
        auto wy = lagrange_weights<double>(st.y_nodes, rho * e.j);
        std::vector<double> w;
        for (double b : wy)
          for (double a : wx) w.push_back(a * b);
        st.weights.push_back(std::move(w));
      }
      out.push_back(std::move(st));
    }
  }
  return out;
}

template <class Real>
std::vector<std::vector<TemplateEntry<Real>>> coupling_template(const PatchGridSpec& spec,
                                                                const SchemeId& scheme) {
  const PatchLayout& layout = *spec.layout;
  const int M = spec.M();
  const Real rho = delta_ratio<Real>(spec);
  const Real Delta = spec.Delta_as<Real>();
  std::vector<std::vector<TemplateEntry<Real>>> rows(layout.cell_edges);
  if (scheme.kind == CouplingKind::SquareP) check_order(scheme.p);

  for (const auto& pk : layout.kinds) {
    const auto op = field_offset(pk.kind);
    for (std::size_t e = 0; e < pk.edges.size(); ++e) {
      const LocalNode& node = pk.edges[e];
      const auto of = field_offset(node.field);
      const int dx = op[0] - of[0];
      const int dy = op[1] - of[1];
      const Real xi = rho * Real(node.i);
      const Real eta = rho * Real(node.j);
      auto& row = rows[pk.edge_offset + e];

      if (scheme.kind == CouplingKind::Spectral) {
        const int K = (M - 1) / 2;
        std::vector<Real> wx, wy;
        for (int s = -K; s <= K; ++s) {
          wx.push_back(dirichlet_kernel<Real>(M, Delta * (Real(dx - 2 * s) + xi)));
          wy.push_back(dirichlet_kernel<Real>(M, Delta * (Real(dy - 2 * s) + eta)));
        }
        for (int sy = -K; sy <= K; ++sy)
          for (int sx = -K; sx <= K; ++sx)
            row.push_back({sx, sy, wx[sx + K] * wy[sy + K]});
      } else {
        const auto xn = axis_nodes(dx, scheme.p);
        const auto yn = axis_nodes(dy, scheme.p);
        const auto wx = lagrange_weights<Real>(xn, xi);
        const auto wy = lagrange_weights<Real>(yn, eta);
        for (std::size_t b = 0; b < yn.size(); ++b)
          for (std::size_t a = 0; a < xn.size(); ++a)
            row.push_back({(xn[a] + dx) / 2, (yn[b] + dy) / 2, wx[a] * wy[b]});
      }
    }
  }
  return rows;
}

template <class Real>
CouplingMatrix<Real> build_coupling_matrix(const PatchGridSpec& spec, const SchemeId& scheme) {
  const PatchLayout& layout = *spec.layout;
  const int M = spec.M();
  const std::size_t mm = static_cast<std::size_t>(M) * M;
  const auto tmpl = coupling_template<Real>(spec, scheme);

  // Field of every cell-local edge slot.
  std::vector<Field> slot_field(layout.cell_edges);
  for (const auto& pk : layout.kinds)
    for (std::size_t e = 0; e < pk.edges.size(); ++e) slot_field[pk.edge_offset + e] = pk.edges[e].field;

  CouplingMatrix<Real> mat;
  mat.rows = spec.edge_count();
  mat.cols = 3 * mm;
  mat.row_ptr.reserve(mat.rows + 1);
  mat.row_ptr.push_back(0);
  std::vector<std::pair<std::uint32_t, Real>> buf;
  for (int cJ = 0; cJ < M; ++cJ) {
    for (int cI = 0; cI < M; ++cI) {
      for (std::size_t q = 0; q < layout.cell_edges; ++q) {
        const std::size_t base = static_cast<std::size_t>(slot_field[q]) * mm;
        buf.clear();
        for (const auto& t : tmpl[q]) {
          const std::size_t c = static_cast<std::size_t>(wrap_index(cI + t.dI, M)) +
                                static_cast<std::size_t>(M) * wrap_index(cJ + t.dJ, M);
          buf.push_back({static_cast<std::uint32_t>(base + c), t.w});
        }
        std::stable_sort(buf.begin(), buf.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t k = 0; k < buf.size();) {
          std::uint32_t c = buf[k].first;
          Real w = buf[k].second;
          for (++k; k < buf.size() && buf[k].first == c; ++k) w += buf[k].second;
          mat.col.push_back(c);
          mat.weight.push_back(w);
        }
        mat.row_ptr.push_back(mat.weight.size());
      }
    }
  }
  return mat;
}

template std::vector<std::vector<TemplateEntry<double>>> coupling_template<double>(const PatchGridSpec&, const SchemeId&);
template std::vector<std::vector<TemplateEntry<dd_real>>> coupling_template<dd_real>(const PatchGridSpec&, const SchemeId&);
template CouplingMatrix<double> build_coupling_matrix<double>(const PatchGridSpec&, const SchemeId&);
template CouplingMatrix<dd_real> build_coupling_matrix<dd_real>(const PatchGridSpec&, const SchemeId&);

// ---------------------------------------------------------------- operator

CouplingOperator CouplingOperator::build(const PatchGridSpec& spec, const SchemeId& scheme,
                                         Realisation realisation) {
  if (!spec.layout) throw ContractError("coupling needs a constructed patch grid");
  if (scheme.kind == CouplingKind::SquareP) {
    check_order(scheme.p);
    if (realisation != Realisation::Matrix)
      throw ParameterError("polynomial coupling is always realised as a sparse matrix");
  }
  CouplingOperator op;
  op.spec_ = spec;
  op.scheme_ = scheme;
  op.realisation_ = realisation;
  if (realisation == Realisation::Matrix) op.matrix_ = build_coupling_matrix<double>(spec, scheme);
  return op;
}

const CouplingMatrix<double>& CouplingOperator::matrix() const {
  if (realisation_ != Realisation::Matrix)
    throw ContractError("functional spectral coupling has no materialised matrix");
  return matrix_;
}

void CouplingOperator::apply(const double* macro, double* edges) const {
  if (realisation_ == Realisation::Matrix) {
    matrix_.apply(macro, edges);
    return;
  }
  MacroValues mv{spec_.M(), std::vector<double>(macro, macro + spec_.macro_count())};
  EdgeValues ev = spectral_edge_values(mv, spec_);
  std::copy(ev.values.begin(), ev.values.end(), edges);
}

EdgeValues CouplingOperator::edge_values(const MacroValues& macros) const {
  if (macros.M != spec_.M() || macros.values.size() != spec_.macro_count())
    throw ContractError("macro values do not match the coupling's patch grid");
  EdgeValues ev{std::vector<double>(spec_.edge_count())};
  apply(macros.values.data(), ev.values.data());
  return ev;
}

EdgeValues spectral_edge_values(const MacroValues& macros, const PatchGridSpec& spec) {
  const int M = spec.M();
  if (macros.M != M || macros.values.size() != spec.macro_count())
    throw ContractError("macro values do not match the patch grid");
  const PatchLayout& layout = *spec.layout;
  std::array<SpectralCoefficients, 3> coeffs;
  double scale = 1.0;
  for (Field f : kAllFields) {
    coeffs[static_cast<int>(f)] = dft2(macros.of(f), M);
    for (double v : macros.of(f)) scale = std::max(scale, std::abs(v));
  }
  const double rho = delta_ratio<double>(spec);
  EdgeValues ev{std::vector<double>(spec.edge_count())};
  for (int cJ = 0; cJ < M; ++cJ) {
    for (int cI = 0; cI < M; ++cI) {
      const std::size_t cell = static_cast<std::size_t>(cI) + static_cast<std::size_t>(M) * cJ;
      for (const auto& pk : layout.kinds) {
        const auto op = field_offset(pk.kind);
        for (std::size_t e = 0; e < pk.edges.size(); ++e) {
          const LocalNode& node = pk.edges[e];
          const auto of = field_offset(node.field);
          // Position relative to the origin of the source field's lattice.
          const double x = spec.Delta * (2 * cI + op[0] - of[0] + rho * node.i);
          const double y = spec.Delta * (2 * cJ + op[1] - of[1] + rho * node.j);
          const std::complex<double> z = inverse_dft2_at(coeffs[static_cast<int>(node.field)], x, y);
          if (std::abs(z.imag()) > 1e-8 * scale) {
            std::ostringstream msg;
            msg << "spectral interpolation left an imaginary residue " << z.imag()
                << " at patch cell (" << cI << "," << cJ << ") edge node (" << node.i << ","
                << node.j << ")";
            throw NumericalError(msg.str());
          }
          ev.values[cell * layout.cell_edges + pk.edge_offset + e] = z.real();
        }
      }
    }
  }
  return ev;
}

CouplingOperator build_square_p(const PatchGridSpec& spec, int p) {
  return CouplingOperator::square_p(spec, p);
}

}  // namespace stagpatch

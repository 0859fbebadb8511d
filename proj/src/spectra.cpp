#include "stagpatch/spectra.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "stagpatch/assignment.hpp"
#include "stagpatch/error.hpp"

namespace stagpatch {

std::string precision_name(Precision p) { return p == Precision::Extended ? "extended" : "working"; }

Precision parse_precision(const std::string& text) {
  if (text == "working") return Precision::Working;
  if (text == "extended") return Precision::Extended;
  throw ParameterError("unknown precision '" + text + "' (expected working or extended)");
}

namespace {

std::string describe(const PatchGridSpec& spec, const SchemeId& scheme, const PhysicalParams& params) {
  std::ostringstream os;
  os << scheme.name() << " N=" << spec.N << " n=" << spec.n << " r=" << format_double(spec.r)
     << " c_D=" << format_double(params.c_D) << " c_V=" << format_double(params.c_V);
  return os.str();
}

bool lex_less(cplx a, cplx b) {
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

// ---------------------------------------------------------------- Jacobians

Jacobian assemble_jacobian(const CouplingOperator& coupling, const PhysicalParams& params, int probes) {
  params.validate();
  const PatchGridSpec& spec = coupling.spec();
  const std::size_t n = spec.state_count();
  auto sys = make_patch_system(coupling, params);

  std::vector<double> x(n, 0.0), f(n);
  sys.rhs(x.data(), f.data());
  if (inf_norm(f) > 1e-14)
    throw NumericalError("linearity violation: F(0) != 0 for " + describe(spec, coupling.scheme(), params));

  // Only patch-centre values feed the coupling; other impulses act locally.
  std::vector<char> is_centre(n, 0);
  const PatchLayout& layout = *spec.layout;
  for (std::size_t c = 0; c < spec.cell_count(); ++c)
    for (const auto& pk : layout.kinds) is_centre[c * layout.cell_interior + pk.interior_offset + pk.centre] = 1;
  const std::vector<double> zero_edges(spec.edge_count(), 0.0);

  Jacobian jac{Eigen::MatrixXd(n, n), coupling.scheme(), spec, params, 0.0};
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = 1.0;
    if (is_centre[k]) sys.rhs(x.data(), jac.J.col(k).data());
    else sys.patch_rhs(x.data(), zero_edges.data(), jac.J.col(k).data());
    x[k] = 0.0;
  }

  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> dist;
  Eigen::VectorXd probe(n), jp(n);
  for (int t = 0; t < probes; ++t) {
    for (std::size_t k = 0; k < n; ++k) probe[k] = dist(rng);
    sys.rhs(probe.data(), f.data());
    jp.noalias() = jac.J * probe;
    double err = 0.0;
    for (std::size_t k = 0; k < n; ++k) err = std::max(err, std::abs(jp[k] - f[k]));
    const double rel = err / std::max(inf_norm(f), 1e-300);
    jac.probe_error = std::max(jac.probe_error, rel);
  }
  if (jac.probe_error > 1e-12)
    throw NumericalError("Jacobian probe mismatch " + format_double(jac.probe_error) + " for " +
                         describe(spec, coupling.scheme(), params));
  return jac;
}

Eigen::MatrixXd assemble_full_domain_jacobian(const MicroGridSpec& spec, const PhysicalParams& params) {
  params.validate();
  const std::size_t n = spec.state_count();
  const auto w = WaveCoefficients<double>::make(spec.delta, params);
  Eigen::MatrixXd J(n, n);
  std::vector<double> x(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = 1.0;
    full_domain_rhs_into<double>(spec, w, x.data(), J.col(k).data());
    x[k] = 0.0;
  }
  return J;
}

EigenResult eig(const Eigen::MatrixXd& J, bool check_residuals, const std::string& context) {
  if (J.rows() != J.cols()) throw ContractError("eig needs a square matrix");
  if (!J.allFinite()) throw NumericalError("eig: non-finite matrix entries" + (context.empty() ? "" : " (" + context + ")"));
  const lapack_int n = static_cast<lapack_int>(J.rows());
  EigenResult res;
  if (n == 0) return res;
  Eigen::MatrixXd A = J;
  std::vector<double> wr(n), wi(n);
  Eigen::MatrixXd VR;
  if (check_residuals) VR.resize(n, n);
  const lapack_int info = LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', check_residuals ? 'V' : 'N', n, A.data(), n,
                                        wr.data(), wi.data(), nullptr, 1,
                                        check_residuals ? VR.data() : nullptr, n);
  if (info != 0)
    throw NumericalError("eigensolver did not converge (info " + std::to_string(info) + ")" +
                         (context.empty() ? "" : " for " + context));
  res.values.resize(n);
  for (lapack_int k = 0; k < n; ++k) res.values[k] = {wr[k], wi[k]};

  if (check_residuals) {
    const double scale = std::max(1.0, J.cwiseAbs().rowwise().sum().maxCoeff());
    const int samples = std::min<int>(10, n);
    for (int s = 0; s < samples; ++s) {
      lapack_int k = static_cast<lapack_int>((static_cast<long>(s) * n) / samples);
      // Complex pairs are stored as (re, im) columns at k, k+1.
      if (wi[k] != 0.0 && k > 0 && wi[k - 1] == -wi[k] && wi[k] < 0.0) --k;
      Eigen::VectorXcd v(n);
      if (wi[k] == 0.0) v = VR.col(k).cast<cplx>();
      else v = VR.col(k).cast<cplx>() + cplx(0.0, 1.0) * VR.col(k + 1).cast<cplx>();
      const cplx lambda = res.values[k];
      const double r = (J.cast<cplx>() * v - lambda * v).norm() / v.norm();
      res.max_residual = std::max(res.max_residual, r);
    }
    if (res.max_residual > 1e-8 * scale)
      throw NumericalError("eigenpair residual " + format_double(res.max_residual) + " too large" +
                           (context.empty() ? "" : " for " + context));
  }
  return res;
}

// ---------------------------------------------------------------- Bloch

std::size_t BlochSpectrum::dimension() const {
  std::size_t d = 0;
  for (const auto& b : eigenvalues) d += b.size();
  return d;
}

std::vector<cplx> BlochSpectrum::flattened() const {
  std::vector<cplx> out;
  out.reserve(dimension());
  for (const auto& b : eigenvalues) out.insert(out.end(), b.begin(), b.end());
  return out;
}

namespace {

template <class Real>
using CMat = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

// Shift-invariant pieces of the coupled Jacobian: the single-cell response
// to interior and edge impulses, and the coupling template.
template <class Real>
struct BlochParts {
  Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> A_int;
  Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> A_edge;
  std::vector<std::vector<TemplateEntry<Real>>> tmpl;
  std::vector<int> slot_field;
  std::array<std::size_t, 3> centre{};
  std::vector<std::complex<Real>> roots;  // exp(2 pi i a / M)
};

template <class Real>
BlochParts<Real> bloch_parts(const PatchGridSpec& spec, const SchemeId& scheme, const PhysicalParams& params) {
  params.validate();
  const PatchLayout& layout = *spec.layout;
  const std::size_t ni = layout.cell_interior;
  const std::size_t ne = layout.cell_edges;
  PatchGridSpec one = spec;
  one.N = 2;  // a single macro-cell, same micro geometry
  const PatchStencilTables tables(layout);
  const auto w = WaveCoefficients<Real>::make(spec.delta_as<Real>(), params);

  BlochParts<Real> parts;
  parts.A_int.resize(ni, ni);
  parts.A_edge.resize(ni, ne);
  std::vector<Real> x(ni, Real(0)), e(ne, Real(0)), out(ni), scratch;
  for (std::size_t k = 0; k < ni; ++k) {
    x[k] = Real(1);
    patch_rhs_into<Real>(one, tables, w, x.data(), e.data(), out.data(), scratch);
    for (std::size_t r = 0; r < ni; ++r) parts.A_int(r, k) = out[r];
    x[k] = Real(0);
  }
  for (std::size_t k = 0; k < ne; ++k) {
    e[k] = Real(1);
    patch_rhs_into<Real>(one, tables, w, x.data(), e.data(), out.data(), scratch);
    for (std::size_t r = 0; r < ni; ++r) parts.A_edge(r, k) = out[r];
    e[k] = Real(0);
  }
  parts.tmpl = coupling_template<Real>(spec, scheme);
  parts.slot_field.resize(ne);
  for (const auto& pk : layout.kinds) {
    for (std::size_t q = 0; q < pk.edges.size(); ++q)
      parts.slot_field[pk.edge_offset + q] = static_cast<int>(pk.edges[q].field);
    parts.centre[static_cast<int>(pk.kind)] = pk.interior_offset + pk.centre;
  }
  const int M = spec.M();
  const Real two_pi = Real(2) * pi_v<Real>();
  parts.roots.resize(M);
  for (int a = 0; a < M; ++a) {
    const Real phi = two_pi * Real(a) / Real(M);
    using std::cos;
    using std::sin;
    parts.roots[a] = {cos(phi), sin(phi)};
  }
  return parts;
}

template <class Real>
CMat<Real> bloch_block(const BlochParts<Real>& parts, int M, int kx, int ky) {
  using C = std::complex<Real>;
  const Eigen::Index ni = parts.A_int.rows();
  const Eigen::Index ne = parts.A_edge.cols();
  CMat<Real> B = parts.A_int.template cast<C>();
  CMat<Real> coup = CMat<Real>::Zero(ne, 3);
  for (Eigen::Index q = 0; q < ne; ++q) {
    C s(Real(0), Real(0));
    for (const auto& t : parts.tmpl[q]) s += parts.roots[wrap_index(kx * t.dI + ky * t.dJ, M)] * t.w;
    coup(q, parts.slot_field[q]) = s;
  }
  for (int f = 0; f < 3; ++f) {
    for (Eigen::Index r = 0; r < ni; ++r) {
      C s(Real(0), Real(0));
      for (Eigen::Index q = 0; q < ne; ++q)
        if (coup(q, f) != C(Real(0), Real(0))) s += parts.A_edge(r, q) * coup(q, f);
      B(r, parts.centre[f]) += s;
    }
  }
  return B;
}

// Blocks are accumulated in extended precision so that the working-precision
// matrix holds correctly rounded entries, like the dense Jacobian.
CMat<double> rounded(const CMat<dd_real>& B) {
  CMat<double> out(B.rows(), B.cols());
  for (Eigen::Index j = 0; j < B.cols(); ++j)
    for (Eigen::Index i = 0; i < B.rows(); ++i) out(i, j) = to_double(B(i, j));
  return out;
}

std::vector<cplx> block_eigenvalues(const CMat<double>& B, const std::string& context) {
  const lapack_int n = static_cast<lapack_int>(B.rows());
  CMat<double> A = B;
  std::vector<cplx> w(n);
  const lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', n, reinterpret_cast<lapack_complex_double*>(A.data()), n,
                                        reinterpret_cast<lapack_complex_double*>(w.data()), nullptr, 1,
                                        nullptr, 1);
  if (info != 0)
    throw NumericalError("eigensolver did not converge (info " + std::to_string(info) + ") for " + context);
  return w;
}

std::vector<cplx> block_eigenvalues(const CMat<dd_real>& B, const std::string& context) {
  Eigen::ComplexEigenSolver<CMat<dd_real>> es(B, false);
  if (es.info() != Eigen::Success) throw NumericalError("extended-precision eigensolver failed for " + context);
  std::vector<cplx> w(B.rows());
  for (Eigen::Index k = 0; k < B.rows(); ++k) w[k] = to_double(es.eigenvalues()(k));
  return w;
}

std::vector<std::pair<int, int>> all_wavenumbers(int M) {
  std::vector<std::pair<int, int>> out;
  const auto ks = resolved_wavenumbers(M);
  for (int ky : ks)
    for (int kx : ks) out.push_back({kx, ky});
  return out;
}

std::vector<cplx> real_pair_eigenvalues(const CMat<double>& B, bool self_conjugate, const std::string& context) {
  if (self_conjugate) return eig(B.real(), false, context).values;
  const Eigen::Index n = B.rows();
  Eigen::MatrixXd R(2 * n, 2 * n);
  R << B.real(), -B.imag(), B.imag(), B.real();
  return eig(R, false, context).values;
}

template <class Real>
BlochSpectrum bloch_spectrum_in(const PatchGridSpec& spec, const SchemeId& scheme, const PhysicalParams& params,
                                Precision precision, std::vector<std::pair<int, int>> wavenumbers, BlochForm form) {
  const int M = spec.M();
  if (wavenumbers.empty()) wavenumbers = all_wavenumbers(M);
  const auto parts = bloch_parts<dd_real>(spec, scheme, params);
  auto block = [&](int kx, int ky) {
    if constexpr (std::is_same_v<Real, double>) return rounded(bloch_block<dd_real>(parts, M, kx, ky));
    else return bloch_block<dd_real>(parts, M, kx, ky);
  };
  const std::string context = describe(spec, scheme, params);
  auto key = [M](int kx, int ky) { return std::pair<int, int>{wrap_index(kx, M), wrap_index(ky, M)}; };
  auto centred = [M](int k) { return k > M / 2 ? k - M : k; };
  auto label = [&](int kx, int ky) {
    return context + " k=(" + std::to_string(kx) + "," + std::to_string(ky) + ")";
  };

  BlochSpectrum out{spec, scheme, params, precision, form, {}, {}, {}};
  // B(-k) = conj(B(k)) for a real system, so each conjugate pair is solved once.
  std::map<std::pair<int, int>, std::size_t> solved;
  for (const auto& [kx, ky] : wavenumbers) {
    const auto k = key(kx, ky), neg = key(-kx, -ky);
    const bool self_conjugate = k == neg;
    std::vector<cplx> ev;
    if (form == BlochForm::RealPairs) {
      if (solved.count(k)) continue;
      std::vector<std::pair<int, int>> members{{kx, ky}};
      if (!self_conjugate) members.push_back({centred(neg.first), centred(neg.second)});
      if constexpr (std::is_same_v<Real, double>) {
        ev = real_pair_eigenvalues(block(kx, ky), self_conjugate, label(kx, ky));
      } else {
        ev = block_eigenvalues(block(kx, ky), label(kx, ky));
        if (!self_conjugate) {
          const std::size_t n = ev.size();
          for (std::size_t q = 0; q < n; ++q) ev.push_back(std::conj(ev[q]));
        }
      }
      solved[k] = solved[neg] = out.eigenvalues.size();
      out.members.push_back(std::move(members));
    } else {
      auto it = solved.find(neg);
      if (it != solved.end()) {
        ev = out.eigenvalues[it->second];
        for (auto& z : ev) z = std::conj(z);
      } else {
        ev = block_eigenvalues(block(kx, ky), label(kx, ky));
      }
      solved.emplace(k, out.eigenvalues.size());
      out.members.push_back({{kx, ky}});
    }
    out.wavenumbers.push_back({kx, ky});
    out.eigenvalues.push_back(std::move(ev));
  }
  return out;
}

}  // namespace

std::vector<Eigen::MatrixXcd> bloch_blocks(const PatchGridSpec& spec, const SchemeId& scheme,
                                           const PhysicalParams& params,
                                           const std::vector<std::pair<int, int>>& wavenumbers) {
  const auto parts = bloch_parts<dd_real>(spec, scheme, params);
  std::vector<Eigen::MatrixXcd> out;
  for (auto [kx, ky] : wavenumbers) out.push_back(rounded(bloch_block<dd_real>(parts, spec.M(), kx, ky)));
  return out;
}

BlochSpectrum bloch_spectrum(const PatchGridSpec& spec, const SchemeId& scheme, const PhysicalParams& params,
                             Precision precision, std::vector<std::pair<int, int>> wavenumbers, BlochForm form) {
  if (precision == Precision::Extended)
    return bloch_spectrum_in<dd_real>(spec, scheme, params, precision, std::move(wavenumbers), form);
  return bloch_spectrum_in<double>(spec, scheme, params, precision, std::move(wavenumbers), form);
}

std::vector<cplx> real_form_spectrum(const PatchGridSpec& spec, const SchemeId& scheme,
                                     const PhysicalParams& params) {
  return bloch_spectrum(spec, scheme, params, Precision::Working, {}, BlochForm::RealPairs).flattened();
}

// ---------------------------------------------------------------- classification

double ClassifiedSpectrum::max_residual() const {
  double m = 0.0;
  for (const auto& mm : macro) m = std::max(m, mm.residual);
  return m;
}

double ClassifiedSpectrum::max_real(bool macro_part) const {
  double m = -std::numeric_limits<double>::infinity();
  if (macro_part) {
    for (const auto& mm : macro) m = std::max(m, mm.numeric.real());
  } else {
    for (cplx z : micro) m = std::max(m, z.real());
  }
  return m;
}

const MacroMatch* ClassifiedSpectrum::find(int k_x, int k_y, int member) const {
  for (const auto& m : macro)
    if (m.k_x == k_x && m.k_y == k_y && m.member == member) return &m;
  return nullptr;
}

namespace {

struct MatchOutcome {
  std::vector<int> target;  // numeric index per analytic value
  bool ambiguous = false;
};

// Assignment of analytic values to numeric ones on a lexicographically
// sorted candidate list, so ties resolve deterministically.
MatchOutcome match_values(const std::vector<cplx>& analytic, const std::vector<cplx>& numeric) {
  std::vector<int> order(numeric.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return lex_less(numeric[a], numeric[b]); });
  const Eigen::Index R = static_cast<Eigen::Index>(analytic.size());
  const Eigen::Index C = static_cast<Eigen::Index>(numeric.size());
  Eigen::MatrixXd cost(R, C);
  for (Eigen::Index i = 0; i < R; ++i)
    for (Eigen::Index j = 0; j < C; ++j) cost(i, j) = std::abs(analytic[i] - numeric[order[j]]);
  const Assignment a = min_cost_assignment(cost);

  MatchOutcome out;
  std::vector<int> owner(C, -1);
  for (Eigen::Index i = 0; i < R; ++i) owner[a.row_to_col[i]] = static_cast<int>(i);
  for (Eigen::Index i = 0; i < R && !out.ambiguous; ++i) {
    const int j = a.row_to_col[i];
    for (Eigen::Index jj = 0; jj < C; ++jj) {
      if (jj == j) continue;
      if (std::abs(numeric[order[jj]] - numeric[order[j]]) <= 1e-10) continue;  // same value, no real choice
      double delta = cost(i, jj) - cost(i, j);
      if (owner[jj] >= 0) delta += cost(owner[jj], j) - cost(owner[jj], jj);
      if (delta <= 1e-14) {
        out.ambiguous = true;
        break;
      }
    }
  }
  out.target.resize(R);
  for (Eigen::Index i = 0; i < R; ++i) out.target[i] = order[a.row_to_col[i]];
  return out;
}

void finish_classification(ClassifiedSpectrum& cs) {
  double gap = std::numeric_limits<double>::infinity();
  for (cplx z : cs.micro)
    for (const auto& m : cs.macro) gap = std::min(gap, std::abs(z - m.analytic));
  if (!cs.macro.empty() && cs.max_residual() > 0.5 * gap) {
    cs.review = true;
    cs.warnings.push_back("matched residual " + format_double(cs.max_residual()) +
                          " exceeds half the macro/micro separation " + format_double(gap) +
                          "; classification needs review");
  }
}

std::string wavenumber_text(int kx, int ky) {
  return "(" + std::to_string(kx) + "," + std::to_string(ky) + ")";
}

}  // namespace

ClassifiedSpectrum classify(const std::vector<cplx>& eigs, const PatchGridSpec& spec, const PhysicalParams& params) {
  if (eigs.size() != spec.state_count())
    throw ContractError("classify: " + std::to_string(eigs.size()) + " eigenvalues for a system of dimension " +
                        std::to_string(spec.state_count()));
  const auto triples = analytic_macroscale_set(spec, params);
  std::vector<cplx> analytic;
  for (const auto& t : triples)
    for (cplx z : t.values()) analytic.push_back(z);
  const auto m = match_values(analytic, eigs);

  ClassifiedSpectrum cs{spec, params, eigs.size(), {}, {}, {}, {}, {}, false};
  std::vector<char> taken(eigs.size(), 0);
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const auto& t = triples[i / 3];
    const cplx num = eigs[m.target[i]];
    cs.macro.push_back({t.k_x, t.k_y, static_cast<int>(i % 3), analytic[i], num, std::abs(num - analytic[i])});
    taken[m.target[i]] = 1;
  }
  for (std::size_t k = 0; k < eigs.size(); ++k)
    if (!taken[k]) {
      cs.micro.push_back(eigs[k]);
      cs.micro_block.push_back(-1);
    }
  if (m.ambiguous)
    cs.warnings.push_back("ambiguous macro matching: an alternative assignment is within 1e-14 total cost; "
                          "ties broken by lexicographic eigenvalue order");
  finish_classification(cs);
  return cs;
}

ClassifiedSpectrum classify(const BlochSpectrum& spectrum) {
  const PatchGridSpec& spec = spectrum.spec;
  const int M = spec.M();
  std::map<std::pair<int, int>, EigTriple> triple_of;
  for (const auto& t : analytic_macroscale_set(spec, spectrum.params))
    triple_of[{wrap_index(t.k_x, M), wrap_index(t.k_y, M)}] = t;

  ClassifiedSpectrum cs{spec, spectrum.params, spectrum.dimension(), {}, {}, {}, spectrum.wavenumbers, {}, false};
  for (std::size_t b = 0; b < spectrum.eigenvalues.size(); ++b) {
    const auto& block = spectrum.eigenvalues[b];
    std::vector<const EigTriple*> triples;
    std::vector<cplx> analytic;
    for (const auto& [kx, ky] : spectrum.members[b]) {
      const EigTriple& t = triple_of.at({wrap_index(kx, M), wrap_index(ky, M)});
      triples.push_back(&t);
      for (cplx z : t.values()) analytic.push_back(z);
    }
    if (block.size() < analytic.size()) throw ContractError("Bloch block too small to hold its macroscale modes");
    const auto m = match_values(analytic, block);
    std::vector<char> taken(block.size(), 0);
    for (std::size_t r = 0; r < analytic.size(); ++r) {
      const EigTriple& t = *triples[r / 3];
      const cplx num = block[m.target[r]];
      cs.macro.push_back({t.k_x, t.k_y, static_cast<int>(r % 3), analytic[r], num, std::abs(num - analytic[r])});
      taken[m.target[r]] = 1;
    }
    if (m.ambiguous)
      cs.warnings.push_back("ambiguous macro matching at k=" +
                            wavenumber_text(spectrum.wavenumbers[b].first, spectrum.wavenumbers[b].second) +
                            "; ties broken by lexicographic eigenvalue order");
    for (std::size_t k = 0; k < block.size(); ++k)
      if (!taken[k]) {
        cs.micro.push_back(block[k]);
        cs.micro_block.push_back(static_cast<int>(b));
      }
  }
  // Keep the analytic-set order used by the dense classification.
  std::map<std::pair<int, int>, std::size_t> rank;
  for (const auto& [key, t] : triple_of) rank[{t.k_x, t.k_y}] = 0;
  std::size_t pos = 0;
  for (const auto& t : analytic_macroscale_set(spec, spectrum.params)) rank[{t.k_x, t.k_y}] = pos++;
  std::stable_sort(cs.macro.begin(), cs.macro.end(), [&](const MacroMatch& a, const MacroMatch& b) {
    const auto ra = rank[{a.k_x, a.k_y}], rb = rank[{b.k_x, b.k_y}];
    return ra != rb ? ra < rb : a.member < b.member;
  });
  finish_classification(cs);
  return cs;
}

std::optional<double> eigenvalue_error(const ClassifiedSpectrum& spectrum, int k_x, int k_y) {
  double num = 0.0, den = 0.0;
  int found = 0;
  for (const auto& m : spectrum.macro) {
    if (m.k_x != k_x || m.k_y != k_y) continue;
    num += std::norm(m.numeric - m.analytic);
    den += std::norm(m.analytic);
    ++found;
  }
  if (found != 3)
    throw ContractError("wavenumber " + wavenumber_text(k_x, k_y) + " is not in the resolved macroscale set");
  if (den == 0.0) return std::nullopt;
  return std::sqrt(num / den);
}

RoundoffErrors roundoff_errors(const ClassifiedSpectrum& reference, const ClassifiedSpectrum& working) {
  if (!reference.spec.same_geometry(working.spec) || !(reference.params == working.params) ||
      reference.dimension != working.dimension || reference.macro.size() != working.macro.size() ||
      reference.micro.size() != working.micro.size() ||
      reference.block_wavenumbers != working.block_wavenumbers)
    throw ContractError("roundoff comparison needs two spectra of the same configuration");
  RoundoffErrors e;
  for (std::size_t k = 0; k < reference.macro.size(); ++k) {
    const auto* w = working.find(reference.macro[k].k_x, reference.macro[k].k_y, reference.macro[k].member);
    if (!w) throw ContractError("roundoff comparison: macro partitions differ");
    e.macro = std::max(e.macro, std::abs(w->numeric - reference.macro[k].numeric));
  }
  // Micro eigenvalues correspond by minimum-distance assignment, per Bloch
  // block when available.
  std::map<int, std::pair<std::vector<cplx>, std::vector<cplx>>> groups;
  for (std::size_t k = 0; k < reference.micro.size(); ++k) groups[reference.micro_block[k]].first.push_back(reference.micro[k]);
  for (std::size_t k = 0; k < working.micro.size(); ++k) groups[working.micro_block[k]].second.push_back(working.micro[k]);
  for (const auto& [block, g] : groups) {
    if (g.first.size() != g.second.size()) throw ContractError("roundoff comparison: micro partitions differ");
    const auto m = match_values(g.first, g.second);
    for (std::size_t k = 0; k < g.first.size(); ++k)
      e.micro = std::max(e.micro, std::abs(g.second[m.target[k]] - g.first[k]));
  }
  return e;
}

ClusterCensus census(const ClassifiedSpectrum& spectrum) {
  ClusterCensus c;
  c.macro = spectrum.macro.size();
  c.micro = spectrum.micro.size();
  c.macro_max_re = spectrum.macro.empty() ? 0.0 : spectrum.max_real(true);
  c.micro_max_re = spectrum.micro.empty() ? 0.0 : spectrum.max_real(false);
  for (const auto& m : spectrum.macro) c.max_abs_re = std::max(c.max_abs_re, std::abs(m.numeric.real()));
  for (cplx z : spectrum.micro) {
    c.max_abs_re = std::max(c.max_abs_re, std::abs(z.real()));
    const double tol = 1e-9 * std::max(1.0, std::abs(z));
    if (z.imag() > tol) ++c.micro_upper;
    else if (z.imag() < -tol) ++c.micro_lower;
    else ++c.micro_real;
  }
  return c;
}

// ---------------------------------------------------------------- fits

PowerLawFit consistency_fit(const std::vector<std::pair<double, double>>& points, double floor) {
  PowerLawFit fit;
  for (const auto& p : points) {
    if (!(p.first > 0.0)) throw ParameterError("consistency fit needs positive Delta");
    if (p.second > floor && p.second > 0.0) fit.used.push_back(p);
    else fit.filtered.push_back(p);
  }
  if (fit.used.size() < 3)
    throw ParameterError("consistency fit needs at least 3 points above the roundoff floor (have " +
                         std::to_string(fit.used.size()) + ")");
  double sx = 0.0, sy = 0.0;
  for (const auto& p : fit.used) {
    sx += std::log(p.first);
    sy += std::log(p.second);
  }
  const double n = static_cast<double>(fit.used.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : fit.used) {
    const double dx = std::log(p.first) - mx, dy = std::log(p.second) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw ParameterError("consistency fit needs at least two distinct Delta values");
  fit.exponent = sxy / sxx;
  fit.prefactor = std::exp(my - fit.exponent * mx);
  double sse = 0.0;
  for (const auto& p : fit.used) {
    const double d = std::log(p.second) - (my + fit.exponent * (std::log(p.first) - mx));
    sse += d * d;
  }
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return fit;
}

double pinned_prefactor(const std::vector<std::pair<double, double>>& points, double exponent) {
  if (points.empty()) throw ParameterError("pinned prefactor needs at least one point");
  double s = 0.0;
  for (const auto& p : points) s += std::log(p.second) - exponent * std::log(p.first);
  return std::exp(s / static_cast<double>(points.size()));
}

// ---------------------------------------------------------------- export

void write_spectrum_csv_header(std::ostream& os, bool arcsinh_columns) {
  os << "scheme,N,n,r,c_D,c_V,re,im,class,k_x,k_y,residual";
  if (arcsinh_columns) os << ",asinh_re,asinh_im";
  os << '\n';
}

void write_spectrum_csv(std::ostream& os, const ClassifiedSpectrum& spectrum, const SchemeId& scheme,
                        bool arcsinh_columns) {
  const std::string prefix = scheme.name() + "," + std::to_string(spectrum.spec.N) + "," +
                             std::to_string(spectrum.spec.n) + "," + format_double(spectrum.spec.r) + "," +
                             format_double(spectrum.params.c_D) + "," + format_double(spectrum.params.c_V) + ",";
  auto row = [&](cplx z, const char* cls, const std::string& kx, const std::string& ky, const std::string& res) {
    os << prefix << format_double(z.real()) << ',' << format_double(z.imag()) << ',' << cls << ',' << kx << ','
       << ky << ',' << res;
    if (arcsinh_columns) os << ',' << format_double(std::asinh(z.real())) << ',' << format_double(std::asinh(z.imag()));
    os << '\n';
  };
  for (const auto& m : spectrum.macro)
    row(m.numeric, "macro", std::to_string(m.k_x), std::to_string(m.k_y), format_double(m.residual));
  for (std::size_t k = 0; k < spectrum.micro.size(); ++k) {
    const int b = spectrum.micro_block[k];
    if (b >= 0)
      row(spectrum.micro[k], "micro", std::to_string(spectrum.block_wavenumbers[b].first),
          std::to_string(spectrum.block_wavenumbers[b].second), "");
    else
      row(spectrum.micro[k], "micro", "", "", "");
  }
}

}  // namespace stagpatch

#include "stagpatch/timesim.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "stagpatch/error.hpp"
#include "stagpatch/patchscheme.hpp"

namespace stagpatch {

double auto_dt(double delta, const PhysicalParams& params) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ParameterError("micro spacing must be positive");
  params.validate();
  double limit = delta;
  if (params.c_V > 0.0) limit = std::min(limit, 2.0 * delta * delta / params.c_V);
  return 0.5 * limit;
}

double auto_dt(const PatchGridSpec& spec, const PhysicalParams& params) { return auto_dt(spec.delta, params); }

// ---------------------------------------------------------------- RK4

Rk4::Rk4(std::size_t size) : k1_(size), k2_(size), k3_(size), k4_(size), tmp_(size) {}

void Rk4::step(std::vector<double>& x, const RhsFunction& rhs, double dt, long step_index) {
  const std::size_t n = x.size();
  if (n != k1_.size()) throw ContractError("RK4 workspace size does not match the state");
  rhs(x.data(), k1_.data());
  for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + 0.5 * dt * k1_[i];
  rhs(tmp_.data(), k2_.data());
  for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + 0.5 * dt * k2_[i];
  rhs(tmp_.data(), k3_.data());
  for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + dt * k3_[i];
  rhs(tmp_.data(), k4_.data());
  const double c = dt / 6.0;
  bool finite = true;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] += c * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    finite = finite && std::isfinite(x[i]);
  }
  if (!finite) throw NumericalError("non-finite state after time step " + std::to_string(step_index));
}

std::vector<double> rk4_step(const std::vector<double>& x, const RhsFunction& rhs, double dt) {
  std::vector<double> y = x;
  Rk4(x.size()).step(y, rhs, dt);
  return y;
}

// ---------------------------------------------------------------- configuration

std::string domain_name(Domain d) { return d == Domain::Patch ? "patch" : "full"; }

Domain parse_domain(const std::string& text) {
  if (text == "patch") return Domain::Patch;
  if (text == "full") return Domain::Full;
  throw ParameterError("unknown domain '" + text + "' (expected patch or full)");
}

std::string initial_kind_name(InitialKind k) {
  switch (k) {
    case InitialKind::Zero: return "zero";
    case InitialKind::Gaussian: return "gaussian";
    case InitialKind::Modes: return "modes";
  }
  return "?";
}

InitialKind parse_initial_kind(const std::string& text) {
  if (text == "zero") return InitialKind::Zero;
  if (text == "gaussian") return InitialKind::Gaussian;
  if (text == "modes") return InitialKind::Modes;
  throw ParameterError("unknown initial condition '" + text + "' (expected zero, gaussian or modes)");
}

namespace {

constexpr double kTwoPi = 2.0 * 3.141592653589793;

double periodic_offset(double x, double c) { return std::remainder(x - c, kTwoPi); }

}  // namespace

double InitialCondition::value(Field f, double x, double y) const {
  switch (kind) {
    case InitialKind::Zero: return 0.0;
    case InitialKind::Gaussian: {
      if (f == Field::V) return 0.0;
      const double dx = periodic_offset(x, centre[0]), dy = periodic_offset(y, centre[1]);
      return amplitude * std::exp(-(dx * dx + dy * dy) / (sigma * sigma));
    }
    case InitialKind::Modes:
      switch (f) {
        case Field::H: return amplitude * (0.1 + std::cos(x) + 0.5 * std::sin(y) + 0.25 * std::cos(x + y));
        case Field::U: return amplitude * (0.5 * std::sin(x) + 0.3 * std::cos(y - 0.4));
        case Field::V: return amplitude * (0.4 * std::cos(x - y) + 0.2 * std::sin(y + 1.0));
      }
  }
  return 0.0;
}

void SimConfig::validate() const {
  params.validate();
  if (!(end_time >= 0.0) || !std::isfinite(end_time)) throw ParameterError("end time must be >= 0");
  if (!(dt >= 0.0) || !std::isfinite(dt)) throw ParameterError("time step must be > 0 (or 0 for auto)");
  if (!(snapshot_interval >= 0.0)) throw ParameterError("snapshot interval must be >= 0");
  if (initial.kind == InitialKind::Gaussian && !(initial.sigma > 0.0))
    throw ParameterError("Gaussian width sigma must be positive");
  build_patch_grid(N, n, r);
  if (domain == Domain::Full && n_full != 0) build_micro_grid(n_full);
}

int SimConfig::matched_full_n() const {
  const double exact = static_cast<double>(N) * n / (2.0 * r);
  const double rounded = std::round(exact);
  if (std::abs(exact - rounded) > 1e-9 * exact || static_cast<long>(rounded) % 2 != 0)
    throw ParameterError("no full-domain grid matches the patch micro spacing (N n / (2 r) = " +
                         format_double(exact) + " is not an even integer)");
  if (rounded > 1e5) throw ParameterError("matched full-domain grid is too large");
  return static_cast<int>(rounded);
}

std::size_t SimResult::state_count() const {
  return config.domain == Domain::Patch ? patch_spec.state_count() : full_spec.state_count();
}

// ---------------------------------------------------------------- states

std::vector<double> initial_state(const PatchGridSpec& spec, const InitialCondition& ic) {
  std::vector<double> x(spec.state_count());
  for (std::size_t s = 0; s < x.size(); ++s) {
    const NodeIndex node = spec.node(s);
    const auto p = spec.position(node);
    x[s] = ic.value(node.kind, p[0], p[1]);
  }
  return x;
}

std::vector<double> initial_state(const MicroGridSpec& spec, const InitialCondition& ic) {
  std::vector<double> x(spec.state_count());
  for (std::size_t s = 0; s < x.size(); ++s) {
    const NodeIndex node = spec.node(s);
    const auto p = spec.position(node.i, node.j);
    x[s] = ic.value(node.kind, p[0], p[1]);
  }
  return x;
}

namespace {

double l2_norm(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

Diagnostics diagnose(const PatchGridSpec& spec, const std::vector<double>& x) {
  if (x.size() != spec.state_count()) throw ContractError("state size does not match the patch grid");
  Diagnostics d;
  d.l2 = l2_norm(x);
  const PatchLayout& layout = *spec.layout;
  for (std::size_t c = 0; c < spec.cell_count(); ++c)
    for (const auto& pk : layout.kinds)
      for (std::size_t q = 0; q < pk.interior.size(); ++q)
        if (pk.interior[q].field == Field::H)
          d.max_abs_h = std::max(d.max_abs_h, std::abs(x[c * layout.cell_interior + pk.interior_offset + q]));
  d.total_h = total_h(PatchState{spec, x});
  return d;
}

Diagnostics diagnose(const MicroGridSpec& spec, const std::vector<double>& x) {
  if (x.size() != spec.state_count()) throw ContractError("state size does not match the full-domain grid");
  Diagnostics d;
  d.l2 = l2_norm(x);
  const std::size_t mm = spec.cell_count();
  for (std::size_t k = 0; k < mm; ++k) {
    d.max_abs_h = std::max(d.max_abs_h, std::abs(x[k]));
    d.total_h += x[k];
  }
  return d;
}

std::vector<double> patch_centre_values(const PatchGridSpec& spec, const std::vector<double>& x) {
  if (x.size() != spec.state_count()) throw ContractError("state size does not match the patch grid");
  std::vector<double> out(spec.macro_count());
  extract_macro_into(spec, x.data(), out.data());
  return out;
}

std::vector<double> full_values_at_patch_centres(const PatchGridSpec& patches, const MicroGridSpec& full,
                                                 const std::vector<double>& x) {
  if (x.size() != full.state_count()) throw ContractError("state size does not match the full-domain grid");
  const int M = patches.M();
  std::vector<double> out(patches.macro_count());
  std::size_t k = 0;
  for (Field f : kAllFields) {
    const auto off = field_offset(f);
    for (int b = 0; b < M; ++b)
      for (int a = 0; a < M; ++a) {
        const int I = 2 * a + off[0], J = 2 * b + off[1];
        const auto p = patches.patch_centre(I, J);
        const double fi = (p[0] - full.origin[0]) / full.delta, fj = (p[1] - full.origin[1]) / full.delta;
        const double ri = std::round(fi), rj = std::round(fj);
        if (std::abs(fi - ri) > 1e-6 || std::abs(fj - rj) > 1e-6)
          throw ContractError("patch centres do not lie on the full-domain grid");
        const int i = static_cast<int>(ri), j = static_cast<int>(rj);
        if (field_at_parity(wrap_index(i, full.n), wrap_index(j, full.n)) != f)
          throw ContractError("patch centre falls on a full-domain node of another field");
        out[k++] = x[full.slot(i, j)];
      }
  }
  return out;
}

// ---------------------------------------------------------------- simulation

SimResult simulate(const SimConfig& config) {
  config.validate();
  SimResult result;
  result.config = config;
  result.patch_spec = build_patch_grid(config.N, config.n, config.r);

  std::vector<double> x;
  RhsFunction rhs;
  std::vector<double> h_weights;
  double delta = 0.0;
  if (config.domain == Domain::Patch) {
    const auto& spec = result.patch_spec;
    auto sys = std::make_shared<PatchSystem<double>>(
        make_patch_system(CouplingOperator::build(spec, config.scheme), config.params));
    rhs = [sys](const double* in, double* out) { sys->rhs(in, out); };
    x = initial_state(spec, config.initial);
    delta = spec.delta;
  } else {
    const int nf = config.n_full != 0 ? config.n_full : config.matched_full_n();
    result.full_spec = build_micro_grid(nf);
    const MicroGridSpec fs = result.full_spec;
    const auto w = WaveCoefficients<double>::make(fs.delta, config.params);
    rhs = [fs, w](const double* in, double* out) { full_domain_rhs_into<double>(fs, w, in, out); };
    x = initial_state(fs, config.initial);
    delta = fs.delta;
  }

  auto diagnostics = [&](const std::vector<double>& s) {
    return config.domain == Domain::Patch ? diagnose(result.patch_spec, s) : diagnose(result.full_spec, s);
  };

  double dt = config.dt > 0.0 ? config.dt : auto_dt(delta, config.params);
  long steps = 0;
  if (config.end_time > 0.0) {
    steps = static_cast<long>(std::ceil(config.end_time / dt - 1e-9));
    steps = std::max(steps, 1L);
    dt = config.end_time / static_cast<double>(steps);
  }
  result.dt = dt;
  result.steps = steps;
  const long every =
      config.snapshot_interval > 0.0 ? std::max(1L, std::lround(config.snapshot_interval / dt)) : std::max(steps, 1L);

  const Diagnostics d0 = diagnostics(x);
  result.snapshots.push_back({0, 0.0, x, d0});
  const double norm0 = d0.l2;
  double h_scale = std::abs(d0.total_h);
  if (config.domain == Domain::Patch) {
    const auto w = total_h_weights(result.patch_spec);
    double s = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) s += std::abs(w[k] * x[k]);
    h_scale = std::max(h_scale, s);
  } else {
    double s = 0.0;
    for (std::size_t k = 0; k < result.full_spec.cell_count(); ++k) s += std::abs(x[k]);
    h_scale = std::max(h_scale, s);
  }

  Rk4 rk(x.size());
  for (long k = 1; k <= steps; ++k) {
    rk.step(x, rhs, dt, k);
    const double t = (k == steps) ? config.end_time : static_cast<double>(k) * dt;
    if (norm0 > 0.0) {
      const double growth = l2_norm(x) / norm0;
      if (growth > 1e6) {
        std::ostringstream msg;
        msg << "instability: state norm grew by " << growth << " at step " << k << " (t = " << t
            << "); the scheme or time step is unstable for this configuration";
        throw NumericalError(msg.str());
      }
    }
    if (k % every == 0 || k == steps) result.snapshots.push_back({k, t, x, diagnostics(x)});
  }

  const Diagnostics& last = result.snapshots.back().diagnostics;
  if (config.end_time > 0.0 && h_scale > 0.0)
    result.total_h_drift = std::abs(last.total_h - d0.total_h) / h_scale / config.end_time;
  return result;
}

// ---------------------------------------------------------------- output

void write_full_state_csv(std::ostream& os, const MicroGridSpec& spec, const std::vector<double>& x) {
  os << "i,j,kind,value\n";
  for (std::size_t s = 0; s < x.size(); ++s) {
    const NodeIndex node = spec.node(s);
    os << node.i << ',' << node.j << ',' << field_char(node.kind) << ',' << format_double(x[s]) << '\n';
  }
}

void write_snapshot_csv(std::ostream& os, const SimResult& result, const Snapshot& snapshot) {
  if (result.config.domain == Domain::Patch)
    write_patch_state_csv(os, PatchState{result.patch_spec, snapshot.values});
  else
    write_full_state_csv(os, result.full_spec, snapshot.values);
}

}  // namespace stagpatch

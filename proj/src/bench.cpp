#include "stagpatch/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <random>

#include <Eigen/Dense>

#ifdef __linux__
#include <sched.h>
#endif

#include "stagpatch/error.hpp"
#include "stagpatch/patchscheme.hpp"

namespace stagpatch {

double predicted_ratio(double r, int n, double tc_over_tm) {
  const double nn = static_cast<double>(n);
  return tc_over_tm * r * r * (24.0 / nn - 64.0 / (3.0 * nn * nn)) +
         3.0 * r * r * (1.0 - 16.0 / (9.0 * nn) + 8.0 / (9.0 * nn * nn));
}

double predicted_ratio_closure(double r, int n, double tc_over_tm) {
  const double nn = static_cast<double>(n);
  return tc_over_tm * r * r * (4.0 / 3.0) * (14.0 / nn - 12.0 / (nn * nn)) +
         3.0 * r * r * (1.0 - 16.0 / (9.0 * nn) + 8.0 / (9.0 * nn * nn));
}

// ---------------------------------------------------------------- timing

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

volatile double g_sink = 0.0;

}  // namespace

TimingReport time_callable(const std::string& label, const std::function<void()>& call,
                           const TimingOptions& options) {
  if (options.samples < 20) throw ParameterError("timing needs at least 20 samples");
  if (options.warmup < 1) throw ParameterError("timing needs at least one warm-up call");
  for (int k = 0; k < options.warmup; ++k) call();

  long batch = 1;
  for (;;) {
    const auto t0 = Clock::now();
    for (long b = 0; b < batch; ++b) call();
    const double t = seconds_since(t0);
    if (t >= options.min_sample_seconds || batch >= (1L << 30)) break;
    const double grow = t > 0.0 ? 1.2 * options.min_sample_seconds / t : 16.0;
    batch = std::max(batch * 2, static_cast<long>(std::ceil(static_cast<double>(batch) * std::min(grow, 1024.0))));
  }

  TimingReport rep;
  rep.label = label;
  rep.batch = batch;
  rep.samples_ns.reserve(options.samples);
  for (int s = 0; s < options.samples; ++s) {
    const auto t0 = Clock::now();
    for (long b = 0; b < batch; ++b) call();
    rep.samples_ns.push_back(seconds_since(t0) * 1e9 / static_cast<double>(batch));
  }
  rep.median_ns = quantile(rep.samples_ns, 0.5);
  rep.q1_ns = quantile(rep.samples_ns, 0.25);
  rep.q3_ns = quantile(rep.samples_ns, 0.75);
  if (!(rep.median_ns > 0.0)) throw NumericalError("timer resolution too coarse for " + label);
  return rep;
}

bool pin_to_current_cpu() {
#ifdef __linux__
  const int cpu = sched_getcpu();
  if (cpu < 0) return false;
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(cpu, &set);
  return sched_setaffinity(0, sizeof(set), &set) == 0;
#else
  return false;
#endif
}

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TimingReport measure_full_domain(const MicroGridSpec& spec, const PhysicalParams& params,
                                 const TimingOptions& options) {
  params.validate();
  const auto w = WaveCoefficients<double>::make(spec.delta, params);
  std::vector<double> x = random_values(spec.state_count(), 7), out(spec.state_count());
  auto rep = time_callable(
      "full n=" + std::to_string(spec.n),
      [&] {
        full_domain_rhs_into<double>(spec, w, x.data(), out.data());
        g_sink = g_sink + out[0];
      },
      options);
  rep.variables = spec.state_count();
  return rep;
}

TimingReport measure_patch(const CouplingOperator& coupling, const PhysicalParams& params,
                           const TimingOptions& options) {
  auto sys = make_patch_system(coupling, params);
  const auto& spec = coupling.spec();
  std::vector<double> x = random_values(spec.state_count(), 11), out(spec.state_count());
  auto rep = time_callable(
      "patch " + coupling.scheme().name() + " N=" + std::to_string(spec.N) + " n=" + std::to_string(spec.n),
      [&] {
        sys.rhs(x.data(), out.data());
        g_sink = g_sink + out[0];
      },
      options);
  rep.variables = spec.state_count();
  return rep;
}

// ---------------------------------------------------------------- cost model

double model_ratio(const CostModelFit& fit, const BenchRow& row) {
  return (fit.T_M_ns * static_cast<double>(row.patch_states) + fit.T_C_ns * static_cast<double>(row.patch_edges)) /
         row.t_full_ns;
}

CostModelFit fit_cost_model(const std::vector<BenchRow>& rows) {
  if (rows.size() < 4)
    throw ParameterError("cost-model fit needs at least 4 configurations, got " + std::to_string(rows.size()));
  const SchemeId scheme = rows.front().scheme;
  for (const auto& row : rows) {
    if (row.scheme != scheme) throw ContractError("cost-model fit mixes schemes");
    if (!(row.t_patch_ns > 0.0) || !(row.t_full_ns > 0.0)) throw ContractError("cost-model fit needs positive times");
  }
  // Relative residuals: each row is divided by its measured patch time.
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd A(m, 2);
  Eigen::VectorXd b = Eigen::VectorXd::Ones(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    A(i, 0) = static_cast<double>(rows[i].patch_states) / rows[i].t_patch_ns;
    A(i, 1) = static_cast<double>(rows[i].patch_edges) / rows[i].t_patch_ns;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto sv = svd.singularValues();
  if (!(sv(1) > 1e-8 * sv(0)))
    throw ParameterError(
        "cost-model fit is degenerate: state and edge counts are proportional across the configurations; "
        "add configurations with another micro-grid size n");
  Eigen::Vector2d x = svd.solve(b);
  if (x(0) <= 0.0 || x(1) <= 0.0) {
    // Keep the model physical: refit the single positive term.
    const int keep = x(0) > 0.0 ? 0 : 1;
    const Eigen::VectorXd col = A.col(keep);
    x.setZero();
    x(keep) = col.dot(b) / col.squaredNorm();
  }
  CostModelFit fit;
  fit.scheme = scheme;
  fit.T_M_ns = x(0);
  fit.T_C_ns = x(1);

  double mean = 0.0;
  std::vector<double> y(rows.size()), yhat(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double pred = model_ratio(fit, rows[i]);
    y[i] = std::log(rows[i].measured_ratio);
    yhat[i] = std::log(pred);
    fit.relative_residuals.push_back(pred / rows[i].measured_ratio - 1.0);
    mean += y[i];
  }
  mean /= static_cast<double>(rows.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
  return fit;
}

// ---------------------------------------------------------------- sweep

std::optional<int> matched_full_grid(int N, int n, double r) {
  const double exact = static_cast<double>(N) * n / (2.0 * r);
  const double rounded = std::round(exact);
  if (std::abs(exact - rounded) > 1e-9 * exact || std::fmod(rounded, 2.0) != 0.0 || rounded > 2e9)
    return std::nullopt;
  return static_cast<int>(rounded);
}

double BenchResult::r_slope(const SchemeId& scheme, int n) const {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int k = 0;
  for (const auto& row : rows) {
    if (row.scheme != scheme || row.n != n) continue;
    const double x = std::log(row.r), y = std::log(row.measured_ratio);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++k;
  }
  if (k < 2) throw ParameterError("slope in r needs at least two patch ratios");
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

BenchResult run_bench(const BenchConfig& config, std::ostream* log) {
  config.params.validate();
  if (config.schemes.empty() || config.n_values.empty() || config.r_values.empty())
    throw ParameterError("bench sweep is empty");
  BenchResult result;
  result.config = config;
  result.pinned = pin_to_current_cpu();

  // Matched full-domain grids, shared by all schemes.
  std::map<std::pair<int, double>, int> n_full;
  for (int n : config.n_values)
    for (double r : config.r_values) {
      build_patch_grid(config.N, n, r);
      const auto nf = matched_full_grid(config.N, n, r);
      if (!nf)
        throw ParameterError("no full-domain grid matches N=" + std::to_string(config.N) + ", n=" +
                             std::to_string(n) + ", r=" + format_double(r));
      n_full[{n, r}] = *nf;
    }
  std::map<int, TimingReport> full_timing;
  for (const auto& [key, nf] : n_full) {
    if (full_timing.count(nf) || static_cast<double>(micro_state_count(nf)) > config.direct_limit) continue;
    full_timing[nf] = measure_full_domain(build_micro_grid(nf), config.params, config.timing);
    if (log) *log << "timed " << full_timing[nf].label << ": " << full_timing[nf].median_ns << " ns\n";
  }
  if (full_timing.empty()) {
    int nr = static_cast<int>(std::sqrt(config.direct_limit * 4.0 / 3.0));
    nr = std::max(4, nr - nr % 2);
    full_timing[nr] = measure_full_domain(build_micro_grid(nr), config.params, config.timing);
  }
  result.reference = std::prev(full_timing.end())->second;

  for (const auto& scheme : config.schemes) {
    std::vector<BenchRow> rows;
    for (int n : config.n_values)
      for (double r : config.r_values) {
        const auto spec = build_patch_grid(config.N, n, r);
        const auto op = CouplingOperator::build(spec, scheme);
        const auto tp = measure_patch(op, config.params, config.timing);
        BenchRow row;
        row.scheme = scheme;
        row.N = config.N;
        row.n = n;
        row.r = r;
        row.n_full = n_full[{n, r}];
        row.patch_states = spec.state_count();
        row.patch_edges = spec.edge_count();
        row.full_states = micro_state_count(row.n_full);
        row.t_patch_ns = tp.median_ns;
        row.t_patch_dispersion = tp.dispersion();
        auto it = full_timing.find(row.n_full);
        if (it != full_timing.end()) {
          row.t_full_ns = it->second.median_ns;
          row.t_full_dispersion = it->second.dispersion();
        } else {
          row.full_extrapolated = true;
          row.t_full_ns = result.reference.per_variable_ns() * static_cast<double>(row.full_states);
          row.t_full_dispersion = result.reference.dispersion();
        }
        row.measured_ratio = row.t_patch_ns / row.t_full_ns;
        if (log)
          *log << "timed " << tp.label << " r=" << format_double(r) << ": ratio " << row.measured_ratio
               << (row.full_extrapolated ? " (full domain extrapolated)" : "") << '\n';
        rows.push_back(row);
      }
    const auto fit = fit_cost_model(rows);
    for (auto& row : rows) {
      row.model_ratio = model_ratio(fit, row);
      row.closed_form_ratio = predicted_ratio(row.r, row.n, fit.T_C_ns / fit.T_M_ns);
      result.rows.push_back(row);
    }
    result.fits.push_back(fit);
  }
  return result;
}

void write_bench_csv(std::ostream& os, const BenchResult& result) {
  os << "scheme,N,n,r,n_full,patch_states,patch_edges,full_states,t_patch_ns,t_patch_iqr_rel,t_full_ns,"
        "t_full_iqr_rel,full_extrapolated,measured_ratio,model_ratio,closed_form_ratio\n";
  for (const auto& row : result.rows) {
    os << row.scheme.name() << ',' << row.N << ',' << row.n << ',' << format_double(row.r) << ',' << row.n_full
       << ',' << row.patch_states << ',' << row.patch_edges << ',' << row.full_states << ','
       << format_double(row.t_patch_ns) << ',' << format_double(row.t_patch_dispersion) << ','
       << format_double(row.t_full_ns) << ',' << format_double(row.t_full_dispersion) << ','
       << (row.full_extrapolated ? 1 : 0) << ',' << format_double(row.measured_ratio) << ','
       << format_double(row.model_ratio) << ',' << format_double(row.closed_form_ratio) << '\n';
  }
}

}  // namespace stagpatch

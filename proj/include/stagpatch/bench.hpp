#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stagpatch/coupling.hpp"
#include "stagpatch/grid.hpp"
#include "stagpatch/microscale.hpp"

namespace stagpatch {

// Closed-form patch-to-full compute-time ratio with an edge
// count of 18n - 16 per macro-cell.
double predicted_ratio(double r, int n, double tc_over_tm);

// Same model with this library's edge count (stencil closure, 14n - 12).
double predicted_ratio_closure(double r, int n, double tc_over_tm);

struct TimingOptions {
  int samples = 20;
  int warmup = 3;
  double min_sample_seconds = 1e-3;  // batch calls until one sample lasts this long
};

struct TimingReport {
  std::string label;
  std::size_t variables = 0;
  long batch = 1;
  std::vector<double> samples_ns;  // per call
  double median_ns = 0.0;
  double q1_ns = 0.0;
  double q3_ns = 0.0;

  double dispersion() const { return median_ns > 0.0 ? (q3_ns - q1_ns) / median_ns : 0.0; }
  double per_variable_ns() const { return variables ? median_ns / static_cast<double>(variables) : 0.0; }
};

// Monotonic-clock timing with warm-up and auto-batching.
TimingReport time_callable(const std::string& label, const std::function<void()>& call,
                           const TimingOptions& options = {});

// Restricts the process to the CPU it is running on; false where unsupported.
bool pin_to_current_cpu();

TimingReport measure_full_domain(const MicroGridSpec& spec, const PhysicalParams& params,
                                 const TimingOptions& options = {});
TimingReport measure_patch(const CouplingOperator& coupling, const PhysicalParams& params,
                           const TimingOptions& options = {});

struct BenchRow {
  SchemeId scheme;
  int N = 0;
  int n = 0;
  double r = 0.0;
  int n_full = 0;
  std::size_t patch_states = 0;
  std::size_t patch_edges = 0;
  std::size_t full_states = 0;
  double t_patch_ns = 0.0;
  double t_patch_dispersion = 0.0;
  double t_full_ns = 0.0;  // measured, or extrapolated per variable
  double t_full_dispersion = 0.0;
  bool full_extrapolated = false;
  double measured_ratio = 0.0;
  double model_ratio = 0.0;  // fitted cost model, filled by fit_cost_model users
  double closed_form_ratio = 0.0;   // predicted_ratio with the fitted T_C / T_M
};

struct CostModelFit {
  SchemeId scheme;
  double T_M_ns = 0.0;  // per state variable
  double T_C_ns = 0.0;  // per edge value
  double r2 = 0.0;      // log-space coefficient of determination of the ratios
  std::vector<double> relative_residuals;
};

// Least squares for (T_M, T_C) in ratio = (T_M * patch_states + T_C *
// patch_edges) / t_full, weighted relatively. Needs >= 4 rows whose states
// and edges are not proportional.
CostModelFit fit_cost_model(const std::vector<BenchRow>& rows);

// Model ratio of one row under a fit.
double model_ratio(const CostModelFit& fit, const BenchRow& row);

struct BenchConfig {
  std::vector<SchemeId> schemes{SchemeId::spectral(), SchemeId::square_p(2), SchemeId::square_p(4),
                                SchemeId::square_p(6), SchemeId::square_p(8)};
  int N = 10;
  std::vector<int> n_values{6, 10};
  std::vector<double> r_values{0.1, 0.01, 0.001};
  PhysicalParams params{1e-3, 1e-2};
  TimingOptions timing;
  double direct_limit = 1e7;  // largest full domain timed directly (state variables)
};

struct BenchResult {
  BenchConfig config;
  std::vector<BenchRow> rows;
  std::vector<CostModelFit> fits;
  TimingReport reference;  // full-domain timing behind the extrapolated rows
  bool pinned = false;

  // Log-log slope of measured ratio against r for one scheme and n.
  double r_slope(const SchemeId& scheme, int n) const;
};

// Full-domain grid size with the patch grid's micro spacing, or nullopt
// when N n / (2 r) is not an even integer.
std::optional<int> matched_full_grid(int N, int n, double r);

// Runs the sweep; progress lines go to log when given.
BenchResult run_bench(const BenchConfig& config, std::ostream* log = nullptr);

void write_bench_csv(std::ostream& os, const BenchResult& result);

}  // namespace stagpatch

#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "stagpatch/coupling.hpp"
#include "stagpatch/grid.hpp"
#include "stagpatch/microscale.hpp"

namespace stagpatch {

// Stable explicit step: 0.5 * min(delta, 2 delta^2 / c_V).
double auto_dt(double delta, const PhysicalParams& params);
double auto_dt(const PatchGridSpec& spec, const PhysicalParams& params);

using RhsFunction = std::function<void(const double*, double*)>;

// Classical RK4 workspace; one instance per trajectory.
class Rk4 {
 public:
  explicit Rk4(std::size_t size);
  // Advances x in place; NaN in the result aborts with the step index.
  void step(std::vector<double>& x, const RhsFunction& rhs, double dt, long step_index = 0);

 private:
  std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

std::vector<double> rk4_step(const std::vector<double>& x, const RhsFunction& rhs, double dt);

enum class Domain { Patch, Full };

std::string domain_name(Domain d);
Domain parse_domain(const std::string& text);

enum class InitialKind { Zero, Gaussian, Modes };

std::string initial_kind_name(InitialKind k);
InitialKind parse_initial_kind(const std::string& text);

// Gaussian: periodic hump h = a exp(-|x - c|^2 / sigma^2), u = h, v = 0.
// Modes: a fixed mix of the wavenumbers |k_x|, |k_y| <= 1 in all fields,
// which every patch grid with N >= 6 resolves.
struct InitialCondition {
  InitialKind kind = InitialKind::Gaussian;
  double amplitude = 1.0;
  double sigma = 0.5;
  std::array<double, 2> centre{3.141592653589793, 3.141592653589793};

  double value(Field f, double x, double y) const;
};

struct SimConfig {
  Domain domain = Domain::Patch;
  SchemeId scheme = SchemeId::square_p(4);
  int N = 18;
  int n = 6;
  double r = 0.1;
  int n_full = 0;  // full-domain grid size; 0 selects the matched-delta grid
  PhysicalParams params{1e-3, 1e-2};
  double end_time = 2.0;
  double dt = 0.0;                 // 0 selects auto_dt
  double snapshot_interval = 0.0;  // 0 keeps the initial and final states only
  InitialCondition initial;

  void validate() const;
  // Full-domain grid size with the patch grid's micro spacing.
  int matched_full_n() const;
};

struct Diagnostics {
  double l2 = 0.0;  // Euclidean norm of the state vector
  double max_abs_h = 0.0;
  double total_h = 0.0;
};

struct Snapshot {
  long step = 0;
  double time = 0.0;
  std::vector<double> values;
  Diagnostics diagnostics;
};

struct SimResult {
  SimConfig config;
  PatchGridSpec patch_spec;  // set for Domain::Patch
  MicroGridSpec full_spec;   // set for Domain::Full
  double dt = 0.0;
  long steps = 0;
  std::vector<Snapshot> snapshots;
  double total_h_drift = 0.0;  // |H(T) - H(0)| / scale / T

  std::size_t state_count() const;
};

// Layout-aware state helpers.
std::vector<double> initial_state(const PatchGridSpec& spec, const InitialCondition& ic);
std::vector<double> initial_state(const MicroGridSpec& spec, const InitialCondition& ic);
Diagnostics diagnose(const PatchGridSpec& spec, const std::vector<double>& x);
Diagnostics diagnose(const MicroGridSpec& spec, const std::vector<double>& x);

SimResult simulate(const SimConfig& config);

// Centre value of every patch in the order of extract_macro_into, and the
// full-domain values at the same physical nodes.
std::vector<double> patch_centre_values(const PatchGridSpec& spec, const std::vector<double>& x);
std::vector<double> full_values_at_patch_centres(const PatchGridSpec& patches, const MicroGridSpec& full,
                                                 const std::vector<double>& x);

void write_snapshot_csv(std::ostream& os, const SimResult& result, const Snapshot& snapshot);
void write_full_state_csv(std::ostream& os, const MicroGridSpec& spec, const std::vector<double>& x);

}  // namespace stagpatch

#pragma once

#include <complex>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stagpatch/coupling.hpp"
#include "stagpatch/microscale.hpp"
#include "stagpatch/patchscheme.hpp"

namespace stagpatch {

using cplx = std::complex<double>;

enum class Precision { Working, Extended };

std::string precision_name(Precision p);
Precision parse_precision(const std::string& text);

// ---------------------------------------------------------------- Jacobians

struct Jacobian {
  Eigen::MatrixXd J;
  SchemeId scheme;
  PatchGridSpec spec;
  PhysicalParams params;
  double probe_error = 0.0;  // max relative J*x vs rhs(x) mismatch
};

// Columns are responses to unit impulses; verified on random probes.
Jacobian assemble_jacobian(const CouplingOperator& coupling, const PhysicalParams& params,
                           int probes = 10);

Eigen::MatrixXd assemble_full_domain_jacobian(const MicroGridSpec& spec, const PhysicalParams& params);

struct EigenResult {
  std::vector<cplx> values;
  double max_residual = 0.0;  // over sampled pairs, when vectors were requested
};

// Dense nonsymmetric eigenvalues (LAPACK dgeev). With check_residuals, ten
// sampled eigenpairs are verified.
EigenResult eig(const Eigen::MatrixXd& J, bool check_residuals = false,
                const std::string& context = "");

// ---------------------------------------------------------------- Bloch

// The coupled system is invariant under macro-cell shifts, so its spectrum
// is the union of the spectra of one cell_interior-sized block B(k) per
// wavenumber k of the macro lattice. B(-k) = conj B(k).
//
// Complex form: one entry per wavenumber, eigenvalues of B(k).
// RealPairs form: one entry per pair {k, -k}, solved in working precision as
// the real matrix [[Re B, -Im B], [Im B, Re B]], which is the dense real
// Jacobian up to an orthogonal similarity and has the same roundoff
// character; extended precision returns eig B(k) with its conjugates.
enum class BlochForm { Complex, RealPairs };

struct BlochSpectrum {
  PatchGridSpec spec;
  SchemeId scheme;
  PhysicalParams params;
  Precision precision = Precision::Working;
  BlochForm form = BlochForm::Complex;
  std::vector<std::pair<int, int>> wavenumbers;             // representative per entry
  std::vector<std::vector<std::pair<int, int>>> members;    // wavenumbers covered per entry
  std::vector<std::vector<cplx>> eigenvalues;               // per entry

  std::size_t dimension() const;
  std::vector<cplx> flattened() const;
};

// Block matrices B(k) rounded to double; mainly for tests.
std::vector<Eigen::MatrixXcd> bloch_blocks(const PatchGridSpec& spec, const SchemeId& scheme,
                                           const PhysicalParams& params,
                                           const std::vector<std::pair<int, int>>& wavenumbers);

// Only the listed wavenumbers (all of them when empty) are solved; in
// RealPairs form each listed wavenumber brings its partner.
BlochSpectrum bloch_spectrum(const PatchGridSpec& spec, const SchemeId& scheme,
                             const PhysicalParams& params, Precision precision = Precision::Working,
                             std::vector<std::pair<int, int>> wavenumbers = {},
                             BlochForm form = BlochForm::Complex);

// Whole spectrum from the RealPairs form in working precision.
std::vector<cplx> real_form_spectrum(const PatchGridSpec& spec, const SchemeId& scheme,
                                     const PhysicalParams& params);

// ---------------------------------------------------------------- classification

struct MacroMatch {
  int k_x = 0;
  int k_y = 0;
  int member = 0;  // 0 vortex, 1 wave_plus, 2 wave_minus
  cplx analytic;
  cplx numeric;
  double residual = 0.0;
};

struct ClassifiedSpectrum {
  PatchGridSpec spec;
  PhysicalParams params;
  std::size_t dimension = 0;
  std::vector<MacroMatch> macro;
  std::vector<cplx> micro;
  std::vector<int> micro_block;  // index into the Bloch wavenumber list, or -1
  std::vector<std::pair<int, int>> block_wavenumbers;
  std::vector<std::string> warnings;
  bool review = false;  // a residual exceeds half the macro/micro separation

  double max_residual() const;
  double max_real(bool macro_part) const;
  const MacroMatch* find(int k_x, int k_y, int member) const;
};

ClassifiedSpectrum classify(const std::vector<cplx>& eigs, const PatchGridSpec& spec,
                            const PhysicalParams& params);
ClassifiedSpectrum classify(const BlochSpectrum& spectrum);

// Relative 3-vector error at one wavenumber; nullopt where the analytic
// triple vanishes (k = 0 without drag).
std::optional<double> eigenvalue_error(const ClassifiedSpectrum& spectrum, int k_x, int k_y);

struct RoundoffErrors {
  double micro = 0.0;
  double macro = 0.0;
};

RoundoffErrors roundoff_errors(const ClassifiedSpectrum& reference, const ClassifiedSpectrum& working);

// Micro clusters as in the spectrum figure: waves above/below the real axis
// and (near-)real vortices.
struct ClusterCensus {
  std::size_t macro = 0;
  std::size_t micro = 0;
  std::size_t micro_upper = 0;
  std::size_t micro_lower = 0;
  std::size_t micro_real = 0;
  double macro_max_re = 0.0;
  double micro_max_re = 0.0;
  double max_abs_re = 0.0;
};

ClusterCensus census(const ClassifiedSpectrum& spectrum);

// ---------------------------------------------------------------- fits

struct PowerLawFit {
  double prefactor = 0.0;
  double exponent = 0.0;
  double r2 = 0.0;
  std::vector<std::pair<double, double>> used;
  std::vector<std::pair<double, double>> filtered;
};

// Least squares on (log Delta, log eps); points with eps <= floor dropped.
PowerLawFit consistency_fit(const std::vector<std::pair<double, double>>& points, double floor = 0.0);

// Prefactor with the exponent pinned: geometric mean of eps / Delta^p.
double pinned_prefactor(const std::vector<std::pair<double, double>>& points, double exponent);

// ---------------------------------------------------------------- export

void write_spectrum_csv_header(std::ostream& os, bool arcsinh_columns = true);
void write_spectrum_csv(std::ostream& os, const ClassifiedSpectrum& spectrum, const SchemeId& scheme,
                        bool arcsinh_columns = true);

}  // namespace stagpatch

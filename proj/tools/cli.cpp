#include "stagpatch/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "stagpatch/bench.hpp"
#include "stagpatch/error.hpp"
#include "stagpatch/manifest.hpp"
#include "stagpatch/patchscheme.hpp"
#include "stagpatch/spectra.hpp"
#include "stagpatch/timesim.hpp"

namespace stagpatch {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- options

template <class T>
struct is_vector : std::false_type {};
template <class T>
struct is_vector<std::vector<T>> : std::true_type {};

// Flag <-> JSON key binding; the key is the flag name without dashes.
struct Registry {
  struct Entry {
    CLI::Option* option = nullptr;
    std::function<void(const Json&)> assign;
    std::function<Json()> value;
  };
  std::map<std::string, Entry> entries;

  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& key, T& target, const std::string& help) {
    CLI::Option* opt = app->add_option("--" + key, target, help);
    if constexpr (is_vector<T>::value) opt->delimiter(',');
    entries[key] = {opt,
                    [&target, key](const Json& j) {
                      try {
                        if constexpr (is_vector<T>::value) {
                          using V = typename T::value_type;
                          target = j.is_array() ? j.get<T>() : T{j.get<V>()};
                        } else {
                          target = j.get<T>();
                        }
                      } catch (const Json::exception&) {
                        throw ParameterError("config key '" + key + "' has the wrong type");
                      }
                    },
                    [&target] { return Json(target); }};
    return opt;
  }

  void apply_config(const Json& config) {
    const Json& j = config.contains("config") && config.contains("command") ? config.at("config") : config;
    if (!j.is_object()) throw ParameterError("config file must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
      auto it = entries.find(key);
      if (it == entries.end()) throw ParameterError("unknown config key '" + key + "'");
      if (it->second.option->count() == 0) it->second.assign(value);
    }
  }

  Json resolved() const {
    Json j = Json::object();
    for (const auto& [key, e] : entries) j[key] = e.value();
    return j;
  }
};

struct Options {
  std::vector<std::string> scheme;
  std::vector<int> N;
  std::vector<int> n;
  std::vector<double> r;
  std::vector<double> cD;
  std::vector<double> cV;
  std::string out;
  std::string config;
  std::string precision = "working";
  int jobs = 1;

  // spectrum
  std::string method = "bloch";
  // consistency
  double floor = 1e-8;
  // simulate
  std::string domain = "patch";
  double t_end = 2.0;
  double dt = 0.0;
  double snapshot_interval = 0.25;
  std::string initial = "gaussian";
  double amplitude = 1.0;
  double sigma = 0.5;
  int n_full = 0;
  // bench
  int samples = 20;
  double min_sample_seconds = 1e-3;
  double direct_limit = 1e7;
};

// Per-verb defaults, replaced by flags or config values.
void set_defaults(const std::string& verb, Options& o) {
  o.out = "stagpatch-out/" + verb;
  if (verb == "spectrum") {
    o.scheme = {"spectral"};
    o.N = {10};
    o.n = {6};
    o.r = {0.1};
    o.cD = {1e-6};
    o.cV = {1e-4};
  } else if (verb == "grid-info") {
    o.N = {10};
    o.n = {6};
    o.r = {0.1};
  } else if (verb == "consistency") {
    o.scheme = {"spectral", "square-p2", "square-p4", "square-p6", "square-p8"};
    o.N = {6, 10, 14, 18};
    o.n = {6};
    o.r = {0.1};
    o.cD = {1e-3};
    o.cV = {1e-2};
  } else if (verb == "roundoff") {
    o.scheme = {"spectral", "square-p2", "square-p4", "square-p6", "square-p8"};
    o.N = {10};
    o.n = {6, 10};
    o.r = {0.1, 0.01};
    o.cD = {0.0, 1e-3};
    o.cV = {0.0, 1e-2};
  } else if (verb == "stability") {
    o.scheme = {"spectral", "square-p2", "square-p4", "square-p6", "square-p8"};
    o.N = {6, 10, 14};
    o.n = {6, 10};
    o.r = {0.01, 0.1};
    o.cD = {0.0, 1e-6, 1e-3};
    o.cV = {0.0, 1e-4, 1e-2};
  } else if (verb == "simulate") {
    o.scheme = {"square-p4"};
    o.N = {18};
    o.n = {6};
    o.r = {0.1};
    o.cD = {1e-3};
    o.cV = {1e-2};
  } else if (verb == "bench") {
    o.scheme = {"spectral", "square-p2", "square-p4", "square-p6", "square-p8"};
    o.N = {10};
    o.n = {6, 10};
    o.r = {0.1, 0.01, 0.001};
    o.cD = {1e-3};
    o.cV = {1e-2};
  }
}

void register_common(CLI::App* app, Registry& reg, Options& o, bool schemes, bool physics) {
  if (schemes) reg.add(app, "scheme", o.scheme, "coupling: spectral, square-p2, square-p4, square-p6, square-p8");
  reg.add(app, "N", o.N, "macro-grid intervals (N/2 odd)");
  reg.add(app, "n", o.n, "sub-patch micro-grid intervals (n/2 odd)");
  reg.add(app, "r", o.r, "patch ratio, 0 < r <= 1");
  if (physics) {
    reg.add(app, "cD", o.cD, "drag coefficient c_D >= 0");
    reg.add(app, "cV", o.cV, "viscosity coefficient c_V >= 0");
  }
  reg.add(app, "out", o.out, "output directory");
  reg.add(app, "jobs", o.jobs, "worker threads for sweeps");
  reg.add(app, "precision", o.precision, "eigensolver precision: working or extended");
  app->add_option("--config", o.config, "JSON config file (flags take precedence)");
}

template <class T>
T single(const std::vector<T>& v, const std::string& name) {
  if (v.size() != 1) throw ParameterError("--" + name + " takes exactly one value for this command");
  return v.front();
}

std::vector<SchemeId> parse_schemes(const std::vector<std::string>& names) {
  if (names.empty()) throw ParameterError("no scheme given");
  std::vector<SchemeId> out;
  for (const auto& s : names) out.push_back(SchemeId::parse(s));
  return out;
}

void require_nonempty(const Options& o, bool physics) {
  if (o.N.empty() || o.n.empty() || o.r.empty()) throw ParameterError("N, n and r need at least one value");
  if (physics && (o.cD.empty() || o.cV.empty())) throw ParameterError("cD and cV need at least one value");
  if (o.jobs < 1) throw ParameterError("--jobs must be >= 1");
}

// ---------------------------------------------------------------- output helpers

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

struct Run {
  std::string verb;
  std::vector<std::string> argv;
  Json config;
  fs::path dir;
  std::string started = utc_now();
  Json outputs = Json::array();
  Json summary = Json::object();

  std::ofstream open(const std::string& name) {
    std::ofstream f(dir / name);
    if (!f) throw ParameterError("cannot write " + (dir / name).string());
    outputs.push_back(name);
    return f;
  }

  void finish(const std::string& status) {
    Json m;
    m["command"] = verb;
    m["argv"] = argv;
    m["config"] = config;
    m["status"] = status;
    m["started"] = started;
    m["finished"] = utc_now();
    m["outputs"] = outputs;
    m["summary"] = summary;
    m["environment"] = environment_json();
    write_json_file((dir / "manifest.json").string(), m);
  }
};

Run start_run(const std::string& verb, const std::vector<std::string>& argv, const Registry& reg,
              const Options& o) {
  Run run;
  run.verb = verb;
  run.argv = argv;
  run.config = reg.resolved();
  run.dir = o.out;
  std::error_code ec;
  fs::create_directories(run.dir, ec);
  if (ec) throw ParameterError("cannot create output directory " + o.out + ": " + ec.message());
  return run;
}

std::string num(double v) { return format_double(v); }

// ---------------------------------------------------------------- sweeps

struct Tuple {
  SchemeId scheme;
  int N = 0;
  int n = 0;
  double r = 0.0;
  PhysicalParams params;
};

std::vector<Tuple> enumerate(const Options& o) {
  std::vector<Tuple> out;
  for (const auto& s : parse_schemes(o.scheme))
    for (int N : o.N)
      for (int n : o.n)
        for (double r : o.r)
          for (double cd : o.cD)
            for (double cv : o.cV) out.push_back({s, N, n, r, {cd, cv}});
  // Validate every tuple before any work starts.
  for (const auto& t : out) {
    build_patch_grid(t.N, t.n, t.r);
    t.params.validate();
  }
  return out;
}

std::string tuple_text(const Tuple& t) {
  std::ostringstream os;
  os << t.scheme.name() << " N=" << t.N << " n=" << t.n << " r=" << num(t.r) << " cD=" << num(t.params.c_D)
     << " cV=" << num(t.params.c_V);
  return os.str();
}

void report_tuples(std::ostream& out, const std::string& verb, const std::vector<Tuple>& tuples) {
  out << verb << " sweep: " << tuples.size() << " configurations\n";
  for (std::size_t i = 0; i < tuples.size(); ++i) out << "  [" << i << "] " << tuple_text(tuples[i]) << '\n';
}

// Runs fn(i) on a pool of threads; per-tuple failures are recorded, not thrown.
template <class Row>
std::vector<std::optional<Row>> run_tuples(std::size_t count, int jobs, const std::function<Row(std::size_t)>& fn,
                                           std::vector<std::string>& errors, std::ostream& err) {
  std::vector<std::optional<Row>> rows(count);
  errors.assign(count, "");
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        rows[i] = fn(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        std::lock_guard<std::mutex> lock(log_mutex);
        err << "tuple " << i << " failed: " << e.what() << '\n';
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

std::size_t count_failures(const std::vector<std::string>& errors) {
  return static_cast<std::size_t>(std::count_if(errors.begin(), errors.end(), [](const auto& e) { return !e.empty(); }));
}

std::string csv_field(const std::string& text) {
  std::string s = text;
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

// ---------------------------------------------------------------- grid-info

int cmd_grid_info(const Options& o, Run& run, std::ostream& out) {
  const auto spec = build_patch_grid(single(o.N, "N"), single(o.n, "n"), single(o.r, "r"));
  Json j = to_json(spec);
  j["M"] = spec.M();
  j["cells"] = spec.cell_count();
  j["macro_count"] = spec.macro_count();
  j["state_count_formula"] = patch_state_count_formula(spec.N, spec.n);
  j["cell_interior"] = spec.layout->cell_interior;
  j["cell_edges"] = spec.layout->cell_edges;
  if (auto nf = matched_full_grid(spec.N, spec.n, spec.r)) {
    j["matched_full_n"] = *nf;
    j["matched_full_states"] = micro_state_count(*nf);
  }
  write_json_file((run.dir / "grid.json").string(), j);
  run.outputs.push_back("grid.json");
  run.summary = j;
  out << j.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- spectrum

int cmd_spectrum(const Options& o, Run& run, std::ostream& out) {
  const SchemeId scheme = SchemeId::parse(single(o.scheme, "scheme"));
  const auto spec = build_patch_grid(single(o.N, "N"), single(o.n, "n"), single(o.r, "r"));
  const PhysicalParams params{single(o.cD, "cD"), single(o.cV, "cV")};
  params.validate();
  const Precision precision = parse_precision(o.precision);
  ClassifiedSpectrum cs;
  if (o.method == "bloch") {
    cs = classify(bloch_spectrum(spec, scheme, params, precision, {}, BlochForm::RealPairs));
  } else if (o.method == "dense") {
    if (precision != Precision::Working) throw ParameterError("dense method supports working precision only");
    const auto jac = assemble_jacobian(CouplingOperator::build(spec, scheme), params);
    cs = classify(eig(jac.J, true, "spectrum").values, spec, params);
  } else {
    throw ParameterError("unknown method '" + o.method + "' (expected bloch or dense)");
  }
  {
    auto f = run.open("spectrum.csv");
    write_spectrum_csv_header(f, true);
    write_spectrum_csv(f, cs, scheme, true);
  }
  const auto c = census(cs);
  Json s = to_json(c);
  s["dimension"] = cs.dimension;
  s["max_macro_residual"] = cs.max_residual();
  s["review"] = cs.review;
  s["warnings"] = cs.warnings;
  run.summary = s;
  write_json_file((run.dir / "summary.json").string(), s);
  run.outputs.push_back("summary.json");
  out << "dimension " << cs.dimension << ": " << c.macro << " macro, " << c.micro << " micro (" << c.micro_upper
      << " upper, " << c.micro_lower << " lower, " << c.micro_real << " real)\n"
      << "max Re macro " << num(c.macro_max_re) << ", max Re micro " << num(c.micro_max_re) << ", max |Re| "
      << num(c.max_abs_re) << "\n"
      << "max macro residual " << num(cs.max_residual()) << (cs.review ? " (flagged for review)" : "") << '\n';
  for (const auto& w : cs.warnings) out << "warning: " << w << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- consistency

int cmd_consistency(const Options& o, Run& run, std::ostream& out, std::ostream& err) {
  require_nonempty(o, true);
  const auto tuples = enumerate(o);
  const Precision precision = parse_precision(o.precision);
  report_tuples(out, "consistency", tuples);
  struct Row {
    double Delta = 0.0;
    std::optional<double> e10, e11, e21;
  };
  std::vector<std::string> errors;
  const std::function<Row(std::size_t)> work = [&](std::size_t i) {
    const Tuple& t = tuples[i];
    const auto spec = build_patch_grid(t.N, t.n, t.r);
    const auto ks = resolved_wavenumbers(spec.M());
    const bool has2 = std::find(ks.begin(), ks.end(), 2) != ks.end();
    std::vector<std::pair<int, int>> wanted{{1, 0}, {1, 1}};
    if (has2) wanted.push_back({2, 1});
    const auto cs = classify(bloch_spectrum(spec, t.scheme, t.params, precision, wanted, BlochForm::RealPairs));
    Row row;
    row.Delta = spec.Delta;
    row.e10 = eigenvalue_error(cs, 1, 0);
    row.e11 = eigenvalue_error(cs, 1, 1);
    if (has2) row.e21 = eigenvalue_error(cs, 2, 1);
    return row;
  };
  const auto rows = run_tuples<Row>(tuples.size(), o.jobs, work, errors, err);

  auto opt = [](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
  {
    auto f = run.open("consistency.csv");
    f << "scheme,N,n,r,c_D,c_V,Delta,eps_10,eps_11,eps_21,status\n";
    for (std::size_t i = 0; i < tuples.size(); ++i) {
      const Tuple& t = tuples[i];
      f << t.scheme.name() << ',' << t.N << ',' << t.n << ',' << num(t.r) << ',' << num(t.params.c_D) << ','
        << num(t.params.c_V) << ',';
      if (rows[i]) {
        f << num(rows[i]->Delta) << ',' << opt(rows[i]->e10) << ',' << opt(rows[i]->e11) << ',' << opt(rows[i]->e21)
          << ",ok\n";
      } else {
        f << ",,,," << csv_field("failed: " + errors[i]) << '\n';
      }
    }
  }

  // Power-law fits over N for each remaining parameter combination.
  std::map<std::tuple<std::string, int, double, double, double>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    const Tuple& t = tuples[i];
    groups[{t.scheme.name(), t.n, t.r, t.params.c_D, t.params.c_V}].push_back(i);
  }
  Json fits = Json::array();
  {
    auto f = run.open("fits.csv");
    f << "scheme,n,r,c_D,c_V,metric,points,exponent,prefactor,r2,pinned_exponent,pinned_prefactor,note\n";
    for (const auto& [key, idx] : groups) {
      const auto& [name, n, r, cd, cv] = key;
      const SchemeId scheme = SchemeId::parse(name);
      for (int metric = 0; metric < 3; ++metric) {
        static const char* names[] = {"eps_10", "eps_11", "eps_21"};
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i : idx) {
          if (!rows[i]) continue;
          const auto& v = metric == 0 ? rows[i]->e10 : metric == 1 ? rows[i]->e11 : rows[i]->e21;
          if (v) pts.push_back({rows[i]->Delta, *v});
        }
        f << name << ',' << n << ',' << num(r) << ',' << num(cd) << ',' << num(cv) << ',' << names[metric] << ','
          << pts.size() << ',';
        Json jf{{"scheme", name}, {"n", n}, {"r", r}, {"c_D", cd}, {"c_V", cv}, {"metric", names[metric]}};
        try {
          const auto fit = consistency_fit(pts, o.floor);
          f << num(fit.exponent) << ',' << num(fit.prefactor) << ',' << num(fit.r2) << ',';
          jf["exponent"] = fit.exponent;
          jf["prefactor"] = fit.prefactor;
          jf["r2"] = fit.r2;
          jf["points_used"] = fit.used.size();
          if (scheme.kind == CouplingKind::SquareP) {
            const double pinned = pinned_prefactor(fit.used, scheme.p);
            f << scheme.p << ',' << num(pinned) << ",\n";
            jf["pinned_prefactor"] = pinned;
          } else {
            f << ",,\n";
          }
        } catch (const ParameterError& e) {
          f << ",,,,," << csv_field(e.what()) << '\n';
          jf["note"] = e.what();
        }
        fits.push_back(jf);
      }
    }
  }
  const std::size_t failed = count_failures(errors);
  run.summary = {{"tuples", tuples.size()}, {"failed", failed}, {"fits", fits}};
  for (const auto& jf : fits)
    if (jf.contains("exponent"))
      out << jf["scheme"].get<std::string>() << " n=" << jf["n"] << " r=" << num(jf["r"].get<double>()) << ' '
          << jf["metric"].get<std::string>() << ": exponent " << num(jf["exponent"].get<double>()) << ", prefactor "
          << num(jf["prefactor"].get<double>()) << '\n';
  if (failed) err << failed << " of " << tuples.size() << " configurations failed\n";
  return failed ? kExitNumerical : kExitOk;
}

// ---------------------------------------------------------------- roundoff

int cmd_roundoff(const Options& o, Run& run, std::ostream& out, std::ostream& err) {
  require_nonempty(o, true);
  const auto tuples = enumerate(o);
  report_tuples(out, "roundoff", tuples);
  std::vector<std::string> errors;
  const std::function<RoundoffErrors(std::size_t)> work = [&](std::size_t i) {
    const Tuple& t = tuples[i];
    const auto spec = build_patch_grid(t.N, t.n, t.r);
    const auto w = classify(bloch_spectrum(spec, t.scheme, t.params, Precision::Working, {}, BlochForm::RealPairs));
    const auto x = classify(bloch_spectrum(spec, t.scheme, t.params, Precision::Extended, {}, BlochForm::RealPairs));
    return roundoff_errors(x, w);
  };
  const auto rows = run_tuples<RoundoffErrors>(tuples.size(), o.jobs, work, errors, err);
  std::map<std::tuple<std::string, int, int, double>, RoundoffErrors> peaks;
  std::size_t macro_below = 0, ok = 0;
  {
    auto f = run.open("roundoff.csv");
    f << "scheme,N,n,r,c_D,c_V,delta,eps_micro,eps_macro,status\n";
    for (std::size_t i = 0; i < tuples.size(); ++i) {
      const Tuple& t = tuples[i];
      const double delta = build_patch_grid(t.N, t.n, t.r).delta;
      f << t.scheme.name() << ',' << t.N << ',' << t.n << ',' << num(t.r) << ',' << num(t.params.c_D) << ','
        << num(t.params.c_V) << ',' << num(delta) << ',';
      if (!rows[i]) {
        f << ",," << csv_field("failed: " + errors[i]) << '\n';
        continue;
      }
      f << num(rows[i]->micro) << ',' << num(rows[i]->macro) << ",ok\n";
      auto& p = peaks[{t.scheme.name(), t.N, t.n, t.r}];
      p.micro = std::max(p.micro, rows[i]->micro);
      p.macro = std::max(p.macro, rows[i]->macro);
      ++ok;
      if (rows[i]->macro <= rows[i]->micro) ++macro_below;
    }
  }
  {
    auto f = run.open("peaks.csv");
    f << "scheme,N,n,r,peak_eps_micro,peak_eps_macro\n";
    for (const auto& [key, p] : peaks) {
      const auto& [name, N, n, r] = key;
      f << name << ',' << N << ',' << n << ',' << num(r) << ',' << num(p.micro) << ',' << num(p.macro) << '\n';
      out << name << " N=" << N << " n=" << n << " r=" << num(r) << ": peak eps_micro " << num(p.micro)
          << ", eps_macro " << num(p.macro) << '\n';
    }
  }
  const std::size_t failed = count_failures(errors);
  run.summary = {{"tuples", tuples.size()},
                 {"failed", failed},
                 {"macro_below_micro_fraction", ok ? static_cast<double>(macro_below) / ok : 0.0}};
  if (failed) err << failed << " of " << tuples.size() << " configurations failed\n";
  return failed ? kExitNumerical : kExitOk;
}

// ---------------------------------------------------------------- stability

int cmd_stability(const Options& o, Run& run, std::ostream& out, std::ostream& err) {
  require_nonempty(o, true);
  const auto tuples = enumerate(o);
  const Precision precision = parse_precision(o.precision);
  report_tuples(out, "stability", tuples);
  struct Row {
    double max_re = 0.0;
    int kx = 0, ky = 0;
  };
  std::vector<std::string> errors;
  const std::function<Row(std::size_t)> work = [&](std::size_t i) {
    const Tuple& t = tuples[i];
    const auto sp = bloch_spectrum(build_patch_grid(t.N, t.n, t.r), t.scheme, t.params, precision, {},
                                   BlochForm::RealPairs);
    Row row;
    row.max_re = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < sp.eigenvalues.size(); ++b)
      for (cplx z : sp.eigenvalues[b])
        if (z.real() > row.max_re) {
          row.max_re = z.real();
          row.kx = sp.wavenumbers[b].first;
          row.ky = sp.wavenumbers[b].second;
        }
    return row;
  };
  const auto rows = run_tuples<Row>(tuples.size(), o.jobs, work, errors, err);
  std::map<std::tuple<std::string, int, int, double>, double> peaks;
  double worst = -std::numeric_limits<double>::infinity();
  {
    auto f = run.open("stability.csv");
    f << "scheme,N,n,r,c_D,c_V,max_re,k_x,k_y,status\n";
    for (std::size_t i = 0; i < tuples.size(); ++i) {
      const Tuple& t = tuples[i];
      f << t.scheme.name() << ',' << t.N << ',' << t.n << ',' << num(t.r) << ',' << num(t.params.c_D) << ','
        << num(t.params.c_V) << ',';
      if (!rows[i]) {
        f << ",,," << csv_field("failed: " + errors[i]) << '\n';
        continue;
      }
      f << num(rows[i]->max_re) << ',' << rows[i]->kx << ',' << rows[i]->ky << ",ok\n";
      auto key = std::make_tuple(t.scheme.name(), t.N, t.n, t.r);
      auto it = peaks.find(key);
      peaks[key] = it == peaks.end() ? rows[i]->max_re : std::max(it->second, rows[i]->max_re);
      worst = std::max(worst, rows[i]->max_re);
    }
  }
  {
    auto f = run.open("peaks.csv");
    f << "scheme,N,n,r,peak_max_re\n";
    for (const auto& [key, v] : peaks) {
      const auto& [name, N, n, r] = key;
      f << name << ',' << N << ',' << n << ',' << num(r) << ',' << num(v) << '\n';
    }
  }
  const std::size_t failed = count_failures(errors);
  run.summary = {{"tuples", tuples.size()}, {"failed", failed}, {"worst_max_re", worst}};
  out << "largest real part over the sweep: " << num(worst) << '\n';
  if (failed) err << failed << " of " << tuples.size() << " configurations failed\n";
  return failed ? kExitNumerical : kExitOk;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Options& o, Run& run, std::ostream& out) {
  SimConfig c;
  c.domain = parse_domain(o.domain);
  c.scheme = SchemeId::parse(single(o.scheme, "scheme"));
  c.N = single(o.N, "N");
  c.n = single(o.n, "n");
  c.r = single(o.r, "r");
  c.n_full = o.n_full;
  c.params = {single(o.cD, "cD"), single(o.cV, "cV")};
  c.end_time = o.t_end;
  c.dt = o.dt;
  c.snapshot_interval = o.snapshot_interval;
  c.initial.kind = parse_initial_kind(o.initial);
  c.initial.amplitude = o.amplitude;
  c.initial.sigma = o.sigma;
  const auto res = simulate(c);

  fs::create_directories(run.dir / "snapshots");
  Json series = Json::array();
  for (std::size_t k = 0; k < res.snapshots.size(); ++k) {
    const auto& snap = res.snapshots[k];
    std::ostringstream name;
    name << "snapshots/snapshot_" << std::setw(5) << std::setfill('0') << k << ".csv";
    auto f = run.open(name.str());
    write_snapshot_csv(f, res, snap);
    Json d = to_json(snap.diagnostics);
    d["step"] = snap.step;
    d["time"] = snap.time;
    d["file"] = name.str();
    series.push_back(d);
  }
  {
    auto f = run.open("diagnostics.csv");
    f << "step,time,l2,max_abs_h,total_h\n";
    for (const auto& snap : res.snapshots)
      f << snap.step << ',' << num(snap.time) << ',' << num(snap.diagnostics.l2) << ','
        << num(snap.diagnostics.max_abs_h) << ',' << num(snap.diagnostics.total_h) << '\n';
  }
  run.summary = {{"simulation", to_json(c)},
                 {"dt", res.dt},
                 {"steps", res.steps},
                 {"state_count", res.state_count()},
                 {"total_h_drift_per_time", res.total_h_drift},
                 {"diagnostics", series}};
  const auto& last = res.snapshots.back().diagnostics;
  out << "simulated " << res.steps << " steps of dt " << num(res.dt) << " (" << res.state_count()
      << " variables), " << res.snapshots.size() << " snapshots\n"
      << "final max |h| " << num(last.max_abs_h) << ", l2 " << num(last.l2) << ", total-h drift "
      << num(res.total_h_drift) << " per unit time\n";
  return kExitOk;
}

// ---------------------------------------------------------------- bench

int cmd_bench(const Options& o, Run& run, std::ostream& out) {
  BenchConfig c;
  c.schemes = parse_schemes(o.scheme);
  c.N = single(o.N, "N");
  c.n_values = o.n;
  c.r_values = o.r;
  c.params = {single(o.cD, "cD"), single(o.cV, "cV")};
  c.timing.samples = o.samples;
  c.timing.min_sample_seconds = o.min_sample_seconds;
  c.direct_limit = o.direct_limit;
  std::ostringstream log;
  const auto res = run_bench(c, &log);
  {
    auto f = run.open("bench.csv");
    write_bench_csv(f, res);
  }
  Json fits = Json::array(), slopes = Json::array();
  {
    auto f = run.open("fits.csv");
    f << "scheme,T_M_ns,T_C_ns,T_C_over_T_M,r2_log\n";
    for (const auto& fit : res.fits) {
      f << fit.scheme.name() << ',' << num(fit.T_M_ns) << ',' << num(fit.T_C_ns) << ','
        << num(fit.T_C_ns / fit.T_M_ns) << ',' << num(fit.r2) << '\n';
      fits.push_back(to_json(fit));
      for (int n : c.n_values)
        if (c.r_values.size() >= 2)
          slopes.push_back({{"scheme", fit.scheme.name()}, {"n", n}, {"slope", res.r_slope(fit.scheme, n)}});
    }
  }
  Json speedups = Json::array();
  for (const auto& row : res.rows)
    speedups.push_back({{"scheme", row.scheme.name()},
                        {"n", row.n},
                        {"r", row.r},
                        {"speedup", 1.0 / row.measured_ratio},
                        {"full_extrapolated", row.full_extrapolated}});
  Json report{{"config", to_json(c)},
              {"pinned", res.pinned},
              {"reference_full_domain", to_json(res.reference)},
              {"fits", fits},
              {"r_slopes", slopes},
              {"speedups", speedups},
              {"environment", environment_json()}};
  write_json_file((run.dir / "bench.json").string(), report);
  run.outputs.push_back("bench.json");
  run.summary = {{"fits", fits}, {"r_slopes", slopes}, {"pinned", res.pinned}};
  out << log.str();
  for (const auto& fit : res.fits)
    out << fit.scheme.name() << ": T_M " << num(fit.T_M_ns) << " ns, T_C " << num(fit.T_C_ns) << " ns, R2(log) "
        << num(fit.r2) << '\n';
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------- entry

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Staggered patch scheme analysis: spectra, sweeps, simulation and benchmarks", "stagpatch"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string() + " (" + git_revision() + ")");

  const std::vector<std::string> verbs{"spectrum", "consistency", "roundoff", "stability",
                                       "simulate", "bench",       "grid-info"};
  std::map<std::string, Options> options;
  std::map<std::string, Registry> registries;
  std::map<std::string, CLI::App*> subs;
  for (const auto& v : verbs) {
    Options& o = options[v];
    set_defaults(v, o);
    Registry& reg = registries[v];
    static const std::map<std::string, std::string> help{
        {"spectrum", "eigenvalues of one configuration, classified into macro and micro modes"},
        {"consistency", "macroscale eigenvalue errors and power-law fits over a sweep"},
        {"roundoff", "working versus extended precision eigenvalue differences over a sweep"},
        {"stability", "largest real part of the spectrum over a sweep"},
        {"simulate", "RK4 time simulation of the patch scheme or the full-domain model"},
        {"bench", "RHS timings and the patch/full cost model"},
        {"grid-info", "node and edge counts of one patch grid"}};
    CLI::App* sub = app.add_subcommand(v, help.at(v));
    subs[v] = sub;
    const bool physics = v != "grid-info";
    register_common(sub, reg, o, v != "grid-info", physics);
    if (v == "spectrum") reg.add(sub, "method", o.method, "bloch (per-wavenumber blocks) or dense");
    if (v == "consistency") reg.add(sub, "floor", o.floor, "errors at or below this are excluded from fits");
    if (v == "simulate") {
      reg.add(sub, "domain", o.domain, "patch or full");
      reg.add(sub, "t-end", o.t_end, "end time");
      reg.add(sub, "dt", o.dt, "time step (0 = automatic)");
      reg.add(sub, "snapshot-interval", o.snapshot_interval, "time between snapshots (0 = first and last)");
      reg.add(sub, "initial", o.initial, "gaussian, modes or zero");
      reg.add(sub, "amplitude", o.amplitude, "initial amplitude");
      reg.add(sub, "sigma", o.sigma, "Gaussian width");
      reg.add(sub, "n-full", o.n_full, "full-domain grid size (0 = matched to the patch micro spacing)");
    }
    if (v == "bench") {
      reg.add(sub, "samples", o.samples, "timing samples per measurement (>= 20)");
      reg.add(sub, "min-sample-seconds", o.min_sample_seconds, "minimum duration of one timing sample");
      reg.add(sub, "direct-limit", o.direct_limit, "largest full domain timed directly (state variables)");
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  std::string verb;
  for (const auto& v : verbs)
    if (subs[v]->parsed()) verb = v;
  Options& o = options[verb];
  Registry& reg = registries[verb];
  try {
    if (!o.config.empty()) reg.apply_config(read_json_file(o.config));
    Run run = start_run(verb, args, reg, o);
    int code = kExitOk;
    try {
      if (verb == "grid-info") code = cmd_grid_info(o, run, out);
      else if (verb == "spectrum") code = cmd_spectrum(o, run, out);
      else if (verb == "consistency") code = cmd_consistency(o, run, out, err);
      else if (verb == "roundoff") code = cmd_roundoff(o, run, out, err);
      else if (verb == "stability") code = cmd_stability(o, run, out, err);
      else if (verb == "simulate") code = cmd_simulate(o, run, out);
      else if (verb == "bench") code = cmd_bench(o, run, out);
    } catch (const std::exception& e) {
      run.summary["error"] = e.what();
      run.finish("failed");
      throw;
    }
    run.finish(code == kExitOk ? "ok" : "partial failure");
    out << "wrote " << (run.dir / "manifest.json").string() << '\n';
    return code;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace stagpatch

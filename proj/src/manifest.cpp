#include "stagpatch/manifest.hpp"

#include <fstream>
#include <thread>

#ifdef __linux__
#include <sys/utsname.h>
#endif

#include "stagpatch/error.hpp"

#ifndef STAGPATCH_VERSION
#define STAGPATCH_VERSION "unknown"
#endif
#ifndef STAGPATCH_GIT_REV
#define STAGPATCH_GIT_REV "unknown"
#endif
#ifndef STAGPATCH_BUILD_TYPE
#define STAGPATCH_BUILD_TYPE "unknown"
#endif

namespace stagpatch {

std::string version_string() { return STAGPATCH_VERSION; }
std::string git_revision() { return STAGPATCH_GIT_REV; }

Json build_json() {
  return {{"version", version_string()},
          {"git_revision", git_revision()},
          {"compiler", std::string("g++ ") + __VERSION__},
          {"build_type", STAGPATCH_BUILD_TYPE}};
}

namespace {

std::string first_line_of(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  if (in && std::getline(in, line)) return line;
  return "unavailable";
}

std::string cpu_model() {
  std::ifstream in("/proc/cpuinfo");
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) return line.substr(line.find_first_not_of(' ', colon + 1));
    }
  }
  return "unavailable";
}

}  // namespace

Json environment_json() {
  Json env;
  env["cpu_model"] = cpu_model();
  env["logical_cpus"] = std::thread::hardware_concurrency();
  env["frequency_governor"] = first_line_of("/sys/devices/system/cpu/cpu0/cpufreq/scaling_governor");
#ifdef __linux__
  utsname u{};
  if (uname(&u) == 0) env["kernel"] = std::string(u.sysname) + " " + u.release + " " + u.machine;
#endif
  env["build"] = build_json();
  return env;
}

Json to_json(const PhysicalParams& p) { return {{"c_D", p.c_D}, {"c_V", p.c_V}}; }

Json to_json(const PatchGridSpec& spec) {
  return {{"N", spec.N},
          {"n", spec.n},
          {"r", spec.r},
          {"L", spec.L},
          {"Delta", spec.Delta},
          {"delta", spec.delta},
          {"state_count", spec.state_count()},
          {"edge_count", spec.edge_count()}};
}

Json to_json(const SimConfig& c) {
  return {{"domain", domain_name(c.domain)},
          {"scheme", c.scheme.name()},
          {"N", c.N},
          {"n", c.n},
          {"r", c.r},
          {"n_full", c.n_full},
          {"params", to_json(c.params)},
          {"end_time", c.end_time},
          {"dt", c.dt},
          {"snapshot_interval", c.snapshot_interval},
          {"initial",
           {{"kind", initial_kind_name(c.initial.kind)},
            {"amplitude", c.initial.amplitude},
            {"sigma", c.initial.sigma},
            {"centre", {c.initial.centre[0], c.initial.centre[1]}}}}};
}

Json to_json(const Diagnostics& d) { return {{"l2", d.l2}, {"max_abs_h", d.max_abs_h}, {"total_h", d.total_h}}; }

Json to_json(const BenchConfig& c) {
  Json schemes = Json::array();
  for (const auto& s : c.schemes) schemes.push_back(s.name());
  return {{"schemes", schemes},
          {"N", c.N},
          {"n", c.n_values},
          {"r", c.r_values},
          {"params", to_json(c.params)},
          {"samples", c.timing.samples},
          {"warmup", c.timing.warmup},
          {"min_sample_seconds", c.timing.min_sample_seconds},
          {"direct_limit", c.direct_limit}};
}

Json to_json(const TimingReport& t) {
  return {{"label", t.label},       {"variables", t.variables}, {"batch", t.batch},
          {"median_ns", t.median_ns}, {"q1_ns", t.q1_ns},         {"q3_ns", t.q3_ns},
          {"iqr_over_median", t.dispersion()}, {"samples_ns", t.samples_ns}};
}

Json to_json(const CostModelFit& f) {
  return {{"scheme", f.scheme.name()},
          {"T_M_ns", f.T_M_ns},
          {"T_C_ns", f.T_C_ns},
          {"r2_log", f.r2},
          {"relative_residuals", f.relative_residuals}};
}

Json to_json(const ClusterCensus& c) {
  return {{"macro", c.macro},
          {"micro", c.micro},
          {"micro_upper", c.micro_upper},
          {"micro_lower", c.micro_lower},
          {"micro_real", c.micro_real},
          {"macro_max_re", c.macro_max_re},
          {"micro_max_re", c.micro_max_re},
          {"max_abs_re", c.max_abs_re}};
}

PhysicalParams params_from_json(const Json& j) {
  PhysicalParams p;
  p.c_D = j.value("c_D", 0.0);
  p.c_V = j.value("c_V", 0.0);
  p.validate();
  return p;
}

SimConfig sim_config_from_json(const Json& j) {
  try {
    SimConfig c;
    c.domain = parse_domain(j.value("domain", domain_name(c.domain)));
    c.scheme = SchemeId::parse(j.value("scheme", c.scheme.name()));
    c.N = j.value("N", c.N);
    c.n = j.value("n", c.n);
    c.r = j.value("r", c.r);
    c.n_full = j.value("n_full", c.n_full);
    if (j.contains("params")) c.params = params_from_json(j.at("params"));
    c.end_time = j.value("end_time", c.end_time);
    c.dt = j.value("dt", c.dt);
    c.snapshot_interval = j.value("snapshot_interval", c.snapshot_interval);
    if (j.contains("initial")) {
      const auto& ic = j.at("initial");
      c.initial.kind = parse_initial_kind(ic.value("kind", initial_kind_name(c.initial.kind)));
      c.initial.amplitude = ic.value("amplitude", c.initial.amplitude);
      c.initial.sigma = ic.value("sigma", c.initial.sigma);
      if (ic.contains("centre")) {
        c.initial.centre[0] = ic.at("centre").at(0).get<double>();
        c.initial.centre[1] = ic.at("centre").at(1).get<double>();
      }
    }
    c.validate();
    return c;
  } catch (const Json::exception& e) {
    throw ParameterError(std::string("malformed simulation config: ") + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw ParameterError("failed writing " + path);
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot read " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParameterError("invalid JSON in " + path + ": " + e.what());
  }
}

}  // namespace stagpatch

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "stagpatch/bench.hpp"
#include "stagpatch/coupling.hpp"
#include "stagpatch/microscale.hpp"
#include "stagpatch/spectra.hpp"
#include "stagpatch/timesim.hpp"

namespace stagpatch {

using Json = nlohmann::json;

std::string version_string();
std::string git_revision();

// Version, compiler and build type.
Json build_json();
// CPU model, logical CPUs, frequency governor, kernel, plus build_json().
Json environment_json();

Json to_json(const PhysicalParams& p);
Json to_json(const PatchGridSpec& spec);
Json to_json(const SimConfig& c);
Json to_json(const Diagnostics& d);
Json to_json(const BenchConfig& c);
Json to_json(const TimingReport& t);
Json to_json(const CostModelFit& f);
Json to_json(const ClusterCensus& c);

PhysicalParams params_from_json(const Json& j);
SimConfig sim_config_from_json(const Json& j);

void write_json_file(const std::string& path, const Json& j);
Json read_json_file(const std::string& path);

}  // namespace stagpatch

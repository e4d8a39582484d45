#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "hierdetect/bounds.hpp"
#include "hierdetect/sim.hpp"

namespace hierdetect::cli {

using json = nlohmann::ordered_json;

/// Malformed or inconsistent configuration; maps to exit code 2.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OutputFormat { Csv, Json };

struct ExperimentConfig {
  sim::TrialConfig base;
  sim::SweepGrid grid;
  sim::BoundSettings bounds;
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::string out_path;  // empty: standard output
  OutputFormat format = OutputFormat::Csv;
  bool timing = false;
};

/// n = 1024, m = 300, u = 4, s = n/u, k_u = 1, k_s = 3, HiIHT, SNR 10 dB.
ExperimentConfig default_config();

std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

/// Overlays the keys present in `doc` onto `base`. Unknown sections or keys
/// and type mismatches raise config_error.
ExperimentConfig parse_config(const json& doc, ExperimentConfig base = default_config());
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = default_config());

json to_json(const ExperimentConfig& cfg);

/// FNV-1a over the canonical JSON of everything except the output section.
std::uint64_t config_hash(const ExperimentConfig& cfg);

std::string version_string();

std::string format_csv(const std::vector<sim::SweepCell>& cells, const ExperimentConfig& cfg);
std::string format_json(const std::vector<sim::SweepCell>& cells, const ExperimentConfig& cfg);

std::vector<std::string> bound_names();

/// Term breakdowns of the requested bounds. Failures of individual entries
/// are reported in-place under "error".
json bounds_report(const bounds::BoundParams& params, const std::vector<std::string>& which);
std::string format_bounds_text(const json& report);

/// Full command-line entry point. Returns 0 on success, 1 on runtime errors,
/// 2 on usage or configuration errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hierdetect::cli

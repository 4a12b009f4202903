#ifndef TVSPEC_CONFIG_HPP
#define TVSPEC_CONFIG_HPP

#include "tvspec/io.hpp"
#include "tvspec/priors.hpp"
#include "tvspec/sampler.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tvspec {

struct GeneratorConfig {
  std::string name;    // piecewise_vma | slowvarying_vma | piecewise_var
  int length = 0;      // 0: generator default
  double scale = 1.0;  // piecewise_var only
  std::uint64_t seed = 1;
};

struct SummaryConfig {
  int time_points = 0;  // 0: one point per sample
  int freq_points = 51;
  double band_level = 0.95;
  // Functional names ("logf11", "rho21", ...); unset means every log f_jj
  // and every rho_jk.
  std::optional<std::vector<std::string>> bands;
};

struct RunConfig {
  std::string input;
  std::optional<GeneratorConfig> generator;
  PriorConfig prior;
  bool max_segments_given = false;  // otherwise M = min(10, floor(T / n_min))
  SamplerConfig sampler;
  SummaryConfig summary;
  std::string output;
  int replicates = 1;
  int jobs = 1;
  bool dump_snapshots = false;
};

// Strict parser: unknown keys and wrong types raise ConfigError.
RunConfig config_from_json(const json& value);
RunConfig load_config(const std::filesystem::path& path);

// Resolved configuration as written to manifest.json. Output location and
// job count are left out: they do not affect results.
json config_to_json(const RunConfig& config);

// Fills data-dependent defaults (M, band list) and validates.
void resolve_config(RunConfig& config, int length, int dim);

std::vector<double> summary_time_grid(const SummaryConfig& summary, int length);
std::vector<double> summary_freq_grid(const SummaryConfig& summary);

}  // namespace tvspec

#endif  // TVSPEC_CONFIG_HPP

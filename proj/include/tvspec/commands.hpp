#ifndef TVSPEC_COMMANDS_HPP
#define TVSPEC_COMMANDS_HPP

#include "tvspec/config.hpp"
#include "tvspec/posterior.hpp"
#include "tvspec/simgen.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace tvspec {

enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitNumerical = 4 };

// Maps the library's exceptions to exit codes.
int exit_code_for(const std::exception& error);

// Output file names for grids of a functional: spec_f11.csv, logspec_f11.csv,
// coh_21.csv.
std::string grid_file_name(const Functional& functional);
std::string band_file_name(const Functional& functional, bool upper);

// Posterior summaries of a snapshot list written into `dir`: mean grids for
// f_jj, log f_jj, rho_jk, band CSVs, pm.json and ploc.json.
void write_summaries(const std::vector<Snapshot>& snapshots, const RunConfig& config, int length,
                     int dim, const std::filesystem::path& dir, std::ostream& log);

// Truth grids (same file names as estimates) for a generator.
void write_truth(const ProcessSpec& spec, const RunConfig& config,
                 const std::filesystem::path& dir);

// ASE of every functional grid present in both directories, in the order
// f11.., rho21..; values are raw (not multiplied by 100).
std::vector<std::pair<std::string, double>> ase_table(const std::filesystem::path& estimate_dir,
                                                      const std::filesystem::path& truth_dir);

// Commands return 0 and throw on failure; run_cli maps failures to exit codes.
int cmd_analyze(RunConfig config, std::ostream& out);
int cmd_simulate(RunConfig config, std::ostream& out);
int cmd_ase(const std::filesystem::path& estimate_dir, const std::filesystem::path& truth_dir,
            std::ostream& out);
int cmd_summarize(const std::filesystem::path& snapshot_dump, RunConfig config, std::ostream& out);

// Command-line front end. Default output root comes from TVSPEC_OUTPUT_ROOT.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tvspec

#endif  // TVSPEC_COMMANDS_HPP

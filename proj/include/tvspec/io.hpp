#ifndef TVSPEC_IO_HPP
#define TVSPEC_IO_HPP

#include "tvspec/sampler.hpp"
#include "tvspec/types.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace tvspec {

using json = nlohmann::json;

// Reads a numeric T x N matrix, one row per time point. A single leading
// header row is skipped when any of its cells is non-numeric. Throws
// DataError on missing files, empty bodies, ragged rows, non-numeric or
// non-finite cells (naming row and column), or T < 2 n_min.
MultivariateSeries load_csv(const std::filesystem::path& path, int n_min = 0);
void write_series_csv(const std::filesystem::path& path, const MultivariateSeries& series);

// Grid CSV: header row "time,<freq_1>,...", then one row per time point
// with u in the first column.
void write_grid_csv(const std::filesystem::path& path, const ScalarGrid& grid);
ScalarGrid read_grid_csv(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const json& value);
json read_json(const std::filesystem::path& path);

json snapshot_to_json(const Snapshot& snapshot);
Snapshot snapshot_from_json(const json& value);

// JSON-lines dump: a header line {"T", "dim", "basis_size"} followed by one
// snapshot per line.
void write_snapshots(const std::filesystem::path& path, const std::vector<Snapshot>& snapshots,
                     int length, int dim, int basis_size);
std::vector<Snapshot> read_snapshots(const std::filesystem::path& path);

}  // namespace tvspec

#endif  // TVSPEC_IO_HPP

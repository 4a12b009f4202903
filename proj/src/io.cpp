#include "tvspec/io.hpp"

#include "tvspec/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tvspec {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t comma = line.find(',', pos);
    cells.push_back(trim(line.substr(pos, comma == std::string_view::npos ? comma : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return cells;
}

// Parses a full cell; accepts nan / inf spellings so they can be reported.
bool parse_double(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size();
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

MultivariateSeries load_csv(const std::filesystem::path& path, int n_min) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  bool first = true;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    std::vector<double> row(cells.size());
    bool numeric = true;
    std::size_t bad = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!parse_double(cells[c], row[c])) {
        numeric = false;
        bad = c;
        break;
      }
    }
    if (first) {
      first = false;
      width = cells.size();
      if (!numeric) continue;  // header
    }
    if (cells.size() != width) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " columns, expected " + std::to_string(width));
    }
    if (!numeric) {
      throw DataError(path.string() + ": non-numeric value '" + std::string(cells[bad]) +
                      "' at line " + std::to_string(line_no) + ", column " + std::to_string(bad + 1));
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (!std::isfinite(row[c])) {
        throw DataError(path.string() + ": non-finite value at line " + std::to_string(line_no) +
                        ", column " + std::to_string(c + 1));
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + ": no data rows");
  if (n_min > 0 && static_cast<int>(rows.size()) < 2 * n_min) {
    throw DataError(path.string() + ": series length " + std::to_string(rows.size()) +
                    " is shorter than 2 n_min = " + std::to_string(2 * n_min));
  }
  Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t c = 0; c < width; ++c) values(t, c) = rows[t][c];
  try {
    return MultivariateSeries(std::move(values));
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_series_csv(const std::filesystem::path& path, const MultivariateSeries& series) {
  std::ofstream out = open_out(path);
  const Eigen::MatrixXd& v = series.values();
  for (int j = 0; j < series.dim(); ++j) out << (j ? "," : "") << "x" << j + 1;
  out << '\n';
  for (Eigen::Index t = 0; t < v.rows(); ++t) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) out << (j ? "," : "") << format_double(v(t, j));
    out << '\n';
  }
}

void write_grid_csv(const std::filesystem::path& path, const ScalarGrid& grid) {
  std::ofstream out = open_out(path);
  out << "time";
  for (double w : grid.freq_points) out << ',' << format_double(w);
  out << '\n';
  for (std::size_t i = 0; i < grid.time_points.size(); ++i) {
    out << format_double(grid.time_points[i]);
    for (Eigen::Index k = 0; k < grid.values.cols(); ++k) {
      out << ',' << format_double(grid.values(static_cast<Eigen::Index>(i), k));
    }
    out << '\n';
  }
}

ScalarGrid read_grid_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty grid file");
  const auto header = split(line);
  if (header.empty() || header.front() != "time") {
    throw DataError(path.string() + ": grid header must start with 'time'");
  }
  ScalarGrid grid;
  for (std::size_t k = 1; k < header.size(); ++k) {
    double w;
    if (!parse_double(header[k], w)) throw DataError(path.string() + ": bad frequency in header");
    grid.freq_points.push_back(w);
  }
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw DataError(path.string() + ": ragged row at line " + std::to_string(line_no));
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!parse_double(cells[c], row[c])) {
        throw DataError(path.string() + ": bad value at line " + std::to_string(line_no) +
                        ", column " + std::to_string(c + 1));
      }
    }
    grid.time_points.push_back(row.front());
    rows.push_back(std::move(row));
  }
  grid.values.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(grid.freq_points.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < grid.freq_points.size(); ++k) grid.values(i, k) = rows[i][k + 1];
  return grid;
}

void write_json(const std::filesystem::path& path, const json& value) {
  std::ofstream out = open_out(path);
  out << value.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

json snapshot_to_json(const Snapshot& snapshot) {
  json runs = json::array();
  for (const auto& list : snapshot.coeffs.runs) {
    json component = json::array();
    for (const auto& rc : list) {
      component.push_back({{"first", rc.run.first},
                           {"last", rc.run.last},
                           {"lambda2", rc.lambda2},
                           {"coef", std::vector<double>(rc.coef.data(), rc.coef.data() + rc.coef.size())}});
    }
    runs.push_back(std::move(component));
  }
  return {{"iteration", snapshot.iteration},
          {"breaks", snapshot.partition.breaks},
          {"phi", snapshot.partition.phi},
          {"loglik", snapshot.loglik},
          {"basis_size", snapshot.coeffs.basis_size},
          {"runs", std::move(runs)}};
}

Snapshot snapshot_from_json(const json& value) {
  try {
    Snapshot s;
    s.iteration = value.at("iteration").get<long>();
    s.partition.breaks = value.at("breaks").get<std::vector<int>>();
    s.partition.phi = value.at("phi").get<std::vector<ChangeSet>>();
    s.loglik = value.at("loglik").get<double>();
    s.coeffs.basis_size = value.at("basis_size").get<int>();
    for (const auto& component : value.at("runs")) {
      std::vector<RunCoefficients> list;
      for (const auto& item : component) {
        RunCoefficients rc;
        rc.run = {item.at("first").get<int>(), item.at("last").get<int>()};
        rc.lambda2 = item.at("lambda2").get<double>();
        const auto coef = item.at("coef").get<std::vector<double>>();
        rc.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
        list.push_back(std::move(rc));
      }
      s.coeffs.runs.push_back(std::move(list));
    }
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed snapshot: ") + e.what());
  }
}

void write_snapshots(const std::filesystem::path& path, const std::vector<Snapshot>& snapshots,
                     int length, int dim, int basis_size) {
  std::ofstream out = open_out(path);
  out << json{{"T", length}, {"dim", dim}, {"basis_size", basis_size}}.dump() << '\n';
  for (const auto& s : snapshots) out << snapshot_to_json(s).dump() << '\n';
}

std::vector<Snapshot> read_snapshots(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty snapshot dump");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": bad header: " + e.what());
  }
  const int length = header.value("T", 0);
  std::vector<Snapshot> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      out.push_back(snapshot_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ": " + e.what());
    }
    if (out.back().partition.length() != length) {
      throw DataError(path.string() + ": snapshot length disagrees with header");
    }
  }
  return out;
}

}  // namespace tvspec

#include "tvspec/commands.hpp"

#include "tvspec/error.hpp"
#include "tvspec/io.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace tvspec {
namespace fs = std::filesystem;
namespace {

json counts_json(const MoveCounts& c) {
  return {{"proposed", c.proposed}, {"accepted", c.accepted}, {"skipped", c.skipped}, {"rate", c.rate()}};
}

json diagnostics_json(const ChainResult& chain, const SamplerConfig& sampler) {
  const MoveDiagnostics& d = chain.diagnostics;
  double mean_m = 0.0;
  long kept = 0;
  for (std::size_t i = static_cast<std::size_t>(sampler.burn_in); i < chain.segment_trace.size(); ++i) {
    mean_m += chain.segment_trace[i];
    ++kept;
  }
  return {{"iterations", sampler.iterations},
          {"burn_in", sampler.burn_in},
          {"thin", sampler.thin},
          {"snapshots", chain.snapshots.size()},
          {"acceptance",
           {{"birth", counts_json(d.birth)},
            {"death", counts_json(d.death)},
            {"relocate", counts_json(d.relocate)},
            {"change_set", counts_json(d.change_set)},
            {"hmc", counts_json(d.hmc)}}},
          {"divergences", d.divergences},
          {"clamp_events", d.clamp_events},
          {"lambda_fallbacks", d.lambda_fallbacks},
          {"max_cache_drift", d.max_cache_drift},
          {"final_step_size", chain.final_step_size},
          {"mean_segments", kept > 0 ? mean_m / kept : 0.0}};
}

json timing_json(const ChainResult& chain, int iterations) {
  return {{"seconds", chain.seconds},
          {"iterations", iterations},
          {"seconds_per_iteration", chain.seconds / iterations}};
}

fs::path replicate_dir(const fs::path& out, int replicates, int r) {
  if (replicates == 1) return out;
  char name[32];
  std::snprintf(name, sizeof name, "rep_%03d", r + 1);
  return out / name;
}

// Runs body(r) for r = 0..count-1 on `jobs` threads; rethrows the first
// failure after all workers finish.
template <typename Body>
void parallel_replicates(int count, int jobs, Body body) {
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int r = next++; r < count; r = next++) {
      try {
        body(r);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads = std::min(jobs, count);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

json ase_json(const std::vector<std::pair<std::string, double>>& table) {
  json out = json::object();
  for (const auto& [name, value] : table) out[name] = value;
  return out;
}

void require_output(const RunConfig& cfg) {
  if (cfg.output.empty()) throw ConfigError("no output directory given");
}

}  // namespace

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const ConfigError*>(&error)) return kExitConfig;
  if (dynamic_cast<const DataError*>(&error)) return kExitData;
  if (dynamic_cast<const InvalidState*>(&error)) return kExitNumerical;
  if (dynamic_cast<const std::invalid_argument*>(&error)) return kExitConfig;
  if (dynamic_cast<const fs::filesystem_error*>(&error)) return kExitData;
  return kExitNumerical;
}

std::string grid_file_name(const Functional& f) {
  const std::string idx = std::to_string(f.row + 1) + std::to_string(f.col + 1);
  switch (f.kind) {
    case Functional::Kind::kSpectrum:
      return "spec_f" + idx + ".csv";
    case Functional::Kind::kLogSpectrum:
      return "logspec_f" + idx + ".csv";
    case Functional::Kind::kCoherence:
      return "coh_" + idx + ".csv";
  }
  return {};
}

std::string band_file_name(const Functional& f, bool upper) {
  return "band_" + f.name() + (upper ? "_upper.csv" : "_lower.csv");
}

void write_summaries(const std::vector<Snapshot>& snapshots, const RunConfig& cfg, int length,
                     int dim, const fs::path& dir, std::ostream& log) {
  const auto time_grid = summary_time_grid(cfg.summary, length);
  const auto freq_grid = summary_freq_grid(cfg.summary);
  fs::create_directories(dir);

  const SpectrumGrid mean = posterior_spectrum(snapshots, time_grid, freq_grid);
  for (int j = 0; j < dim; ++j) {
    const Functional f = Functional::spectrum(j);
    write_grid_csv(dir / grid_file_name(f), functional_grid(mean, f));
    const Functional lf = Functional::log_spectrum(j);
    write_grid_csv(dir / grid_file_name(lf), posterior_functional(snapshots, lf, time_grid, freq_grid));
  }
  for (int k = 0; k < dim; ++k) {
    for (int j = k + 1; j < dim; ++j) {
      const Functional f = Functional::coherence(j, k);
      write_grid_csv(dir / grid_file_name(f), posterior_functional(snapshots, f, time_grid, freq_grid));
    }
  }

  const auto& bands = cfg.summary.bands ? *cfg.summary.bands : std::vector<std::string>{};
  if (!bands.empty() && snapshots.size() < 100) {
    log << "warning: credible bands from only " << snapshots.size() << " snapshots\n";
  }
  for (const auto& name : bands) {
    const Functional f = Functional::parse(name);
    const CredibleBands b = credible_bands(snapshots, f, cfg.summary.band_level, time_grid, freq_grid);
    write_grid_csv(dir / band_file_name(f, false), b.lower);
    write_grid_csv(dir / band_file_name(f, true), b.upper);
  }

  const ChangepointPosterior cp = changepoint_posterior(snapshots, cfg.prior.max_segments, length);
  json m_values = json::array();
  for (int k = 1; k <= cfg.prior.max_segments; ++k) m_values.push_back(k);
  write_json(dir / "pm.json",
             {{"M", cfg.prior.max_segments}, {"m", m_values}, {"probability", cp.pm}, {"mode", cp.mode_m()}});
  json entries = json::array();
  for (const auto& h : cp.ploc) {
    entries.push_back({{"m", h.m}, {"q", h.q}, {"support", h.support}, {"probability", h.probability},
                       {"mode", h.mode()}});
  }
  write_json(dir / "ploc.json", {{"T", length}, {"entries", entries}});
}

void write_truth(const ProcessSpec& spec, const RunConfig& cfg, const fs::path& dir) {
  const auto time_grid = summary_time_grid(cfg.summary, spec.length);
  const auto freq_grid = summary_freq_grid(cfg.summary);
  const SpectrumGrid truth = true_spectrum_grid(spec, time_grid, freq_grid);
  fs::create_directories(dir);
  for (int j = 0; j < spec.dim; ++j) {
    for (const Functional f : {Functional::spectrum(j), Functional::log_spectrum(j)}) {
      write_grid_csv(dir / grid_file_name(f), functional_grid(truth, f));
    }
  }
  for (int k = 0; k < spec.dim; ++k) {
    for (int j = k + 1; j < spec.dim; ++j) {
      const Functional f = Functional::coherence(j, k);
      write_grid_csv(dir / grid_file_name(f), functional_grid(truth, f));
    }
  }
}

std::vector<std::pair<std::string, double>> ase_table(const fs::path& estimate_dir,
                                                      const fs::path& truth_dir) {
  if (!fs::is_directory(estimate_dir)) throw DataError("missing directory " + estimate_dir.string());
  if (!fs::is_directory(truth_dir)) throw DataError("missing directory " + truth_dir.string());
  std::vector<std::pair<std::string, double>> table;
  for (const Functional& f : standard_functionals(static_cast<int>(kMaxDim))) {
    const fs::path est = estimate_dir / grid_file_name(f);
    const fs::path tru = truth_dir / grid_file_name(f);
    if (!fs::exists(est) || !fs::exists(tru)) continue;
    try {
      table.emplace_back(f.name(), ase(read_grid_csv(est), read_grid_csv(tru)));
    } catch (const InvalidArgument& e) {
      throw DataError(f.name() + ": " + e.what());
    }
  }
  if (table.empty()) throw DataError("no matching grids in " + estimate_dir.string());
  return table;
}

int cmd_analyze(RunConfig cfg, std::ostream& out) {
  require_output(cfg);
  std::optional<ProcessSpec> spec;
  std::optional<MultivariateSeries> data;
  int length = 0;
  int dim = 0;
  if (cfg.generator) {
    spec = process_by_name(cfg.generator->name, cfg.generator->length, cfg.generator->scale);
    length = spec->length;
    dim = spec->dim;
  } else {
    if (cfg.input.empty()) throw ConfigError("either input or generator is required");
    data = load_csv(cfg.input, cfg.prior.n_min);
    length = data->length();
    dim = data->dim();
  }
  resolve_config(cfg, length, dim);
  const fs::path root(cfg.output);
  fs::create_directories(root);
  write_json(root / "manifest.json", config_to_json(cfg));

  std::vector<std::vector<std::pair<std::string, double>>> ase_by_rep(cfg.replicates);
  std::mutex log_mutex;
  parallel_replicates(cfg.replicates, cfg.jobs, [&](int r) {
    const fs::path dir = replicate_dir(root, cfg.replicates, r);
    fs::create_directories(dir);
    MultivariateSeries series;
    if (spec) {
      Rng rng(cfg.generator->seed + static_cast<std::uint64_t>(r));
      series = spec->kind == ProcessSpec::Kind::kVar
                   ? gen_piecewise_var(rng, cfg.generator->scale, cfg.prior.n_min)
                   : simulate(*spec, rng);
      write_series_csv(dir / "series.csv", series);
      write_truth(*spec, cfg, dir / "truth");
    } else {
      series = *data;
    }
    SamplerConfig sampler = cfg.sampler;
    sampler.seed += static_cast<std::uint64_t>(r);
    const ChainResult chain = run_chain(series, cfg.prior, sampler);
    std::ostringstream log;
    write_summaries(chain.snapshots, cfg, length, dim, dir, log);
    write_json(dir / "diagnostics.json", diagnostics_json(chain, sampler));
    write_json(dir / "timing.json", timing_json(chain, sampler.iterations));
    if (cfg.dump_snapshots) {
      write_snapshots(dir / "snapshots.jsonl", chain.snapshots, length, dim, cfg.prior.basis_size);
    }
    if (spec) {
      ase_by_rep[r] = ase_table(dir, dir / "truth");
      write_json(dir / "ase.json", ase_json(ase_by_rep[r]));
    }
    std::lock_guard lock(log_mutex);
    out << log.str() << "replicate " << r + 1 << "/" << cfg.replicates << ": "
        << chain.snapshots.size() << " snapshots, " << chain.seconds << " s -> " << dir.string()
        << '\n';
  });

  if (spec && cfg.replicates > 1) {
    json summary = json::object();
    for (std::size_t i = 0; i < ase_by_rep.front().size(); ++i) {
      double sum = 0.0;
      double sum2 = 0.0;
      for (const auto& table : ase_by_rep) {
        sum += table[i].second;
        sum2 += table[i].second * table[i].second;
      }
      const double n = static_cast<double>(ase_by_rep.size());
      const double mean = sum / n;
      const double var = n > 1 ? std::max(0.0, (sum2 - n * mean * mean) / (n - 1)) : 0.0;
      summary[ase_by_rep.front()[i].first] = {{"mean", mean}, {"sd", std::sqrt(var)}};
    }
    write_json(root / "ase_summary.json", summary);
  }
  return kExitOk;
}

int cmd_simulate(RunConfig cfg, std::ostream& out) {
  require_output(cfg);
  if (!cfg.generator) throw ConfigError("simulate needs a generator");
  const ProcessSpec spec =
      process_by_name(cfg.generator->name, cfg.generator->length, cfg.generator->scale);
  resolve_config(cfg, spec.length, spec.dim);
  const fs::path root(cfg.output);
  fs::create_directories(root);
  write_json(root / "manifest.json", config_to_json(cfg));
  for (int r = 0; r < cfg.replicates; ++r) {
    const fs::path dir = replicate_dir(root, cfg.replicates, r);
    Rng rng(cfg.generator->seed + static_cast<std::uint64_t>(r));
    const MultivariateSeries series = spec.kind == ProcessSpec::Kind::kVar
                                          ? gen_piecewise_var(rng, cfg.generator->scale, cfg.prior.n_min)
                                          : simulate(spec, rng);
    write_series_csv(dir / "series.csv", series);
    write_truth(spec, cfg, dir);
    out << "wrote " << (dir / "series.csv").string() << '\n';
  }
  return kExitOk;
}

int cmd_ase(const fs::path& estimate_dir, const fs::path& truth_dir, std::ostream& out) {
  const auto table = ase_table(estimate_dir, truth_dir);
  out << "functional  ASE_x100\n";
  char line[64];
  for (const auto& [name, value] : table) {
    std::snprintf(line, sizeof line, "%-10s  %.4f\n", name.c_str(), 100.0 * value);
    out << line;
  }
  return kExitOk;
}

int cmd_summarize(const fs::path& snapshot_dump, RunConfig cfg, std::ostream& out) {
  require_output(cfg);
  const auto snapshots = read_snapshots(snapshot_dump);
  if (snapshots.empty()) throw DataError(snapshot_dump.string() + ": no snapshots");
  const int length = snapshots.front().partition.length();
  const int components = static_cast<int>(snapshots.front().coeffs.runs.size());
  const int dim = static_cast<int>(std::lround(std::sqrt(components)));
  resolve_config(cfg, length, dim);
  write_summaries(snapshots, cfg, length, dim, cfg.output, out);
  out << "summarized " << snapshots.size() << " snapshots -> " << cfg.output << '\n';
  return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian adaptive time-varying spectral analysis of multivariate series"};
  app.require_subcommand(1);

  std::string config_path;
  std::string input;
  std::string out_dir;
  std::uint64_t seed = 0;
  int jobs = 0;
  int replicates = 0;
  bool dump = false;
  auto* analyze = app.add_subcommand("analyze", "sample the posterior and write summaries");
  analyze->add_option("--config", config_path, "JSON run configuration");
  analyze->add_option("--input", input, "CSV series (overrides config)");
  analyze->add_option("--seed", seed, "sampler seed");
  analyze->add_option("--jobs", jobs, "replicates run in parallel");
  analyze->add_option("--replicates", replicates, "number of replicates");
  analyze->add_option("--out", out_dir, "output directory");
  analyze->add_flag("--dump-snapshots", dump, "write snapshots.jsonl");

  std::string generator;
  int length = 0;
  double scale = 0.0;
  auto* sim = app.add_subcommand("simulate", "write a simulated series and its true spectra");
  sim->add_option("--config", config_path, "JSON run configuration");
  sim->add_option("--generator", generator, "piecewise_vma | slowvarying_vma | piecewise_var");
  sim->add_option("--length", length, "series length");
  sim->add_option("--scale", scale, "time scale of piecewise_var");
  sim->add_option("--seed", seed, "generator seed");
  sim->add_option("--out", out_dir, "output directory");

  std::string estimate_dir;
  std::string truth_dir;
  auto* ase_cmd = app.add_subcommand("ase", "average squared error of estimate grids");
  ase_cmd->add_option("estimate", estimate_dir, "directory with estimate grids")->required();
  ase_cmd->add_option("truth", truth_dir, "directory with truth grids")->required();

  std::string dump_path;
  auto* summarize = app.add_subcommand("summarize", "recompute summaries from a snapshot dump");
  summarize->add_option("snapshots", dump_path, "snapshots.jsonl")->required();
  summarize->add_option("--config", config_path, "manifest.json of the run");
  summarize->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  auto default_out = [&](const char* command) {
    const char* root = std::getenv("TVSPEC_OUTPUT_ROOT");
    return (fs::path(root && *root ? root : ".") / command).string();
  };

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (!out_dir.empty()) cfg.output = out_dir;
    if (jobs > 0) cfg.jobs = jobs;

    if (analyze->parsed()) {
      if (!input.empty()) {
        cfg.input = input;
        cfg.generator.reset();
      }
      if (seed > 0) cfg.sampler.seed = seed;
      if (replicates > 0) cfg.replicates = replicates;
      if (dump) cfg.dump_snapshots = true;
      if (cfg.output.empty()) cfg.output = default_out("analyze");
      return cmd_analyze(cfg, out);
    }
    if (sim->parsed()) {
      if (!generator.empty()) {
        if (!cfg.generator) cfg.generator = GeneratorConfig{};
        cfg.generator->name = generator;
      }
      if (cfg.generator) {
        if (length > 0) cfg.generator->length = length;
        if (scale > 0.0) cfg.generator->scale = scale;
        if (seed > 0) cfg.generator->seed = seed;
      }
      if (cfg.output.empty()) cfg.output = default_out("simulate");
      return cmd_simulate(cfg, out);
    }
    if (ase_cmd->parsed()) return cmd_ase(estimate_dir, truth_dir, out);
    if (cfg.output.empty()) cfg.output = default_out("summarize");
    return cmd_summarize(dump_path, cfg, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace tvspec

#include "tvspec/config.hpp"

#include "tvspec/error.hpp"
#include "tvspec/posterior.hpp"

#include <algorithm>
#include <set>

namespace tvspec {
namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!keys.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

}  // namespace

RunConfig config_from_json(const json& value) {
  RunConfig cfg;
  check_keys(value, "config",
             {"input", "generator", "prior", "sampler", "summary", "output", "replicates", "jobs",
              "dump_snapshots"});
  read(value, "input", cfg.input, "config");
  read(value, "output", cfg.output, "config");
  read(value, "replicates", cfg.replicates, "config");
  read(value, "jobs", cfg.jobs, "config");
  read(value, "dump_snapshots", cfg.dump_snapshots, "config");

  if (value.contains("generator") && !value.at("generator").is_null()) {
    const json& g = value.at("generator");
    check_keys(g, "generator", {"name", "length", "scale", "seed"});
    GeneratorConfig gen;
    read(g, "name", gen.name, "generator");
    read(g, "length", gen.length, "generator");
    read(g, "scale", gen.scale, "generator");
    read(g, "seed", gen.seed, "generator");
    cfg.generator = gen;
  }
  if (value.contains("prior")) {
    const json& p = value.at("prior");
    check_keys(p, "prior", {"n_min", "S", "kappa", "sigma_alpha2", "M"});
    read(p, "n_min", cfg.prior.n_min, "prior");
    read(p, "S", cfg.prior.basis_size, "prior");
    read(p, "kappa", cfg.prior.kappa, "prior");
    read(p, "sigma_alpha2", cfg.prior.sigma_alpha2, "prior");
    if (p.contains("M") && !p.at("M").is_null()) {
      read(p, "M", cfg.prior.max_segments, "prior");
      cfg.max_segments_given = true;
    }
  }
  if (value.contains("sampler")) {
    const json& s = value.at("sampler");
    check_keys(s, "sampler",
               {"iterations", "burn_in", "thin", "prob_birth", "hmc", "relocate_local_prob",
                "relocate_window", "change_set_moves", "initial_search", "newton_steps", "seed",
                "consistency_check_every"});
    SamplerConfig& sc = cfg.sampler;
    read(s, "iterations", sc.iterations, "sampler");
    read(s, "burn_in", sc.burn_in, "sampler");
    read(s, "thin", sc.thin, "sampler");
    read(s, "prob_birth", sc.prob_birth, "sampler");
    read(s, "relocate_local_prob", sc.relocate_local_prob, "sampler");
    read(s, "relocate_window", sc.relocate_window, "sampler");
    read(s, "change_set_moves", sc.change_set_moves, "sampler");
    read(s, "initial_search", sc.initial_search, "sampler");
    read(s, "newton_steps", sc.newton_steps, "sampler");
    read(s, "seed", sc.seed, "sampler");
    read(s, "consistency_check_every", sc.consistency_check_every, "sampler");
    if (s.contains("hmc")) {
      const json& h = s.at("hmc");
      check_keys(h, "sampler.hmc",
                 {"leapfrog_steps", "step_size", "step_size_jitter", "adapt", "target_accept"});
      read(h, "leapfrog_steps", sc.hmc.leapfrog_steps, "sampler.hmc");
      read(h, "step_size", sc.hmc.step_size, "sampler.hmc");
      read(h, "step_size_jitter", sc.hmc.step_size_jitter, "sampler.hmc");
      read(h, "adapt", sc.hmc.adapt, "sampler.hmc");
      read(h, "target_accept", sc.hmc.target_accept, "sampler.hmc");
    }
  }
  if (value.contains("summary")) {
    const json& s = value.at("summary");
    check_keys(s, "summary", {"time_points", "freq_points", "band_level", "bands"});
    read(s, "time_points", cfg.summary.time_points, "summary");
    read(s, "freq_points", cfg.summary.freq_points, "summary");
    read(s, "band_level", cfg.summary.band_level, "summary");
    if (s.contains("bands") && !s.at("bands").is_null()) {
      std::vector<std::string> bands;
      read(s, "bands", bands, "summary");
      cfg.summary.bands = bands;
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  json value;
  try {
    value = read_json(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(value);
}

json config_to_json(const RunConfig& cfg) {
  json out;
  out["input"] = cfg.input;
  if (cfg.generator) {
    out["generator"] = {{"name", cfg.generator->name},
                        {"length", cfg.generator->length},
                        {"scale", cfg.generator->scale},
                        {"seed", cfg.generator->seed}};
  } else {
    out["generator"] = nullptr;
  }
  out["prior"] = {{"n_min", cfg.prior.n_min},
                  {"S", cfg.prior.basis_size},
                  {"kappa", cfg.prior.kappa},
                  {"sigma_alpha2", cfg.prior.sigma_alpha2},
                  {"M", cfg.prior.max_segments}};
  const SamplerConfig& s = cfg.sampler;
  out["sampler"] = {{"iterations", s.iterations},
                    {"burn_in", s.burn_in},
                    {"thin", s.thin},
                    {"prob_birth", s.prob_birth},
                    {"relocate_local_prob", s.relocate_local_prob},
                    {"relocate_window", s.relocate_window},
                    {"change_set_moves", s.change_set_moves},
                    {"initial_search", s.initial_search},
                    {"newton_steps", s.newton_steps},
                    {"seed", s.seed},
                    {"consistency_check_every", s.consistency_check_every},
                    {"hmc",
                     {{"leapfrog_steps", s.hmc.leapfrog_steps},
                      {"step_size", s.hmc.step_size},
                      {"step_size_jitter", s.hmc.step_size_jitter},
                      {"adapt", s.hmc.adapt},
                      {"target_accept", s.hmc.target_accept}}}};
  out["summary"] = {{"time_points", cfg.summary.time_points},
                    {"freq_points", cfg.summary.freq_points},
                    {"band_level", cfg.summary.band_level}};
  out["summary"]["bands"] = cfg.summary.bands ? json(*cfg.summary.bands) : json(nullptr);
  out["replicates"] = cfg.replicates;
  out["dump_snapshots"] = cfg.dump_snapshots;
  return out;
}

void resolve_config(RunConfig& cfg, int length, int dim) {
  if (cfg.replicates < 1) throw ConfigError("replicates must be at least 1");
  if (cfg.jobs < 1) throw ConfigError("jobs must be at least 1");
  if (cfg.prior.n_min < 1) throw ConfigError("n_min must be positive");
  if (!cfg.max_segments_given) {
    cfg.prior.max_segments = std::clamp(length / cfg.prior.n_min, 1, 10);
    cfg.max_segments_given = true;
  }
  cfg.prior.validate(length);
  cfg.sampler.validate();
  if (cfg.summary.time_points < 0) throw ConfigError("summary.time_points must be >= 0");
  if (cfg.summary.freq_points < 2) throw ConfigError("summary.freq_points must be at least 2");
  if (!(cfg.summary.band_level > 0.0 && cfg.summary.band_level < 1.0)) {
    throw ConfigError("summary.band_level must be in (0, 1)");
  }
  if (!cfg.summary.bands) {
    std::vector<std::string> bands;
    for (int j = 0; j < dim; ++j) bands.push_back(Functional::log_spectrum(j).name());
    for (int k = 0; k < dim; ++k)
      for (int j = k + 1; j < dim; ++j) bands.push_back(Functional::coherence(j, k).name());
    cfg.summary.bands = bands;
  }
  for (const auto& name : *cfg.summary.bands) {
    Functional f;
    try {
      f = Functional::parse(name);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    if (f.row >= dim || f.col >= dim) throw ConfigError("band functional out of range: " + name);
  }
}

std::vector<double> summary_time_grid(const SummaryConfig& summary, int length) {
  return uniform_time_grid(summary.time_points > 0 ? summary.time_points : length);
}

std::vector<double> summary_freq_grid(const SummaryConfig& summary) {
  return uniform_freq_grid(summary.freq_points);
}

}  // namespace tvspec

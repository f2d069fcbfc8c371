#pragma once

#include <cstdlib>
#include <filesystem>
#include <set>

#include "json_io.hpp"
#include "models.hpp"
#include "version.hpp"

namespace hypres {

struct RunConfig {
  ModelSystemSpec system;
  double energy = 0.0;          // primary analysis energy
  std::vector<double> energies; // continuation grid; may be empty
  OrbitOptions orbit;
  HypothesisOptions hyp;
  ResonanceQuery query;
  bool has_resonance_query = false;
  std::string cache_path_config; // from the config file, may be empty
  std::string config_hash;       // canonical-form content hash
};

inline ojson read_json_file(const std::string& path) {
  const auto text = jsonio::read_text_file(path);
  require(text.has_value(), Error::Kind::io, "cannot read " + path);
  try {
    return ojson::parse(*text);
  } catch (const std::exception& e) {
    raise(Error::Kind::config, "config parse error in " + path + ": " + e.what());
  }
}

namespace detail {

inline void apply_integrator(const ojson& j, IntegrateOptions& o) {
  if (j.contains("atol")) o.atol = j.at("atol").get<double>();
  if (j.contains("rtol")) o.rtol = j.at("rtol").get<double>();
  if (j.contains("initial_step")) o.initial_step = j.at("initial_step").get<double>();
  if (j.contains("max_step")) o.max_step = j.at("max_step").get<double>();
  if (j.contains("max_steps")) o.max_steps = j.at("max_steps").get<long>();
  if (j.contains("symplectic_mode")) o.symplectic_mode = j.at("symplectic_mode").get<bool>();
  if (j.contains("symplectic_step")) o.symplectic_step = j.at("symplectic_step").get<double>();
}

inline void apply_orbit(const ojson& j, OrbitOptions& o) {
  if (j.contains("shooting_segments")) o.shooting_segments = j.at("shooting_segments").get<int>();
  if (j.contains("max_iterations")) o.max_iterations = j.at("max_iterations").get<int>();
  if (j.contains("damped_trials")) o.damped_trials = j.at("damped_trials").get<int>();
  if (j.contains("residual_target")) o.residual_target = j.at("residual_target").get<double>();
  if (j.contains("samples")) o.samples = j.at("samples").get<int>();
  if (j.contains("max_period")) o.max_period = j.at("max_period").get<double>();
  if (j.contains("period_hint")) o.period_hint = j.at("period_hint").get<double>();
}

inline void apply_hypotheses(const ojson& j, HypothesisOptions& o) {
  if (j.contains("K_bound")) o.K_bound = j.at("K_bound").get<int>();
  if (j.contains("tolerance")) o.tolerance = j.at("tolerance").get<double>();
  if (j.contains("rate_floor")) o.rate_floor = j.at("rate_floor").get<double>();
  if (j.contains("field_floor")) o.field_floor = j.at("field_floor").get<double>();
}

inline void apply_resonances(const ojson& j, ResonanceQuery& q) {
  if (j.contains("h")) q.h = j.at("h").get<double>();
  if (j.contains("delta")) q.delta = j.at("delta").get<double>();
  if (j.contains("depth_constant")) q.depth_constant = j.at("depth_constant").get<double>();
  if (j.contains("alpha_max")) q.alpha_max = j.at("alpha_max").get<int>();
  if (j.contains("maslov_index")) q.maslov_index = j.at("maslov_index").get<double>();
  if (j.contains("include_h1")) q.include_h1 = j.at("include_h1").get<bool>();
  if (j.contains("window_center")) q.window_center = j.at("window_center").get<double>();
  if (j.contains("window_half_width")) q.window_half_width = j.at("window_half_width").get<double>();
  if (j.contains("anchor_indices"))
    for (const auto& k : j.at("anchor_indices")) q.anchor_indices.push_back(k.get<int>());
}

} // namespace detail

// Canonical identity of a system: kind plus sorted parameters, hashed from
// the deterministic serialization. Keys the orbit cache.
inline std::string system_hash(const ModelSystemSpec& spec) {
  ojson j;
  j["kind"] = spec.kind;
  ojson params;
  for (const auto& [k, v] : spec.parameters) params[k] = v; // std::map is sorted
  j["parameters"] = std::move(params);
  return jsonio::hash_hex(jsonio::dump_deterministic(j, 0));
}

inline RunConfig parse_run_config(const std::string& path) {
  const ojson j = read_json_file(path);
  RunConfig cfg;
  cfg.config_hash = jsonio::hash_hex(jsonio::dump_deterministic(j, 0));

  require(j.contains("system") && j.at("system").is_object(), Error::Kind::config,
          "config needs a 'system' object");
  const auto& sys = j.at("system");
  require(sys.contains("kind"), Error::Kind::config, "system needs a 'kind'");
  cfg.system.kind = sys.at("kind").get<std::string>();
  if (sys.contains("parameters"))
    for (const auto& [k, v] : sys.at("parameters").items()) {
      require(v.is_number(), Error::Kind::config, "system parameter '" + k + "' must be a number");
      cfg.system.parameters[k] = v.get<double>();
    }

  if (j.contains("energies")) {
    for (const auto& e : j.at("energies")) cfg.energies.push_back(e.get<double>());
    std::sort(cfg.energies.begin(), cfg.energies.end());
  }
  if (j.contains("energy"))
    cfg.energy = j.at("energy").get<double>();
  else if (!cfg.energies.empty())
    cfg.energy = cfg.energies[cfg.energies.size() / 2];
  else
    raise(Error::Kind::config, "config needs 'energy' or a nonempty 'energies' grid");

  // strongly unstable orbits want the default split into several segments
  cfg.orbit.shooting_segments = (cfg.system.kind == "coulomb_stark") ? 4 : 1;
  if (j.contains("integrator")) detail::apply_integrator(j.at("integrator"), cfg.orbit.integ);
  if (j.contains("orbit")) detail::apply_orbit(j.at("orbit"), cfg.orbit);
  if (j.contains("hypotheses")) detail::apply_hypotheses(j.at("hypotheses"), cfg.hyp);
  if (j.contains("resonances")) {
    cfg.has_resonance_query = true;
    detail::apply_resonances(j.at("resonances"), cfg.query);
  }
  if (j.contains("cache_path")) cfg.cache_path_config = j.at("cache_path").get<std::string>();
  return cfg;
}

// Precedence: --cache flag, then HYPRES_CACHE, then the config file, then
// <out>/orbit_cache.json.
inline std::string resolve_cache_path(const std::string& flag_value, const RunConfig& cfg,
                                      const std::string& out_dir) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("HYPRES_CACHE"); env != nullptr && *env != '\0')
    return std::string(env);
  if (!cfg.cache_path_config.empty()) return cfg.cache_path_config;
  return (std::filesystem::path(out_dir) / "orbit_cache.json").string();
}

struct AnalysisParts {
  bool want_orbit = false;
  bool want_family = false;
  bool want_floquet = false;
  bool want_hypotheses = false;
  bool want_resonances = false;
};

struct AnalysisResult {
  std::string sys_hash;
  PeriodicOrbit orbit;
  bool have_orbit = false;

  OrbitFamily family;
  bool have_family = false;

  Mat monodromy;
  double monodromy_symplectic_residual = 0.0;
  ReducedMonodromy reduced;
  FloquetData floquet;
  bool have_floquet = false;

  HypothesisReport hypotheses;
  bool have_hypotheses = false;

  std::vector<ResonanceString> strings;
  StringReport strings_summary;
  bool have_strings = false;

  std::vector<std::string> cache_keys; // sorted, as used
  std::string cache_path;
};

namespace detail {

inline PeriodicOrbit obtain_orbit(const HamiltonianSystem& sys, double E, const RunConfig& cfg,
                                  const std::string& shash, jsonio::OrbitCache& cache,
                                  std::set<std::string>& keys) {
  keys.insert(jsonio::OrbitCache::key_for(shash, E));
  if (auto hit = cache.lookup(shash, E)) return *hit;
  const auto seed = model_seed(sys, E);
  require(seed.has_value(), Error::Kind::config,
          "no built-in starting guess for system '" + sys.kind() + "'");
  PeriodicOrbit o = find_periodic_orbit(sys, *seed, E, cfg.orbit);
  cache.store(shash, E, o);
  return o;
}

inline OrbitFamily obtain_family(const HamiltonianSystem& sys, const RunConfig& cfg,
                                 const std::string& shash, jsonio::OrbitCache& cache,
                                 std::set<std::string>& keys) {
  require(cfg.energies.size() >= 2, Error::Kind::config,
          "continuation needs an 'energies' grid with at least two points");
  for (double E : cfg.energies) keys.insert(jsonio::OrbitCache::key_for(shash, E));

  std::vector<PeriodicOrbit> cached;
  bool all = true;
  for (double E : cfg.energies) {
    if (auto hit = cache.lookup(shash, E))
      cached.push_back(*hit);
    else {
      all = false;
      break;
    }
  }
  if (all) {
    OrbitFamily fam;
    fam.orbits = std::move(cached);
    rebuild_family_tables(fam);
    return fam;
  }

  const double E0 = cfg.energies[cfg.energies.size() / 2];
  const PeriodicOrbit seed = obtain_orbit(sys, E0, cfg, shash, cache, keys);
  OrbitFamily fam = continue_family(sys, seed, cfg.energies, cfg.orbit);
  for (const auto& o : fam.orbits) cache.store(shash, o.energy, o);
  return fam;
}

inline Mat orbit_monodromy(const HamiltonianSystem& sys, const PeriodicOrbit& o,
                           const IntegrateOptions& io, double& residual) {
  const auto vr = integrate_variational(sys, o.ref_point, o.period, io);
  residual = vr.symplectic_residual;
  return vr.fundamental_matrix;
}

inline std::vector<double> orbit_field_norms(const HamiltonianSystem& sys, const PeriodicOrbit& o) {
  std::vector<double> out;
  for (const auto& s : o.samples.states) out.push_back(hamilton_vector_field(sys, s.flat()).norm());
  return out;
}

// One-period time integral of the subprincipal term along the stored samples.
inline double h1_time_integral(const HamiltonianSystem& sys, const PeriodicOrbit& o) {
  const auto& st = o.samples.states;
  const size_t N = st.size();
  require(N >= 3, Error::Kind::config, "subprincipal quadrature needs samples");
  const double dt = o.samples.times[1] - o.samples.times[0];
  double s = 0.5 * (sys.h1(st.front().flat()) + sys.h1(st.back().flat()));
  for (size_t i = 1; i + 1 < N; ++i) s += sys.h1(st[i].flat());
  return s * dt;
}

// Per-return exponent rows for every family member, expanded with
// multiplicity so the table always has n-1 columns.
inline ExponentTable family_exponent_table(const HamiltonianSystem& sys, const OrbitFamily& fam,
                                           const IntegrateOptions& io) {
  std::vector<double> Es;
  std::vector<std::vector<cplx>> rows;
  for (const auto& o : fam.orbits) {
    double resid = 0.0;
    const Mat M = orbit_monodromy(sys, o, io, resid);
    const Vec z = o.ref_point.flat();
    const auto red = reduce_monodromy(M, hamilton_vector_field(sys, z), sys.gradient(z));
    const Mat B = symplectic_log(red.reduced); // per return
    const auto exps = floquet_exponents(B);
    std::vector<cplx> row;
    for (const auto& e : exps)
      for (int r = 0; r < e.multiplicity; ++r) row.push_back(e.value);
    Es.push_back(o.energy);
    rows.push_back(std::move(row));
  }
  return ExponentTable(std::move(Es), std::move(rows));
}

} // namespace detail

// Computes everything the requested report parts need, exactly once. The
// reporting layer below only serializes this struct.
inline AnalysisResult run_analysis(const HamiltonianSystem& sys, const RunConfig& cfg,
                                   jsonio::OrbitCache& cache, const AnalysisParts& parts) {
  AnalysisResult res;
  res.sys_hash = system_hash(cfg.system);
  res.cache_path = cache.path();
  std::set<std::string> keys;

  if (parts.want_orbit || parts.want_floquet || parts.want_hypotheses)
    res.orbit = detail::obtain_orbit(sys, cfg.energy, cfg, res.sys_hash, cache, keys),
    res.have_orbit = true;

  if (parts.want_family || parts.want_resonances)
    res.family = detail::obtain_family(sys, cfg, res.sys_hash, cache, keys), res.have_family = true;

  if (parts.want_floquet || parts.want_hypotheses) {
    res.monodromy = detail::orbit_monodromy(sys, res.orbit, cfg.orbit.integ,
                                            res.monodromy_symplectic_residual);
    const Vec z = res.orbit.ref_point.flat();
    res.reduced = reduce_monodromy(res.monodromy, hamilton_vector_field(sys, z), sys.gradient(z));
    res.floquet = analyze_floquet(res.reduced.reduced, res.orbit.period);
    res.have_floquet = true;
  }

  if (parts.want_hypotheses) {
    res.hypotheses = check_hypotheses(res.floquet, res.orbit.period, sys.n() - 1,
                                      detail::orbit_field_norms(sys, res.orbit), cfg.hyp);
    res.have_hypotheses = true;
  }

  if (parts.want_resonances) {
    require(cfg.has_resonance_query, Error::Kind::config,
            "config has no 'resonances' section");
    require(res.family.orbits.size() >= 2, Error::Kind::config,
            "resonances need at least two family orbits for the interpolants");
    ResonanceQuery q = cfg.query;
    const double Elo = res.family.orbits.front().energy;
    const double Ehi = res.family.orbits.back().energy;
    if (!std::isfinite(q.window_center)) q.window_center = 0.5 * (Elo + Ehi);
    if (!std::isfinite(q.window_half_width))
      // the default window means the whole family; pad the half-span so the
      // endpoint anchors survive the membership check despite rounding
      q.window_half_width = 0.5 * (Ehi - Elo) * (1.0 + 1e-12) +
                            1e-12 * std::max(1.0, std::abs(q.window_center));

    const auto table = detail::family_exponent_table(sys, res.family, cfg.orbit.integ);

    if (q.include_h1 && sys.has_h1()) {
      // anchor correction depends on E through the orbit; resolve each index
      // by a short fixed point on the tabulated one-period integral
      std::vector<double> Es, I1;
      for (const auto& o : res.family.orbits) {
        Es.push_back(o.energy);
        I1.push_back(detail::h1_time_integral(sys, o));
      }
      const CubicHermite I1_of_E = CubicHermite::from_data(Es, I1);
      std::vector<int> ks = q.anchor_indices;
      require(!ks.empty(), Error::Kind::config,
              "include_h1 needs explicit anchor_indices");
      for (int k : ks) {
        ResonanceQuery qk = q;
        qk.anchor_indices = {k};
        qk.h1_time_integral = I1_of_E(q.window_center);
        for (int round = 0; round < 3; ++round) {
          const double Ek = longitudinal_anchor(res.family.S_of_E, res.family.T_of_E, k, qk);
          qk.h1_time_integral = I1_of_E(std::clamp(Ek, Es.front(), Es.back()));
        }
        auto part = resonance_strings(res.family.S_of_E, res.family.T_of_E, table, qk);
        for (auto& s : part) res.strings.push_back(std::move(s));
      }
    } else {
      res.strings = resonance_strings(res.family.S_of_E, res.family.T_of_E, table, q);
    }
    res.strings_summary = string_report(res.strings, q, sys.n());
    res.have_strings = true;
  }

  for (const auto& k : keys) res.cache_keys.push_back(k);
  cache.save();
  return res;
}

// ---- report fragments; serialization only, no computation ----

inline ojson orbit_summary_json(const PeriodicOrbit& o) {
  ojson j;
  j["energy"] = o.energy;
  j["period"] = o.period;
  j["action"] = o.action;
  j["closure_residual"] = o.closure_residual;
  j["energy_drift"] = o.samples.energy_drift;
  j["ref_point"] = jsonio::point_to_json(o.ref_point);
  j["section_normal"] = jsonio::vec_to_json(o.section_normal);
  return j;
}

inline ojson family_json(const OrbitFamily& fam) {
  ojson j;
  ojson rows = ojson::array();
  for (const auto& o : fam.orbits) {
    ojson r;
    r["energy"] = o.energy;
    r["period"] = o.period;
    r["action"] = o.action;
    r["closure_residual"] = o.closure_residual;
    rows.push_back(std::move(r));
  }
  j["orbits"] = std::move(rows);
  j["complete"] = fam.complete;
  ojson failed = ojson::array();
  for (double e : fam.failed_energies) failed.push_back(e);
  j["failed_energies"] = std::move(failed);
  j["action_slope_residual"] = fam.action_slope_residual;
  return j;
}

inline ojson resonances_json(const AnalysisResult& res, const ResonanceQuery& q) {
  ojson j;
  j["query"] = ojson{{"h", q.h},
                     {"delta", q.delta},
                     {"depth_constant", q.depth_constant},
                     {"alpha_max", q.alpha_max},
                     {"maslov_index", q.maslov_index},
                     {"include_h1", q.include_h1}};
  ojson strings = ojson::array();
  for (const auto& s : res.strings) strings.push_back(jsonio::string_to_json(s));
  j["strings"] = std::move(strings);
  j["summary"] = jsonio::string_report_to_json(res.strings_summary);
  return j;
}

inline ojson provenance_json(const RunConfig& cfg, const AnalysisResult& res) {
  ojson j;
  j["tool"] = "hypres";
  j["version"] = version_string;
  j["config_hash"] = cfg.config_hash;
  j["system_hash"] = res.sys_hash;
  ojson cachej;
  cachej["path"] = res.cache_path;
  ojson keys = ojson::array();
  for (const auto& k : res.cache_keys) keys.push_back(k);
  cachej["keys"] = std::move(keys);
  j["cache"] = std::move(cachej);
  j["tolerances"] = ojson{{"integrator_atol", cfg.orbit.integ.atol},
                          {"integrator_rtol", cfg.orbit.integ.rtol},
                          {"orbit_residual_target", cfg.orbit.residual_target},
                          {"lattice_K_bound", cfg.hyp.K_bound},
                          {"lattice_tolerance", cfg.hyp.tolerance}};
  return j;
}

inline ojson build_report(const RunConfig& cfg, const AnalysisResult& res) {
  ojson j;
  j["schema_version"] = report_schema_version;
  j["provenance"] = provenance_json(cfg, res);
  ojson sysj;
  sysj["kind"] = cfg.system.kind;
  ojson params;
  for (const auto& [k, v] : cfg.system.parameters) params[k] = v;
  sysj["parameters"] = std::move(params);
  j["system"] = std::move(sysj);
  if (res.have_orbit) j["orbit"] = orbit_summary_json(res.orbit);
  if (res.have_family) j["family"] = family_json(res.family);
  if (res.have_floquet) {
    j["floquet"] = jsonio::floquet_to_json(res.floquet);
    j["floquet"]["monodromy_symplectic_residual"] = res.monodromy_symplectic_residual;
    j["floquet"]["trivial_multiplicity"] = res.reduced.trivial_multiplicity;
  }
  if (res.have_hypotheses) j["hypotheses"] = jsonio::hypotheses_to_json(res.hypotheses);
  if (res.have_strings) {
    ResonanceQuery q = cfg.query; // window defaults were resolved in run_analysis
    j["resonances"] = resonances_json(res, q);
  }
  return j;
}

} // namespace hypres

// hypres: locate closed Hamiltonian orbits, analyze their transverse
// stability, check the standing nonresonance hypotheses, and enumerate
// semiclassical resonance strings. Every subcommand reads one JSON config
// and writes deterministic artifacts into --out.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "hypres/pipeline.hpp"

namespace {

using namespace hypres;

const char* kind_name(Error::Kind k) {
  switch (k) {
    case Error::Kind::config: return "config";
    case Error::Kind::io: return "io";
    case Error::Kind::evaluation: return "evaluation";
    case Error::Kind::integration: return "integration";
    case Error::Kind::convergence: return "convergence";
    case Error::Kind::degeneracy: return "degeneracy";
    case Error::Kind::branch: return "branch";
    case Error::Kind::section: return "section";
    case Error::Kind::range: return "range";
  }
  return "unknown";
}

int exit_code_for(Error::Kind k) {
  switch (k) {
    case Error::Kind::config:
    case Error::Kind::io:
      return 2;
    default:
      return 3; // numerical failure classes
  }
}

void emit_error(bool json_errors, const std::string& kind, const std::string& message) {
  if (json_errors) {
    ojson j;
    j["error"] = ojson{{"kind", kind}, {"message", message}};
    std::cout << jsonio::dump_deterministic(j);
  } else {
    std::cerr << "error (" << kind << "): " << message << "\n";
  }
}

struct Cli {
  std::string config_path;
  std::string out_dir = ".";
  std::string cache_flag;
  bool strict = false;
  bool json_errors = false;
};

void write_out(const Cli& cli, const std::string& name, const std::string& text) {
  const auto p = std::filesystem::path(cli.out_dir) / name;
  jsonio::write_text_file(p.string(), text);
}

ojson document_shell(const RunConfig& cfg, const AnalysisResult& res) {
  ojson j;
  j["schema_version"] = report_schema_version;
  j["provenance"] = provenance_json(cfg, res);
  return j;
}

int run_command(const std::string& cmd, const Cli& cli) {
  RunConfig cfg = parse_run_config(cli.config_path);
  std::filesystem::create_directories(cli.out_dir);
  jsonio::OrbitCache cache(resolve_cache_path(cli.cache_flag, cfg, cli.out_dir));
  const auto sys = build_model(cfg.system);

  AnalysisParts parts;
  if (cmd == "find-orbit") {
    parts.want_orbit = true;
  } else if (cmd == "continue") {
    parts.want_family = true;
  } else if (cmd == "floquet") {
    parts.want_orbit = parts.want_floquet = true;
  } else if (cmd == "check") {
    parts.want_orbit = parts.want_floquet = parts.want_hypotheses = true;
  } else if (cmd == "resonances") {
    parts.want_family = parts.want_resonances = true;
  } else { // report: everything the config supports
    parts.want_orbit = parts.want_floquet = parts.want_hypotheses = true;
    parts.want_family = cfg.energies.size() >= 2;
    parts.want_resonances = cfg.has_resonance_query && cfg.energies.size() >= 2;
  }

  const AnalysisResult res = run_analysis(*sys, cfg, cache, parts);

  if (cmd == "find-orbit") {
    ojson j = document_shell(cfg, res);
    j["orbit"] = jsonio::orbit_to_json(res.orbit);
    write_out(cli, "orbit.json", jsonio::dump_deterministic(j));
    std::ostringstream csv;
    jsonio::write_trajectory_csv(csv, res.orbit.samples);
    write_out(cli, "trajectory.csv", csv.str());
    std::cout << "orbit: E=" << jsonio::num_shortest(res.orbit.energy)
              << " T=" << jsonio::num_shortest(res.orbit.period)
              << " S=" << jsonio::num_shortest(res.orbit.action)
              << " closure=" << jsonio::num_shortest(res.orbit.closure_residual) << "\n";
  } else if (cmd == "continue") {
    ojson j = document_shell(cfg, res);
    j["family"] = family_json(res.family);
    write_out(cli, "family.json", jsonio::dump_deterministic(j));
    std::ostringstream csv;
    jsonio::write_family_csv(csv, res.family);
    write_out(cli, "family.csv", csv.str());
    std::cout << "family: " << res.family.orbits.size() << " orbits"
              << (res.family.complete ? "" : " (incomplete)") << "\n";
  } else if (cmd == "floquet") {
    ojson j = document_shell(cfg, res);
    j["orbit"] = orbit_summary_json(res.orbit);
    j["floquet"] = jsonio::floquet_to_json(res.floquet);
    j["floquet"]["monodromy_symplectic_residual"] = res.monodromy_symplectic_residual;
    j["floquet"]["trivial_multiplicity"] = res.reduced.trivial_multiplicity;
    write_out(cli, "floquet.json", jsonio::dump_deterministic(j));
    std::cout << "floquet: " << res.floquet.exponents.size() << " distinct exponents, hyperbolic dimension "
              << res.floquet.hyperbolic_dimension << "\n";
  } else if (cmd == "check") {
    ojson j = document_shell(cfg, res);
    j["orbit"] = orbit_summary_json(res.orbit);
    j["hypotheses"] = jsonio::hypotheses_to_json(res.hypotheses);
    write_out(cli, "hypotheses.json", jsonio::dump_deterministic(j));
    const auto& h = res.hypotheses;
    std::cout << "hypotheses: principal_type=" << (h.principal_type_ok ? "ok" : "FAIL")
              << " hyperbolic=" << (h.orbit_hyperbolic_ok ? "ok" : "FAIL")
              << " normal_form=" << (h.williamson_ok ? "ok" : "FAIL")
              << " nonresonance=" << (h.nonresonance_ok ? "ok" : "FAIL")
              << " strong=" << (h.strong_nonresonance_ok ? "ok" : "FAIL") << "\n";
  } else if (cmd == "resonances") {
    ojson j = document_shell(cfg, res);
    j["resonances"] = resonances_json(res, cfg.query);
    write_out(cli, "strings.json", jsonio::dump_deterministic(j));
    std::ostringstream csv;
    jsonio::write_strings_csv(csv, res.strings);
    write_out(cli, "strings.csv", csv.str());
    std::cout << "resonances: " << res.strings.size() << " strings, "
              << res.strings_summary.kept_entries << " entries kept, "
              << (res.strings_summary.total_entries - res.strings_summary.kept_entries)
              << " excluded\n";
  } else {
    const ojson j = build_report(cfg, res);
    write_out(cli, "report.json", jsonio::dump_deterministic(j));
    std::cout << "report written to "
              << (std::filesystem::path(cli.out_dir) / "report.json").string() << "\n";
  }

  if (cli.strict && res.have_hypotheses) {
    const auto& h = res.hypotheses;
    std::vector<std::string> failed;
    if (!h.principal_type_ok) failed.push_back("principal_type");
    if (!h.orbit_hyperbolic_ok) failed.push_back("orbit_hyperbolic");
    if (!h.williamson_ok) failed.push_back("transverse_normal_form");
    if (!h.nonresonance_ok) failed.push_back("nonresonance");
    if (!failed.empty()) {
      std::string msg = "strict mode: hypothesis check failed:";
      for (const auto& f : failed) msg += " " + f;
      emit_error(cli.json_errors, "hypothesis", msg);
      return 4;
    }
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"closed-orbit stability and resonance-string toolkit"};
  app.require_subcommand(1);

  Cli cli;
  app.add_option("--config", cli.config_path, "JSON run configuration")->required();
  app.add_option("--out", cli.out_dir, "output directory (default: .)");
  app.add_option("--cache", cli.cache_flag,
                 "orbit cache file (overrides HYPRES_CACHE and the config)");
  app.add_flag("--strict", cli.strict, "exit 4 when a standing hypothesis fails");
  app.add_flag("--json-errors", cli.json_errors, "machine-readable errors on stdout");

  const std::vector<std::pair<std::string, std::string>> cmds = {
      {"find-orbit", "locate one closed orbit at the configured energy"},
      {"continue", "continue the orbit family across the energy grid"},
      {"floquet", "transverse stability analysis of the orbit"},
      {"check", "verify the standing hypotheses on the orbit"},
      {"resonances", "enumerate resonance strings in the configured window"},
      {"report", "full analysis with a single deterministic report"}};
  for (const auto& [name, desc] : cmds) app.add_subcommand(name, desc)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // a malformed invocation is a configuration error; --help stays 0
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    return run_command(cmd, cli);
  } catch (const hypres::Error& e) {
    emit_error(cli.json_errors, kind_name(e.kind), e.what());
    return exit_code_for(e.kind);
  } catch (const std::exception& e) {
    emit_error(cli.json_errors, "internal", e.what());
    return 3;
  }
}

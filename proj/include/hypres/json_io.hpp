#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "floquet.hpp"
#include "orbit.hpp"
#include "semiclassics.hpp"
#include "types.hpp"

namespace hypres {

using ojson = nlohmann::ordered_json;

namespace jsonio {

// 17 significant digits: enough to round-trip any double, and a fixed width
// so repeated runs serialize identically byte for byte.
inline std::string num17(double v) {
  require(std::isfinite(v), Error::Kind::io, "refusing to serialize a non-finite number");
  if (v == 0.0) return "0"; // JSON keeps no signed zero; normalize for byte-stable reruns
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

// Shortest round-trip form for bulk CSV columns.
inline std::string num_shortest(double v) {
  require(std::isfinite(v), Error::Kind::io, "refusing to serialize a non-finite number");
  if (v == 0.0) return "0";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_hex(std::string_view s) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(s)));
  return std::string(buf);
}

namespace detail {

inline void dump_rec(const ojson& j, std::string& out, int indent, int depth) {
  const std::string pad(static_cast<size_t>(indent) * static_cast<size_t>(depth), ' ');
  const std::string pad1(static_cast<size_t>(indent) * static_cast<size_t>(depth + 1), ' ');
  switch (j.type()) {
    case ojson::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      size_t i = 0;
      for (auto it = j.begin(); it != j.end(); ++it, ++i) {
        out += pad1;
        out += ojson(it.key()).dump(); // quoted + escaped
        out += ": ";
        dump_rec(it.value(), out, indent, depth + 1);
        if (i + 1 < j.size()) out += ",";
        out += "\n";
      }
      out += pad + "}";
      return;
    }
    case ojson::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (size_t i = 0; i < j.size(); ++i) {
        out += pad1;
        dump_rec(j[i], out, indent, depth + 1);
        if (i + 1 < j.size()) out += ",";
        out += "\n";
      }
      out += pad + "]";
      return;
    }
    case ojson::value_t::number_float:
      out += num17(j.get<double>());
      return;
    default:
      out += j.dump(); // integers, strings, booleans, null
      return;
  }
}

} // namespace detail

// Deterministic pretty printer: insertion-ordered keys, fixed 17-digit floats.
inline std::string dump_deterministic(const ojson& j, int indent = 2) {
  std::string out;
  detail::dump_rec(j, out, indent, 0);
  out += "\n";
  return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), Error::Kind::io, "cannot open for writing: " + path);
  f << text;
  require(f.good(), Error::Kind::io, "write failed: " + path);
}

inline std::optional<std::string> read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f.good()) return std::nullopt;
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline ojson vec_to_json(const Vec& v) {
  ojson a = ojson::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vec vec_from_json(const ojson& a) {
  require(a.is_array(), Error::Kind::io, "expected an array of numbers");
  Vec v(static_cast<long>(a.size()));
  for (size_t i = 0; i < a.size(); ++i) v[static_cast<long>(i)] = a[i].get<double>();
  return v;
}

inline ojson mat_to_json(const Mat& m) {
  ojson rows = ojson::array();
  for (int i = 0; i < m.rows(); ++i) {
    ojson r = ojson::array();
    for (int jx = 0; jx < m.cols(); ++jx) r.push_back(m(i, jx));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline ojson cplx_to_json(cplx z) { return ojson{{"re", z.real()}, {"im", z.imag()}}; }

inline ojson point_to_json(const PhasePoint& p) {
  return ojson{{"x", vec_to_json(p.x)}, {"xi", vec_to_json(p.xi)}};
}

inline PhasePoint point_from_json(const ojson& j) {
  return PhasePoint(vec_from_json(j.at("x")), vec_from_json(j.at("xi")));
}

inline ojson orbit_to_json(const PeriodicOrbit& o) {
  ojson j;
  j["energy"] = o.energy;
  j["period"] = o.period;
  j["ref_point"] = point_to_json(o.ref_point);
  j["section_normal"] = vec_to_json(o.section_normal);
  j["closure_residual"] = o.closure_residual;
  j["action"] = o.action;
  j["energy_drift"] = o.samples.energy_drift;
  ojson samples = ojson::array();
  for (const auto& s : o.samples.states) samples.push_back(vec_to_json(s.flat()));
  j["samples"] = std::move(samples); // uniform over [0, period]
  return j;
}

inline PeriodicOrbit orbit_from_json(const ojson& j) {
  PeriodicOrbit o;
  o.energy = j.at("energy").get<double>();
  o.period = j.at("period").get<double>();
  o.ref_point = point_from_json(j.at("ref_point"));
  o.section_normal = vec_from_json(j.at("section_normal"));
  o.closure_residual = j.at("closure_residual").get<double>();
  o.action = j.at("action").get<double>();
  o.samples.energy_drift = j.at("energy_drift").get<double>();
  const auto& samples = j.at("samples");
  require(samples.is_array() && samples.size() >= 3 && o.period > 0.0, Error::Kind::io,
          "orbit record is incomplete");
  const size_t N = samples.size() - 1;
  for (size_t i = 0; i < samples.size(); ++i) {
    o.samples.times.push_back(o.period * static_cast<double>(i) / static_cast<double>(N));
    o.samples.states.push_back(PhasePoint::from_flat(vec_from_json(samples[i])));
  }
  return o;
}

inline ojson multiplier_to_json(const Multiplier& m) {
  return ojson{{"value", cplx_to_json(m.value)},
               {"multiplicity", m.multiplicity},
               {"type", tag_name(m.tag)}};
}

inline ojson exponent_to_json(const Exponent& e) {
  return ojson{{"value", cplx_to_json(e.value)},
               {"multiplicity", e.multiplicity},
               {"type", tag_name(e.tag)}};
}

inline ojson floquet_to_json(const FloquetData& fd) {
  ojson j;
  ojson mults = ojson::array();
  for (const auto& m : fd.multipliers) mults.push_back(multiplier_to_json(m));
  j["multipliers"] = std::move(mults);
  ojson exps = ojson::array();
  for (const auto& e : fd.exponents) exps.push_back(exponent_to_json(e));
  j["exponents_per_unit_time"] = std::move(exps);
  j["hyperbolic_dimension"] = fd.hyperbolic_dimension;
  j["log_matrix"] = mat_to_json(fd.log_matrix);
  j["b_matrix"] = mat_to_json(fd.b_matrix);
  ojson kinds = ojson::array();
  for (const auto& k : fd.action_kinds) kinds.push_back(k);
  j["quadratic_kinds"] = std::move(kinds);
  ojson coefs = ojson::array();
  for (double c : fd.action_coefficients) coefs.push_back(c);
  j["quadratic_coefficients"] = std::move(coefs);
  ojson diss = ojson::array();
  for (double dv : fd.dissipativity) diss.push_back(dv);
  j["dissipativity"] = std::move(diss);
  j["residuals"] = ojson{{"pairing", fd.pairing_residual},
                         {"log_roundtrip", fd.log_residual},
                         {"structure", fd.structure_residual},
                         {"lagrangian", fd.lagrangian_residual},
                         {"quadratic_decomposition", fd.decomposition_residual}};
  return j;
}

inline ojson hypotheses_to_json(const HypothesisReport& r) {
  ojson j;
  j["principal_type_ok"] = r.principal_type_ok;
  j["orbit_hyperbolic_ok"] = r.orbit_hyperbolic_ok;
  j["transverse_normal_form_ok"] = r.williamson_ok;
  j["nonresonance_ok"] = r.nonresonance_ok;
  j["strong_nonresonance_ok"] = r.strong_nonresonance_ok;
  j["hyperbolic_dimension"] = r.hyperbolic_dimension;
  j["K_bound"] = r.K_bound;
  j["tolerance"] = r.tolerance;
  ojson res;
  for (const auto& [k, v] : r.residuals) res[k] = v;
  j["residuals"] = std::move(res);
  auto wit = [](const std::optional<std::vector<int>>& w) -> ojson {
    if (!w) return nullptr;
    ojson a = ojson::array();
    for (int v : *w) a.push_back(v);
    return a;
  };
  j["witness_nonresonance"] = wit(r.witness_nonresonance);
  j["witness_strong_nonresonance"] = wit(r.witness_strong_nonresonance);
  j["notes"] = r.notes;
  return j;
}

inline ojson string_to_json(const ResonanceString& s) {
  ojson j;
  j["k"] = s.k;
  j["anchor_energy"] = s.E_k;
  j["period"] = s.T_k;
  ojson mu = ojson::array();
  for (cplx m : s.mu) mu.push_back(cplx_to_json(m));
  j["exponents_per_return"] = std::move(mu);
  ojson entries = ojson::array();
  for (const auto& e : s.entries) {
    ojson je;
    ojson alpha = ojson::array();
    for (int a : e.alpha) alpha.push_back(a);
    je["alpha"] = std::move(alpha);
    je["z"] = cplx_to_json(e.z);
    je["excluded"] = e.excluded;
    if (e.excluded) je["reason"] = e.exclusion_reason;
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  j["excluded_count"] = s.excluded_count;
  return j;
}

inline ojson string_report_to_json(const StringReport& r) {
  ojson j;
  j["n_strings"] = r.n_strings;
  j["total_entries"] = r.total_entries;
  j["kept_entries"] = r.kept_entries;
  j["excluded_real_window"] = r.excluded_real_window;
  j["excluded_depth"] = r.excluded_depth;
  j["excluded_zero_width"] = r.excluded_zero_width;
  j["min_width"] = r.min_width;
  j["max_width"] = r.max_width;
  j["density_per_unit_energy"] = r.density_per_unit_energy;
  j["density_reference_scale"] = r.density_reference;
  return j;
}

// CSV writers. Columns are fixed; numbers use shortest round-trip formatting.

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  require(!tr.states.empty(), Error::Kind::io, "empty trajectory");
  const int n = tr.states[0].n();
  os << "t";
  for (int i = 0; i < n; ++i) os << ",x" << i;
  for (int i = 0; i < n; ++i) os << ",xi" << i;
  os << "\n";
  for (size_t r = 0; r < tr.times.size(); ++r) {
    os << num_shortest(tr.times[r]);
    const Vec z = tr.states[r].flat();
    for (long c = 0; c < z.size(); ++c) os << "," << num_shortest(z[c]);
    os << "\n";
  }
}

inline void write_family_csv(std::ostream& os, const OrbitFamily& fam) {
  os << "energy,period,action,closure_residual\n";
  for (const auto& o : fam.orbits)
    os << num_shortest(o.energy) << "," << num_shortest(o.period) << ","
       << num_shortest(o.action) << "," << num_shortest(o.closure_residual) << "\n";
}

inline void write_strings_csv(std::ostream& os, const std::vector<ResonanceString>& strings) {
  os << "k,anchor_energy";
  if (!strings.empty() && !strings[0].entries.empty()) {
    const size_t m = strings[0].entries[0].alpha.size();
    for (size_t j = 0; j < m; ++j) os << ",alpha" << j;
  }
  os << ",re_z,im_z,excluded,reason\n";
  for (const auto& s : strings)
    for (const auto& e : s.entries) {
      os << s.k << "," << num_shortest(s.E_k);
      for (int a : e.alpha) os << "," << a;
      os << "," << num_shortest(e.z.real()) << "," << num_shortest(e.z.imag()) << ","
         << (e.excluded ? 1 : 0) << "," << (e.excluded ? e.exclusion_reason : "") << "\n";
    }
}

// Orbit cache: one JSON file keyed by (system hash, energy). A reread that
// fails to parse or validate falls back to recomputation with a warning on
// stderr; the file is then rewritten wholesale.
class OrbitCache {
public:
  OrbitCache() = default;
  explicit OrbitCache(std::string path) : path_(std::move(path)) { load(); }

  static std::string key_for(const std::string& system_hash, double energy) {
    return system_hash + ":" + num17(energy);
  }

  std::optional<PeriodicOrbit> lookup(const std::string& system_hash, double energy) const {
    const auto it = entries_.find(key_for(system_hash, energy));
    if (it == entries_.end()) return std::nullopt;
    try {
      return orbit_from_json(it->second);
    } catch (const std::exception&) {
      std::cerr << "warning: orbit cache entry unreadable, recomputing\n";
      return std::nullopt;
    }
  }

  void store(const std::string& system_hash, double energy, const PeriodicOrbit& orbit) {
    entries_[key_for(system_hash, energy)] = orbit_to_json(orbit);
    dirty_ = true;
  }

  void save() {
    if (path_.empty() || !dirty_) return;
    ojson root;
    root["schema_version"] = 1;
    ojson ent;
    for (const auto& [k, v] : entries_) ent[k] = v;
    root["entries"] = std::move(ent);
    write_text_file(path_, dump_deterministic(root));
    dirty_ = false;
  }

  const std::string& path() const { return path_; }

private:
  void load() {
    if (path_.empty()) return;
    const auto text = read_text_file(path_);
    if (!text) return; // cold cache
    try {
      const ojson root = ojson::parse(*text);
      require(root.at("schema_version").get<int>() == 1, Error::Kind::io, "cache schema mismatch");
      for (const auto& [k, v] : root.at("entries").items()) entries_[k] = v;
    } catch (const std::exception&) {
      std::cerr << "warning: orbit cache at " << path_ << " is corrupted, starting fresh\n";
      entries_.clear();
      dirty_ = true;
    }
  }

  std::string path_;
  std::map<std::string, ojson> entries_;
  bool dirty_ = false;
};

} // namespace jsonio
} // namespace hypres

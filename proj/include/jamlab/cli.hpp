#pragma once

// Command-line front end: configuration schema, parsing (JSON file plus
// flags, flags win), subcommand runners and run manifests.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jamlab/engine.hpp"
#include "jamlab/errors.hpp"
#include "jamlab/geometry.hpp"
#include "jamlab/measures.hpp"
#include "jamlab/parallel.hpp"
#include "jamlab/rng.hpp"
#include "jamlab/stabilization.hpp"
#include "jamlab/stats.hpp"
#include "jamlab/variability.hpp"

namespace jamlab::cli {

using json = nlohmann::ordered_json;

enum ExitCode { kOk = 0, kValidation = 2, kRuntime = 3 };

// ---------------------------------------------------------------- schema

struct KeySpec {
  std::string name;
  char type;  // 'i' int, 'u' unsigned, 'd' double, 's' string
  std::map<std::string, json> defaults;  // per subcommand; "*" applies to all; null = required
  std::vector<std::string> commands;     // empty = all subcommands
  std::vector<std::string> choices;
  std::string help;
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> c{"pack", "measure", "sweep", "covariance", "stabilize", "variability"};
  return c;
}

inline const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> s = {
      {"seed", 'u', {{"*", 0}}, {}, {}, "master seed"},
      {"threads", 'i', {{"*", 0}}, {}, {}, "worker threads (0: JAMLAB_THREADS or all cores)"},
      {"out", 's', {{"*", "jamlab"}}, {}, {}, "output path prefix"},
      {"dim", 'i', {{"*", nullptr}}, {}, {}, "dimension d (1..4)"},
      {"solid", 's', {{"*", nullptr}}, {}, {}, "solid: 'ball d=<d> r=<r>' | 'box d=<d> h=<h>[,..]' | 'poly2 v=x,y;x,y;...'"},
      {"lambda", 'd', {{"*", nullptr}}, {"pack", "measure", "covariance", "stabilize"}, {}, "intensity lambda (Q_lambda side lambda^(1/d))"},
      {"mode", 's', {{"*", "saturate"}}, {"pack"}, {"saturate", "finite", "rejection"}, "packing mode"},
      {"eps", 'd', {{"*", 1e-6}}, {"pack", "measure", "sweep", "covariance", "stabilize", "variability"}, {}, "relative vacancy tolerance (d >= 2)"},
      {"tau", 'd', {{"*", 1.0}}, {"pack"}, {}, "finite mode: pack the first ceil(lambda*tau) arrivals"},
      {"reps", 'u', {{"*", 1}, {"sweep", 100}, {"covariance", 100}, {"stabilize", 50}, {"variability", 30}}, {}, {}, "replications"},
      {"guard", 'u', {{"*", 1000000}}, {"pack", "measure", "sweep", "covariance", "variability"}, {}, "max consecutive blocked probes"},
      {"grid", 's', {{"*", "100,1000,10000"}}, {"sweep"}, {}, "comma-separated ascending lambda grid"},
      {"boxes", 's', {{"*", ""}}, {"measure", "covariance"}, {}, "test boxes 'lo1,..,lod:hi1,..,hid;...' in [0,1)^d (f_id 0 is the constant 1)"},
      {"which", 's', {{"*", "point"}}, {"covariance"}, {"point", "volume"}, "measure used for the integrals"},
      {"tol", 'd', {{"*", 1e-6}}, {"measure", "covariance"}, {}, "relative quadrature tolerance for the volume measure"},
      {"center", 's', {{"*", "auto"}}, {"stabilize"}, {}, "cube index i as 'i1,..,id' (auto: middle cube)"},
      {"lgrid", 's', {{"*", "0:12:0.25"}}, {"stabilize"}, {}, "radius grid a:b:step"},
      {"resamples", 'u', {{"*", 20}}, {"stabilize"}, {}, "outside resamples K per radius"},
      {"method", 's', {{"*", "perturbation"}}, {"stabilize"}, {"perturbation", "causal"}, "radius estimator"},
      {"tstar", 's', {{"*", "auto"}}, {"stabilize"}, {}, "causal relevance threshold T* (auto: 90th percentile)"},
      {"horizon", 'd', {{"*", 1e9}}, {"stabilize"}, {}, "time horizon T_max"},
      {"budget", 'u', {{"*", 8}}, {"stabilize"}, {}, "moat subset budget for local saturation times"},
      {"delta", 's', {{"*", "auto"}}, {"variability"}, {}, "scaling delta (auto: midpoint of the feasible range)"},
      {"Lmax", 'd', {{"*", 400.0}}, {"variability"}, {}, "largest box side scanned for L0"},
      {"designs", 's', {{"*", "empty,lattice,random"}}, {"variability"}, {}, "obstacle designs: empty, lattice, random, <name>-reflected"},
      {"resolution", 'd', {{"*", 1.0 / 96.0}}, {"variability"}, {}, "torus grid spacing for the periodic set"},
  };
  return s;
}

inline bool applies(const KeySpec& k, const std::string& cmd) {
  return k.commands.empty() || std::find(k.commands.begin(), k.commands.end(), cmd) != k.commands.end();
}

inline std::vector<std::string> accepted_keys(const std::string& cmd) {
  std::vector<std::string> out;
  for (const auto& k : schema())
    if (applies(k, cmd)) out.push_back(k.name);
  return out;
}

inline std::string join(const std::vector<std::string>& v, const std::string& sep = ", ") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

inline const KeySpec* find_key(const std::string& name) {
  for (const auto& k : schema())
    if (k.name == name) return &k;
  return nullptr;
}

/// Coerces a JSON value (from a file, or a flag string) to the key's type.
inline json coerce(const KeySpec& k, const json& v) {
  auto bad = [&](const std::string& why) {
    const char* tn = k.type == 'i' ? "integer" : k.type == 'u' ? "nonnegative integer" : k.type == 'd' ? "number" : "string";
    return ValidationError("key '" + k.name + "': " + why + " (expected " + tn +
                           (k.choices.empty() ? "" : "; accepted values: " + join(k.choices)) + ")");
  };
  json out;
  if (v.is_string() && k.type != 's') {
    const std::string s = v.get<std::string>();
    try {
      std::size_t used = 0;
      if (k.type == 'd') {
        out = std::stod(s, &used);
      } else if (k.type == 'u') {
        if (!s.empty() && s[0] == '-') throw bad("negative value '" + s + "'");
        out = static_cast<std::uint64_t>(std::stoull(s, &used));
      } else {
        out = std::stoi(s, &used);
      }
      if (used != s.size()) throw bad("cannot parse '" + s + "'");
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception&) {
      throw bad("cannot parse '" + s + "'");
    }
  } else if (k.type == 's') {
    if (!v.is_string()) throw bad("type mismatch");
    out = v;
  } else if (k.type == 'd') {
    if (!v.is_number()) throw bad("type mismatch");
    out = v.get<double>();
  } else if (k.type == 'u') {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw bad("type mismatch");
    out = v.get<std::uint64_t>();
  } else {
    if (!v.is_number_integer()) throw bad("type mismatch");
    out = v.get<int>();
  }
  if (!k.choices.empty() && std::find(k.choices.begin(), k.choices.end(), out.get<std::string>()) == k.choices.end())
    throw bad("value '" + out.get<std::string>() + "' not accepted");
  return out;
}

// ---------------------------------------------------------------- config

struct RunConfig {
  std::string command;
  json values = json::object();      // every applicable key, defaults included
  json file_values = json::object();  // as read from --config
  json flag_values = json::object();  // as given on the command line

  std::string str(const std::string& k) const { return values.at(k).get<std::string>(); }
  double num(const std::string& k) const { return values.at(k).get<double>(); }
  std::uint64_t u64(const std::string& k) const { return values.at(k).get<std::uint64_t>(); }
  int i32(const std::string& k) const { return values.at(k).get<int>(); }
};

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path + "': " + std::strerror(errno));
  try {
    return json::parse(in);
  } catch (const std::exception& e) {
    throw ValidationError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

/// Checks cross-key constraints; throws ValidationError naming the key.
inline void validate(const RunConfig& c) {
  const int d = c.i32("dim");
  if (d < 1 || d > kMaxDim) throw ValidationError("key 'dim': must lie in 1.." + std::to_string(kMaxDim));
  const ConvexSolid solid = parse_solid(c.str("solid"));
  if (solid.dim() != d)
    throw ValidationError("key 'solid': solid has dimension " + std::to_string(solid.dim()) + " but dim is " + std::to_string(d));
  if (c.values.contains("lambda") && !(c.num("lambda") > 0.0 && std::isfinite(c.num("lambda"))))
    throw ValidationError("key 'lambda': must be positive and finite");
  if (c.values.contains("eps")) {
    const double eps = c.num("eps");
    if (!(eps >= 0.0 && eps < 1.0)) throw ValidationError("key 'eps': must lie in [0, 1)");
    if (eps == 0.0 && d >= 2) throw ValidationError("key 'eps': eps = 0 is only supported in d = 1");
  }
  if (c.u64("reps") < 1) throw ValidationError("key 'reps': must be at least 1");
  if (c.command == "sweep" && c.u64("reps") < 2) throw ValidationError("key 'reps': sweep needs at least 2");
  if (c.command == "covariance" && c.u64("reps") < 30) throw ValidationError("key 'reps': covariance needs at least 30");
  if (c.values.contains("tau") && !(c.num("tau") > 0.0)) throw ValidationError("key 'tau': must be positive");
  if (c.str("out").empty()) throw ValidationError("key 'out': must not be empty");
}

/// Layers defaults, then file keys, then flags; rejects unknown keys.
inline RunConfig resolve_config(const std::string& command, const json& file_values, const json& flag_values) {
  if (std::find(subcommands().begin(), subcommands().end(), command) == subcommands().end())
    throw ValidationError("unknown subcommand '" + command + "' (accepted: " + join(subcommands()) + ", replay)");
  RunConfig c;
  c.command = command;
  c.file_values = file_values.is_null() ? json::object() : file_values;
  c.flag_values = flag_values;
  if (!c.file_values.is_object()) throw ValidationError("config file must hold a JSON object");
  for (const auto& k : schema()) {
    if (!applies(k, command)) continue;
    auto it = k.defaults.find(command);
    if (it == k.defaults.end()) it = k.defaults.find("*");
    if (!it->second.is_null()) c.values[k.name] = coerce(k, it->second);
  }
  auto layer = [&](const json& src, const char* where) {
    for (auto it = src.begin(); it != src.end(); ++it) {
      const KeySpec* k = find_key(it.key());
      if (!k || !applies(*k, command))
        throw ValidationError(std::string("unknown key '") + it.key() + "' in " + where + " for '" + command +
                              "' (accepted keys: " + join(accepted_keys(command)) + ")");
      c.values[k->name] = coerce(*k, it.value());
    }
  };
  layer(c.file_values, "config file");
  layer(c.flag_values, "flags");
  for (const auto& k : schema())
    if (applies(k, command) && !c.values.contains(k.name))
      throw ValidationError("missing required key '" + k.name + "' for '" + command + "' (" + k.help + ")");
  // canonical key order
  json ordered = json::object();
  for (const auto& k : schema())
    if (c.values.contains(k.name)) ordered[k.name] = c.values[k.name];
  c.values = ordered;
  validate(c);
  return c;
}

// ---------------------------------------------------------------- helpers

inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::vector<double> parse_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("key '" + key + "': cannot parse '" + item + "'");
    }
  }
  return out;
}

inline std::vector<double> parse_range(const std::string& s) {
  double a, b, step;
  char c1, c2;
  std::stringstream ss(s);
  if (!(ss >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0.0) || b < a || !ss.eof())
    throw ValidationError("key 'lgrid': expected a:b:step with a <= b and step > 0, got '" + s + "'");
  std::vector<double> out;
  const auto n = static_cast<std::int64_t>(std::floor((b - a) / step + 1e-9));
  if (n > 100000) throw ValidationError("key 'lgrid': too many grid points");
  for (std::int64_t k = 0; k <= n; ++k) out.push_back(a + static_cast<double>(k) * step);
  return out;
}

/// Boxes "lo1,..,lod:hi1,..,hid" separated by ';'. f_id 0 is always the constant 1.
inline std::vector<TestFunction> parse_boxes(const std::string& s, int d) {
  std::vector<TestFunction> fs{constant_function(d)};
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ValidationError("key 'boxes': expected lo:hi, got '" + item + "'");
    const auto lo = parse_list(item.substr(0, colon), "boxes"), hi = parse_list(item.substr(colon + 1), "boxes");
    if (static_cast<int>(lo.size()) != d || static_cast<int>(hi.size()) != d)
      throw ValidationError("key 'boxes': box '" + item + "' needs " + std::to_string(d) + " coordinates per corner");
    Box b{Vec(d), Vec(d)};
    for (int k = 0; k < d; ++k) {
      if (!(lo[k] < hi[k])) throw ValidationError("key 'boxes': empty box '" + item + "'");
      b.lo[k] = lo[k];
      b.hi[k] = hi[k];
    }
    fs.push_back(box_indicator(b));
  }
  return fs;
}

inline SaturationOptions saturation_options(const RunConfig& c) {
  SaturationOptions o;
  o.epsilon = c.num("eps");
  if (c.values.contains("guard")) o.guard_limit = c.u64("guard");
  return o;
}

class OutputFile {
 public:
  explicit OutputFile(const std::string& path) : path_(path), out_(path, std::ios::trunc) {
    if (!out_) throw RunFailure("cannot open '" + path + "' for writing: " + std::strerror(errno));
  }
  OutputFile& operator<<(const std::string& s) {
    out_ << s;
    if (!out_) throw RunFailure("write to '" + path_ + "' failed");
    return *this;
  }
  void flush() {
    out_.flush();
    if (!out_) throw RunFailure("flush of '" + path_ + "' failed");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

inline void write_text(const std::string& path, const std::string& text) {
  OutputFile f(path);
  f << text;
  f.flush();
}

// ---------------------------------------------------------------- manifest

class Manifest {
 public:
  explicit Manifest(const RunConfig& c) : path_(c.str("out") + ".manifest.json"), start_(std::chrono::steady_clock::now()) {
    doc_["engine_version"] = kEngineVersion;
    doc_["command"] = c.command;
    doc_["config"] = c.values;
    doc_["config_file"] = c.file_values;
    doc_["flags"] = c.flag_values;
    doc_["master_seed"] = c.u64("seed");
    doc_["seed_derivation"] = "derive_seed(master ^ splitmix64(bits(lambda)), tag, rep) for replications; "
                              "derive_seed(m, tag, rep) = splitmix64(splitmix64(m ^ fnv1a(tag)) + rep)";
    doc_["outputs"] = json::array();
    doc_["replication_seeds"] = json::object();
    doc_["complete"] = false;
    const std::time_t now = std::time(nullptr);
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    doc_["started_at"] = buf;
    save();
  }

  void output(const std::string& path) {
    doc_["outputs"].push_back(path);
    save();
  }
  void seeds(const std::string& group, const std::vector<std::uint64_t>& s) { doc_["replication_seeds"][group] = s; }
  void note(const std::string& key, const json& v) { doc_[key] = v; }
  void finish() {
    doc_["complete"] = true;
    doc_["wall_clock_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    save();
  }

 private:
  void save() { write_text(path_, doc_.dump(2) + "\n"); }

  std::string path_;
  std::chrono::steady_clock::time_point start_;
  json doc_;
};

// ---------------------------------------------------------------- runners

inline void run_pack(const RunConfig& c, Manifest& m) {
  const ConvexSolid solid = parse_solid(c.str("solid"));
  const double lambda = c.num("lambda");
  const std::string mode = c.str("mode");
  const std::size_t reps = c.u64("reps");
  const std::uint64_t seed = c.u64("seed");
  SaturationOptions opt = saturation_options(c);
  opt.rejection = mode == "rejection";
  const std::string path = c.str("out") + ".jsonl";
  m.output(path);
  std::vector<std::uint64_t> seeds(reps);
  for (std::size_t r = 0; r < reps; ++r) seeds[r] = replication_seed(seed, "pack", lambda, r);
  m.seeds("pack", seeds);
  OutputFile f(path);
  const int threads = resolve_threads(c.i32("threads"));
  std::vector<std::string> lines(reps);
  for (std::size_t start = 0; start < reps; start += static_cast<std::size_t>(threads)) {
    const std::size_t stop = std::min(reps, start + static_cast<std::size_t>(threads));
    parallel_for(stop - start, threads, [&](std::size_t k) {
      const std::size_t r = start + k;
      Rng rng(seeds[r]);
      PackOutcome o = mode == "finite" ? pack_finite_input(lambda, c.num("tau"), solid, rng)
                                       : pack_to_saturation(lambda, solid, rng, opt);
      json j;
      j["rep"] = r;
      j["seed"] = seeds[r];
      j["N"] = o.N();
      j["virtual_time"] = o.virtual_time;
      j["vacancy_bound"] = o.vacancy_bound;
      j["extra_solids_bound"] = o.extra_solids_bound;
      j["probes"] = o.probes;
      j["guard_tripped"] = o.guard_tripped;
      lines[r] = j.dump() + "\n";
    });
    for (std::size_t r = start; r < stop; ++r) f << lines[r];
    f.flush();
  }
}

inline ReplicationPlan plan_from(const RunConfig& c, const std::string& tag, double lambda) {
  ReplicationPlan p;
  p.lambda = lambda;
  p.solid = parse_solid(c.str("solid"));
  p.options = saturation_options(c);
  p.seed = c.u64("seed");
  p.tag = tag;
  p.reps = c.u64("reps");
  p.threads = c.i32("threads");
  return p;
}

inline std::vector<std::uint64_t> seeds_of(const std::vector<RepSummary>& rs) {
  std::vector<std::uint64_t> s;
  for (const auto& r : rs) s.push_back(r.seed);
  return s;
}

inline void run_measure(const RunConfig& c, Manifest& m) {
  ReplicationPlan p = plan_from(c, "measure", c.num("lambda"));
  p.functions = parse_boxes(c.str("boxes"), c.i32("dim"));
  p.volume = true;
  p.quadrature_tol = c.num("tol");
  const std::string path = c.str("out") + ".csv";
  m.output(path);
  const auto rs = run_replications(p);
  m.seeds("measure", seeds_of(rs));
  OutputFile f(path);
  f << "rep,f_id,point_integral,volume_integral\n";
  for (const auto& r : rs)
    for (std::size_t j = 0; j < p.functions.size(); ++j)
      f << std::to_string(r.rep) + "," + std::to_string(j) + "," + fmt(r.point_integrals[j]) + "," +
               fmt(r.volume_integrals[j]) + "\n";
  f.flush();
}

inline void run_sweep(const RunConfig& c, Manifest& m) {
  const auto grid = parse_list(c.str("grid"), "grid");
  if (grid.empty()) throw ValidationError("key 'grid': empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) throw ValidationError("key 'grid': lambda values must be positive");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw ValidationError("key 'grid': values must be strictly ascending");
  }
  const std::string csv = c.str("out") + ".csv", detail = c.str("out") + ".reps.jsonl", summary = c.str("out") + ".summary.json";
  m.output(csv);
  m.output(detail);
  m.output(summary);
  OutputFile f(csv), g(detail);
  f << "lambda,reps,mean_ratio,var_ratio,se_mean,se_var,ks\n";
  SweepResult res;
  for (double lambda : grid) {
    const auto rs = run_replications(plan_from(c, "saturate", lambda));
    m.seeds("saturate:" + fmt(lambda), seeds_of(rs));
    std::vector<double> counts;
    for (const auto& r : rs) {
      counts.push_back(static_cast<double>(r.N));
      json j;
      j["lambda"] = lambda;
      j["rep"] = r.rep;
      j["seed"] = r.seed;
      j["N"] = r.N;
      j["virtual_time"] = r.virtual_time;
      j["vacancy_bound"] = r.vacancy_bound;
      g << j.dump() + "\n";
    }
    SweepRow row = summarize_counts(lambda, counts);
    f << fmt(row.lambda) + "," + std::to_string(row.reps) + "," + fmt(row.mean_ratio) + "," + fmt(row.var_ratio) + "," +
             fmt(row.se_mean) + "," + fmt(row.se_var) + "," + fmt(row.ks) + "\n";
    f.flush();
    g.flush();
    res.rows.push_back(std::move(row));
  }
  json s;
  s["rows"] = res.rows.size();
  if (res.rows.size() >= 3) {
    const RateFit rf = rate_fit(res, c.i32("dim"));
    s["rate_fit"] = {{"exponent", rf.exponent},
                     {"limit", rf.limit},
                     {"order", rf.assumed_order},
                     {"r2", rf.fit.r2},
                     {"noise_dominated", rf.noise_dominated},
                     {"status", to_string(rf.status)}};
  } else {
    s["rate_fit"] = nullptr;
  }
  write_text(summary, s.dump(2) + "\n");
}

inline void run_covariance(const RunConfig& c, Manifest& m) {
  ReplicationPlan p = plan_from(c, "saturate", c.num("lambda"));
  p.functions = parse_boxes(c.str("boxes"), c.i32("dim"));
  p.volume = c.str("which") == "volume";
  p.quadrature_tol = c.num("tol");
  const std::string path = c.str("out") + ".csv";
  m.output(path);
  const auto rs = run_replications(p);
  m.seeds("saturate:" + fmt(p.lambda), seeds_of(rs));
  std::vector<std::vector<double>> per_rep;
  for (const auto& r : rs) per_rep.push_back(p.volume ? r.volume_integrals : r.point_integrals);
  const CovarianceResult cov = covariance_from_integrals(per_rep, p.lambda);
  OutputFile f(path);
  f << "f_id,g_id,cov_over_lambda,se\n";
  for (std::size_t a = 0; a < cov.estimate.size(); ++a)
    for (std::size_t b = 0; b < cov.estimate.size(); ++b)
      f << std::to_string(a) + "," + std::to_string(b) + "," + fmt(cov.estimate[a][b]) + "," + fmt(cov.standard_error[a][b]) + "\n";
  f.flush();
}

inline void run_stabilize(const RunConfig& c, Manifest& m) {
  const ConvexSolid solid = parse_solid(c.str("solid"));
  const double lambda = c.num("lambda");
  const int d = c.i32("dim");
  const Box q = q_lambda(lambda, d);
  CubeIndex center;
  center.dim = d;
  if (c.str("center") == "auto") {
    for (int k = 0; k < d; ++k) center.c[k] = static_cast<std::int64_t>(std::floor(q.hi[k] / 2.0));
  } else {
    const auto v = parse_list(c.str("center"), "center");
    if (static_cast<int>(v.size()) != d) throw ValidationError("key 'center': needs " + std::to_string(d) + " integers");
    for (int k = 0; k < d; ++k) {
      if (v[k] != std::floor(v[k])) throw ValidationError("key 'center': cube indices must be integers");
      center.c[k] = static_cast<std::int64_t>(v[k]);
    }
  }
  m.note("resolved_center", center.str());
  const auto radii = parse_range(c.str("lgrid"));
  const std::size_t reps = c.u64("reps");
  const bool causal = c.str("method") == "causal";
  std::optional<double> tstar;
  if (c.str("tstar") != "auto") {
    const auto v = parse_list(c.str("tstar"), "tstar");
    if (v.size() != 1 || !(v[0] > 0.0)) throw ValidationError("key 'tstar': expected 'auto' or a positive number");
    tstar = v[0];
  }
  if (causal && lambda * c.num("horizon") > 2e7)
    throw ValidationError("key 'horizon': lambda * horizon exceeds 2e7 explicit arrivals for the causal method");
  std::vector<std::uint64_t> seeds(reps);
  for (std::size_t r = 0; r < reps; ++r) seeds[r] = derive_seed(c.u64("seed"), "stabilize", r);
  m.seeds("stabilize", seeds);
  const std::string csv = c.str("out") + ".csv", detail = c.str("out") + ".samples.jsonl", summary = c.str("out") + ".summary.json";
  m.output(csv);
  m.output(detail);
  m.output(summary);
  std::vector<StabilizationSample> samples(reps);
  parallel_for(reps, c.i32("threads"), [&](std::size_t r) {
    if (causal) {
      CausalOptions o;
      o.horizon = c.num("horizon");
      o.t_star = tstar;
      o.subset_budget = c.u64("budget");
      samples[r] = estimate_radius_causal(lambda, solid, center, o, seeds[r]);
    } else {
      PerturbationOptions o;
      o.radii = radii;
      o.resamples = c.u64("resamples");
      o.horizon = c.num("horizon");
      o.epsilon = c.num("eps");
      samples[r] = estimate_radius_perturbation(lambda, solid, center, o, seeds[r]);
    }
  });
  OutputFile g(detail);
  for (std::size_t r = 0; r < reps; ++r) {
    json j;
    j["sample"] = r;
    j["seed"] = seeds[r];
    j["R_hat"] = fmt(samples[r].radius);
    j["method"] = to_string(samples[r].method);
    j["packings"] = samples[r].packings;
    j["baseline_saturation_time"] = samples[r].baseline_saturation_time;
    if (causal) j["t_star"] = samples[r].t_star;
    g << j.dump() + "\n";
  }
  g.flush();
  const auto tau = tail_fractions(samples, radii);
  OutputFile f(csv);
  f << "L,tau_hat,n,method\n";
  for (std::size_t k = 0; k < radii.size(); ++k)
    f << fmt(radii[k]) + "," + fmt(tau[k]) + "," + std::to_string(reps) + "," + to_string(samples[0].method) + "\n";
  f.flush();
  json s;
  try {
    const TailFit tf = fit_tail(radii, tau);
    s["fit"] = {{"slope", tf.slope}, {"intercept", tf.intercept}, {"r_squared", tf.r_squared},
                {"points", tf.points}, {"curvature", tf.curvature}, {"super_exponential", tf.super_exponential}};
  } catch (const ValidationError& e) {
    s["fit"] = nullptr;
    s["fit_error"] = e.what();
  }
  std::size_t finite = 0;
  for (const auto& x : samples) finite += std::isfinite(x.radius) ? 1 : 0;
  s["finite_radii"] = finite;
  s["samples"] = reps;
  s["note"] = "resampling explores typical outside configurations only; R_hat is a lower bound on the worst-case radius";
  write_text(summary, s.dump(2) + "\n");
}

inline json race_json(const RaceEstimate& e) {
  return {{"balls", e.setup.balls},
          {"ball_volume", e.setup.ball_volume},
          {"complement_volume", e.setup.complement_volume},
          {"direct_reps", e.reps},
          {"direct_successes", e.successes},
          {"direct_wilson", {e.direct.lo, e.direct.hi}},
          {"conditional_reps", e.is_reps},
          {"log10_p_hat", e.log10_p},
          {"log10_ci", {fmt(e.log10_lo), fmt(e.log10_hi)}},
          {"log10_exact", e.log10_exact},
          {"inconclusive", e.inconclusive}};
}

inline void run_variability_cmd(const RunConfig& c, Manifest& m) {
  const ConvexSolid solid = parse_solid(c.str("solid"));
  VariabilityOptions o;
  o.resolution = c.num("resolution");
  if (c.str("delta") != "auto") {
    const auto v = parse_list(c.str("delta"), "delta");
    if (v.size() != 1) throw ValidationError("key 'delta': expected 'auto' or one number");
    o.delta = v[0];
  }
  o.L_max = c.num("Lmax");
  o.reps = c.u64("reps");
  if (o.reps < 2) throw ValidationError("key 'reps': variability needs at least 2");
  o.designs.clear();
  std::stringstream ss(c.str("designs"));
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) o.designs.push_back(item);
  if (o.designs.empty()) throw ValidationError("key 'designs': no designs given");
  o.saturation = saturation_options(c);
  o.seed = c.u64("seed");
  o.threads = c.i32("threads");
  const std::string path = c.str("out") + ".json";
  m.output(path);
  const VariabilityReport rep = run_variability(solid, o);
  json j;
  j["generators"] = json::array();
  for (const Vec& g : rep.lattice.generators) {
    json p = json::array();
    for (int k = 0; k < g.dim(); ++k) p.push_back(g[k]);
    j["generators"].push_back(p);
  }
  j["beta_hat"] = rep.lattice.beta_hat;
  j["beta_bound"] = rep.lattice.beta_bound;
  j["delta"] = rep.delta;
  j["delta_max"] = rep.delta_max;
  j["L0"] = rep.at_L0.L;
  j["counts"] = json::array();
  for (const auto& cnt : rep.table)
    j["counts"].push_back({{"L", cnt.L}, {"n1", cnt.n1}, {"n2", cnt.n2}, {"n3_bound", cnt.n3_bound}, {"separated", cnt.separated()}});
  j["events"] = {race_json(rep.events[0]), race_json(rep.events[1])};
  j["variance"] = json::array();
  for (const auto& row : rep.variance)
    j["variance"].push_back({{"eta_id", row.id},
                             {"eta_size", row.eta_size},
                             {"reps", row.reps},
                             {"mean_N", row.mean},
                             {"var_hat", row.variance.estimate},
                             {"ci95", {row.variance.lo, row.variance.hi}}});
  j["min_variance_ci_lo"] = rep.min_variance_lo;
  j["note"] = "minimum over the tested obstacle family, not the infimum over all admissible configurations";
  write_text(path, j.dump(2) + "\n");
}

inline void run(const RunConfig& c) {
  Manifest m(c);
  if (c.command == "pack") run_pack(c, m);
  else if (c.command == "measure") run_measure(c, m);
  else if (c.command == "sweep") run_sweep(c, m);
  else if (c.command == "covariance") run_covariance(c, m);
  else if (c.command == "stabilize") run_stabilize(c, m);
  else run_variability_cmd(c, m);
  m.finish();
}

/// Rebuilds the configuration recorded in a manifest, writing to `out` if given.
inline RunConfig config_from_manifest(const std::string& path, const std::string& out) {
  const json doc = read_json_file(path);
  if (!doc.contains("command") || !doc.contains("config")) throw ValidationError("'" + path + "' is not a jamlab manifest");
  json values = doc["config"];
  values["out"] = out.empty() ? values["out"].get<std::string>() + ".replay" : out;
  return resolve_config(doc["command"].get<std::string>(), values, json::object());
}

// ---------------------------------------------------------------- entry point

inline const char* kColumns =
    "Outputs (<out> = --out prefix; every run also writes <out>.manifest.json):\n"
    "  pack        <out>.jsonl: rep, seed, N, virtual_time, vacancy_bound, extra_solids_bound, probes, guard_tripped\n"
    "  measure     <out>.csv: rep, f_id, point_integral, volume_integral\n"
    "  sweep       <out>.csv: lambda, reps, mean_ratio, var_ratio, se_mean, se_var, ks;\n"
    "              <out>.reps.jsonl per replication; <out>.summary.json\n"
    "  covariance  <out>.csv: f_id, g_id, cov_over_lambda, se\n"
    "  stabilize   <out>.csv: L, tau_hat, n, method; <out>.samples.jsonl; <out>.summary.json\n"
    "  variability <out>.json\n"
    "Exit codes: 0 success, 2 invalid configuration, 3 runtime failure.";

inline int main(int argc, char** argv) {
  CLI::App app{"jamlab: random sequential packing experiments"};
  app.footer(kColumns);
  app.require_subcommand(1);
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::map<std::string, std::string> config_path;
  std::map<std::string, CLI::App*> subs;
  for (const auto& cmd : subcommands()) {
    CLI::App* s = app.add_subcommand(cmd, "run the " + cmd + " experiment");
    s->footer(kColumns);
    s->add_option("--config", config_path[cmd], "JSON file with configuration keys (flags override it)");
    for (const auto& k : schema()) {
      if (!applies(k, cmd)) continue;
      auto it = k.defaults.find(cmd);
      if (it == k.defaults.end()) it = k.defaults.find("*");
      std::string help = k.help;
      if (!it->second.is_null()) help += " [default: " + it->second.dump() + "]";
      if (!k.choices.empty()) help += " {" + join(k.choices, "|") + "}";
      s->add_option("--" + k.name, raw[cmd][k.name], help);
    }
    subs[cmd] = s;
  }
  std::string manifest_path, replay_out;
  CLI::App* replay = app.add_subcommand("replay", "re-run the configuration recorded in a manifest");
  replay->add_option("manifest", manifest_path, "manifest written by an earlier run")->required();
  replay->add_option("--out", replay_out, "output prefix for the replay (default: <original>.replay)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }
  try {
    RunConfig cfg;
    if (replay->parsed()) {
      cfg = config_from_manifest(manifest_path, replay_out);
    } else {
      std::string cmd;
      for (auto& [name, s] : subs)
        if (s->parsed()) cmd = name;
      json flags = json::object();
      for (const auto& k : schema())
        if (applies(k, cmd) && subs[cmd]->count("--" + k.name) > 0) flags[k.name] = raw[cmd][k.name];
      json file = config_path[cmd].empty() ? json::object() : read_json_file(config_path[cmd]);
      cfg = resolve_config(cmd, file, flags);
    }
    run(cfg);
    return kOk;
  } catch (const ValidationError& e) {
    std::cerr << "jamlab: invalid configuration: " << e.what() << "\n";
    return kValidation;
  } catch (const ContractViolation& e) {
    std::cerr << "jamlab: invalid request: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "jamlab: run failed: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace jamlab::cli

#include "qvdp/sweep.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <numbers>
#include <random>
#include <set>

#include "qvdp/errors.hpp"
#include "qvdp/meanfield.hpp"
#include "qvdp/parallel.hpp"

namespace qvdp {

using nlohmann::json;

const char* version() { return QVDP_VERSION; }

std::vector<double> SweepAxis::values() const {
  std::vector<double> v(static_cast<size_t>(count));
  if (count == 1) {
    v[0] = start;
    return v;
  }
  for (int k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) / (count - 1);
    v[static_cast<size_t>(k)] = scale == AxisScale::linear
                                    ? start + t * (stop - start)
                                    : std::exp(std::log(start) + t * (std::log(stop) - std::log(start)));
  }
  // Keep the endpoints exact.
  v.back() = stop;
  return v;
}

const char* observable_name(Observable o) {
  switch (o) {
    case Observable::sync: return "sync";
    case Observable::g2: return "g2";
    case Observable::phonons: return "phonons";
    case Observable::wigner: return "wigner";
    case Observable::spectrum: return "spectrum";
    case Observable::tongue: return "tongue";
    case Observable::perturbative_sync: return "perturbative_sync";
  }
  return "?";
}

namespace {

constexpr Observable kAllObservables[] = {Observable::sync,     Observable::g2,     Observable::phonons,
                                          Observable::wigner,   Observable::spectrum, Observable::tongue,
                                          Observable::perturbative_sync};

const std::set<std::string> kParamNames = {"delta", "zeta", "kerr", "kerr1", "kerr2",
                                           "gamma1", "gamma2", "omega1", "omega2", "dims"};
const std::set<std::string> kAxisNames = {"delta", "zeta", "kerr", "kerr1", "kerr2", "gamma1", "gamma2", "dims"};
// Always-present coordinate columns.
const std::vector<std::string> kBaseColumns = {"delta", "zeta", "kerr", "gamma2"};

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) fail(where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) fail("unknown key '" + key + "' in " + where);
}

double number(const json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number()) fail(where + "." + key + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(where + "." + key + " must be finite");
  return x;
}

double number_or(const json& j, const std::string& key, double fallback, const std::string& where) {
  return j.contains(key) ? number(j, key, where) : fallback;
}

int integer_or(const json& j, const std::string& key, int fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) fail(where + "." + key + " must be an integer");
  return v.get<int>();
}

std::string string_or(const json& j, const std::string& key, const std::string& fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) fail(where + "." + key + " must be a string");
  return j.at(key).get<std::string>();
}

bool is_integral(double x) { return std::abs(x - std::round(x)) < 1e-9; }

void apply_param(SystemParams& p, const std::string& name, double v) {
  if (name == "delta") p.delta = v;
  else if (name == "zeta") p.zeta = v;
  else if (name == "kerr") p.set_kerr(v);
  else if (name == "kerr1") p.kerr1 = v;
  else if (name == "kerr2") p.kerr2 = v;
  else if (name == "gamma1") p.gamma1 = v;
  else if (name == "gamma2") p.gamma2 = v;
  else if (name == "omega1") p.omega1 = v;
  else if (name == "omega2") p.omega2 = v;
  else if (name == "dims") p.set_dims(static_cast<int>(std::lround(v)));
  else fail("unknown parameter '" + name + "'");
}

std::vector<int> dims_of(const SystemParams& p) {
  return {p.dims.dim(0), p.dims.dim(1)};
}

SystemParams parse_fixed(const json& j) {
  SystemParams p;
  if (j.is_null()) return p;
  if (!j.is_object()) fail("fixed must be an object");
  const bool split_kerr = j.contains("kerr1") || j.contains("kerr2");
  if (split_kerr && j.contains("kerr")) fail("fixed: give either kerr or kerr1/kerr2");
  for (const auto& [key, v] : j.items()) {
    if (!kParamNames.count(key)) fail("fixed: '" + key + "' is not a parameter");
    if (key == "dims") {
      std::vector<int> d;
      if (v.is_number_integer()) {
        d = {v.get<int>(), v.get<int>()};
      } else if (v.is_array() && v.size() == 2 && v[0].is_number_integer() && v[1].is_number_integer()) {
        d = {v[0].get<int>(), v[1].get<int>()};
      } else {
        fail("fixed.dims must be an integer or a pair of integers");
      }
      if (d[0] < 4 || d[1] < 4) fail("fixed.dims must be at least 4 per mode");
      p.dims = FockSpace(d);
      continue;
    }
    apply_param(p, key, number(j, key, "fixed"));
  }
  return p;
}

SweepAxis parse_axis(const json& j, size_t k) {
  const std::string where = "axes[" + std::to_string(k) + "]";
  check_keys(j, {"name", "start", "stop", "count", "scale"}, where);
  SweepAxis a;
  if (!j.contains("name") || !j.at("name").is_string()) fail(where + ".name must be a string");
  a.name = j.at("name").get<std::string>();
  if (!kAxisNames.count(a.name)) fail(where + ": '" + a.name + "' is not a sweepable parameter");
  if (!j.contains("start")) fail(where + ".start is required");
  a.start = number(j, "start", where);
  a.count = integer_or(j, "count", 1, where);
  if (a.count < 1) fail(where + ".count must be >= 1");
  if (a.count > 1 && !j.contains("stop")) fail(where + ".stop is required when count > 1");
  a.stop = number_or(j, "stop", a.start, where);
  const std::string scale = string_or(j, "scale", "linear", where);
  if (scale == "linear") a.scale = AxisScale::linear;
  else if (scale == "log") a.scale = AxisScale::log;
  else fail(where + ".scale must be 'linear' or 'log'");
  if (a.scale == AxisScale::log && (a.start <= 0.0 || a.stop <= 0.0)) fail(where + ": log axis needs positive bounds");
  if (a.name == "dims") {
    for (double v : a.values())
      if (!is_integral(v) || v < 4) fail(where + ": dims values must be integers >= 4");
  }
  return a;
}

void parse_settings(const json& j, SweepSettings& s) {
  if (j.is_null()) return;
  check_keys(j, {"solver", "tol", "max_iter", "adaptive", "truncation", "perturbative", "wigner", "spectrum", "tongue"},
             "settings");
  const std::string solver = string_or(j, "solver", "direct", "settings");
  if (solver == "direct") s.solve.method = SolveMethod::direct;
  else if (solver == "iterative") s.solve.method = SolveMethod::iterative;
  else fail("settings.solver must be 'direct' or 'iterative'");
  s.solve.tol = number_or(j, "tol", s.solve.tol, "settings");
  if (s.solve.tol <= 0.0) fail("settings.tol must be positive");
  s.solve.max_iter = integer_or(j, "max_iter", s.solve.max_iter, "settings");
  if (s.solve.max_iter < 1) fail("settings.max_iter must be positive");
  if (j.contains("adaptive")) {
    if (!j.at("adaptive").is_boolean()) fail("settings.adaptive must be a boolean");
    s.adaptive = j.at("adaptive").get<bool>();
  }
  if (j.contains("truncation")) {
    const auto& t = j.at("truncation");
    const std::string w = "settings.truncation";
    check_keys(t, {"start", "step", "max", "tail_tol", "tail_levels"}, w);
    auto& a = s.truncation;
    a.start = integer_or(t, "start", a.start, w);
    a.step = integer_or(t, "step", a.step, w);
    a.max = integer_or(t, "max", a.max, w);
    a.tail_tol = number_or(t, "tail_tol", a.tail_tol, w);
    a.tail_levels = integer_or(t, "tail_levels", a.tail_levels, w);
    if (a.start < 4 || a.step < 1 || a.max < a.start || a.tail_tol <= 0.0 || a.tail_levels < 1)
      fail(w + ": need start >= 4, step >= 1, max >= start, tail_tol > 0, tail_levels >= 1");
  }
  const std::string pert = string_or(j, "perturbative", "subspace_inverse", "settings");
  if (pert == "printed_lambda") s.perturbative = PerturbativeMode::printed_lambda;
  else if (pert == "numerical_lambda") s.perturbative = PerturbativeMode::numerical_lambda;
  else if (pert == "subspace_inverse") s.perturbative = PerturbativeMode::subspace_inverse;
  else fail("settings.perturbative must be printed_lambda, numerical_lambda or subspace_inverse");
  if (j.contains("wigner")) {
    const auto& w = j.at("wigner");
    check_keys(w, {"mode", "extent", "points"}, "settings.wigner");
    s.wigner.mode = integer_or(w, "mode", s.wigner.mode, "settings.wigner");
    s.wigner.grid.extent = number_or(w, "extent", s.wigner.grid.extent, "settings.wigner");
    s.wigner.grid.points = integer_or(w, "points", s.wigner.grid.points, "settings.wigner");
  }
  if (s.wigner.mode < 0 || s.wigner.mode > 1) fail("settings.wigner.mode must be 0 or 1");
  if (s.wigner.grid.extent <= 0.0 || s.wigner.grid.points < 2) fail("settings.wigner: need extent > 0, points >= 2");
  if (j.contains("spectrum")) {
    const auto& w = j.at("spectrum");
    const std::string ws = "settings.spectrum";
    check_keys(w, {"mode", "omega_min", "omega_max", "points", "method"}, ws);
    auto& sp = s.spectrum;
    sp.mode = integer_or(w, "mode", sp.mode, ws);
    sp.omega_min = number_or(w, "omega_min", sp.omega_min, ws);
    sp.omega_max = number_or(w, "omega_max", sp.omega_max, ws);
    sp.points = integer_or(w, "points", sp.points, ws);
    const std::string m = string_or(w, "method", "resolvent", ws);
    if (m == "resolvent") sp.method = SpectrumMethod::resolvent;
    else if (m == "time_domain") sp.method = SpectrumMethod::time_domain;
    else fail(ws + ".method must be 'resolvent' or 'time_domain'");
  }
  if (s.spectrum.mode < 0 || s.spectrum.mode > 1) fail("settings.spectrum.mode must be 0 or 1");
  if (s.spectrum.points < 2 || !(s.spectrum.omega_min < s.spectrum.omega_max))
    fail("settings.spectrum: need points >= 2 and omega_min < omega_max");
  if (j.contains("tongue")) {
    const auto& t = j.at("tongue");
    check_keys(t, {"relax_time", "seed"}, "settings.tongue");
    s.tongue.relax_time = number_or(t, "relax_time", s.tongue.relax_time, "settings.tongue");
    if (t.contains("seed")) {
      if (!t.at("seed").is_number_unsigned()) fail("settings.tongue.seed must be a non-negative integer");
      s.tongue.seed = t.at("seed").get<std::uint64_t>();
    }
  }
  if (s.tongue.relax_time <= 0.0) fail("settings.tongue.relax_time must be positive");
}

std::string fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

size_t SweepGrid::cell_count() const {
  size_t n = 1;
  for (const auto& a : axes) n *= static_cast<size_t>(a.count);
  return n;
}

SystemParams SweepGrid::cell_params(size_t cell) const {
  if (cell >= cell_count()) throw InvalidArgument("cell index out of range");
  SystemParams p = fixed;
  size_t rest = cell;
  for (size_t k = axes.size(); k-- > 0;) {
    const size_t c = static_cast<size_t>(axes[k].count);
    const size_t i = rest % c;
    rest /= c;
    apply_param(p, axes[k].name, axes[k].values()[i]);
  }
  return p;
}

bool SweepGrid::wants(Observable o) const {
  return std::find(observables.begin(), observables.end(), o) != observables.end();
}

bool SweepGrid::quantum() const {
  return wants(Observable::sync) || wants(Observable::g2) || wants(Observable::phonons) ||
         wants(Observable::wigner) || wants(Observable::spectrum);
}

SweepGrid parse_sweep(const json& j) {
  check_keys(j, {"axes", "fixed", "observables", "settings", "output"}, "config");
  SweepGrid g;
  if (j.contains("axes")) {
    if (!j.at("axes").is_array()) fail("axes must be an array");
    std::set<std::string> seen;
    for (size_t k = 0; k < j.at("axes").size(); ++k) {
      g.axes.push_back(parse_axis(j.at("axes")[k], k));
      const std::string& n = g.axes.back().name;
      const bool kerr_clash = (n == "kerr" && (seen.count("kerr1") || seen.count("kerr2"))) ||
                              ((n == "kerr1" || n == "kerr2") && seen.count("kerr"));
      if (!seen.insert(n).second || kerr_clash) fail("axis '" + n + "' conflicts with another axis");
    }
  }
  g.fixed = parse_fixed(j.contains("fixed") ? j.at("fixed") : json());

  if (!j.contains("observables") || !j.at("observables").is_array() || j.at("observables").empty())
    fail("observables must be a non-empty array");
  for (const auto& o : j.at("observables")) {
    if (!o.is_string()) fail("observables entries must be strings");
    const std::string name = o.get<std::string>();
    bool found = false;
    for (Observable c : kAllObservables) {
      if (name == observable_name(c)) {
        if (g.wants(c)) fail("observable '" + name + "' listed twice");
        g.observables.push_back(c);
        found = true;
      }
    }
    if (!found) fail("unknown observable '" + name + "'");
  }
  // Canonical order so the config hash ignores listing order.
  std::sort(g.observables.begin(), g.observables.end());

  parse_settings(j.contains("settings") ? j.at("settings") : json(), g.settings);

  if (j.contains("output")) {
    const auto& o = j.at("output");
    check_keys(o, {"path", "format"}, "output");
    g.output_path = string_or(o, "path", g.output_path, "output");
    g.format = string_or(o, "format", g.format, "output");
  }
  if (g.format != "csv") fail("output.format: only 'csv' is supported");
  if (g.output_path.empty() || std::filesystem::path(g.output_path).filename().empty())
    fail("output.path must name a file");

  // Grid and observables must make sense together.
  for (const auto& a : g.axes) {
    if (a.name == "dims" && !g.quantum() && !g.wants(Observable::perturbative_sync))
      fail("a dims axis only makes sense with quantum observables");
  }
  const size_t n = g.cell_count();
  if (n > 10'000'000) fail("grid has too many cells");
  for (size_t c = 0; c < n; ++c) {
    const SystemParams p = g.cell_params(c);
    try {
      p.validate();
    } catch (const Error& e) {
      fail("cell " + std::to_string(c) + ": " + e.what());
    }
    if (!(p.gamma1 > 0.0) || !(p.gamma2 > 0.0)) fail("cell " + std::to_string(c) + ": gamma1 and gamma2 must be positive");
  }
  return g;
}

SweepGrid load_sweep(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail("cannot open config " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    fail("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_sweep(j);
}

json to_json(const SweepGrid& g) {
  json j;
  j["axes"] = json::array();
  for (const auto& a : g.axes)
    j["axes"].push_back({{"name", a.name}, {"start", a.start}, {"stop", a.stop}, {"count", a.count},
                         {"scale", a.scale == AxisScale::linear ? "linear" : "log"}});
  const auto& p = g.fixed;
  json f = {{"delta", p.delta},   {"zeta", p.zeta},     {"kerr1", p.kerr1},     {"kerr2", p.kerr2},
            {"gamma1", p.gamma1}, {"gamma2", p.gamma2}, {"dims", dims_of(p)}};
  if (p.omega1) f["omega1"] = *p.omega1;
  if (p.omega2) f["omega2"] = *p.omega2;
  j["fixed"] = f;
  j["observables"] = json::array();
  for (Observable o : g.observables) j["observables"].push_back(observable_name(o));
  const auto& s = g.settings;
  json st;
  st["solver"] = s.solve.method == SolveMethod::direct ? "direct" : "iterative";
  st["tol"] = s.solve.tol;
  st["max_iter"] = s.solve.max_iter;
  st["adaptive"] = s.adaptive;
  st["truncation"] = {{"start", s.truncation.start}, {"step", s.truncation.step}, {"max", s.truncation.max},
                      {"tail_tol", s.truncation.tail_tol}, {"tail_levels", s.truncation.tail_levels}};
  st["perturbative"] = s.perturbative == PerturbativeMode::printed_lambda     ? "printed_lambda"
                       : s.perturbative == PerturbativeMode::numerical_lambda ? "numerical_lambda"
                                                                              : "subspace_inverse";
  st["wigner"] = {{"mode", s.wigner.mode}, {"extent", s.wigner.grid.extent}, {"points", s.wigner.grid.points}};
  st["spectrum"] = {{"mode", s.spectrum.mode},
                    {"omega_min", s.spectrum.omega_min},
                    {"omega_max", s.spectrum.omega_max},
                    {"points", s.spectrum.points},
                    {"method", s.spectrum.method == SpectrumMethod::resolvent ? "resolvent" : "time_domain"}};
  st["tongue"] = {{"relax_time", s.tongue.relax_time}};
  if (s.tongue.seed) st["tongue"]["seed"] = *s.tongue.seed;
  j["settings"] = st;
  j["output"] = {{"path", g.output_path}, {"format", g.format}};
  return j;
}

std::string config_hash(const SweepGrid& grid) {
  json j = to_json(grid);
  j.erase("output");
  return fnv1a(j.dump());
}

std::string cell_hash(const std::string& config_hash, size_t cell) {
  return fnv1a(config_hash + ":" + std::to_string(cell));
}

std::vector<std::string> dataset_columns(const SweepGrid& g) {
  std::vector<std::string> c = {"cell", "cell_hash"};
  c.insert(c.end(), kBaseColumns.begin(), kBaseColumns.end());
  for (const auto& a : g.axes)
    if (std::find(c.begin(), c.end(), a.name) == c.end()) c.push_back(a.name);
  if (g.quantum()) c.insert(c.end(), {"dims1", "dims2", "residual"});
  if (g.wants(Observable::sync)) c.insert(c.end(), {"s_abs", "s_phase"});
  if (g.wants(Observable::g2)) c.push_back("g2");
  if (g.wants(Observable::phonons)) c.insert(c.end(), {"n1", "n2"});
  if (g.wants(Observable::wigner)) c.insert(c.end(), {"wigner_norm", "wigner_rms"});
  if (g.wants(Observable::spectrum)) c.insert(c.end(), {"spec_population", "spec_integral"});
  if (g.wants(Observable::perturbative_sync)) c.insert(c.end(), {"sp_abs", "sp_phase"});
  if (g.wants(Observable::tongue)) {
    c.insert(c.end(), {"synchronized", "marginal", "n_stable", "phi"});
    if (g.settings.tongue.seed) c.push_back("phi_random");
  }
  c.push_back("error");
  return c;
}

std::filesystem::path default_out_dir() {
  const char* env = std::getenv("QVDP_OUT_DIR");
  return env && *env ? std::filesystem::path(env) : std::filesystem::current_path();
}

namespace {

struct Paths {
  std::filesystem::path dataset, metadata, wigner_dir, spectrum_dir;

  Paths(const SweepGrid& g, const std::filesystem::path& out) {
    dataset = out / g.output_path;
    const auto stem = dataset.parent_path() / dataset.stem();
    metadata = std::filesystem::path(stem).concat(".meta.json");
    wigner_dir = std::filesystem::path(stem).concat("_wigner");
    spectrum_dir = std::filesystem::path(stem).concat("_spectrum");
  }

  static std::string cell_file(size_t cell) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "cell_%06zu.csv", cell);
    return buf;
  }
};

double param_value(const SystemParams& p, const std::string& name) {
  if (name == "delta") return p.delta;
  if (name == "zeta") return p.zeta;
  if (name == "kerr" || name == "kerr1") return p.kerr1;
  if (name == "kerr2") return p.kerr2;
  if (name == "gamma1") return p.gamma1;
  if (name == "gamma2") return p.gamma2;
  if (name == "dims") return p.dims.dim(0);
  return std::nan("");
}

class CellRunner {
 public:
  CellRunner(const SweepGrid& g, const std::string& hash, const Paths& paths)
      : g_(g), hash_(hash), paths_(paths), columns_(dataset_columns(g)) {}

  std::vector<std::string> run(size_t cell) const {
    std::map<std::string, double> v;
    std::vector<std::string> errors;
    const SystemParams base = g_.cell_params(cell);
    auto guarded = [&](const char* what, auto&& body) {
      try {
        body();
      } catch (const std::exception& e) {
        errors.push_back(std::string(what) + ": " + e.what());
      }
    };

    if (g_.quantum()) guarded("steady_state", [&] { quantum(cell, base, v, errors); });
    if (g_.wants(Observable::perturbative_sync)) {
      guarded("perturbative_sync", [&] {
        const cplx s = perturbative_sync(base, g_.settings.perturbative);
        v["sp_abs"] = std::abs(s);
        v["sp_phase"] = std::arg(s);
      });
    }
    if (g_.wants(Observable::tongue)) guarded("tongue", [&] { tongue(cell, base, v); });

    std::vector<std::string> row;
    row.reserve(columns_.size());
    for (const auto& c : columns_) {
      if (c == "cell") row.push_back(std::to_string(cell));
      else if (c == "cell_hash") row.push_back(cell_hash(hash_, cell));
      else if (c == "error") row.push_back(join(errors));
      else if (auto it = v.find(c); it != v.end()) row.push_back(format_number(it->second));
      else if (double x = param_value(base, c); !std::isnan(x)) row.push_back(format_number(x));
      else row.push_back("nan");
    }
    return row;
  }

 private:
  static std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : "; ") + p;
    return out;
  }

  void quantum(size_t cell, const SystemParams& base, std::map<std::string, double>& v,
               std::vector<std::string>& errors) const {
    SystemParams p = base;
    DensityMatrix rho = [&] {
      if (g_.settings.adaptive) {
        auto a = adaptive_steady_state(base, g_.settings.solve, g_.settings.truncation);
        p = a.params;
        v["residual"] = a.solution.residual;
        return std::move(a.solution.rho);
      }
      auto s = solve_steady_state(build_liouvillian(p), g_.settings.solve);
      v["residual"] = s.residual;
      return std::move(s.rho);
    }();
    v["dims1"] = p.dims.dim(0);
    v["dims2"] = p.dims.dim(1);

    auto guarded = [&](const char* what, auto&& body) {
      try {
        body();
      } catch (const std::exception& e) {
        errors.push_back(std::string(what) + ": " + e.what());
      }
    };
    if (g_.wants(Observable::sync)) {
      guarded("sync", [&] {
        const auto s = sync_measure(rho);
        v["s_abs"] = s.magnitude;
        v["s_phase"] = s.phase;
      });
    }
    if (g_.wants(Observable::g2)) guarded("g2", [&] { v["g2"] = cross_g2(rho); });
    if (g_.wants(Observable::phonons)) {
      guarded("phonons", [&] {
        const auto [n1, n2] = phonon_numbers(rho);
        v["n1"] = n1;
        v["n2"] = n2;
      });
    }
    if (g_.wants(Observable::wigner)) {
      guarded("wigner", [&] {
        const auto w = wigner(partial_trace(rho, g_.settings.wigner.mode), g_.settings.wigner.grid);
        v["wigner_norm"] = w.normalization;
        v["wigner_rms"] = wigner_rms_radius(w);
        Dataset d{{"x", "p", "w"}, {}};
        for (size_t i = 0; i < w.p.size(); ++i)
          for (size_t j = 0; j < w.x.size(); ++j)
            d.rows.push_back({format_number(w.x[j]), format_number(w.p[i]),
                              format_number(w.values(static_cast<Index>(i), static_cast<Index>(j)))});
        write_csv(d, paths_.wigner_dir / Paths::cell_file(cell));
      });
    }
    if (g_.wants(Observable::spectrum)) {
      guarded("spectrum", [&] {
        const auto& ss = g_.settings.spectrum;
        std::vector<double> grid(static_cast<size_t>(ss.points));
        for (int k = 0; k < ss.points; ++k)
          grid[static_cast<size_t>(k)] = ss.omega_min + (ss.omega_max - ss.omega_min) * k / (ss.points - 1);
        SpectrumOptions so;
        so.method = ss.method;
        so.solve = g_.settings.solve;
        const auto s = power_spectrum(p, build_liouvillian(p), rho, ss.mode, grid, so);
        v["spec_population"] = s.population;
        v["spec_integral"] = spectrum_integral(s, p.gamma1);
        Dataset d{{"cell", "delta", "zeta", "kerr", "gamma2", "omega", "power"}, {}};
        for (size_t k = 0; k < s.freqs.size(); ++k)
          d.rows.push_back({std::to_string(cell), format_number(p.delta), format_number(p.zeta),
                            format_number(p.kerr1), format_number(p.gamma2), format_number(s.freqs[k]),
                            format_number(s.values[k])});
        write_csv(d, paths_.spectrum_dir / Paths::cell_file(cell));
      });
    }
  }

  void tongue(size_t cell, const SystemParams& p, std::map<std::string, double>& v) const {
    TongueOptions opts;
    opts.relax_time = g_.settings.tongue.relax_time;
    const auto cells = arnold_tongue(p, {p.zeta}, {p.delta}, opts);
    const TongueCell& c = cells.front();
    if (!c.error.empty()) throw Error(c.error);
    v["synchronized"] = c.synchronized ? 1.0 : 0.0;
    v["marginal"] = c.marginal ? 1.0 : 0.0;
    v["n_stable"] = static_cast<double>(c.phases.size());
    v["phi"] = c.canonical_phase.value_or(std::nan(""));
    if (const auto seed = g_.settings.tongue.seed) {
      // Seeded per cell so the draw does not depend on scheduling.
      std::seed_seq seq{static_cast<std::uint32_t>(*seed), static_cast<std::uint32_t>(*seed >> 32),
                        static_cast<std::uint32_t>(cell), static_cast<std::uint32_t>(cell >> 32)};
      std::mt19937_64 rng(seq);
      std::uniform_real_distribution<double> amp(0.01, 0.6), ph(-std::numbers::pi, std::numbers::pi);
      const PolarState start{amp(rng), amp(rng), ph(rng)};
      double phase = std::nan("");
      const auto r = relax_polar(start, p, opts.relax_time);
      if (r.converged) {
        for (const auto& fp : fixed_points(p))
          if (fp.stable() && polar_distance(fp.state(), r.state) < 1e-4) phase = fp.phi;
      }
      v["phi_random"] = phase;
    }
  }

  const SweepGrid& g_;
  const std::string& hash_;
  const Paths& paths_;
  std::vector<std::string> columns_;
};

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_metadata(const SweepGrid& g, const std::string& hash, const Dataset& data, const RunOptions& opts,
                    const SweepReport& report, const Paths& paths) {
  json cells = json::array();
  const bool q = g.quantum();
  for (const auto& row : data.rows) {
    json c = {{"cell", std::stoul(row[data.column_index("cell")])},
              {"hash", row[data.column_index("cell_hash")]},
              {"error", row[data.column_index("error")]}};
    if (q) {
      const double d1 = parse_number(row[data.column_index("dims1")]);
      const double d2 = parse_number(row[data.column_index("dims2")]);
      const double res = parse_number(row[data.column_index("residual")]);
      c["dims"] = std::isnan(d1) ? json() : json::array({static_cast<int>(d1), static_cast<int>(d2)});
      c["residual"] = std::isnan(res) ? json() : json(res);
    }
    cells.push_back(c);
  }
  json meta = {{"tool", "qvdp"},
               {"version", version()},
               {"created", utc_timestamp()},
               {"units", "rates, detunings and couplings in units of gamma1; time in 1/gamma1"},
               {"config", to_json(g)},
               {"config_hash", hash},
               {"columns", data.columns},
               {"workers", opts.workers},
               {"computed", report.computed},
               {"reused", report.reused},
               {"failed", report.failed},
               {"cells", cells}};
  if (g.wants(Observable::wigner)) meta["wigner_dir"] = paths.wigner_dir.filename().string();
  if (g.wants(Observable::spectrum)) meta["spectrum_dir"] = paths.spectrum_dir.filename().string();
  const auto tmp = std::filesystem::path(paths.metadata).concat(".tmp");
  {
    std::ofstream f(tmp);
    f << meta.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, paths.metadata);
}

}  // namespace

SweepReport run_sweep(const SweepGrid& grid, const RunOptions& opts) {
  if (opts.workers < 1) throw ConfigError("workers must be >= 1");
  const std::string hash = config_hash(grid);
  const Paths paths(grid, opts.out_dir);
  const auto columns = dataset_columns(grid);
  const size_t n = grid.cell_count();

  SweepReport report;
  report.dataset = paths.dataset;
  report.metadata = paths.metadata;
  report.cells = n;

  std::vector<std::optional<std::vector<std::string>>> rows(n);
  if (opts.resume && std::filesystem::exists(paths.dataset)) {
    try {
      const Dataset old = read_csv(paths.dataset, true);
      if (old.columns == columns) {
        for (const auto& r : old.rows) {
          const size_t cell = std::stoul(r[0]);
          if (cell >= n || r[1] != cell_hash(hash, cell)) continue;
          const auto file = Paths::cell_file(cell);
          if (grid.wants(Observable::wigner) && !std::filesystem::exists(paths.wigner_dir / file)) continue;
          if (grid.wants(Observable::spectrum) && !std::filesystem::exists(paths.spectrum_dir / file)) continue;
          rows[cell] = r;
        }
      }
    } catch (const std::exception&) {
      // Unreadable leftovers are recomputed.
    }
  }

  std::vector<size_t> todo;
  for (size_t c = 0; c < n; ++c)
    if (!rows[c]) todo.push_back(c);
  report.reused = n - todo.size();

  // Rows are appended as cells finish so an interrupted run can resume; the
  // file is rewritten in cell order at the end.
  Dataset partial{columns, {}};
  for (const auto& r : rows)
    if (r) partial.rows.push_back(*r);
  write_csv(partial, paths.dataset);
  {
    std::ofstream out(paths.dataset, std::ios::binary | std::ios::app);
    std::mutex write_mutex;
    const CellRunner runner(grid, hash, paths);
    parallel_for(todo.size(), opts.workers, [&](size_t k) {
      const size_t cell = todo[k];
      auto row = runner.run(cell);
      std::lock_guard lock(write_mutex);
      out << csv_row(row) << std::flush;
      rows[cell] = std::move(row);
    });
  }
  report.computed = todo.size();

  Dataset final{columns, {}};
  for (auto& r : rows) {
    if (!r->back().empty()) ++report.failed;
    final.rows.push_back(std::move(*r));
  }
  write_csv(final, paths.dataset);
  write_metadata(grid, hash, final, opts, report, paths);
  return report;
}

}  // namespace qvdp

// qvdp command line: declarative sweeps and figure rendering.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "qvdp/errors.hpp"
#include "qvdp/plot.hpp"
#include "qvdp/sweep.hpp"

namespace {

using nlohmann::json;

struct Common {
  std::string config;
  std::string out;
  int workers = 1;
  int dims = 0;
  long long seed = -1;
  bool fresh = false;
};

// Observables used when a config does not list its own.
const std::map<std::string, std::vector<std::string>> kPresets = {
    {"classical-tongue", {"tongue"}},
    {"quantum-sync", {"sync", "phonons"}},
    {"g2-sweep", {"g2", "phonons"}},
    {"spectrum", {"spectrum", "phonons"}},
    {"wigner", {"wigner", "phonons"}},
    {"perturbative", {"perturbative_sync"}},
};

json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw qvdp::ConfigError("cannot open config " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw qvdp::ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
}

std::filesystem::path out_dir(const Common& c) {
  return c.out.empty() ? qvdp::default_out_dir() : std::filesystem::path(c.out);
}

int run_sweep_command(const std::string& name, const Common& c) {
  json cfg = read_json(c.config);
  if (!cfg.is_object()) throw qvdp::ConfigError("config must be a JSON object");
  if (!cfg.contains("observables")) cfg["observables"] = kPresets.at(name);
  if (!cfg.contains("output")) cfg["output"] = {{"path", name + ".csv"}};
  if (c.dims) {
    if (cfg.contains("axes") && cfg["axes"].is_array())
      for (const auto& a : cfg["axes"])
        if (a.is_object() && a.value("name", "") == "dims") throw qvdp::ConfigError("--dims conflicts with a dims axis");
    cfg["fixed"]["dims"] = c.dims;
  }
  if (c.seed >= 0) cfg["settings"]["tongue"]["seed"] = static_cast<std::uint64_t>(c.seed);

  const qvdp::SweepGrid grid = qvdp::parse_sweep(cfg);
  qvdp::RunOptions opts;
  opts.out_dir = out_dir(c);
  opts.workers = c.workers;
  opts.resume = !c.fresh;
  const auto r = qvdp::run_sweep(grid, opts);
  std::printf("%zu cells (%zu computed, %zu reused), %zu failed -> %s\n", r.cells, r.computed, r.reused, r.failed,
              r.dataset.string().c_str());
  return r.failed ? 2 : 0;
}

struct PlotArgs {
  std::vector<std::string> datasets;
  std::string kind = "heatmap";
  std::string x, y, color, group, title, file;
  std::string out;
  std::string config;
};

int run_plot_command(PlotArgs a) {
  if (!a.config.empty()) {
    // Flags given on the command line win over the config file.
    const json j = read_json(a.config);
    for (const auto& [key, _] : j.items()) {
      static const std::set<std::string> allowed = {"datasets", "kind", "x", "y", "color", "group", "title", "file", "cyclic"};
      if (!allowed.count(key)) throw qvdp::ConfigError("unknown key '" + key + "' in plot config");
    }
    if (a.datasets.empty() && j.contains("datasets")) a.datasets = j.at("datasets").get<std::vector<std::string>>();
    auto take = [&](std::string& field, const char* key, const std::string& dflt = "") {
      if ((field.empty() || field == dflt) && j.contains(key)) field = j.at(key).get<std::string>();
    };
    take(a.kind, "kind", "heatmap");
    take(a.x, "x");
    take(a.y, "y");
    take(a.color, "color");
    take(a.group, "group");
    take(a.title, "title");
    take(a.file, "file");
  }
  if (a.datasets.empty()) throw qvdp::ConfigError("plot needs at least one --dataset");
  std::vector<qvdp::Dataset> parts;
  for (const auto& d : a.datasets) parts.push_back(qvdp::read_csv(d));
  const qvdp::Dataset data = qvdp::concatenate(parts);

  qvdp::PlotSpec spec;
  spec.kind = qvdp::parse_plot_kind(a.kind);
  spec.x = a.x;
  spec.y = a.y;
  spec.color = a.color;
  spec.group = a.group;
  spec.title = a.title;
  const std::string file = a.file.empty() ? std::filesystem::path(a.datasets.front()).stem().string() + ".svg" : a.file;
  const auto path = (a.out.empty() ? qvdp::default_out_dir() : std::filesystem::path(a.out)) / file;
  qvdp::render_plot(data, spec, path);
  std::printf("%s\n", path.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled quantum van der Pol oscillators: sweeps and plots. Units of gamma1 throughout."};
  app.set_version_flag("--version", qvdp::version());
  app.require_subcommand(1);

  Common common;
  std::map<std::string, CLI::App*> sweeps;
  const std::map<std::string, std::string> help = {
      {"classical-tongue", "mean-field fixed points and Arnold tongue flags"},
      {"quantum-sync", "steady-state synchronization measure S"},
      {"g2-sweep", "cross correlation g2 and phonon numbers"},
      {"spectrum", "power spectra, one file per cell"},
      {"wigner", "single-mode Wigner functions, one file per cell"},
      {"perturbative", "first-order perturbative S"},
  };
  for (const auto& [name, text] : help) {
    auto* sub = app.add_subcommand(name, text);
    sub->add_option("--config", common.config, "sweep config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "output directory (default $QVDP_OUT_DIR or .)");
    sub->add_option("--workers", common.workers, "concurrent cells")->check(CLI::PositiveNumber);
    sub->add_option("--dims", common.dims, "Fock truncation per mode")->check(CLI::Range(4, 512));
    sub->add_option("--seed", common.seed, "seed for random classical initial conditions")->check(CLI::NonNegativeNumber);
    sub->add_flag("--fresh", common.fresh, "ignore an existing partial dataset");
    sweeps[name] = sub;
  }

  PlotArgs plot;
  auto* p = app.add_subcommand("plot", "render a dataset to SVG");
  p->add_option("--dataset", plot.datasets, "CSV dataset (repeat to overlay)");
  p->add_option("--config", plot.config, "plot spec (JSON)")->check(CLI::ExistingFile);
  p->add_option("--kind", plot.kind, "heatmap, lines or phase-space");
  p->add_option("--x", plot.x, "x column");
  p->add_option("--y", plot.y, "y column");
  p->add_option("--color", plot.color, "colour column (heatmap, phase-space)");
  p->add_option("--group", plot.group, "one curve per value of this column (lines)");
  p->add_option("--title", plot.title);
  p->add_option("--out", plot.out, "output directory (default $QVDP_OUT_DIR or .)");
  p->add_option("--file", plot.file, "output file name (default <dataset>.svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (p->parsed()) return run_plot_command(plot);
    for (const auto& [name, sub] : sweeps)
      if (sub->parsed()) return run_sweep_command(name, common);
  } catch (const qvdp::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}

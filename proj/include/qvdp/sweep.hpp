#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qvdp/dataset.hpp"
#include "qvdp/model.hpp"
#include "qvdp/observables.hpp"
#include "qvdp/perturbation.hpp"
#include "qvdp/solvers.hpp"

namespace qvdp {

const char* version();

enum class AxisScale { linear, log };

struct SweepAxis {
  std::string name;  // a SystemParams field: delta, zeta, kerr, kerr1, kerr2, gamma1, gamma2, dims
  double start = 0.0;
  double stop = 0.0;
  int count = 1;
  AxisScale scale = AxisScale::linear;

  std::vector<double> values() const;
};

enum class Observable { sync, g2, phonons, wigner, spectrum, tongue, perturbative_sync };

const char* observable_name(Observable o);

struct WignerSettings {
  int mode = 0;
  PhaseGrid grid{4.0, 81};
};

struct SpectrumSettings {
  int mode = 0;
  double omega_min = -20.0;
  double omega_max = 20.0;
  int points = 401;
  SpectrumMethod method = SpectrumMethod::resolvent;
};

struct TongueSettings {
  double relax_time = 2000.0;
  std::optional<std::uint64_t> seed;  // adds a phi_random column from a seeded start per cell
};

struct SweepSettings {
  SolveOptions solve{};
  bool adaptive = false;
  AdaptiveTruncation truncation{};
  PerturbativeMode perturbative = PerturbativeMode::subspace_inverse;
  WignerSettings wigner{};
  SpectrumSettings spectrum{};
  TongueSettings tongue{};
};

/// Declarative sweep; all rates and frequencies in units of gamma1.
/// The first axis varies slowest.
struct SweepGrid {
  std::vector<SweepAxis> axes;
  SystemParams fixed{};
  std::vector<Observable> observables;
  std::string output_path = "dataset.csv";  // relative to the run's output directory
  std::string format = "csv";
  SweepSettings settings{};

  size_t cell_count() const;
  SystemParams cell_params(size_t cell) const;
  bool wants(Observable o) const;
  bool quantum() const;  // needs a steady state
};

// Schema check; every problem is a ConfigError raised before any work.
SweepGrid parse_sweep(const nlohmann::json& config);
SweepGrid load_sweep(const std::filesystem::path& path);
// Canonical form with all defaults filled in; parse_sweep(to_json(g)) == g.
nlohmann::json to_json(const SweepGrid& grid);

// FNV-1a (64 bit, hex) of the canonical config, output location excluded.
std::string config_hash(const SweepGrid& grid);
std::string cell_hash(const std::string& config_hash, size_t cell);

std::vector<std::string> dataset_columns(const SweepGrid& grid);

struct RunOptions {
  std::filesystem::path out_dir = ".";
  int workers = 1;
  bool resume = true;
};

struct SweepReport {
  std::filesystem::path dataset;
  std::filesystem::path metadata;
  size_t cells = 0;
  size_t computed = 0;
  size_t reused = 0;
  size_t failed = 0;  // rows with a non-empty error field
};

// One record per cell, sorted by cell index whatever the scheduling. Cell
// failures land in the error column. With resume, rows of an existing
// dataset whose cell hash matches are kept and only the rest is computed.
SweepReport run_sweep(const SweepGrid& grid, const RunOptions& opts = {});

// Default output directory: $QVDP_OUT_DIR or the working directory.
std::filesystem::path default_out_dir();

}  // namespace qvdp

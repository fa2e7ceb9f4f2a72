#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chmy/adapt.hpp"
#include "chmy/chstep.hpp"

namespace chmy {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SweepConfig {
  int dimension = 2;
  double eps = 0.04;
  double tau = 0.01;
  double radius = 0.25;
  Point center{0.5, 0.5};
  int n0 = 16;
  int cycles = 3;
  double theta = 0.5;
  std::size_t max_vertices = 12000;
  std::vector<double> s_values = geometric_grid(1e2, 1e6, 9);
  std::vector<int> k_values{2};
  std::vector<PenaltyScheme> schemes{PenaltyScheme::Lumped};
  NewtonConfig newton{};
  std::filesystem::path output = "sweep_out";
  bool parallel_groups = false;

  /// Throws ConfigError.
  void validate() const;

  /// n points log-spaced from lo to hi inclusive.
  static std::vector<double> geometric_grid(double lo, double hi, int n);
};

/// Named profiles: "desk" (the defaults) and "paper2d" (eps = 0.01).
SweepConfig preset(const std::string& name);

/// Applies one `key = value` setting. Throws ConfigError on unknown keys or
/// malformed values.
void apply_setting(SweepConfig& cfg, const std::string& key, const std::string& value);

/// Reads flat `key = value` lines; `#` starts a comment.
std::map<std::string, std::string> parse_key_values(std::istream& in);
void apply_config_file(SweepConfig& cfg, const std::filesystem::path& path);

struct SweepRecord {
  double s = 0.0;
  int k = 2;
  PenaltyScheme scheme = PenaltyScheme::Lumped;
  std::size_t dofs = 0;  // 2 * vertices (phi and mu)
  std::size_t cells = 0;
  int newton_iterations = 0;  // summed over all solves of the adaptive cycle
  NewtonStatus status = NewtonStatus::Converged;
  // Absent when the solve failed.
  std::optional<double> linf, l1, structural_K, h1_phi, h1_mu, mass_error;
  double wall_time = 0.0;  // seconds
  std::string diagnostic;

  bool converged() const { return status == NewtonStatus::Converged; }
};

using SweepLog = std::function<void(const std::string&)>;

/// For each (k, scheme) group: s ascending, each s starting from the previous
/// s's final mesh and solution. A failed s is recorded and the next s starts
/// cold (phi_prev, 0) on the last good mesh.
std::vector<SweepRecord> run_sweep(const SweepConfig& cfg, const SweepLog& log = {});

enum class Metric { Linf, L1 };

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;  // log10 scale
  double r_squared = 0.0;
  double s_min = 0.0;
  double s_max = 0.0;
  std::size_t points = 0;
  std::size_t excluded_zero = 0;  // converged records with metric == 0
};

/// Least-squares line through (log10 s, log10 metric) over converged records
/// with a positive metric. Throws std::invalid_argument with fewer than 4.
SlopeFit fit_loglog_slope(const std::vector<SweepRecord>& records, Metric metric);

/// Records of one (k, scheme) group, s ascending.
std::vector<SweepRecord> select(const std::vector<SweepRecord>& records, int k, PenaltyScheme scheme);

extern const char* const kCsvHeader;
void write_csv(std::ostream& os, const std::vector<SweepRecord>& records);
void emit_csv(const std::vector<SweepRecord>& records, const std::filesystem::path& path);
/// Parses what write_csv produced.
std::vector<SweepRecord> read_csv(std::istream& is);

void write_plot_script(std::ostream& os, const std::vector<SweepRecord>& records,
                       const std::string& csv_name = "records.csv");
void emit_plot_script(const std::vector<SweepRecord>& records, const std::filesystem::path& path);

void write_slopes(std::ostream& os, const std::vector<SweepRecord>& records);

/// True for solves that failed outside the expected regime (the interpolated
/// scheme is allowed to fail).
bool unexpected_failure(const SweepRecord& r);

}  // namespace chmy

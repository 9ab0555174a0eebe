#ifndef KTUNE_MEASUREMENT_HPP
#define KTUNE_MEASUREMENT_HPP

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ktune/design_space.hpp"

namespace ktune {

/// Outcome of measuring one configuration's true fitness.
/// valid == false implies fitness == 0; cost_units is the simulated or
/// wall-clock cost charged to the run.
struct MeasurementResult {
  Configuration config;
  double fitness = 0.0;
  bool valid = false;
  double cost_units = 0.0;
};

/// What a backend reports for one configuration: fitness, or nothing when the
/// backend itself detected the configuration as invalid (crash, timeout, ...).
/// nominal_cost is the cost of this single measurement before any invalidity
/// penalty.
struct BackendResult {
  std::optional<double> fitness;
  double nominal_cost = 1.0;
};

/// Fitness evaluator standing in for code generation plus hardware execution.
/// Implementations must tolerate concurrent evaluate() calls.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendResult evaluate(const DesignSpace& space, const Configuration& config) = 0;
};

struct MeasureOptions {
  double invalid_cost_factor = 2.0;  // hardware-reset overhead for invalid configs
  int workers = 1;
};

/// Measures each configuration exactly once, order-preserving. A config
/// failing the space's validity rule, or rejected by the backend, yields
/// valid=false, fitness=0, and invalid_cost_factor times the nominal cost.
std::vector<MeasurementResult> measure_batch(Backend& backend, const DesignSpace& space,
                                             const std::vector<Configuration>& configs,
                                             const MeasureOptions& options = {});

// ---------------------------------------------------------------------------
// Synthetic landscape
// ---------------------------------------------------------------------------

/// Seeded multi-peak fitness surface over the normalized feature cube.
/// Peak centers and amplitudes derive pseudo-randomly from the seed;
/// configurations near a center score near its amplitude, so high-fitness
/// candidates cluster in subregions with similar values. invalid_rule (same
/// grammar as a validity rule) marks the region the backend reports invalid:
/// configurations satisfying it score zero.
struct SyntheticLandscapeParams {
  int num_peaks = 8;
  double peak_sharpness = 8.0;
  double noise_amplitude = 0.03;
  std::string invalid_rule;  // empty = everything valid
  std::uint64_t seed = 0;
};

/// Peak centers (rows) and amplitudes derived from the landscape seed.
struct PeakSet {
  Eigen::MatrixXd centers;
  Eigen::VectorXd amplitudes;
};

PeakSet derive_peaks(const SyntheticLandscapeParams& params, int num_knobs);

/// Deterministic fitness: sum of Gaussian peaks over features plus
/// counter-hashed noise keyed by the configuration ordinal; zero inside the
/// invalid region. Pure function of (params, config).
double synthetic_fitness(const SyntheticLandscapeParams& params, const DesignSpace& space,
                         const Configuration& config);

class SyntheticBackend : public Backend {
 public:
  SyntheticBackend(SyntheticLandscapeParams params, const DesignSpace& space);

  BackendResult evaluate(const DesignSpace& space, const Configuration& config) override;

  const SyntheticLandscapeParams& params() const { return params_; }

 private:
  SyntheticLandscapeParams params_;
  PeakSet peaks_;
  std::optional<ValidityRule> invalid_rule_;
};

// ---------------------------------------------------------------------------
// Tabular backend
// ---------------------------------------------------------------------------

/// Lookup backend over a CSV table `id,fitness` (with header) that lists
/// every ordinal of a small space. Rows with fitness 0 are reported invalid.
class TabularBackend : public Backend {
 public:
  static TabularBackend load(const std::filesystem::path& path, const DesignSpace& space);

  explicit TabularBackend(std::vector<double> fitness_by_id);

  BackendResult evaluate(const DesignSpace& space, const Configuration& config) override;

  std::uint64_t size() const { return fitness_by_id_.size(); }

 private:
  std::vector<double> fitness_by_id_;
};

/// Writes a tabular CSV mapping every ordinal to a fitness value.
void write_tabular_csv(const std::filesystem::path& path, const std::vector<double>& fitness_by_id);

// ---------------------------------------------------------------------------
// External backend
// ---------------------------------------------------------------------------

/// Runs a shell command per configuration. The command receives one JSON
/// object {"workload": ..., "knobs": {name: value, ...}} on stdin and must
/// print {"runtime_seconds": x} on stdout; fitness is 1/runtime. Nonzero
/// exit status or exceeding the timeout marks the configuration invalid.
/// Unparsable output or an unrunnable command (shell exit 126/127) is a
/// protocol error. Cost is the wall-clock seconds of the child process.
class ExternalBackend : public Backend {
 public:
  ExternalBackend(std::string command_template, double timeout_seconds);

  BackendResult evaluate(const DesignSpace& space, const Configuration& config) override;

 private:
  std::string command_;
  double timeout_seconds_;
};

}  // namespace ktune

#endif  // KTUNE_MEASUREMENT_HPP

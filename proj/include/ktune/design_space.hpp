#ifndef KTUNE_DESIGN_SPACE_HPP
#define KTUNE_DESIGN_SPACE_HPP

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ktune/validity.hpp"

namespace ktune {

/// One discrete tunable axis: a tile factor, an unroll threshold, a 0/1 flag.
/// Values are strictly increasing and duplicate-free.
struct Knob {
  std::string name;
  std::vector<std::int64_t> values;

  int cardinality() const { return static_cast<int>(values.size()); }
};

/// A point in the design space: one value index per knob, in knob order.
struct Configuration {
  std::vector<std::int32_t> indices;

  bool operator==(const Configuration&) const = default;
};

/// Normalized per-knob features in [0, 1]; input to the cost model, the
/// exploration agent, and clustering.
using FeatureVector = Eigen::VectorXd;

/// The Cartesian product of all knob value sets for one workload.
/// Immutable after construction; safe to share across threads.
class DesignSpace {
 public:
  DesignSpace(std::string workload, std::vector<Knob> knobs,
              std::optional<std::string> validity_rule = std::nullopt);

  static DesignSpace load(const std::filesystem::path& path);
  static DesignSpace from_json_text(const std::string& text);

  const std::string& workload() const { return workload_; }
  const std::vector<Knob>& knobs() const { return knobs_; }
  int num_knobs() const { return static_cast<int>(knobs_.size()); }
  std::uint64_t size() const { return size_; }
  const std::optional<ValidityRule>& validity_rule() const { return rule_; }

  /// Resolves a configuration's indices to knob values.
  std::vector<std::int64_t> values_of(const Configuration& config) const;

 private:
  std::string workload_;
  std::vector<Knob> knobs_;
  std::optional<ValidityRule> rule_;
  std::uint64_t size_ = 0;
};

/// Mixed-radix decode of an ordinal; the last knob varies fastest.
/// Bijective with id_of. Throws on id >= size.
Configuration config_at(const DesignSpace& space, std::uint64_t id);

/// Mixed-radix encode; inverse of config_at. Throws on dimension mismatch or
/// an out-of-range index.
std::uint64_t id_of(const DesignSpace& space, const Configuration& config);

/// True iff the configuration satisfies the space's validity rule. Spaces
/// without a rule accept everything. Pure.
bool validate(const DesignSpace& space, const Configuration& config);

/// Moves one knob's index by direction in {-1, 0, +1}, saturating at the
/// ends. Direction 0 is the identity.
Configuration neighbor(const DesignSpace& space, const Configuration& config, int knob_index,
                       int direction);

/// Per-knob normalization: index / (cardinality - 1), or 0 for single-valued
/// knobs. Deterministic and injective when every knob has cardinality >= 2.
FeatureVector encode_features(const DesignSpace& space, const Configuration& config);

/// Row-per-configuration batch encoding.
Eigen::MatrixXd encode_features_batch(const DesignSpace& space,
                                      const std::vector<Configuration>& configs);

/// Checks indices are dimensionally consistent and in range; throws if not.
void check_dimensions(const DesignSpace& space, const Configuration& config);

/// Uniform-random configuration (any validity).
Configuration random_configuration(const DesignSpace& space, class Rng& rng);

/// Uniform-random configuration satisfying the validity rule; falls back to
/// an arbitrary configuration after max_attempts rejections.
Configuration random_valid_configuration(const DesignSpace& space, class Rng& rng,
                                         int max_attempts = 256);

}  // namespace ktune

#endif  // KTUNE_DESIGN_SPACE_HPP

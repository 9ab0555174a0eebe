#include "ktune/design_space.hpp"

#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "ktune/errors.hpp"
#include "ktune/rng.hpp"

namespace ktune {

DesignSpace::DesignSpace(std::string workload, std::vector<Knob> knobs,
                         std::optional<std::string> validity_rule)
    : workload_(std::move(workload)), knobs_(std::move(knobs)) {
  if (knobs_.empty()) {
    throw ConfigError("design space '" + workload_ + "': needs at least one knob");
  }
  std::unordered_set<std::string> seen_names;
  for (const Knob& knob : knobs_) {
    if (knob.name.empty()) {
      throw ConfigError("design space '" + workload_ + "': knob with empty name");
    }
    if (!seen_names.insert(knob.name).second) {
      throw ConfigError("design space '" + workload_ + "': duplicate knob name '" + knob.name +
                        "'");
    }
    if (knob.values.empty()) {
      throw ConfigError("knob '" + knob.name + "': values must be non-empty");
    }
    for (std::size_t i = 1; i < knob.values.size(); ++i) {
      if (knob.values[i] == knob.values[i - 1]) {
        throw ConfigError("knob '" + knob.name + "': duplicate value " +
                          std::to_string(knob.values[i]));
      }
      if (knob.values[i] < knob.values[i - 1]) {
        throw ConfigError("knob '" + knob.name + "': values not strictly increasing at position " +
                          std::to_string(i));
      }
    }
  }

  size_ = 1;
  for (const Knob& knob : knobs_) {
    const std::uint64_t card = static_cast<std::uint64_t>(knob.cardinality());
    if (__builtin_mul_overflow(size_, card, &size_)) {
      throw ConfigError("design space '" + workload_ +
                        "': size overflows 64 bits at knob '" + knob.name + "'");
    }
  }

  if (validity_rule.has_value() && !validity_rule->empty()) {
    std::vector<std::string> names;
    names.reserve(knobs_.size());
    for (const Knob& knob : knobs_) names.push_back(knob.name);
    rule_ = ValidityRule::parse(*validity_rule, names);
  }
}

DesignSpace DesignSpace::from_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("design space: JSON parse error: ") + e.what());
  }

  if (!doc.is_object() || !doc.contains("workload") || !doc.contains("knobs")) {
    throw ConfigError("design space: document must be an object with 'workload' and 'knobs'");
  }
  if (!doc["workload"].is_string()) {
    throw ConfigError("design space: 'workload' must be a string");
  }
  if (!doc["knobs"].is_array()) {
    throw ConfigError("design space: 'knobs' must be an array");
  }

  std::vector<Knob> knobs;
  int pos = 0;
  for (const auto& item : doc["knobs"]) {
    if (!item.is_object() || !item.contains("name") || !item.contains("values") ||
        !item["name"].is_string() || !item["values"].is_array()) {
      throw ConfigError("design space: knob #" + std::to_string(pos) +
                        " must be an object with 'name' and integer 'values'");
    }
    Knob knob;
    knob.name = item["name"].get<std::string>();
    for (const auto& v : item["values"]) {
      if (!v.is_number_integer()) {
        throw ConfigError("knob '" + knob.name + "': non-integer value");
      }
      knob.values.push_back(v.get<std::int64_t>());
    }
    knobs.push_back(std::move(knob));
    ++pos;
  }

  std::optional<std::string> rule;
  if (doc.contains("validity_rule")) {
    if (!doc["validity_rule"].is_string()) {
      throw ConfigError("design space: 'validity_rule' must be a string");
    }
    rule = doc["validity_rule"].get<std::string>();
  }

  return DesignSpace(doc["workload"].get<std::string>(), std::move(knobs), std::move(rule));
}

DesignSpace DesignSpace::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("design space: cannot open '" + path.string() + "'");
  }
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

std::vector<std::int64_t> DesignSpace::values_of(const Configuration& config) const {
  check_dimensions(*this, config);
  std::vector<std::int64_t> out(knobs_.size());
  for (std::size_t i = 0; i < knobs_.size(); ++i) {
    out[i] = knobs_[i].values[static_cast<std::size_t>(config.indices[i])];
  }
  return out;
}

void check_dimensions(const DesignSpace& space, const Configuration& config) {
  if (static_cast<int>(config.indices.size()) != space.num_knobs()) {
    throw ConfigError("configuration has " + std::to_string(config.indices.size()) +
                      " indices, space has " + std::to_string(space.num_knobs()) + " knobs");
  }
  for (int i = 0; i < space.num_knobs(); ++i) {
    const std::int32_t idx = config.indices[static_cast<std::size_t>(i)];
    if (idx < 0 || idx >= space.knobs()[static_cast<std::size_t>(i)].cardinality()) {
      throw ConfigError("knob '" + space.knobs()[static_cast<std::size_t>(i)].name +
                        "': index " + std::to_string(idx) + " out of range");
    }
  }
}

Configuration config_at(const DesignSpace& space, std::uint64_t id) {
  if (id >= space.size()) {
    throw ConfigError("ordinal " + std::to_string(id) + " out of range for space of size " +
                      std::to_string(space.size()));
  }
  const int n = space.num_knobs();
  Configuration config;
  config.indices.resize(static_cast<std::size_t>(n));
  for (int i = n - 1; i >= 0; --i) {
    const std::uint64_t card =
        static_cast<std::uint64_t>(space.knobs()[static_cast<std::size_t>(i)].cardinality());
    config.indices[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(id % card);
    id /= card;
  }
  return config;
}

std::uint64_t id_of(const DesignSpace& space, const Configuration& config) {
  check_dimensions(space, config);
  std::uint64_t id = 0;
  for (int i = 0; i < space.num_knobs(); ++i) {
    const std::uint64_t card =
        static_cast<std::uint64_t>(space.knobs()[static_cast<std::size_t>(i)].cardinality());
    id = id * card + static_cast<std::uint64_t>(config.indices[static_cast<std::size_t>(i)]);
  }
  return id;
}

bool validate(const DesignSpace& space, const Configuration& config) {
  check_dimensions(space, config);
  if (!space.validity_rule().has_value()) return true;
  return space.validity_rule()->evaluate(space.values_of(config));
}

Configuration neighbor(const DesignSpace& space, const Configuration& config, int knob_index,
                       int direction) {
  check_dimensions(space, config);
  if (knob_index < 0 || knob_index >= space.num_knobs()) {
    throw ConfigError("neighbor: knob index " + std::to_string(knob_index) + " out of range");
  }
  Configuration out = config;
  const int card = space.knobs()[static_cast<std::size_t>(knob_index)].cardinality();
  int idx = out.indices[static_cast<std::size_t>(knob_index)] + direction;
  idx = std::max(0, std::min(card - 1, idx));  // saturate, never wrap
  out.indices[static_cast<std::size_t>(knob_index)] = static_cast<std::int32_t>(idx);
  return out;
}

FeatureVector encode_features(const DesignSpace& space, const Configuration& config) {
  check_dimensions(space, config);
  const int n = space.num_knobs();
  FeatureVector features(n);
  for (int i = 0; i < n; ++i) {
    const int card = space.knobs()[static_cast<std::size_t>(i)].cardinality();
    features[i] = card > 1 ? static_cast<double>(config.indices[static_cast<std::size_t>(i)]) /
                                 static_cast<double>(card - 1)
                           : 0.0;
  }
  return features;
}

Eigen::MatrixXd encode_features_batch(const DesignSpace& space,
                                      const std::vector<Configuration>& configs) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(configs.size()), space.num_knobs());
  for (std::size_t r = 0; r < configs.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = encode_features(space, configs[r]).transpose();
  }
  return out;
}

Configuration random_configuration(const DesignSpace& space, Rng& rng) {
  Configuration config;
  config.indices.resize(static_cast<std::size_t>(space.num_knobs()));
  for (int i = 0; i < space.num_knobs(); ++i) {
    const int card = space.knobs()[static_cast<std::size_t>(i)].cardinality();
    config.indices[static_cast<std::size_t>(i)] =
        static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(card)));
  }
  return config;
}

Configuration random_valid_configuration(const DesignSpace& space, Rng& rng, int max_attempts) {
  Configuration config = random_configuration(space, rng);
  for (int attempt = 0; attempt < max_attempts && !validate(space, config); ++attempt) {
    config = random_configuration(space, rng);
  }
  return config;
}

}  // namespace ktune

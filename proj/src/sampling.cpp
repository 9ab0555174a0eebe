#include "ktune/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <unordered_map>

#include "ktune/errors.hpp"
#include "ktune/rng.hpp"

namespace ktune {

CandidateSet make_candidate_set(std::vector<Candidate> raw) {
  CandidateSet set;
  set.items.reserve(raw.size());
  std::unordered_map<std::uint64_t, bool> seen;
  seen.reserve(raw.size());
  for (Candidate& c : raw) {
    if (seen.emplace(c.id, true).second) {
      set.items.push_back(std::move(c));
    }
  }
  std::sort(set.items.begin(), set.items.end(), [](const Candidate& a, const Candidate& b) {
    if (a.predicted_fitness != b.predicted_fitness) return a.predicted_fitness > b.predicted_fitness;
    return a.id < b.id;
  });
  return set;
}

// ---------------------------------------------------------------------------
// K-means
// ---------------------------------------------------------------------------

namespace {

std::vector<int> assign_points(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids) {
  std::vector<int> assignment(static_cast<std::size_t>(points.rows()), 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d2 = (points.row(i) - centroids.row(c)).squaredNorm();
      if (d2 < best) {
        best = d2;
        best_c = static_cast<int>(c);
      }
    }
    assignment[static_cast<std::size_t>(i)] = best_c;
  }
  return assignment;
}

double assignment_loss(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                       const std::vector<int>& assignment) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    loss += (points.row(i) - centroids.row(assignment[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return loss;
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& points, int k, Rng& rng) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd centroids(k, points.cols());
  centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d2[i] = (points.row(i) - centroids.row(0)).squaredNorm();
  }
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick;
    if (total <= 0.0) {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    } else {
      const double r = rng.uniform01() * total;
      double cum = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum > r) {
          pick = i;
          break;
        }
      }
    }
    centroids.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(i) - centroids.row(c)).squaredNorm());
    }
  }
  return centroids;
}

ClusterResult lloyd(const Eigen::MatrixXd& points, int k, Rng& rng, int max_iters) {
  ClusterResult result;
  result.centroids = kmeanspp_init(points, k, rng);
  result.assignments = assign_points(points, result.centroids);
  result.l2_loss = assignment_loss(points, result.centroids, result.assignments);
  result.iteration_losses.push_back(result.l2_loss);

  const Eigen::Index n = points.rows();
  for (int iter = 0; iter < max_iters; ++iter) {
    // Centroid update: mean of members; an empty cluster is re-seeded on the
    // point farthest from its current centroid, which cannot increase the
    // assignment loss.
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = result.assignments[static_cast<std::size_t>(i)];
      next.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    std::vector<bool> claimed(static_cast<std::size_t>(n), false);
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        next.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        double worst = -1.0;
        Eigen::Index worst_i = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (claimed[static_cast<std::size_t>(i)]) continue;
          const double d2 =
              (points.row(i) -
               result.centroids.row(result.assignments[static_cast<std::size_t>(i)]))
                  .squaredNorm();
          if (d2 > worst) {
            worst = d2;
            worst_i = i;
          }
        }
        claimed[static_cast<std::size_t>(worst_i)] = true;
        next.row(c) = points.row(worst_i);
      }
    }

    std::vector<int> next_assign = assign_points(points, next);
    const double next_loss = assignment_loss(points, next, next_assign);
    if (next_loss > result.l2_loss + 1e-9) {
      throw std::logic_error("kmeans: Lloyd loss increased, which should be impossible");
    }
    const bool converged = next_assign == result.assignments;
    result.centroids = std::move(next);
    result.assignments = std::move(next_assign);
    result.l2_loss = next_loss;
    result.iteration_losses.push_back(next_loss);
    if (converged) break;
  }
  return result;
}

}  // namespace

ClusterResult kmeans_run(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int max_iters,
                         int restarts) {
  if (points.rows() == 0) {
    throw ConfigError("kmeans: empty point set");
  }
  if (k < 1 || k > points.rows()) {
    throw ConfigError("kmeans: k=" + std::to_string(k) + " out of range for " +
                      std::to_string(points.rows()) + " points");
  }
  std::optional<ClusterResult> best;
  for (int r = 0; r < std::max(1, restarts); ++r) {
    Rng rng(seed_combine(seed, static_cast<std::uint64_t>(r)));
    ClusterResult result = lloyd(points, k, rng, max_iters);
    if (!best.has_value() || result.l2_loss < best->l2_loss) {
      best = std::move(result);
    }
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Greedy selection
// ---------------------------------------------------------------------------

std::vector<Configuration> greedy_select(const CandidateSet& candidates, int batch) {
  std::vector<const Candidate*> ranked;
  ranked.reserve(candidates.items.size());
  for (const Candidate& c : candidates.items) ranked.push_back(&c);
  std::sort(ranked.begin(), ranked.end(), [](const Candidate* a, const Candidate* b) {
    if (a->predicted_fitness != b->predicted_fitness)
      return a->predicted_fitness > b->predicted_fitness;
    return a->id < b->id;
  });
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, batch)),
                                                 ranked.size());
  std::vector<Configuration> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(ranked[i]->config);
  return out;
}

// ---------------------------------------------------------------------------
// Centroid snapping
// ---------------------------------------------------------------------------

Configuration snap_centroid(const Eigen::VectorXd& centroid, const DesignSpace& space,
                            const CandidateSet& candidates) {
  if (centroid.size() != space.num_knobs()) {
    throw ConfigError("snap_centroid: centroid dimension mismatch");
  }
  Configuration rounded;
  rounded.indices.resize(static_cast<std::size_t>(space.num_knobs()));
  for (int i = 0; i < space.num_knobs(); ++i) {
    const int card = space.knobs()[static_cast<std::size_t>(i)].cardinality();
    int idx = static_cast<int>(std::floor(centroid[i] * (card - 1) + 0.5));
    idx = std::max(0, std::min(card - 1, idx));
    rounded.indices[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(idx);
  }
  if (validate(space, rounded)) return rounded;

  // Fall back to the nearest candidate, preferring valid ones.
  const Candidate* best = nullptr;
  double best_d2 = std::numeric_limits<double>::infinity();
  bool best_valid = false;
  for (const Candidate& c : candidates.items) {
    const bool c_valid = validate(space, c.config);
    if (best_valid && !c_valid) continue;
    const double d2 = (encode_features(space, c.config) - centroid).squaredNorm();
    const bool upgrade = c_valid && !best_valid;
    const bool better = d2 < best_d2 || (d2 == best_d2 && best != nullptr && c.id < best->id);
    if (best == nullptr || upgrade || (c_valid == best_valid && better)) {
      best = &c;
      best_d2 = d2;
      best_valid = c_valid;
    }
  }
  if (best == nullptr) return rounded;  // no candidates at all: keep the rounding
  return best->config;
}

// ---------------------------------------------------------------------------
// Sample synthesis
// ---------------------------------------------------------------------------

namespace {

struct KnobOption {
  std::int32_t index;
  int count;
};

// Options per knob sorted most-frequent first, ties to the lowest index.
std::vector<std::vector<KnobOption>> knob_options(const CandidateSet& candidates, int num_knobs) {
  std::vector<std::map<std::int32_t, int>> counts(static_cast<std::size_t>(num_knobs));
  for (const Candidate& c : candidates.items) {
    for (int k = 0; k < num_knobs; ++k) {
      counts[static_cast<std::size_t>(k)][c.config.indices[static_cast<std::size_t>(k)]] += 1;
    }
  }
  std::vector<std::vector<KnobOption>> options(static_cast<std::size_t>(num_knobs));
  for (int k = 0; k < num_knobs; ++k) {
    for (const auto& [index, count] : counts[static_cast<std::size_t>(k)]) {
      options[static_cast<std::size_t>(k)].push_back({index, count});
    }
    std::sort(options[static_cast<std::size_t>(k)].begin(),
              options[static_cast<std::size_t>(k)].end(),
              [](const KnobOption& a, const KnobOption& b) {
                if (a.count != b.count) return a.count > b.count;
                return a.index < b.index;
              });
  }
  return options;
}

// Highest-scoring valid assembly of observed per-knob values: score is the
// summed frequency, ties go to the lexicographically smallest index vector.
// Searched best-first over demotions of the knobs the validity rule mentions
// (demoting any other knob can only lower the score without changing
// validity).
std::optional<Configuration> best_valid_assembly(const DesignSpace& space,
                                                 const std::vector<std::vector<KnobOption>>& options) {
  const int n = space.num_knobs();
  auto materialize = [&](const std::vector<int>& ranks) {
    Configuration config;
    config.indices.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      config.indices[static_cast<std::size_t>(k)] =
          options[static_cast<std::size_t>(k)][static_cast<std::size_t>(ranks[static_cast<std::size_t>(k)])]
              .index;
    }
    return config;
  };
  auto score_of = [&](const std::vector<int>& ranks) {
    long long score = 0;
    for (int k = 0; k < n; ++k) {
      score += options[static_cast<std::size_t>(k)][static_cast<std::size_t>(ranks[static_cast<std::size_t>(k)])]
                   .count;
    }
    return score;
  };

  const std::vector<int> base(static_cast<std::size_t>(n), 0);
  if (!space.validity_rule().has_value()) {
    return materialize(base);
  }

  struct QueueEntry {
    long long score;
    std::vector<std::int32_t> indices;  // for lexicographic tie-break
    std::vector<int> ranks;
  };
  struct Worse {
    bool operator()(const QueueEntry& a, const QueueEntry& b) const {
      if (a.score != b.score) return a.score < b.score;  // max-heap on score
      return a.indices > b.indices;                      // then smallest indices first
    }
  };
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, Worse> queue;
  std::set<std::vector<int>> pushed;

  auto push = [&](const std::vector<int>& ranks) {
    if (!pushed.insert(ranks).second) return;
    queue.push({score_of(ranks), materialize(ranks).indices, ranks});
  };
  push(base);

  const std::vector<int>& mutable_knobs = space.validity_rule()->referenced_knobs();
  constexpr int kMaxExpansions = 200000;
  int expansions = 0;
  while (!queue.empty() && expansions < kMaxExpansions) {
    ++expansions;
    const QueueEntry entry = queue.top();
    queue.pop();
    Configuration config;
    config.indices = entry.indices;
    if (validate(space, config)) return config;
    for (const int k : mutable_knobs) {
      if (static_cast<std::size_t>(entry.ranks[static_cast<std::size_t>(k)] + 1) <
          options[static_cast<std::size_t>(k)].size()) {
        std::vector<int> next = entry.ranks;
        ++next[static_cast<std::size_t>(k)];
        push(next);
      }
    }
  }
  return std::nullopt;
}

}  // namespace

Configuration random_valid_unvisited(const DesignSpace& space, const VisitedSet& visited,
                                     Rng& rng) {
  const std::uint64_t size = space.size();
  if (size <= 65536) {
    std::vector<std::uint64_t> pool;
    for (std::uint64_t id = 0; id < size; ++id) {
      if (visited.count(id)) continue;
      if (validate(space, config_at(space, id))) pool.push_back(id);
    }
    if (pool.empty()) {
      throw SpaceExhaustedError("every valid configuration has been measured");
    }
    return config_at(space, pool[rng.below(pool.size())]);
  }

  for (int attempt = 0; attempt < 10000; ++attempt) {
    const std::uint64_t id = rng.below(size);
    if (visited.count(id)) continue;
    const Configuration config = config_at(space, id);
    if (validate(space, config)) return config;
  }
  // Degenerate density; fall back to an exact wrap-around scan.
  const std::uint64_t start = rng.below(size);
  for (std::uint64_t step = 0; step < size; ++step) {
    const std::uint64_t id = (start + step) % size;
    if (visited.count(id)) continue;
    const Configuration config = config_at(space, id);
    if (validate(space, config)) return config;
  }
  throw SpaceExhaustedError("every valid configuration has been measured");
}

Configuration synthesize_sample(const CandidateSet& candidates, const DesignSpace& space,
                                const VisitedSet& visited, Rng& rng) {
  if (candidates.empty()) {
    throw ConfigError("synthesize_sample: empty candidate set");
  }
  const auto options = knob_options(candidates, space.num_knobs());
  std::optional<Configuration> assembled = best_valid_assembly(space, options);

  if (assembled.has_value() && !visited.count(id_of(space, *assembled))) {
    return *assembled;
  }

  if (assembled.has_value()) {
    const int attempts = 2 * space.num_knobs();
    for (int a = 0; a < attempts; ++a) {
      const int knob = static_cast<int>(rng.below(static_cast<std::uint64_t>(space.num_knobs())));
      const int direction = rng.uniform01() < 0.5 ? -1 : 1;
      const Configuration perturbed = neighbor(space, *assembled, knob, direction);
      if (!visited.count(id_of(space, perturbed)) && validate(space, perturbed)) {
        return perturbed;
      }
    }
  }
  return random_valid_unvisited(space, visited, rng);
}

// ---------------------------------------------------------------------------
// Adaptive sampling (threshold-based meta-search over the cluster count)
// ---------------------------------------------------------------------------

std::vector<Configuration> adaptive_sample(const CandidateSet& candidates,
                                           const VisitedSet& visited,
                                           const SamplingParams& params, const DesignSpace& space,
                                           std::uint64_t rng_seed, const Clusterer& clusterer) {
  if (candidates.empty()) {
    throw ConfigError("adaptive_sample: empty candidate set");
  }
  if (params.k_min >= params.k_max_exclusive || params.k_min < 1) {
    throw ConfigError("adaptive_sample: need 1 <= k_min < k_max_exclusive");
  }
  if (params.threshold <= 1.0) {
    throw ConfigError("adaptive_sample: threshold must exceed 1");
  }

  const Clusterer cluster = clusterer
                                ? clusterer
                                : Clusterer([&params](const Eigen::MatrixXd& pts, int k,
                                                      std::uint64_t seed) {
                                    return kmeans_run(pts, k, seed, params.kmeans_max_iters,
                                                      params.kmeans_restarts);
                                  });

  std::vector<Configuration> configs;
  configs.reserve(candidates.items.size());
  for (const Candidate& c : candidates.items) configs.push_back(c.config);
  const Eigen::MatrixXd points = encode_features_batch(space, configs);

  const int n = static_cast<int>(candidates.items.size());
  const int k_lo = std::min(params.k_min, n);
  const int k_hi = std::min(params.k_max_exclusive - 1, n);

  ClusterResult chosen;
  double previous_loss = std::numeric_limits<double>::infinity();
  for (int k = k_lo; k <= k_hi; ++k) {
    chosen = cluster(points, k, seed_combine(rng_seed, static_cast<std::uint64_t>(k)));
    if (params.threshold * chosen.l2_loss >= previous_loss) break;
    previous_loss = chosen.l2_loss;
  }

  std::vector<Configuration> result;
  result.reserve(static_cast<std::size_t>(chosen.centroids.rows()));
  for (Eigen::Index c = 0; c < chosen.centroids.rows(); ++c) {
    result.push_back(snap_centroid(chosen.centroids.row(c).transpose(), space, candidates));
  }

  Rng rng(stream_seed(rng_seed, "synthesis"));
  for (Configuration& config : result) {
    if (visited.count(id_of(space, config))) {
      config = synthesize_sample(candidates, space, visited, rng);
    }
  }
  return result;
}

}  // namespace ktune

#ifndef KTUNE_SAMPLING_HPP
#define KTUNE_SAMPLING_HPP

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ktune/candidates.hpp"
#include "ktune/design_space.hpp"

namespace ktune {

struct SamplingParams {
  double threshold = 2.5;       // meta-search knee threshold on the L2 loss curve
  int k_min = 8;                // cluster-count sweep is [k_min, k_max_exclusive)
  int k_max_exclusive = 64;
  int greedy_batch = 64;
  int kmeans_max_iters = 100;
  int kmeans_restarts = 3;
};

/// K-means output: centroids in feature space, per-point cluster index, and
/// the assignment-consistent sum of squared distances.
struct ClusterResult {
  Eigen::MatrixXd centroids;  // k x dim
  std::vector<int> assignments;
  double l2_loss = 0.0;
  std::vector<double> iteration_losses;  // Lloyd loss after init and each iteration
};

/// K-means++ initialization followed by Lloyd iterations until the assignment
/// fixpoint or max_iters; best of `restarts` restarts by loss. Deterministic
/// for a fixed seed. Requires 1 <= k <= number of points.
ClusterResult kmeans_run(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                         int max_iters = 100, int restarts = 3);

/// Top-batch candidates by predicted fitness, ties broken by lower ordinal
/// id; fewer are returned when candidates are fewer.
std::vector<Configuration> greedy_select(const CandidateSet& candidates, int batch);

/// Clustering hook for adaptive_sample, so tests can substitute a stub.
using Clusterer = std::function<ClusterResult(const Eigen::MatrixXd& points, int k,
                                              std::uint64_t seed)>;

/// Reduces the explored candidate set to the configurations worth measuring:
/// sweeps the cluster count upward, stops at the knee of the L2-loss curve
/// (break when threshold * loss >= previous loss; the first k never breaks
/// because previous loss starts at infinity), snaps the breaking sweep's
/// centroids to configurations, and replaces any already-visited result with
/// a synthesized sample.
std::vector<Configuration> adaptive_sample(const CandidateSet& candidates,
                                           const VisitedSet& visited,
                                           const SamplingParams& params, const DesignSpace& space,
                                           std::uint64_t rng_seed,
                                           const Clusterer& clusterer = {});

/// Rounds a continuous centroid to the nearest configuration (per-coordinate,
/// half-up). If the rounded configuration violates the space's validity rule,
/// falls back to the nearest candidate in feature space (ties by lower id).
Configuration snap_centroid(const Eigen::VectorXd& centroid, const DesignSpace& space,
                            const CandidateSet& candidates);

/// Builds the most-frequent valid assembly of per-knob candidate values
/// (mode per knob, ties to the lowest index; when the plain mode assembly is
/// invalid, the highest-scoring valid assembly is found by demoting rule
/// knobs to their next-most-frequent choices). A result that is already
/// visited is perturbed by one random knob step, up to 2 * num_knobs
/// attempts, then falls back to a uniform random valid unvisited
/// configuration. Throws SpaceExhaustedError when every valid configuration
/// has been visited.
Configuration synthesize_sample(const CandidateSet& candidates, const DesignSpace& space,
                                const VisitedSet& visited, class Rng& rng);

/// Uniform random valid configuration not yet visited; throws
/// SpaceExhaustedError if none exists.
Configuration random_valid_unvisited(const DesignSpace& space, const VisitedSet& visited,
                                     class Rng& rng);

}  // namespace ktune

#endif  // KTUNE_SAMPLING_HPP

#ifndef KTUNE_COST_MODEL_HPP
#define KTUNE_COST_MODEL_HPP

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace ktune {

/// One measured configuration: normalized features and observed fitness
/// (throughput, higher is better; 0 for invalid configurations).
struct TrainingExample {
  Eigen::VectorXd features;
  double fitness = 0.0;
};

struct GbtParams {
  int num_trees = 50;
  int max_depth = 4;
  double learning_rate = 0.3;
  int min_samples_leaf = 2;
};

/// Axis-aligned regression tree with constant leaves, stored as a flat node
/// array. Samples with feature <= threshold go left.
struct TreeNode {
  int feature = -1;       // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;     // leaf value (mean residual)

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const Eigen::VectorXd& features) const;
};

/// Gradient-boosted regression trees, squared-error objective.
/// prediction(x) = base_prediction + learning_rate * sum of leaf values.
struct GbtModel {
  double base_prediction = 0.0;
  double learning_rate = 0.3;
  int num_features = 0;
  std::vector<RegressionTree> trees;
  std::vector<double> training_sse;  // squared error after each boosting round
};

/// Fits by standard greedy boosting: base = mean fitness, each tree fits the
/// residuals. Deterministic for a fixed seed; the seed only breaks split
/// ties (it shuffles the feature scan order).
GbtModel fit_gbt(const std::vector<TrainingExample>& examples, const GbtParams& params,
                 std::uint64_t seed);

/// Order-preserving batch prediction; rows are feature vectors. Pure.
Eigen::VectorXd predict_batch(const GbtModel& model, const Eigen::MatrixXd& features);

double predict_one(const GbtModel& model, const Eigen::VectorXd& features);

/// Debug dump of the ensemble; not a stability-guaranteed format.
void dump_model_json(const GbtModel& model, const std::filesystem::path& path);

/// Surrogate fitness predictor used by the tuner. Holds the fitted ensemble
/// and the cold-start threshold: the model is trusted only once it has been
/// fit on at least min_training_size examples.
class CostModel {
 public:
  explicit CostModel(GbtParams params = {}, int min_training_size = 16)
      : params_(params), min_training_size_(min_training_size) {}

  /// Refits from scratch on the full example set. Exclusive (single writer).
  void fit(const std::vector<TrainingExample>& examples, std::uint64_t seed);

  /// Prediction on a fitted model; rows are feature vectors. Concurrently
  /// safe between fits.
  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;

  bool is_trained() const;
  const GbtParams& params() const { return params_; }
  const GbtModel& model() const;

 private:
  GbtParams params_;
  int min_training_size_;
  std::optional<GbtModel> model_;
  int fitted_examples_ = 0;
};

}  // namespace ktune

#endif  // KTUNE_COST_MODEL_HPP

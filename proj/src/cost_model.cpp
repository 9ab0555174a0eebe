#include "ktune/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "ktune/errors.hpp"
#include "ktune/rng.hpp"

namespace ktune {

namespace {

constexpr double kPureLeafSse = 1e-12;

struct TreeBuilder {
  const Eigen::MatrixXd& features;  // n_samples x n_features
  const Eigen::VectorXd& residuals;
  const GbtParams& params;
  std::vector<int> feature_order;  // seed-shuffled; breaks split ties
  RegressionTree tree;
  std::vector<double> leaf_predictions;  // per training sample

  TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& r, const GbtParams& p,
              std::vector<int> order)
      : features(x), residuals(r), params(p), feature_order(std::move(order)) {
    leaf_predictions.assign(static_cast<std::size_t>(x.rows()), 0.0);
  }

  // Sum of squared deviations from the mean over the index set.
  static double node_sse(double sum, double sum_sq, double count) {
    const double sse = sum_sq - sum * sum / count;
    return std::max(0.0, sse);
  }

  int build(std::vector<int>& indices, int depth) {
    const double count = static_cast<double>(indices.size());
    double sum = 0.0, sum_sq = 0.0;
    for (const int i : indices) {
      sum += residuals[i];
      sum_sq += residuals[i] * residuals[i];
    }
    const double mean = sum / count;
    const double parent_sse = node_sse(sum, sum_sq, count);

    const auto make_leaf = [&]() -> int {
      TreeNode leaf;
      leaf.value = mean;
      for (const int i : indices) leaf_predictions[static_cast<std::size_t>(i)] = mean;
      tree.nodes.push_back(leaf);
      return static_cast<int>(tree.nodes.size()) - 1;
    };

    if (depth >= params.max_depth ||
        static_cast<int>(indices.size()) < 2 * params.min_samples_leaf ||
        parent_sse <= kPureLeafSse) {
      return make_leaf();
    }

    // Best split: minimize the children's total SSE, strict improvement only;
    // scanning features in the seeded order makes ties deterministic.
    int best_feature = -1;
    double best_threshold = 0.0;
    double best_children_sse = parent_sse - kPureLeafSse;
    std::vector<std::pair<double, double>> column(indices.size());  // (value, residual)

    for (const int f : feature_order) {
      for (std::size_t j = 0; j < indices.size(); ++j) {
        column[j] = {features(indices[j], f), residuals[indices[j]]};
      }
      std::sort(column.begin(), column.end());

      double left_sum = 0.0, left_sq = 0.0;
      for (std::size_t j = 1; j < column.size(); ++j) {
        left_sum += column[j - 1].second;
        left_sq += column[j - 1].second * column[j - 1].second;
        if (column[j - 1].first == column[j].first) continue;  // no boundary here
        const double left_n = static_cast<double>(j);
        const double right_n = count - left_n;
        if (left_n < params.min_samples_leaf || right_n < params.min_samples_leaf) continue;
        const double children = node_sse(left_sum, left_sq, left_n) +
                                node_sse(sum - left_sum, sum_sq - left_sq, right_n);
        if (children < best_children_sse) {
          best_children_sse = children;
          best_feature = f;
          best_threshold = 0.5 * (column[j - 1].first + column[j].first);
        }
      }
    }

    if (best_feature < 0) return make_leaf();

    std::vector<int> left_idx, right_idx;
    left_idx.reserve(indices.size());
    right_idx.reserve(indices.size());
    for (const int i : indices) {
      (features(i, best_feature) <= best_threshold ? left_idx : right_idx).push_back(i);
    }

    tree.nodes.emplace_back();
    const int node_id = static_cast<int>(tree.nodes.size()) - 1;
    tree.nodes[node_id].feature = best_feature;
    tree.nodes[node_id].threshold = best_threshold;
    const int left = build(left_idx, depth + 1);
    const int right = build(right_idx, depth + 1);
    tree.nodes[node_id].left = left;
    tree.nodes[node_id].right = right;
    return node_id;
  }
};

}  // namespace

double RegressionTree::predict(const Eigen::VectorXd& features) const {
  int node = 0;
  while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
    const TreeNode& n = nodes[static_cast<std::size_t>(node)];
    node = features[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(node)].value;
}

GbtModel fit_gbt(const std::vector<TrainingExample>& examples, const GbtParams& params,
                 std::uint64_t seed) {
  if (examples.empty()) {
    throw ConfigError("cost model: cannot fit on an empty training set");
  }
  if (params.num_trees <= 0 || params.max_depth <= 0 || params.min_samples_leaf <= 0 ||
      params.learning_rate <= 0.0 || params.learning_rate > 1.0) {
    throw ConfigError("cost model: invalid boosting parameters");
  }

  const int n = static_cast<int>(examples.size());
  const int dim = static_cast<int>(examples[0].features.size());
  Eigen::MatrixXd x(n, dim);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    if (examples[static_cast<std::size_t>(i)].features.size() != dim) {
      throw ConfigError("cost model: inconsistent feature dimensions in training set");
    }
    if (!(examples[static_cast<std::size_t>(i)].fitness >= 0.0) ||
        !std::isfinite(examples[static_cast<std::size_t>(i)].fitness)) {
      throw ConfigError("cost model: fitness must be finite and non-negative");
    }
    x.row(i) = examples[static_cast<std::size_t>(i)].features.transpose();
    y[i] = examples[static_cast<std::size_t>(i)].fitness;
  }

  GbtModel model;
  model.learning_rate = params.learning_rate;
  model.num_features = dim;
  model.base_prediction = y.mean();

  Eigen::VectorXd residuals = y.array() - model.base_prediction;

  std::vector<int> order(static_cast<std::size_t>(dim));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed_combine(seed, 0x6B74756E65ULL));

  for (int t = 0; t < params.num_trees; ++t) {
    std::vector<int> shuffled = order;
    rng.shuffle(shuffled);
    TreeBuilder builder(x, residuals, params, std::move(shuffled));
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    builder.build(all, 0);
    for (int i = 0; i < n; ++i) {
      residuals[i] -= params.learning_rate * builder.leaf_predictions[static_cast<std::size_t>(i)];
    }
    model.trees.push_back(std::move(builder.tree));
    model.training_sse.push_back(residuals.squaredNorm());
  }
  return model;
}

double predict_one(const GbtModel& model, const Eigen::VectorXd& features) {
  if (features.size() != model.num_features) {
    throw ConfigError("cost model: feature dimension " + std::to_string(features.size()) +
                      " does not match training dimension " + std::to_string(model.num_features));
  }
  double sum = 0.0;
  for (const RegressionTree& tree : model.trees) sum += tree.predict(features);
  return model.base_prediction + model.learning_rate * sum;
}

Eigen::VectorXd predict_batch(const GbtModel& model, const Eigen::MatrixXd& features) {
  if (features.rows() > 0 && features.cols() != model.num_features) {
    throw ConfigError("cost model: feature dimension " + std::to_string(features.cols()) +
                      " does not match training dimension " + std::to_string(model.num_features));
  }
  Eigen::VectorXd out(features.rows());
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    out[r] = predict_one(model, features.row(r).transpose());
  }
  return out;
}

void dump_model_json(const GbtModel& model, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["base_prediction"] = model.base_prediction;
  doc["learning_rate"] = model.learning_rate;
  doc["num_features"] = model.num_features;
  doc["trees"] = nlohmann::json::array();
  for (const RegressionTree& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& n : tree.nodes) {
      if (n.is_leaf()) {
        nodes.push_back({{"leaf", n.value}});
      } else {
        nodes.push_back(
            {{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
      }
    }
    doc["trees"].push_back(std::move(nodes));
  }
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cost model: cannot write '" + path.string() + "'");
  }
  out << doc.dump(2) << "\n";
}

void CostModel::fit(const std::vector<TrainingExample>& examples, std::uint64_t seed) {
  model_ = fit_gbt(examples, params_, seed);
  fitted_examples_ = static_cast<int>(examples.size());
}

Eigen::VectorXd CostModel::predict(const Eigen::MatrixXd& features) const {
  if (!model_.has_value()) {
    throw ConfigError("cost model: predict called before fit");
  }
  return predict_batch(*model_, features);
}

bool CostModel::is_trained() const {
  return model_.has_value() && fitted_examples_ >= min_training_size_;
}

const GbtModel& CostModel::model() const {
  if (!model_.has_value()) {
    throw ConfigError("cost model: no fitted model");
  }
  return *model_;
}

}  // namespace ktune

#pragma once

#include <Eigen/Dense>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tvarnet/errors.hpp"

namespace tvarnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// P scalar time series observed over T sample instants. Column t-1 holds
/// the vector y_t; time indices are 1-based throughout the library.
struct MultivariateSeries {
  Matrix values;                         // P x T
  std::vector<std::string> node_labels;  // P distinct names

  MultivariateSeries() = default;
  MultivariateSeries(Matrix v, std::vector<std::string> labels)
      : values(std::move(v)), node_labels(std::move(labels)) {
    if (values.rows() < 1 || values.cols() < 1)
      throw ArgumentError("series needs P >= 1 nodes and T >= 1 samples");
    if (!values.allFinite())
      throw ArgumentError("series contains non-finite values");
    if (static_cast<int>(node_labels.size()) != values.rows())
      throw ArgumentError("expected " + std::to_string(values.rows()) +
                          " node labels, got " + std::to_string(node_labels.size()));
    std::unordered_set<std::string> seen(node_labels.begin(), node_labels.end());
    if (seen.size() != node_labels.size())
      throw ArgumentError("node labels must be distinct");
  }

  int num_nodes() const { return static_cast<int>(values.rows()); }
  int num_samples() const { return static_cast<int>(values.cols()); }

  /// y_t for t in [1, T]; bounds are the caller's responsibility.
  Vector y(int t) const { return values.col(t - 1); }
};

inline std::vector<std::string> default_node_labels(int num_nodes) {
  std::vector<std::string> labels;
  labels.reserve(num_nodes);
  for (int i = 1; i <= num_nodes; ++i) labels.push_back("node_" + std::to_string(i));
  return labels;
}

}  // namespace tvarnet

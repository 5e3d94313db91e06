#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "tvarnet/errors.hpp"
#include "tvarnet/model.hpp"
#include "tvarnet/series.hpp"
#include "tvarnet/windowing.hpp"

namespace tvarnet {

/// Compact encoding of the regression problem. Conceptually Z is the
/// block-diagonal matrix with one row block x_t^T = [y_{t-1}^T ... y_{t-L}^T]
/// per target instant; storing the rows densely is equivalent because every
/// off-diagonal block is zero. Row k corresponds to target time t = L+1+k.
struct DesignMatrices {
  Matrix regressors;           // (T-L) x (P L)
  Matrix targets;              // (T-L) x P, row k = y_{L+1+k}^T
  std::vector<char> row_mask;  // 1 = row participates in the fit term
  int num_nodes = 0;           // P
  int order = 0;               // L

  int num_rows() const { return static_cast<int>(targets.rows()); }
  int dim() const { return num_nodes * order; }
  int first_target() const { return order + 1; }
  int target_time(int row) const { return order + 1 + row; }
  int row_of(int t) const { return t - order - 1; }
};

inline DesignMatrices build_design(const MultivariateSeries& series, int order) {
  if (order < 1) throw ArgumentError("model order must be >= 1");
  const int p = series.num_nodes();
  const int t_max = series.num_samples();
  if (t_max <= order) throw ArgumentError("need T > L to build the design");

  DesignMatrices d;
  d.num_nodes = p;
  d.order = order;
  d.regressors.resize(t_max - order, p * order);
  d.targets.resize(t_max - order, p);
  d.row_mask.assign(t_max - order, 1);
  for (int t = order + 1; t <= t_max; ++t) {
    const int k = t - order - 1;
    for (int l = 1; l <= order; ++l)
      d.regressors.row(k).segment((l - 1) * p, p) = series.values.col(t - l - 1).transpose();
    d.targets.row(k) = series.values.col(t - 1).transpose();
  }
  return d;
}

/// Stacked solver blocks B_n = [A^(1) ... A^(L)]^T, one (P L) x P block per
/// time instant or per window. Entry ((l-1)P + j-1, i-1) of a block holds
/// a^(l)_{ij}, so the filter a_{ij} occupies column i-1 with row stride P.
struct CoefficientStack {
  int num_nodes = 0;
  int order = 0;
  std::vector<Matrix> blocks;

  int num_blocks() const { return static_cast<int>(blocks.size()); }
};

/// Strided view of the filter group (i, j) inside one stacked block.
inline Eigen::Map<Vector, 0, Eigen::InnerStride<>> edge_group(Matrix& block, int i, int j,
                                                              int num_nodes) {
  const int order = static_cast<int>(block.rows()) / num_nodes;
  return {block.data() + (i - 1) * block.rows() + (j - 1), order,
          Eigen::InnerStride<>(num_nodes)};
}

inline Eigen::Map<const Vector, 0, Eigen::InnerStride<>> edge_group(const Matrix& block, int i,
                                                                    int j, int num_nodes) {
  const int order = static_cast<int>(block.rows()) / num_nodes;
  return {block.data() + (i - 1) * block.rows() + (j - 1), order,
          Eigen::InnerStride<>(num_nodes)};
}

inline TvarCoefficients stack_to_coefficients(const CoefficientStack& stack,
                                              std::vector<int> segment_starts, int num_samples) {
  if (static_cast<int>(segment_starts.size()) != stack.num_blocks())
    throw ArgumentError("segment count does not match the block count");
  const int p = stack.num_nodes;
  TvarCoefficients c;
  c.order = stack.order;
  c.num_nodes = p;
  c.num_samples = num_samples;
  c.segment_starts = std::move(segment_starts);
  c.coeffs.reserve(stack.blocks.size());
  for (const auto& block : stack.blocks) {
    std::vector<Matrix> lags(stack.order, Matrix(p, p));
    for (int l = 0; l < stack.order; ++l)
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) lags[l](i, j) = block(l * p + j, i);
    c.coeffs.push_back(std::move(lags));
  }
  c.validate();
  return c;
}

inline CoefficientStack coefficients_to_stack(const TvarCoefficients& c) {
  CoefficientStack stack;
  stack.num_nodes = c.num_nodes;
  stack.order = c.order;
  stack.blocks.reserve(c.coeffs.size());
  for (const auto& lags : c.coeffs) {
    Matrix block(c.order * c.num_nodes, c.num_nodes);
    for (int l = 0; l < c.order; ++l)
      for (int i = 0; i < c.num_nodes; ++i)
        for (int j = 0; j < c.num_nodes; ++j) block(l * c.num_nodes + j, i) = lags[l](i, j);
    stack.blocks.push_back(std::move(block));
  }
  return stack;
}

/// Per-instant view of a windowed solution: segment boundaries sit at the
/// window edges.
inline TvarCoefficients expand_solution(const CoefficientStack& stack,
                                        const WindowPartition& part) {
  if (stack.num_blocks() != part.num_windows())
    throw ArgumentError("block count does not match the window count");
  return stack_to_coefficients(stack, part.starts, part.last);
}

/// Normal-equation pieces of the (optionally windowed) problem, one block
/// per unknown coefficient block: gram_n = sum x_t x_t^T, cross_n =
/// sum x_t y_t^T and the target energy, each over the masked rows mapped to
/// block n.
struct BlockProblem {
  int num_nodes = 0;
  int order = 0;
  std::vector<Matrix> gram;       // dim x dim
  std::vector<Matrix> cross;      // dim x P
  std::vector<double> target_sq;  // sum ||y_t||^2
  std::vector<int> rows_per_block;

  int num_blocks() const { return static_cast<int>(gram.size()); }
  int dim() const { return num_nodes * order; }
};

/// One block per target instant (the fully general per-instant problem).
inline BlockProblem build_block_problem(const DesignMatrices& d) {
  BlockProblem p;
  p.num_nodes = d.num_nodes;
  p.order = d.order;
  const int n = d.num_rows();
  p.gram.reserve(n);
  p.cross.reserve(n);
  p.target_sq.reserve(n);
  p.rows_per_block.reserve(n);
  for (int k = 0; k < n; ++k) {
    if (d.row_mask[k]) {
      const auto x = d.regressors.row(k).transpose();
      const auto y = d.targets.row(k).transpose();
      p.gram.push_back(x * x.transpose());
      p.cross.push_back(x * y.transpose());
      p.target_sq.push_back(y.squaredNorm());
      p.rows_per_block.push_back(1);
    } else {
      p.gram.push_back(Matrix::Zero(d.dim(), d.dim()));
      p.cross.push_back(Matrix::Zero(d.dim(), d.num_nodes));
      p.target_sq.push_back(0.0);
      p.rows_per_block.push_back(0);
    }
  }
  return p;
}

/// Collapses the per-instant problem onto the partition: rows inside a
/// window share one unknown block, shrinking the unknown count from
/// L P^2 (T-L) to L P^2 N.
inline BlockProblem collapse_problem(const DesignMatrices& d, const WindowPartition& part) {
  part.validate();
  if (part.first != d.first_target() || part.last != d.first_target() + d.num_rows() - 1)
    throw ArgumentError("partition range does not match the design");
  BlockProblem p;
  p.num_nodes = d.num_nodes;
  p.order = d.order;
  const int n = part.num_windows();
  p.gram.assign(n, Matrix::Zero(d.dim(), d.dim()));
  p.cross.assign(n, Matrix::Zero(d.dim(), d.num_nodes));
  p.target_sq.assign(n, 0.0);
  p.rows_per_block.assign(n, 0);
  for (int k = 0; k < d.num_rows(); ++k) {
    if (!d.row_mask[k]) continue;
    const int w = part.index_of(d.target_time(k));
    const auto x = d.regressors.row(k).transpose();
    const auto y = d.targets.row(k).transpose();
    p.gram[w].noalias() += x * x.transpose();
    p.cross[w].noalias() += x * y.transpose();
    p.target_sq[w] += y.squaredNorm();
    ++p.rows_per_block[w];
  }
  return p;
}

}  // namespace tvarnet

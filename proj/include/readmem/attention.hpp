#ifndef READMEM_ATTENTION_HPP
#define READMEM_ATTENTION_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <vector>

#include "readmem/embedding.hpp"

namespace readmem {

enum class AffinityStage { raw, sparse };

/// Memory-vs-query affinity, NHW x HW. Rows are grouped by slot: rows
/// [n*HW, (n+1)*HW) belong to slot n.
template <typename Scalar>
struct AffinityTensor {
  Matrix<Scalar> data;
  AffinityStage stage = AffinityStage::raw;
  Index slots = 0;
};

/// Column-stochastic soft-attention weights, NHW x HW.
template <typename Scalar>
struct WeightTensor {
  Matrix<Scalar> data;
  Index slots = 0;
};

namespace detail {

template <typename Scalar, typename Tag>
Matrix<Scalar> concatenate_columns(const std::vector<Embedding<Scalar, Tag>>& parts, const char* where) {
  if (parts.empty()) {
    throw EmptyMemoryError(std::string(where) + ": memory holds no slots");
  }
  const Index rows = parts.front().channels();
  const Index hw = parts.front().spatial();
  Matrix<Scalar> out(rows, hw * static_cast<Index>(parts.size()));
  for (std::size_t n = 0; n < parts.size(); ++n) {
    require_same_shape(parts.front(), parts[n], where);
    out.middleCols(static_cast<Index>(n) * hw, hw) = parts[n].data();
  }
  return out;
}

}  // namespace detail

/// F = (K^m)^T k^q with K^m the slot-ordered column concatenation of the memory keys.
template <typename Scalar>
AffinityTensor<Scalar> affinity(const std::vector<KeyEmbedding<Scalar>>& memory_keys,
                                const KeyEmbedding<Scalar>& query_key) {
  const Matrix<Scalar> stacked = detail::concatenate_columns(memory_keys, "affinity");
  require_same_shape(memory_keys.front(), query_key, "affinity");
  AffinityTensor<Scalar> out;
  out.data.noalias() = stacked.transpose() * query_key.data();
  out.stage = AffinityStage::raw;
  out.slots = static_cast<Index>(memory_keys.size());
  return out;
}

/// Keeps the min(k, NHW) largest entries of each column and zeroes the rest.
/// Ties go to the smaller row index.
template <typename Scalar>
AffinityTensor<Scalar> topk_sparsify(const AffinityTensor<Scalar>& raw, Index k) {
  if (k < 1) throw ConfigError("topk_sparsify: k must be >= 1");
  const Index rows = raw.data.rows();
  AffinityTensor<Scalar> out{Matrix<Scalar>::Zero(rows, raw.data.cols()), AffinityStage::sparse,
                             raw.slots};
  const Index keep = std::min(k, rows);
  std::vector<Index> order(static_cast<std::size_t>(rows));
  for (Index j = 0; j < raw.data.cols(); ++j) {
    const auto col = raw.data.col(j);
    std::iota(order.begin(), order.end(), Index{0});
    std::partial_sort(order.begin(), order.begin() + keep, order.end(), [&](Index a, Index b) {
      return col(a) > col(b) || (col(a) == col(b) && a < b);
    });
    for (Index r = 0; r < keep; ++r) {
      const Index i = order[static_cast<std::size_t>(r)];
      out.data(i, j) = col(i);
    }
  }
  return out;
}

/// Column-wise softmax over all NHW rows; zeroed entries contribute exp(0).
template <typename Scalar>
WeightTensor<Scalar> soft_weights(const AffinityTensor<Scalar>& sparse) {
  WeightTensor<Scalar> out{Matrix<Scalar>(sparse.data.rows(), sparse.data.cols()), sparse.slots};
  for (Index j = 0; j < sparse.data.cols(); ++j) {
    const Scalar peak = sparse.data.col(j).maxCoeff();
    auto col = out.data.col(j);
    col = (sparse.data.col(j).array() - peak).exp().matrix();
    col /= col.sum();
  }
  return out;
}

/// Pseudo memory feature representation V^m W.
template <typename Scalar>
ValueEmbedding<Scalar> readout(const std::vector<ValueEmbedding<Scalar>>& memory_values,
                               const WeightTensor<Scalar>& weights, std::int64_t frame_index = 0) {
  const Matrix<Scalar> stacked = detail::concatenate_columns(memory_values, "readout");
  if (weights.slots != static_cast<Index>(memory_values.size()) ||
      weights.data.rows() != stacked.cols()) {
    throw ShapeError("readout: weight tensor has " + std::to_string(weights.slots) +
                     " slots, memory holds " + std::to_string(memory_values.size()));
  }
  const ShapeSpec& shape = memory_values.front().shape();
  if (weights.data.cols() != shape.spatial) {
    throw ShapeError("readout: weight tensor column count does not match spatial size");
  }
  Matrix<Scalar> result = stacked * weights.data;
  return ValueEmbedding<Scalar>(std::move(result), shape, frame_index);
}

/// Affinity, top-k and softmax in one call.
template <typename Scalar>
struct AttentionPass {
  AffinityTensor<Scalar> affinity;
  WeightTensor<Scalar> weights;
};

template <typename Scalar>
AttentionPass<Scalar> attend(const std::vector<KeyEmbedding<Scalar>>& memory_keys,
                             const KeyEmbedding<Scalar>& query_key, Index k) {
  AttentionPass<Scalar> pass;
  pass.affinity = affinity(memory_keys, query_key);
  pass.weights = soft_weights(topk_sparsify(pass.affinity, k));
  return pass;
}

}  // namespace readmem

#endif  // READMEM_ATTENTION_HPP

#ifndef READMEM_REA_HPP
#define READMEM_REA_HPP

#include <Eigen/Dense>

#include <limits>
#include <vector>

#include "readmem/attention.hpp"
#include "readmem/embedding.hpp"

namespace readmem {

enum class TransitionVariant { argmax_columns, argmax_rows, hungarian };

/// Sparse encoding of a binary HW x HW transition matrix.
///
/// For argmax_columns and hungarian, mapping[j] is the source position feeding
/// target column j (a permutation for hungarian). For argmax_rows the roles
/// flip: mapping[i] is the target column chosen by source row i, so a target
/// column may receive zero or several sources.
struct TransitionMap {
  Index source_slot = 0;
  std::vector<Index> mapping;
  TransitionVariant variant = TransitionVariant::argmax_columns;

  Index size() const { return static_cast<Index>(mapping.size()); }
};

template <typename Scalar>
Matrix<Scalar> to_dense(const TransitionMap& t) {
  const Index hw = t.size();
  Matrix<Scalar> out = Matrix<Scalar>::Zero(hw, hw);
  for (Index k = 0; k < hw; ++k) {
    const Index m = t.mapping[static_cast<std::size_t>(k)];
    if (t.variant == TransitionVariant::argmax_rows) {
      out(k, m) = Scalar(1);
    } else {
      out(m, k) = Scalar(1);
    }
  }
  return out;
}

/// Rows [n*HW, (n+1)*HW) of a slot-grouped NHW x HW tensor (weights or affinity).
template <typename Tensor>
auto slice_weights(const Tensor& tensor, Index n) {
  using Scalar = typename decltype(tensor.data)::Scalar;
  if (n < 0 || n >= tensor.slots) {
    throw ShapeError("slice_weights: slot " + std::to_string(n) + " out of range for " +
                     std::to_string(tensor.slots) + " slots");
  }
  const Index hw = tensor.data.cols();
  return Matrix<Scalar>(tensor.data.middleRows(n * hw, hw));
}

template <typename Scalar>
TransitionMap transition_from_columns(const Matrix<Scalar>& block, Index source_slot = 0) {
  TransitionMap t{source_slot, std::vector<Index>(static_cast<std::size_t>(block.cols())),
                  TransitionVariant::argmax_columns};
  for (Index j = 0; j < block.cols(); ++j) {
    Index best = 0;
    // maxCoeff's tie behaviour is unspecified, so scan explicitly.
    for (Index i = 1; i < block.rows(); ++i) {
      if (block(i, j) > block(best, j)) best = i;
    }
    t.mapping[static_cast<std::size_t>(j)] = best;
  }
  return t;
}

template <typename Scalar>
TransitionMap transition_from_rows(const Matrix<Scalar>& block, Index source_slot = 0) {
  TransitionMap t{source_slot, std::vector<Index>(static_cast<std::size_t>(block.rows())),
                  TransitionVariant::argmax_rows};
  for (Index i = 0; i < block.rows(); ++i) {
    Index best = 0;
    for (Index j = 1; j < block.cols(); ++j) {
      if (block(i, j) > block(i, best)) best = j;
    }
    t.mapping[static_cast<std::size_t>(i)] = best;
  }
  return t;
}

/// Maximum-weight perfect assignment of source rows to target columns.
///
/// Shortest augmenting path formulation of the Hungarian method with row and
/// column potentials, O(HW^3). Returns mapping[j] = row assigned to column j.
template <typename Scalar>
std::vector<Index> max_weight_assignment(const Matrix<Scalar>& weights) {
  if (weights.rows() != weights.cols()) throw ShapeError("assignment: matrix is not square");
  const Index n = weights.rows();
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  // Agents are target columns (1-based), tasks are source rows (1-based); cost = -weight.
  auto cost = [&](Index agent, Index task) { return -weights(task - 1, agent - 1); };
  std::vector<Scalar> u(static_cast<std::size_t>(n + 1), Scalar(0));
  std::vector<Scalar> v(static_cast<std::size_t>(n + 1), Scalar(0));
  std::vector<Index> owner(static_cast<std::size_t>(n + 1), 0);
  std::vector<Index> way(static_cast<std::size_t>(n + 1), 0);
  auto at = [](auto& vec, Index i) -> auto& { return vec[static_cast<std::size_t>(i)]; };

  for (Index agent = 1; agent <= n; ++agent) {
    at(owner, 0) = agent;
    Index task0 = 0;
    std::vector<Scalar> min_slack(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(task0)] = true;
      const Index agent0 = at(owner, task0);
      Scalar delta = inf;
      Index task1 = 0;
      for (Index task = 1; task <= n; ++task) {
        if (used[static_cast<std::size_t>(task)]) continue;
        const Scalar slack = cost(agent0, task) - at(u, agent0) - at(v, task);
        if (slack < at(min_slack, task)) {
          at(min_slack, task) = slack;
          at(way, task) = task0;
        }
        if (at(min_slack, task) < delta) {
          delta = at(min_slack, task);
          task1 = task;
        }
      }
      for (Index task = 0; task <= n; ++task) {
        if (used[static_cast<std::size_t>(task)]) {
          at(u, at(owner, task)) += delta;
          at(v, task) -= delta;
        } else {
          at(min_slack, task) -= delta;
        }
      }
      task0 = task1;
    } while (at(owner, task0) != 0);
    do {
      const Index prev = at(way, task0);
      at(owner, task0) = at(owner, prev);
      task0 = prev;
    } while (task0 != 0);
  }

  std::vector<Index> mapping(static_cast<std::size_t>(n), 0);
  for (Index task = 1; task <= n; ++task) {
    at(mapping, at(owner, task) - 1) = task - 1;
  }
  return mapping;
}

template <typename Scalar>
TransitionMap transition_hungarian(const Matrix<Scalar>& block, Index source_slot = 0) {
  return TransitionMap{source_slot, max_weight_assignment(block), TransitionVariant::hungarian};
}

template <typename Scalar>
TransitionMap build_transition(const Matrix<Scalar>& block, TransitionVariant variant,
                               Index source_slot = 0) {
  switch (variant) {
    case TransitionVariant::argmax_columns:
      return transition_from_columns(block, source_slot);
    case TransitionVariant::argmax_rows:
      return transition_from_rows(block, source_slot);
    case TransitionVariant::hungarian:
      return transition_hungarian(block, source_slot);
  }
  throw ConfigError("build_transition: unknown variant");
}

/// Pseudo key k T expressed in the query's frame of reference, renormalized.
template <typename Scalar>
KeyEmbedding<Scalar> project(const KeyEmbedding<Scalar>& key, const TransitionMap& t) {
  if (t.size() != key.spatial()) {
    throw ShapeError("project: transition map has " + std::to_string(t.size()) +
                     " entries, key has " + std::to_string(key.spatial()) + " positions");
  }
  Matrix<Scalar> out;
  if (t.variant == TransitionVariant::argmax_rows) {
    out = key.data() * to_dense<Scalar>(t);
  } else {
    out.resize(key.channels(), key.spatial());
    for (Index j = 0; j < key.spatial(); ++j) {
      out.col(j) = key.data().col(t.mapping[static_cast<std::size_t>(j)]);
    }
  }
  return normalize_key(key.with_data(std::move(out)));
}

}  // namespace readmem

#endif  // READMEM_REA_HPP

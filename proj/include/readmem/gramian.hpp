#ifndef READMEM_GRAMIAN_HPP
#define READMEM_GRAMIAN_HPP

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "readmem/embedding.hpp"

namespace readmem {

/// Relative pivot size below which a Gram matrix counts as singular.
inline constexpr double kSingularPivotTolerance = 1e-12;
/// Relative asymmetry tolerated by log_abs_det.
inline constexpr double kSymmetryTolerance = 1e-10;

/// Sentinel log|det| of a singular matrix.
template <typename Scalar>
constexpr Scalar singular_log_det() {
  return -std::numeric_limits<Scalar>::infinity();
}

/// g(a, b): inner product of the flattened keys. Equals cosine similarity for
/// normalized keys.
template <typename Scalar>
Scalar similarity(const KeyEmbedding<Scalar>& a, const KeyEmbedding<Scalar>& b) {
  require_same_shape(a, b, "similarity");
  return a.data().reshaped().dot(b.data().reshaped());
}

/// log|det(G)| of a symmetric matrix.
///
/// Positive definite inputs go through Cholesky; anything Cholesky rejects
/// (semidefinite or, after substitution of projected similarities, indefinite)
/// falls back to full-pivot LU. Matrices singular beyond kSingularPivotTolerance
/// return singular_log_det().
template <typename Derived>
typename Derived::Scalar log_abs_det(const Eigen::MatrixBase<Derived>& g) {
  using Scalar = typename Derived::Scalar;
  if (g.rows() != g.cols()) throw ShapeError("log_abs_det: matrix is not square");
  const Index n = g.rows();
  if (n == 0) return Scalar(0);
  const Scalar magnitude = std::max<Scalar>(Scalar(1), g.cwiseAbs().maxCoeff());
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > Scalar(kSymmetryTolerance) * magnitude) {
    throw NotSymmetricError("log_abs_det: matrix is not symmetric");
  }
  const Matrix<Scalar> dense = g;
  const Scalar scale = std::max<Scalar>(dense.diagonal().cwiseAbs().maxCoeff(),
                                        std::numeric_limits<Scalar>::min());

  Eigen::LLT<Matrix<Scalar>> llt(dense);
  if (llt.info() == Eigen::Success) {
    const auto diag = llt.matrixLLT().diagonal();
    if (diag.cwiseAbs2().minCoeff() <= Scalar(kSingularPivotTolerance) * scale) {
      return singular_log_det<Scalar>();
    }
    return Scalar(2) * diag.array().log().sum();
  }

  Eigen::FullPivLU<Matrix<Scalar>> lu(dense);
  lu.setThreshold(Scalar(kSingularPivotTolerance));
  if (!lu.isInvertible()) return singular_log_det<Scalar>();
  return lu.matrixLU().diagonal().cwiseAbs().array().log().sum();
}

/// Gram matrix of the stored keys plus its cached log|det|.
///
/// Entries are frozen when a slot is written: later substitutions only touch
/// the substituted row and column, so `matrix` doubles as the pairwise
/// similarity cache.
template <typename Scalar>
struct GramState {
  Matrix<Scalar> matrix;
  Scalar log_abs_det = Scalar(0);

  Index size() const { return matrix.rows(); }
};

template <typename Scalar>
GramState<Scalar> build_gram(const std::vector<KeyEmbedding<Scalar>>& keys) {
  const auto n = static_cast<Index>(keys.size());
  GramState<Scalar> state;
  state.matrix.resize(n, n);
  for (Index a = 0; a < n; ++a) {
    for (Index b = a; b < n; ++b) {
      const Scalar s = similarity(keys[static_cast<std::size_t>(a)], keys[static_cast<std::size_t>(b)]);
      state.matrix(a, b) = s;
      state.matrix(b, a) = s;
    }
  }
  state.log_abs_det = log_abs_det(state.matrix);
  return state;
}

/// log|det| of each temporary Gram matrix obtained by putting the query into slot n.
template <typename Scalar>
struct CandidateSet {
  struct Entry {
    Index slot;
    Scalar log_abs_det;
  };
  std::vector<Entry> values;

  /// Highest candidate; ties resolve to the smallest slot.
  std::optional<Entry> best() const {
    std::optional<Entry> out;
    for (const Entry& e : values) {
      if (!out || e.log_abs_det > out->log_abs_det) out = e;
    }
    return out;
  }
};

namespace detail {

template <typename Scalar>
void check_substitution(const GramState<Scalar>& state, const Vector<Scalar>& query_sims) {
  if (query_sims.size() != state.size()) {
    throw ShapeError("gram substitution: expected " + std::to_string(state.size()) +
                     " query similarities, got " + std::to_string(query_sims.size()));
  }
}

template <typename Scalar>
Matrix<Scalar> substituted(const Matrix<Scalar>& g, Index n, const Vector<Scalar>& query_sims,
                           Scalar query_self_sim) {
  Matrix<Scalar> out = g;
  out.row(n) = query_sims.transpose();
  out.col(n) = query_sims;
  out(n, n) = query_self_sim;
  return out;
}

}  // namespace detail

/// Slot 0 holds the annotated frame and is never a candidate.
template <typename Scalar>
CandidateSet<Scalar> candidate_substitutions(const GramState<Scalar>& state,
                                             const Vector<Scalar>& query_sims,
                                             Scalar query_self_sim) {
  if (state.size() < 2) {
    throw EmptyMemoryError("candidate_substitutions: no substitutable slot (N < 2)");
  }
  detail::check_substitution(state, query_sims);
  CandidateSet<Scalar> out;
  out.values.reserve(static_cast<std::size_t>(state.size() - 1));
  for (Index n = 1; n < state.size(); ++n) {
    out.values.push_back(
        {n, log_abs_det(detail::substituted(state.matrix, n, query_sims, query_self_sim))});
  }
  return out;
}

template <typename Scalar>
GramState<Scalar> apply_substitution(const GramState<Scalar>& state, Index n,
                                     const Vector<Scalar>& query_sims, Scalar query_self_sim) {
  if (n == 0) throw ProtectedSlotError("apply_substitution: slot 0 holds the annotated frame");
  if (n < 0 || n >= state.size()) {
    throw ShapeError("apply_substitution: slot " + std::to_string(n) + " out of range");
  }
  detail::check_substitution(state, query_sims);
  GramState<Scalar> out;
  out.matrix = detail::substituted(state.matrix, n, query_sims, query_self_sim);
  out.log_abs_det = log_abs_det(out.matrix);
  return out;
}

}  // namespace readmem

#endif  // READMEM_GRAMIAN_HPP

#include "readmem/oracle.hpp"

#include <cmath>
#include <limits>

namespace readmem {

double cofactor_determinant(const Matrix<double>& m) {
  if (m.rows() != m.cols()) throw ShapeError("cofactor_determinant: matrix is not square");
  const Index n = m.rows();
  if (n > kCofactorMaxSize) {
    throw BudgetError("cofactor_determinant: size " + std::to_string(n) + " exceeds " +
                      std::to_string(kCofactorMaxSize));
  }
  if (n == 0) return 1.0;
  if (n == 1) return m(0, 0);
  double det = 0.0;
  for (Index c = 0; c < n; ++c) {
    Matrix<double> minor(n - 1, n - 1);
    for (Index r = 1; r < n; ++r) {
      Index mc = 0;
      for (Index k = 0; k < n; ++k) {
        if (k == c) continue;
        minor(r - 1, mc++) = m(r, k);
      }
    }
    const double sign = (c % 2 == 0) ? 1.0 : -1.0;
    det += sign * m(0, c) * cofactor_determinant(minor);
  }
  return det;
}

double lu_determinant(const Matrix<double>& m) {
  if (m.rows() != m.cols()) throw ShapeError("lu_determinant: matrix is not square");
  const Index n = m.rows();
  std::vector<double> a(static_cast<std::size_t>(n * n));
  auto at = [&](Index r, Index c) -> double& { return a[static_cast<std::size_t>(r * n + c)]; };
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) at(r, c) = m(r, c);
  }
  double det = 1.0;
  for (Index k = 0; k < n; ++k) {
    Index pivot = k;
    for (Index r = k + 1; r < n; ++r) {
      if (std::abs(at(r, k)) > std::abs(at(pivot, k))) pivot = r;
    }
    if (at(pivot, k) == 0.0) return 0.0;
    if (pivot != k) {
      for (Index c = 0; c < n; ++c) std::swap(at(k, c), at(pivot, c));
      det = -det;
    }
    det *= at(k, k);
    for (Index r = k + 1; r < n; ++r) {
      const double factor = at(r, k) / at(k, k);
      for (Index c = k; c < n; ++c) at(r, c) -= factor * at(k, c);
    }
  }
  return det;
}

double oracle_determinant(const Matrix<double>& m, DeterminantMode mode) {
  switch (mode) {
    case DeterminantMode::cofactor:
      return cofactor_determinant(m);
    case DeterminantMode::lu:
      return lu_determinant(m);
    case DeterminantMode::automatic:
      return m.rows() <= kCofactorMaxSize ? cofactor_determinant(m) : lu_determinant(m);
  }
  return lu_determinant(m);
}

double naive_similarity(const Key& a, const Key& b) {
  if (!(a.shape() == b.shape())) throw ShapeError("naive_similarity: shape mismatch");
  double sum = 0.0;
  for (Index c = 0; c < a.channels(); ++c) {
    for (Index j = 0; j < a.spatial(); ++j) sum += a.data()(c, j) * b.data()(c, j);
  }
  return sum;
}

Matrix<double> naive_gram(const std::vector<Key>& keys) {
  const auto n = static_cast<Index>(keys.size());
  Matrix<double> g(n, n);
  for (Index a = 0; a < n; ++a) {
    for (Index b = 0; b < n; ++b) {
      g(a, b) = naive_similarity(keys[static_cast<std::size_t>(a)], keys[static_cast<std::size_t>(b)]);
    }
  }
  return g;
}

namespace {

double clamp_zero(double abs_det) { return abs_det <= kOracleZeroDeterminant ? 0.0 : abs_det; }

OracleDecision decide(const Matrix<double>& gram, const std::vector<double>& query_row,
                      double self_sim, DeterminantMode mode) {
  const Index n = gram.rows();
  if (n < 2) throw EmptyMemoryError("oracle: no substitutable slot (N < 2)");
  if (n > kOracleMaxSlots) {
    throw BudgetError("oracle: bank of " + std::to_string(n) + " slots exceeds " +
                      std::to_string(kOracleMaxSlots));
  }
  OracleDecision out;
  out.current_abs_det = clamp_zero(std::abs(oracle_determinant(gram, mode)));
  double best = -1.0;
  for (Index slot = 1; slot < n; ++slot) {
    Matrix<double> g = gram;
    for (Index a = 0; a < n; ++a) {
      g(slot, a) = query_row[static_cast<std::size_t>(a)];
      g(a, slot) = query_row[static_cast<std::size_t>(a)];
    }
    g(slot, slot) = self_sim;
    const double value = clamp_zero(std::abs(oracle_determinant(g, mode)));
    out.candidate_abs_dets.push_back(value);
    if (value > best) {
      best = value;
      out.slot = slot;
    }
  }
  out.replace = best > out.current_abs_det;
  if (!out.replace) out.slot = -1;
  return out;
}

}  // namespace

OracleDecision oracle_substitution(const std::vector<Key>& bank_keys, const Key& query,
                                   DeterminantMode mode) {
  std::vector<double> row;
  for (const Key& k : bank_keys) row.push_back(naive_similarity(k, query));
  return decide(naive_gram(bank_keys), row, naive_similarity(query, query), mode);
}

OracleDecision oracle_substitution_from_gram(const Matrix<double>& gram,
                                             const std::vector<Key>& pseudo_keys, const Key& query,
                                             DeterminantMode mode) {
  if (static_cast<Index>(pseudo_keys.size()) != gram.rows()) {
    throw ShapeError("oracle: pseudo key count does not match Gram size");
  }
  std::vector<double> row;
  for (const Key& k : pseudo_keys) row.push_back(naive_similarity(k, query));
  return decide(gram, row, naive_similarity(query, query), mode);
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t numerator = n - k + i;
    if (result > std::numeric_limits<std::uint64_t>::max() / numerator) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    result = result * numerator / i;
  }
  return result;
}

OfflineOptimum oracle_offline_best_subset(const std::vector<Key>& stream_keys, Index slots,
                                          std::uint64_t budget) {
  const auto length = static_cast<Index>(stream_keys.size());
  if (slots < 1 || slots > length) throw ConfigError("offline oracle: need 1 <= slots <= length");
  const std::uint64_t count =
      binomial(static_cast<std::uint64_t>(length - 1), static_cast<std::uint64_t>(slots - 1));
  if (count > budget) {
    throw BudgetError("offline oracle: " + std::to_string(count) + " subsets exceed budget " +
                      std::to_string(budget));
  }
  const Matrix<double> all = naive_gram(stream_keys);

  // Lexicographic walk over (slots-1)-combinations of frames 1..length-1.
  const Index picks = slots - 1;
  std::vector<Index> combo(static_cast<std::size_t>(picks));
  for (Index i = 0; i < picks; ++i) combo[static_cast<std::size_t>(i)] = i + 1;

  OfflineOptimum best;
  best.log_abs_det = -std::numeric_limits<double>::infinity();
  std::vector<Index> members(static_cast<std::size_t>(slots));
  Matrix<double> g(slots, slots);
  while (true) {
    members[0] = 0;
    for (Index i = 0; i < picks; ++i) members[static_cast<std::size_t>(i + 1)] = combo[static_cast<std::size_t>(i)];
    for (Index a = 0; a < slots; ++a) {
      for (Index b = 0; b < slots; ++b) {
        g(a, b) = all(members[static_cast<std::size_t>(a)], members[static_cast<std::size_t>(b)]);
      }
    }
    const double abs_det = std::abs(lu_determinant(g));
    const double value = abs_det > 0.0 ? std::log(abs_det) : -std::numeric_limits<double>::infinity();
    ++best.subsets_evaluated;
    if (best.frames.empty() || value > best.log_abs_det) {
      best.log_abs_det = value;
      best.frames = members;
    }

    Index i = picks - 1;
    while (i >= 0 && combo[static_cast<std::size_t>(i)] == length - picks + i) --i;
    if (i < 0) break;
    ++combo[static_cast<std::size_t>(i)];
    for (Index k = i + 1; k < picks; ++k) {
      combo[static_cast<std::size_t>(k)] = combo[static_cast<std::size_t>(k - 1)] + 1;
    }
  }
  return best;
}

}  // namespace readmem

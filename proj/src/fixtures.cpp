#include "readmem/fixtures.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace readmem {
namespace {

Vector<double> unit_gaussian(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector<double> v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v / v.norm();
}

Key make_key(Matrix<double> cols, const ShapeSpec& shape, std::int64_t frame) {
  return normalize_key(Key(std::move(cols), shape, frame));
}

}  // namespace

ReaFixture permutation_fixture(const ShapeSpec& shape, std::uint64_t seed) {
  shape.validate();
  if (shape.spatial < 2) throw ConfigError("permutation fixture: needs at least 2 positions");
  std::mt19937_64 rng(seed);
  const Index hw = shape.spatial;
  Matrix<double> query(shape.channels_key, hw);
  for (Index j = 0; j < hw; ++j) query.col(j) = unit_gaussian(shape.channels_key, rng);
  const Index shift = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(hw - 1));
  Matrix<double> memory(shape.channels_key, hw);
  for (Index j = 0; j < hw; ++j) memory.col((j + shift) % hw) = query.col(j);
  return {make_key(std::move(memory), shape, 0), make_key(std::move(query), shape, 1)};
}

ReaFixture area_change_fixture(const ShapeSpec& shape, std::uint64_t seed, double memory_fraction,
                               double query_fraction, double noise_sigma) {
  shape.validate();
  if (!(memory_fraction > 0.0 && memory_fraction <= query_fraction && query_fraction <= 1.0)) {
    throw ConfigError("area fixture: need 0 < memory_fraction <= query_fraction <= 1");
  }
  std::mt19937_64 rng(seed);
  const Index ck = shape.channels_key;
  const Index hw = shape.spatial;
  const Vector<double> foreground = unit_gaussian(ck, rng);
  Matrix<double> background(ck, hw);
  for (Index j = 0; j < hw; ++j) {
    Vector<double> b = unit_gaussian(ck, rng);
    b -= b.dot(foreground) * foreground;  // keep backgrounds off the foreground direction
    background.col(j) = b / b.norm();
  }

  auto region = [&](double fraction) {
    std::vector<Index> cols(static_cast<std::size_t>(hw));
    std::iota(cols.begin(), cols.end(), Index{0});
    std::shuffle(cols.begin(), cols.end(), rng);
    const Index count = std::clamp<Index>(static_cast<Index>(std::lround(fraction * static_cast<double>(hw))), 1, hw);
    cols.resize(static_cast<std::size_t>(count));
    return cols;
  };
  auto render = [&](const std::vector<Index>& fg) {
    Matrix<double> cols = background;
    for (Index j : fg) cols.col(j) = foreground;
    std::normal_distribution<double> normal(0.0, noise_sigma / std::sqrt(static_cast<double>(ck)));
    for (Index j = 0; j < hw; ++j) {
      for (Index c = 0; c < ck; ++c) cols(c, j) += normal(rng);
      cols.col(j).normalize();
    }
    return cols;
  };
  Matrix<double> memory = render(region(memory_fraction));
  Matrix<double> query = render(region(query_fraction));
  return {make_key(std::move(memory), shape, 0), make_key(std::move(query), shape, 1)};
}

double recovered_similarity(const ReaFixture& fixture, ReaMode mode, ReaSource source, Index topk) {
  if (mode == ReaMode::off) return similarity(fixture.memory_key, fixture.query_key);
  const std::vector<Key> memory{fixture.memory_key};
  const AttentionPass<double> pass = attend(memory, fixture.query_key, topk);
  const Matrix<double> block = source == ReaSource::weights ? slice_weights(pass.weights, 0)
                                                            : slice_weights(pass.affinity, 0);
  return similarity(project(fixture.memory_key, build_transition(block, to_transition_variant(mode))),
                    fixture.query_key);
}

}  // namespace readmem

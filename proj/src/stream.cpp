#include "readmem/stream.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

namespace readmem {

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::stationary: return "stationary";
    case Regime::slow_drift: return "slow_drift";
    case Regime::cyclic_shift: return "cyclic_shift";
    case Regime::area_change: return "area_change";
    case Regime::distractor: return "distractor";
  }
  return "?";
}

Regime parse_regime(std::string_view s) {
  for (Regime r : {Regime::stationary, Regime::slow_drift, Regime::cyclic_shift,
                   Regime::area_change, Regime::distractor}) {
    if (to_string(r) == s) return r;
  }
  throw ConfigError("unknown regime '" + std::string(s) + "'");
}

bool StreamSpec::has(Regime r) const {
  return std::find(regimes.begin(), regimes.end(), r) != regimes.end();
}

void StreamSpec::validate() const {
  try {
    shape.validate();
  } catch (const ShapeError& e) {
    throw ConfigError(e.what());
  }
  if (length < 1) throw ConfigError("stream: length must be >= 1");
  if (regimes.empty()) throw ConfigError("stream: at least one regime required");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("stream: noise_sigma must be finite and >= 0");
  }
  if (!(foreground_fraction > 0.0 && foreground_fraction <= 1.0)) {
    throw ConfigError("stream: foreground fraction must lie in (0, 1]");
  }
  if (has(Regime::slow_drift) && !std::isfinite(drift_rate)) {
    throw ConfigError("stream: drift rate must be finite");
  }
  if (has(Regime::cyclic_shift) && shift_period < 1) {
    throw ConfigError("stream: shift period must be >= 1");
  }
  if (has(Regime::area_change) &&
      !(area_min > 0.0 && area_min <= area_max && area_max <= 1.0)) {
    throw ConfigError("stream: area fractions must satisfy 0 < p_min <= p_max <= 1");
  }
  if (has(Regime::distractor) &&
      !(distractor_start >= 0 && distractor_start <= distractor_end && distractor_end < length)) {
    throw ConfigError("stream: distractor window must satisfy 0 <= start <= end < length");
  }
}

Value derive_value(const Key& key, const ShapeSpec& shape) {
  Matrix<double> data(shape.channels_value, shape.spatial);
  for (Index r = 0; r < shape.channels_value; ++r) {
    data.row(r) = key.data().row(r % shape.channels_key);
  }
  return Value(std::move(data), shape, key.frame_index());
}

namespace {

Vector<double> gaussian_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector<double> v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

/// Per-stream structure drawn once from the seed.
struct Signatures {
  Vector<double> foreground;
  Vector<double> distractor;
  Matrix<double> background;        // C_k x HW, unit columns
  std::vector<Index> region_order;  // columns in the order they join the foreground
  Vector<double> drift_direction;   // flattened, unnormalized
};

Signatures draw_signatures(const StreamSpec& spec, std::mt19937_64& rng) {
  const Index ck = spec.shape.channels_key;
  const Index hw = spec.shape.spatial;
  Matrix<double> gauss(ck, ck);
  for (Index c = 0; c < ck; ++c) gauss.col(c) = gaussian_vector(ck, rng);
  const Matrix<double> basis = Eigen::HouseholderQR<Matrix<double>>(gauss).householderQ();

  Signatures sig;
  sig.foreground = basis.col(0);
  // Distractor is orthogonal to the foreground; backgrounds avoid both directions.
  sig.distractor = ck >= 2 ? Vector<double>(basis.col(1)) : Vector<double>(-basis.col(0));
  sig.background.resize(ck, hw);
  for (Index j = 0; j < hw; ++j) {
    Vector<double> b;
    if (ck >= 3) {
      b = basis.rightCols(ck - 2) * gaussian_vector(ck - 2, rng);
    } else {
      b = gaussian_vector(ck, rng);
    }
    sig.background.col(j) = b / b.norm();
  }
  sig.region_order.resize(static_cast<std::size_t>(hw));
  std::iota(sig.region_order.begin(), sig.region_order.end(), Index{0});
  std::shuffle(sig.region_order.begin(), sig.region_order.end(), rng);
  sig.drift_direction = gaussian_vector(ck * hw, rng);
  return sig;
}

double foreground_fraction_at(const StreamSpec& spec, Index t) {
  if (!spec.has(Regime::area_change)) return spec.foreground_fraction;
  if (spec.length == 1) return spec.area_min;
  const double s = static_cast<double>(t) / static_cast<double>(spec.length - 1);
  return spec.area_min + (spec.area_max - spec.area_min) * s;
}

Vector<double> clean_key(const StreamSpec& spec, const Signatures& sig, Index t, bool present) {
  const Index ck = spec.shape.channels_key;
  const Index hw = spec.shape.spatial;
  const double p = foreground_fraction_at(spec, t);
  const Index fg = std::clamp<Index>(static_cast<Index>(std::lround(p * static_cast<double>(hw))),
                                     1, hw);
  Matrix<double> cols = sig.background;
  for (Index r = 0; r < fg; ++r) {
    cols.col(sig.region_order[static_cast<std::size_t>(r)]) = present ? sig.foreground : sig.distractor;
  }
  if (spec.has(Regime::cyclic_shift)) {
    const Index shift = (t / spec.shift_period) % hw;
    Matrix<double> shifted(ck, hw);
    for (Index j = 0; j < hw; ++j) shifted.col((j + shift) % hw) = cols.col(j);
    cols = std::move(shifted);
  }
  Vector<double> flat(ck * hw);
  Eigen::Map<RowMajorMatrix<double>>(flat.data(), ck, hw) = cols;
  flat /= flat.norm();
  if (spec.has(Regime::slow_drift)) {
    Vector<double> u = sig.drift_direction - sig.drift_direction.dot(flat) * flat;
    u /= u.norm();
    const double angle = spec.drift_rate * static_cast<double>(t);
    flat = std::cos(angle) * flat + std::sin(angle) * u;
  }
  return flat;
}

Key noisy_key(const Vector<double>& clean, const StreamSpec& spec, std::int64_t frame,
              std::mt19937_64& rng) {
  Vector<double> flat = clean;
  if (spec.noise_sigma > 0.0) {
    const double per_entry = spec.noise_sigma / std::sqrt(static_cast<double>(clean.size()));
    flat += per_entry * gaussian_vector(clean.size(), rng);
  }
  return normalize_key(unflatten_key(flat, spec.shape, frame));
}

}  // namespace

std::vector<FrameRecord> generate_stream(const StreamSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const Signatures sig = draw_signatures(spec, rng);

  std::vector<FrameRecord> frames;
  frames.reserve(static_cast<std::size_t>(spec.length));
  for (Index t = 0; t < spec.length; ++t) {
    const bool present = !(spec.has(Regime::distractor) && t >= spec.distractor_start &&
                           t <= spec.distractor_end);
    const Vector<double> clean = clean_key(spec, sig, t, present);
    Key query = noisy_key(clean, spec, t, rng);
    Key qm = spec.aliased ? query : noisy_key(clean, spec, t, rng);
    Value value = derive_value(qm, spec.shape);
    frames.push_back(FrameRecord{t, std::move(query), std::move(qm), std::move(value), present});
  }
  return frames;
}

}  // namespace readmem

#include "readmem/oracle_check.hpp"

#include <cmath>
#include <optional>
#include <random>

#include "readmem/memory_manager.hpp"
#include "readmem/oracle.hpp"
#include "readmem/stream.hpp"

namespace readmem {
namespace {

Key random_key(const ShapeSpec& shape, const Vector<double>& shared, double shared_weight,
               std::int64_t frame, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector<double> flat(shape.channels_key * shape.spatial);
  for (Index i = 0; i < flat.size(); ++i) flat(i) = normal(rng);
  flat += shared_weight * shared;
  return normalize_key(unflatten_key(flat, shape, frame));
}

}  // namespace

OracleCheckReport run_oracle_check(const OracleCheckConfig& config) {
  if (config.trials < 0) throw ConfigError("oracle-check: trials must be >= 0");
  if (config.slots < 2 || config.slots > kOracleMaxSlots) {
    throw BudgetError("oracle-check: slots must lie in [2, " + std::to_string(kOracleMaxSlots) + "]");
  }
  EngineConfig engine_config;
  engine_config.shape = config.shape;
  engine_config.slots = config.slots;
  engine_config.sampling_interval = 1;
  engine_config.lsb_threshold = -1.0;
  engine_config.rea = ReaMode::off;
  engine_config.validate();

  const Index dim = config.shape.channels_key * config.shape.spatial;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  OracleCheckReport report;
  for (std::int64_t trial = 0; trial < config.trials; ++trial) {
    Vector<double> shared(dim);
    for (Index i = 0; i < dim; ++i) shared(i) = normal(rng);
    const double shared_weight = 2.0 * uniform(rng);

    auto value_for = [&](const Key& k) { return derive_value(k, config.shape); };
    const Key annotated = random_key(config.shape, shared, shared_weight, 0, rng);
    MemoryEngine<double> engine(engine_config, annotated, value_for(annotated));
    for (Index n = 1; n < config.slots; ++n) {
      const Key k = random_key(config.shape, shared, shared_weight, n, rng);
      engine.observe(n, k, k, value_for(k));
    }

    // Query: random mixture of stored keys plus a fresh component of random size.
    const std::vector<Key> bank = engine.bank().keys;
    Vector<double> q = Vector<double>::Zero(dim);
    for (const Key& k : bank) q += normal(rng) * k.data().reshaped();
    Vector<double> fresh(dim);
    for (Index i = 0; i < dim; ++i) fresh(i) = normal(rng);
    q += (0.05 + 1.5 * uniform(rng)) * fresh / std::sqrt(static_cast<double>(dim)) * q.norm();
    Matrix<double> q_matrix = q.reshaped(config.shape.channels_key, config.shape.spatial);
    const Key query = normalize_key(Key(std::move(q_matrix), config.shape, config.slots));

    const Observation<double> obs = engine.observe(config.slots, query, query, value_for(query));
    const OracleDecision oracle = oracle_substitution(bank, query);
    std::optional<Index> engine_slot;
    if (obs.decision.action == Action::replaced_slot) engine_slot = obs.decision.slot;
    if (config.inject_fault && engine_slot) engine_slot = 1 + (*engine_slot % (config.slots - 1));

    const bool agree = oracle.replace ? (engine_slot && *engine_slot == oracle.slot)
                                      : (!engine_slot && obs.decision.action == Action::rejected_no_gain);
    report.trials += 1;
    (oracle.replace ? report.replacements : report.rejections) += 1;
    if (agree) {
      report.agreements += 1;
    } else if (report.disagreements.size() < 10) {
      report.disagreements.push_back(
          "trial " + std::to_string(trial) + ": engine " + std::string(to_string(obs.decision.action)) +
          (engine_slot ? " slot " + std::to_string(*engine_slot) : std::string()) + ", oracle " +
          (oracle.replace ? "replace slot " + std::to_string(oracle.slot) : std::string("reject")));
    }
  }
  return report;
}

}  // namespace readmem

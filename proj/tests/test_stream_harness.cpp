#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include <json.hpp>

#include "readmem/container.hpp"
#include "readmem/episode.hpp"
#include "readmem/oracle.hpp"
#include "readmem/stream.hpp"
#include "test_oracles.hpp"

namespace readmem {
namespace {

using testing::Mat;

const ShapeSpec kShape{4, 6, 8};

StreamSpec make_spec(std::vector<Regime> regimes, Index length, double noise, std::uint64_t seed) {
  StreamSpec s;
  s.shape = kShape;
  s.length = length;
  s.regimes = std::move(regimes);
  s.noise_sigma = noise;
  s.seed = seed;
  return s;
}

double key_dot(const Key& a, const Key& b) { return testing::naive_dot(a.data(), b.data()); }

TEST(GenerateStream, StationaryNoiseFreeFramesAreIdentical) {
  const auto frames = generate_stream(make_spec({Regime::stationary}, 20, 0.0, 1));
  ASSERT_EQ(frames.size(), 20u);
  for (const auto& f : frames) {
    EXPECT_EQ(f.query_key.data(), frames[0].query_key.data());
    EXPECT_TRUE(f.ground_truth_present);
  }
}

TEST(GenerateStream, CyclicShiftReturnsAfterFullCycle) {
  StreamSpec s = make_spec({Regime::cyclic_shift}, 9, 0.0, 2);
  s.shape = ShapeSpec{4, 4, 4};
  s.shift_period = 1;
  const auto frames = generate_stream(s);
  EXPECT_EQ(frames[4].query_key.data(), frames[0].query_key.data());
  EXPECT_EQ(frames[8].query_key.data(), frames[0].query_key.data());
  EXPECT_NE(frames[1].query_key.data(), frames[0].query_key.data());
  // One-column shift moves column j to column j+1.
  for (Index j = 0; j < 4; ++j) {
    EXPECT_EQ(frames[1].query_key.data().col((j + 1) % 4), frames[0].query_key.data().col(j));
  }
}

TEST(GenerateStream, SameSeedIsBitIdentical) {
  const StreamSpec s = make_spec({Regime::slow_drift, Regime::cyclic_shift}, 30, 0.1, 3);
  const auto a = generate_stream(s);
  const auto b = generate_stream(s);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].query_key.data(), b[i].query_key.data());
    EXPECT_EQ(a[i].qm_value.data(), b[i].qm_value.data());
  }
  const auto c = generate_stream(make_spec({Regime::slow_drift, Regime::cyclic_shift}, 30, 0.1, 4));
  EXPECT_NE(a[5].query_key.data(), c[5].query_key.data());
}

TEST(GenerateStream, DriftRotatesAtTheConfiguredRate) {
  StreamSpec s = make_spec({Regime::slow_drift}, 50, 0.0, 5);
  s.drift_rate = 0.02;
  const auto frames = generate_stream(s);
  for (const auto& f : frames) {
    EXPECT_NEAR(key_dot(f.query_key, frames[0].query_key),
                std::cos(0.02 * static_cast<double>(f.frame_index)), 1e-12);
  }
}

TEST(GenerateStream, KeysAreUnitNormAndFramesIndexed) {
  const auto frames = generate_stream(make_spec({Regime::stationary}, 10, 0.5, 6));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    EXPECT_EQ(frames[i].frame_index, static_cast<std::int64_t>(i));
    EXPECT_NEAR(key_dot(frames[i].query_key, frames[i].query_key), 1.0, 1e-12);
    EXPECT_EQ(frames[i].qm_key.data(), frames[i].query_key.data());
  }
}

TEST(GenerateStream, NonAliasedQmIsDistinctButClose) {
  StreamSpec s = make_spec({Regime::stationary}, 10, 0.1, 7);
  s.aliased = false;
  for (const auto& f : generate_stream(s)) {
    EXPECT_NE(f.qm_key.data(), f.query_key.data());
    EXPECT_GT(key_dot(f.qm_key, f.query_key), 0.9);
  }
}

TEST(GenerateStream, DistractorWindowIsOrthogonalToForeground) {
  StreamSpec s = make_spec({Regime::distractor}, 30, 0.0, 8);
  s.distractor_start = 10;
  s.distractor_end = 19;
  const auto frames = generate_stream(s);
  for (const auto& f : frames) {
    const bool inside = f.frame_index >= 10 && f.frame_index <= 19;
    EXPECT_EQ(f.ground_truth_present, !inside);
    const double sim = key_dot(f.query_key, frames[0].query_key);
    if (inside) {
      EXPECT_LT(sim, 0.5);
    } else {
      EXPECT_NEAR(sim, 1.0, 1e-12);
    }
  }
}

TEST(GenerateStream, AreaChangeGrowsForeground) {
  StreamSpec s = make_spec({Regime::area_change}, 11, 0.0, 9);
  s.shape = ShapeSpec{4, 4, 16};
  s.area_min = 0.25;
  s.area_max = 0.75;
  const auto frames = generate_stream(s);
  // Foreground columns are identical to each other; count columns equal to the
  // most common column as a proxy for the foreground share.
  auto foreground_columns = [](const Key& k) {
    Index best = 0;
    for (Index a = 0; a < k.spatial(); ++a) {
      Index same = 0;
      for (Index b = 0; b < k.spatial(); ++b) same += (k.data().col(a) - k.data().col(b)).norm() < 1e-12;
      best = std::max(best, same);
    }
    return best;
  };
  EXPECT_EQ(foreground_columns(frames.front().query_key), 4);
  EXPECT_EQ(foreground_columns(frames.back().query_key), 12);
}

TEST(GenerateStream, RejectsMalformedSpecs) {
  StreamSpec s = make_spec({Regime::stationary}, 0, 0.0, 1);
  EXPECT_THROW(generate_stream(s), ConfigError);
  s = make_spec({Regime::area_change}, 5, 0.0, 1);
  s.area_min = 0.8;
  s.area_max = 0.4;
  EXPECT_THROW(generate_stream(s), ConfigError);
  s = make_spec({Regime::distractor}, 5, 0.0, 1);
  s.distractor_start = 2;
  s.distractor_end = 5;
  EXPECT_THROW(generate_stream(s), ConfigError);
  s = make_spec({}, 5, 0.0, 1);
  EXPECT_THROW(generate_stream(s), ConfigError);
  s = make_spec({Regime::stationary}, 5, -0.1, 1);
  EXPECT_THROW(generate_stream(s), ConfigError);
  EXPECT_THROW(parse_regime("zigzag"), ConfigError);
}

TEST(DeriveValue, RepeatsKeyRows) {
  std::mt19937_64 rng(10);
  const Key k = testing::random_unit_key(kShape, rng, 3);
  const Value v = derive_value(k, kShape);
  EXPECT_EQ(v.frame_index(), 3);
  for (Index r = 0; r < kShape.channels_value; ++r) EXPECT_EQ(v.data().row(r), k.data().row(r % 4));
}

TEST(Container, SizeFormula) {
  const ShapeSpec s{8, 16, 32};
  EXPECT_EQ(container_size(s, true, 100), 26u + 100u * (8u * 32u * 4u + 1u));
  EXPECT_EQ(container_size(s, false, 100), 26u + 100u * (2u * 8u * 32u * 4u + 16u * 32u * 4u + 1u));
  for (bool aliased : {true, false}) {
    StreamSpec spec = make_spec({Regime::slow_drift}, 17, 0.1, 11);
    spec.aliased = aliased;
    const auto frames = generate_stream(spec);
    EXPECT_EQ(encode_stream(kShape, aliased, frames).size(), container_size(kShape, aliased, 17));
  }
}

TEST(Container, HeaderLayout) {
  const auto frames = generate_stream(make_spec({Regime::stationary}, 2, 0.0, 12));
  const std::string bytes = encode_stream(kShape, true, frames);
  EXPECT_EQ(bytes.substr(0, 4), "RMEM");
  auto u32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[off + static_cast<std::size_t>(i)]);
    return v;
  };
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 0);
  EXPECT_EQ(u32(6), 4u);
  EXPECT_EQ(u32(10), 6u);
  EXPECT_EQ(u32(14), 8u);
  EXPECT_EQ(u32(18), 2u);
  EXPECT_EQ(u32(22), 1u);
}

TEST(Container, RoundTripWithinFloatPrecision) {
  for (bool aliased : {true, false}) {
    StreamSpec spec = make_spec({Regime::distractor}, 12, 0.2, 13);
    spec.aliased = aliased;
    spec.distractor_start = 3;
    spec.distractor_end = 5;
    const auto frames = generate_stream(spec);
    const StreamFile file = decode_stream(encode_stream(kShape, aliased, frames));
    EXPECT_EQ(file.shape, kShape);
    EXPECT_EQ(file.aliased, aliased);
    ASSERT_EQ(file.frames.size(), frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto& a = frames[i];
      const auto& b = file.frames[i];
      EXPECT_EQ(b.frame_index, a.frame_index);
      EXPECT_EQ(b.ground_truth_present, a.ground_truth_present);
      EXPECT_LE((a.query_key.data() - b.query_key.data()).cwiseAbs().maxCoeff(), 1e-6);
      EXPECT_LE((a.qm_key.data() - b.qm_key.data()).cwiseAbs().maxCoeff(), 1e-6);
      EXPECT_LE((a.qm_value.data() - b.qm_value.data()).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(Container, CorruptionIsDetected) {
  const auto frames = generate_stream(make_spec({Regime::stationary}, 3, 0.1, 14));
  const std::string good = encode_stream(kShape, true, frames);
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_THROW(decode_stream(bad), ContainerError);
  bad = good;
  bad[4] = 2;
  EXPECT_THROW(decode_stream(bad), ContainerError);
  bad = good;
  bad[22] = 4;
  EXPECT_THROW(decode_stream(bad), ContainerError);
  EXPECT_THROW(decode_stream(good.substr(0, good.size() - 1)), ContainerError);
  EXPECT_THROW(decode_stream(good.substr(0, 10)), ContainerError);
  EXPECT_THROW(decode_stream(good + "x"), ContainerError);
  EXPECT_THROW(decode_stream(""), ContainerError);
}

TEST(Container, ZeroKeyIsRejected) {
  const auto frames = generate_stream(make_spec({Regime::stationary}, 1, 0.0, 15));
  std::string bytes = encode_stream(kShape, true, frames);
  std::fill(bytes.begin() + 26, bytes.begin() + 26 + 4 * 32, '\0');
  EXPECT_THROW(decode_stream(bytes), ContainerError);
}

TEST(Manifest, RoundTrip) {
  StreamSpec s = make_spec({Regime::slow_drift, Regime::distractor}, 40, 0.125, 0xDEADBEEFCAFEull);
  s.drift_rate = 0.1 + 0.2;  // not exactly representable in short decimal
  s.distractor_start = 5;
  s.distractor_end = 9;
  s.aliased = false;
  const StreamSpec back = parse_manifest(manifest_text(s));
  EXPECT_EQ(back.shape, s.shape);
  EXPECT_EQ(back.length, s.length);
  EXPECT_EQ(back.regimes, s.regimes);
  EXPECT_EQ(back.drift_rate, s.drift_rate);
  EXPECT_EQ(back.noise_sigma, s.noise_sigma);
  EXPECT_EQ(back.seed, s.seed);
  EXPECT_EQ(back.distractor_start, 5);
  EXPECT_EQ(back.distractor_end, 9);
  EXPECT_FALSE(back.aliased);
  EXPECT_THROW(parse_manifest("length=3\n"), ConfigError);
  EXPECT_THROW(parse_manifest("garbage line\n"), ConfigError);
}

TEST(StreamFile, WriteAndReadBack) {
  const auto dir = std::filesystem::temp_directory_path() / "readmem_stream_file_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "s.rmem";
  const StreamSpec spec = make_spec({Regime::cyclic_shift}, 6, 0.0, 16);
  const auto frames = generate_stream(spec);
  write_stream_file(path, spec, frames);
  EXPECT_TRUE(std::filesystem::exists(manifest_path(path)));
  EXPECT_FALSE(std::filesystem::exists(dir / "s.rmem.tmp"));
  const StreamFile file = read_stream_file(path);
  EXPECT_EQ(file.frames.size(), 6u);
  EXPECT_EQ(read_file(path), encode_stream(kShape, true, frames));
  EXPECT_THROW(read_file(dir / "missing.rmem"), IoError);
  std::filesystem::remove_all(dir);
}

EngineConfig episode_config() {
  EngineConfig c;
  c.shape = kShape;
  c.slots = 4;
  c.sampling_interval = 2;
  c.topk = 8;
  return c;
}

TEST(RunEpisode, StationaryNoiseFreeNeverGains) {
  const auto frames = generate_stream(make_spec({Regime::stationary}, 40, 0.0, 17));
  const MetricsRecord rec = run_episode(episode_config(), frames);
  ASSERT_EQ(rec.rows.size(), 40u);
  EXPECT_EQ(rec.rows[0].action, Action::inserted_init);
  EXPECT_EQ(rec.rows[0].winning_slot, 0);
  int init = 0;
  for (std::size_t i = 1; i < rec.rows.size(); ++i) {
    const Action a = rec.rows[i].action;
    if (init < 3 && a == Action::inserted_init) {
      ++init;
      continue;
    }
    EXPECT_TRUE(a == Action::rejected_no_gain || a == Action::skipped_interval) << to_string(a);
  }
  EXPECT_EQ(init, 3);
  EXPECT_EQ(rec.summary.final_gramian, -std::numeric_limits<double>::infinity());
}

TEST(RunEpisode, DistractorFramesAreGated) {
  StreamSpec s = make_spec({Regime::distractor}, 60, 0.05, 18);
  s.distractor_start = 20;
  s.distractor_end = 39;
  const auto frames = generate_stream(s);
  // The distractor replaces the foreground columns with an orthogonal signature,
  // so its similarity to the annotated key is roughly the background share.
  for (std::size_t t = 20; t <= 39; ++t) {
    EXPECT_LT(testing::naive_dot(frames[t].qm_key.data(), frames[0].qm_key.data()), 0.5);
  }
  const MetricsRecord rec = run_episode(episode_config(), frames);
  for (const auto& row : rec.rows) {
    if (row.frame >= 20 && row.frame <= 39 && row.action != Action::skipped_interval) {
      EXPECT_EQ(row.action, Action::rejected_lsb) << row.frame;
    }
  }
  for (std::int64_t f : rec.summary.final_slot_frames) EXPECT_TRUE(f < 20 || f > 39);
}

TEST(RunEpisode, OracleAgreementIsTracked) {
  EngineConfig c = episode_config();
  c.rea = ReaMode::off;
  c.lsb_threshold = -1.0;
  const auto frames = generate_stream(make_spec({Regime::slow_drift}, 80, 0.3, 19));
  const MetricsRecord rec = run_episode(c, frames, EpisodeOptions{true});
  EXPECT_GT(rec.summary.oracle_checks, 0);
  EXPECT_EQ(rec.summary.oracle_agreements, rec.summary.oracle_checks);

  c.rea = ReaMode::argmax_columns;
  const MetricsRecord rea = run_episode(c, frames, EpisodeOptions{true});
  EXPECT_GT(rea.summary.oracle_checks, 0);
  EXPECT_EQ(rea.summary.oracle_agreements, rea.summary.oracle_checks);
}

TEST(RunEpisode, ShapeMismatch) {
  EngineConfig c = episode_config();
  c.shape = ShapeSpec{4, 6, 9};
  const auto frames = generate_stream(make_spec({Regime::stationary}, 3, 0.0, 20));
  EXPECT_THROW(run_episode(c, frames), ShapeError);
}

TEST(Metrics, CsvAndJsonContracts) {
  const auto frames = generate_stream(make_spec({Regime::slow_drift}, 25, 0.1, 21));
  const EngineConfig c = episode_config();
  const MetricsRecord rec = run_episode(c, frames);
  std::istringstream csv(metrics_csv(rec));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "frame,action,log_abs_det,lsb_score,winning_slot,candidate_max");
  // A single re-normalized slot has log|det| = log g(k, k), zero up to rounding.
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("0,inserted_init,", 0), 0u);
  EXPECT_EQ(line.substr(line.size() - 4), ",,0,");
  EXPECT_LE(std::abs(std::stod(line.substr(16))), 1e-15);
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("1,skipped_interval,", 0), 0u);
  EXPECT_EQ(line.substr(line.size() - 3), ",,,");
  std::size_t rows = 2;
  while (std::getline(csv, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5);
    ++rows;
  }
  EXPECT_EQ(rows, 25u);

  const auto j = nlohmann::json::parse(summary_json(rec, c));
  EXPECT_EQ(j["frames"], 25);
  EXPECT_EQ(j["config"]["slots"], 4);
  EXPECT_EQ(j["final_slot_frames"].size(), 4u);
  EXPECT_TRUE(j["oracle_agreement_rate"].is_null());
  std::int64_t total = 0;
  for (const auto& [name, n] : j["action_counts"].items()) total += n.get<std::int64_t>();
  EXPECT_EQ(total, 25);
}

TEST(Metrics, FormatNumber) {
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(std::stod(format_number(0.1)), 0.1);
  EXPECT_EQ(std::stod(format_number(-1.2345678901234567)), -1.2345678901234567);
}

TEST(OracleDeterminants, AgreeWithTestReferences) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 1 + trial % 6;
    const Mat m = testing::random_matrix(n, n, rng);
    const double ref = testing::cofactor_det(m);
    EXPECT_LE(testing::relative_error(cofactor_determinant(m), ref), 1e-10);
    EXPECT_LE(testing::relative_error(lu_determinant(m), ref), 1e-10);
  }
  EXPECT_THROW(cofactor_determinant(Mat::Identity(7, 7)), BudgetError);
  EXPECT_EQ(lu_determinant(Mat::Identity(9, 9)), 1.0);
}

TEST(OracleSubstitution, IdentityBankRejectsOrthogonalQuery) {
  std::vector<Key> bank;
  for (Index i = 0; i < 4; ++i) {
    Mat m = Mat::Zero(4, 8);
    m(i, i) = 1.0;
    bank.emplace_back(m, kShape, i);
  }
  Mat q = Mat::Zero(4, 8);
  q(0, 5) = 1.0;
  const OracleDecision d = oracle_substitution(bank, Key(q, kShape, 9));
  EXPECT_FALSE(d.replace);
  EXPECT_EQ(d.current_abs_det, 1.0);
  for (double v : d.candidate_abs_dets) EXPECT_EQ(v, 1.0);
}

TEST(OracleSubstitution, DuplicateForcesSubstitutionAtDuplicate) {
  std::mt19937_64 rng(23);
  std::vector<Key> bank;
  for (int i = 0; i < 3; ++i) bank.push_back(testing::random_unit_key(kShape, rng, i));
  bank.push_back(bank[2]);
  for (int trial = 0; trial < 20; ++trial) {
    const OracleDecision d = oracle_substitution(bank, testing::random_unit_key(kShape, rng, 10));
    EXPECT_EQ(d.current_abs_det, 0.0);
    EXPECT_TRUE(d.replace);
    EXPECT_TRUE(d.slot == 2 || d.slot == 3);
  }
}

TEST(OracleSubstitution, AgreesWithCandidateSubstitutions) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 300; ++trial) {
    const Index n = 2 + trial % 7;
    std::vector<Key> bank;
    for (Index i = 0; i < n; ++i) bank.push_back(testing::random_unit_key(kShape, rng, i));
    const Key q = testing::random_unit_key(kShape, rng, n);
    const GramState<double> g = build_gram(bank);
    Vector<double> sims(n);
    for (Index a = 0; a < n; ++a) sims(a) = similarity(bank[static_cast<std::size_t>(a)], q);
    const auto cand = candidate_substitutions(g, sims, 1.0);
    const auto best = cand.best();
    const bool engine_replace = best && best->log_abs_det > g.log_abs_det;
    const OracleDecision d = oracle_substitution(bank, q);
    EXPECT_EQ(d.replace, engine_replace) << trial;
    if (d.replace && engine_replace) {
      EXPECT_EQ(d.slot, best->slot);
    }
  }
  std::vector<Key> big;
  for (int i = 0; i < 9; ++i) big.push_back(testing::random_unit_key(kShape, rng, i));
  EXPECT_THROW(oracle_substitution(big, big[0]), BudgetError);
}

TEST(OfflineOptimum, PicksOrthogonalSet) {
  std::vector<Key> stream;
  auto e = [](Index i, std::int64_t frame) {
    Mat m = Mat::Zero(4, 8);
    m(0, i) = 1.0;
    return Key(m, kShape, frame);
  };
  stream.push_back(e(0, 0));
  stream.push_back(e(0, 1));
  stream.push_back(e(1, 2));
  stream.push_back(e(1, 3));
  stream.push_back(e(2, 4));
  const OfflineOptimum opt = oracle_offline_best_subset(stream, 3, 1000);
  EXPECT_EQ(opt.log_abs_det, 0.0);
  EXPECT_EQ(opt.subsets_evaluated, binomial(4, 2));
  ASSERT_EQ(opt.frames.size(), 3u);
  EXPECT_EQ(opt.frames[0], 0);
  EXPECT_EQ(opt.frames[2], 4);
  EXPECT_THROW(oracle_offline_best_subset(stream, 3, 5), BudgetError);
}

TEST(OfflineOptimum, BoundsTheEngine) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    StreamSpec s = make_spec({Regime::slow_drift}, 16, 0.4, seed);
    const auto frames = generate_stream(s);
    EngineConfig c = episode_config();
    c.sampling_interval = 1;
    c.rea = ReaMode::off;
    c.lsb_threshold = -1.0;
    const MetricsRecord rec = run_episode(c, frames);
    std::vector<Key> keys;
    for (const auto& f : frames) keys.push_back(f.qm_key);
    const OfflineOptimum opt = oracle_offline_best_subset(keys, 4, 1000);
    EXPECT_LE(rec.summary.final_gramian, opt.log_abs_det + 1e-9);
  }
}

TEST(Binomial, SmallValues) {
  EXPECT_EQ(binomial(20, 4), 4845u);
  EXPECT_EQ(binomial(5, 0), 1u);
  EXPECT_EQ(binomial(3, 5), 0u);
}

}  // namespace
}  // namespace readmem

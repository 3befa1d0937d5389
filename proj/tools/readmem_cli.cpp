// readmem: generate synthetic embedding streams, run the memory engine over
// them, sweep ablations, and cross-check the update rule against the oracle.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "readmem/readmem.hpp"

namespace fs = std::filesystem;
using namespace readmem;

namespace {

enum ExitCode : int {
  kOk = 0,
  kIoError = 1,
  kConfigError = 2,
  kContainerError = 3,
  kShapeMismatch = 4,
  kOracleDisagreement = 5,
};

struct EngineFlags {
  Index slots = 20;
  Index sampling_interval = 10;
  Index topk = 20;
  double lsb = 0.5;
  std::string strategy = "readmem";
  std::string rea = "argmax_columns";
  std::string rea_source = "weights";
  std::string init = "every_tth";
  bool adjacent = true;

  void add_to(CLI::App& app) {
    app.add_option("--slots", slots, "Memory slots N")->capture_default_str();
    app.add_option("--sampling-interval", sampling_interval, "Only every s_r-th frame may enter memory")
        ->capture_default_str();
    app.add_option("--topk", topk, "Top-k filter on affinity columns")->capture_default_str();
    app.add_option("--lsb", lsb, "Lower similarity bound in [-1, 1]")->capture_default_str();
    app.add_option("--strategy", strategy, "readmem | fifo")->capture_default_str();
    app.add_option("--rea", rea, "argmax_columns | argmax_rows | hungarian | off")->capture_default_str();
    app.add_option("--rea-source", rea_source, "weights | affinity")->capture_default_str();
    app.add_option("--init", init, "every_tth | annotated_fill")->capture_default_str();
    app.add_flag("--adjacent,!--no-adjacent", adjacent, "Use the previous frame as temporary memory");
  }

  EngineConfig to_config(const ShapeSpec& shape) const {
    EngineConfig c;
    c.slots = slots;
    c.sampling_interval = sampling_interval;
    c.topk = topk;
    c.lsb_threshold = lsb;
    c.strategy = parse_strategy(strategy);
    c.rea = parse_rea_mode(rea);
    c.rea_source = parse_rea_source(rea_source);
    c.init = parse_init_strategy(init);
    c.use_adjacent = adjacent;
    c.shape = shape;
    c.validate();
    return c;
  }
};

struct GenArgs {
  fs::path out;
  Index length = 100;
  Index channels_key = 8;
  Index channels_value = 8;
  Index spatial = 16;
  std::vector<std::string> regimes{"stationary"};
  double drift_rate = 0.01;
  Index shift_period = 1;
  double area_min = 0.25;
  double area_max = 0.75;
  Index distractor_start = 0;
  Index distractor_end = 0;
  double foreground = 0.75;
  double noise = 0.0;
  std::uint64_t seed = 0;
  bool no_alias = false;
};

struct RunArgs {
  fs::path stream;
  fs::path out_dir;
  std::vector<std::string> emit{"csv", "json-summary"};
  bool check_oracle = false;
  Index channels_key = 0;
  Index channels_value = 0;
  Index spatial = 0;
};

struct AblateArgs {
  fs::path stream;
  fs::path out;
  std::uint64_t fixture_seeds = 10;
};

struct OracleArgs {
  std::int64_t trials = 1000;
  Index slots = 5;
  Index channels_key = 4;
  Index spatial = 8;
  std::uint64_t seed = 1;
  bool inject_fault = false;
};

int cmd_gen(const GenArgs& a) {
  StreamSpec spec;
  spec.shape = {a.channels_key, a.channels_value, a.spatial};
  spec.length = a.length;
  spec.regimes.clear();
  for (const std::string& r : a.regimes) spec.regimes.push_back(parse_regime(r));
  spec.drift_rate = a.drift_rate;
  spec.shift_period = a.shift_period;
  spec.area_min = a.area_min;
  spec.area_max = a.area_max;
  spec.distractor_start = a.distractor_start;
  spec.distractor_end = a.distractor_end;
  spec.foreground_fraction = a.foreground;
  spec.noise_sigma = a.noise;
  spec.seed = a.seed;
  spec.aliased = !a.no_alias;
  const std::vector<FrameRecord> frames = generate_stream(spec);
  write_stream_file(a.out, spec, frames);
  std::cout << "wrote " << frames.size() << " frames to " << a.out.string() << " ("
            << container_size(spec.shape, spec.aliased, frames.size()) << " bytes)\n";
  return kOk;
}

ShapeSpec check_requested_shape(const StreamFile& file, Index ck, Index cv, Index hw) {
  const ShapeSpec& s = file.shape;
  if ((ck != 0 && ck != s.channels_key) || (cv != 0 && cv != s.channels_value) ||
      (hw != 0 && hw != s.spatial)) {
    throw ShapeError("requested shape does not match stream shape " + s.to_string());
  }
  return s;
}

int cmd_run(const RunArgs& a, const EngineFlags& flags) {
  const StreamFile file = read_stream_file(a.stream);
  const ShapeSpec shape = check_requested_shape(file, a.channels_key, a.channels_value, a.spatial);
  const EngineConfig config = flags.to_config(shape);
  EpisodeOptions options;
  options.check_oracle = a.check_oracle;
  const MetricsRecord record = run_episode(config, file.frames, options);

  fs::create_directories(a.out_dir);
  for (const std::string& e : a.emit) {
    if (e == "csv") {
      write_file_atomic(a.out_dir / "metrics.csv", metrics_csv(record));
    } else if (e == "json-summary") {
      write_file_atomic(a.out_dir / "summary.json", summary_json(record, config));
    } else {
      throw ConfigError("unknown --emit value '" + e + "'");
    }
  }
  std::cout << "final log|det G| = " << format_number(record.summary.final_gramian) << " over "
            << record.rows.size() << " frames\n";
  if (auto rate = record.summary.oracle_agreement_rate()) {
    std::cout << "oracle agreement " << record.summary.oracle_agreements << "/"
              << record.summary.oracle_checks << "\n";
    if (*rate < 1.0) return kOracleDisagreement;
  }
  return kOk;
}

int cmd_ablate(const AblateArgs& a, const EngineFlags& flags) {
  const StreamFile file = read_stream_file(a.stream);
  const EngineConfig base = flags.to_config(file.shape);

  struct Row {
    std::string name;
    EngineConfig config;
  };
  std::vector<Row> rows;
  for (ReaMode mode : {ReaMode::argmax_columns, ReaMode::argmax_rows, ReaMode::hungarian}) {
    for (ReaSource source : {ReaSource::weights, ReaSource::affinity}) {
      EngineConfig c = base;
      c.strategy = Strategy::readmem;
      c.rea = mode;
      c.rea_source = source;
      rows.push_back({"rea_" + std::string(to_string(mode)) + "_" + std::string(to_string(source)), c});
    }
  }
  EngineConfig c = base;
  c.strategy = Strategy::readmem;
  c.rea = ReaMode::off;
  rows.push_back({"rea_off", c});
  c = base;
  c.strategy = Strategy::fifo;
  rows.push_back({"no_dme_fifo", c});
  c = base;
  c.strategy = Strategy::readmem;
  c.lsb_threshold = -1.0;
  rows.push_back({"no_lsb", c});
  c = base;
  c.strategy = Strategy::readmem;
  c.use_adjacent = false;
  rows.push_back({"no_adjacent", c});

  std::ostringstream csv;
  csv << "name,strategy,rea,rea_source,lsb,adjacent,final_log_abs_det,final_key_log_abs_det,"
         "permutation_similarity,area_similarity\n";
  for (const Row& row : rows) {
    const MetricsRecord record = run_episode(row.config, file.frames);
    double perm = 0.0;
    double area = 0.0;
    for (std::uint64_t s = 0; s < a.fixture_seeds; ++s) {
      perm += recovered_similarity(permutation_fixture(file.shape, s), row.config.rea,
                                   row.config.rea_source, row.config.topk);
      area += recovered_similarity(area_change_fixture(file.shape, s, 0.25, 0.5), row.config.rea,
                                   row.config.rea_source, row.config.topk);
    }
    const double n = static_cast<double>(std::max<std::uint64_t>(a.fixture_seeds, 1));
    csv << row.name << ',' << to_string(row.config.strategy) << ',' << to_string(row.config.rea) << ','
        << to_string(row.config.rea_source) << ',' << format_number(row.config.lsb_threshold) << ','
        << (row.config.use_adjacent ? 1 : 0) << ',' << format_number(record.summary.final_gramian)
        << ',' << format_number(record.summary.final_key_gramian) << ',' << format_number(perm / n)
        << ',' << format_number(area / n) << '\n';
  }
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
    write_file_atomic(a.out, csv.str());
    std::cout << "wrote " << rows.size() << " ablation rows to " << a.out.string() << "\n";
  }
  return kOk;
}

int cmd_oracle_check(const OracleArgs& a) {
  OracleCheckConfig config;
  config.trials = a.trials;
  config.slots = a.slots;
  config.shape = {a.channels_key, a.channels_key, a.spatial};
  config.seed = a.seed;
  config.inject_fault = a.inject_fault;
  if (a.trials == 0) {
    std::cout << "warning: 0 trials requested; agreement is vacuous\n";
  }
  const OracleCheckReport report = run_oracle_check(config);
  for (const std::string& d : report.disagreements) std::cout << "disagreement: " << d << "\n";
  std::cout << "agreement " << report.agreements << "/" << report.trials << " (oracle replacements "
            << report.replacements << ", rejections " << report.rejections << ")\n";
  return report.all_agree() ? kOk : kOracleDisagreement;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diversity-maximizing external memory for streaming embeddings"};
  app.require_subcommand(1);

  EngineFlags engine_flags;

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic embedding stream");
  gen_cmd->add_option("--out", gen.out, "Output stream file")->required();
  gen_cmd->add_option("--length", gen.length)->capture_default_str();
  gen_cmd->add_option("--channels-key", gen.channels_key)->capture_default_str();
  gen_cmd->add_option("--channels-value", gen.channels_value)->capture_default_str();
  gen_cmd->add_option("--spatial", gen.spatial)->capture_default_str();
  gen_cmd->add_option("--regime", gen.regimes,
                      "stationary | slow_drift | cyclic_shift | area_change | distractor (repeat or comma-separate to compose)")
      ->delimiter(',')
      ->capture_default_str();
  gen_cmd->add_option("--drift-rate", gen.drift_rate, "Radians per frame")->capture_default_str();
  gen_cmd->add_option("--shift-period", gen.shift_period)->capture_default_str();
  gen_cmd->add_option("--p-min", gen.area_min)->capture_default_str();
  gen_cmd->add_option("--p-max", gen.area_max)->capture_default_str();
  gen_cmd->add_option("--distractor-start", gen.distractor_start)->capture_default_str();
  gen_cmd->add_option("--distractor-end", gen.distractor_end)->capture_default_str();
  gen_cmd->add_option("--foreground", gen.foreground, "Foreground column fraction")->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "Relative noise norm")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_flag("--no-alias", gen.no_alias, "Store separate qm key/value per frame");

  RunArgs run;
  CLI::App* run_cmd = app.add_subcommand("run", "Run the memory engine over a stream file");
  run_cmd->add_option("--stream", run.stream)->required();
  run_cmd->add_option("--out-dir", run.out_dir)->required();
  run_cmd->add_option("--emit", run.emit, "csv, json-summary")->delimiter(',')->capture_default_str();
  run_cmd->add_flag("--check-oracle", run.check_oracle, "Cross-check decisions (banks of <= 8 slots)");
  run_cmd->add_option("--channels-key", run.channels_key, "Expected C_k (0 = take from stream)");
  run_cmd->add_option("--channels-value", run.channels_value, "Expected C_v (0 = take from stream)");
  run_cmd->add_option("--spatial", run.spatial, "Expected HW (0 = take from stream)");
  engine_flags.add_to(*run_cmd);

  AblateArgs ablate;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "Sweep REA variants and component toggles");
  ablate_cmd->add_option("--stream", ablate.stream)->required();
  ablate_cmd->add_option("--out", ablate.out, "Output CSV (stdout when omitted)");
  ablate_cmd->add_option("--fixture-seeds", ablate.fixture_seeds)->capture_default_str();
  engine_flags.add_to(*ablate_cmd);

  OracleArgs oracle;
  CLI::App* oracle_cmd = app.add_subcommand("oracle-check", "Randomized engine-vs-oracle agreement");
  oracle_cmd->add_option("--trials", oracle.trials)->capture_default_str();
  oracle_cmd->add_option("--slots", oracle.slots)->capture_default_str();
  oracle_cmd->add_option("--channels-key", oracle.channels_key)->capture_default_str();
  oracle_cmd->add_option("--spatial", oracle.spatial)->capture_default_str();
  oracle_cmd->add_option("--seed", oracle.seed)->capture_default_str();
#ifdef READMEM_FAULT_INJECTION
  oracle_cmd->add_flag("--inject-fault", oracle.inject_fault);
#endif

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen);
    if (*run_cmd) return cmd_run(run, engine_flags);
    if (*ablate_cmd) return cmd_ablate(ablate, engine_flags);
    if (*oracle_cmd) return cmd_oracle_check(oracle);
  } catch (const ContainerError& e) {
    std::cerr << "container error: " << e.what() << "\n";
    return kContainerError;
  } catch (const ShapeError& e) {
    std::cerr << "shape mismatch: " << e.what() << "\n";
    return kShapeMismatch;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const BudgetError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kConfigError;
}

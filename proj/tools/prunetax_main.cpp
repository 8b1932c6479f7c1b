// prunetax: channel-pruning experiments on desk-scale CNNs.
//
// Subcommands: gen-data, train, list-signals, prune, sweep, pareto,
// compare-reductions, retrain-report. PRUNETAX_VERIFY=1 switches all
// arithmetic to 64-bit verification mode (default is float32 training mode).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prunetax/prunetax.hpp"

namespace fs = std::filesystem;
using namespace prunetax;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string checkpoint = "model.prnw";
  uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  int threads = 1;
};

struct GenDataArgs {
  std::string out;
  std::string mode = "blobs";
  int count = 8000;
  int classes = 10;
  int channels = 1;
  int height = 16;
  int width = 16;
  double noise = 0.35;
  uint64_t seed = 1;
};

struct PruneArgs {
  std::string signal;
  std::string retrain = "off";
  std::string out_csv;
  std::string save_checkpoint;
};

struct SweepArgs {
  std::string signals;  // overrides config when set
  std::string retrain = "off";
};

struct ParetoArgs {
  std::string summary;
  std::string out = "pareto.csv";
  std::string x_col = "sparsity_at_stop";
  std::string y_col = "test_acc_at_stop";
};

struct CompareArgs {
  std::string sweep_dir;
  std::string out = "reduction_report.csv";
};

struct RetrainReportArgs {
  std::string sweep_dir;
  std::string no_retrain_dir;
  double min_sparsity = 0.0;
  std::string out = "retrain_report.csv";
};

struct ListArgs {
  std::string rules = "default";
  bool published = false;
};

ExperimentConfig load_cli_config(const CommonArgs& common) {
  ExperimentConfig cfg = load_config(common.config_path);
  if (common.seed_set) {
    cfg.seed = common.seed;
    cfg.harness.seed = common.seed;
  }
  if (!common.out_dir.empty()) cfg.out_dir = common.out_dir;
  return cfg;
}

int cmd_gen_data(const GenDataArgs& a) {
  const Dims dims{a.channels, a.height, a.width};
  Dataset<float> ds;
  if (a.mode == "blobs") {
    ds = make_blobs_dataset<float>(a.count, a.classes, dims, a.noise, a.seed);
  } else if (a.mode == "linear2") {
    ds = make_linear2_dataset<float>(a.count, dims, a.seed);
  } else {
    fail(strf("gen-data: unknown mode '%s' (valid: blobs, linear2)", a.mode.c_str()));
  }
  save_dataset(a.out, ds);
  std::printf("wrote %d samples (%d classes, %dx%dx%d) to %s\n", ds.count(), ds.num_classes,
              dims.c, dims.h, dims.w, a.out.c_str());
  return 0;
}

int cmd_list_signals(const ListArgs& a) {
  if (a.published) {
    for (const auto& p : published_catalog()) {
      std::printf("%-28s %s%s%s\n", p.name.c_str(), p.spec.id().c_str(),
                  p.note.empty() ? "" : "  # ", p.note.c_str());
    }
    std::printf("total: %zu\n", published_catalog().size());
    return 0;
  }
  ValidityRules rules;
  if (a.rules == "full")
    rules.drop_equivalent = false;
  else
    check(a.rules == "default", strf("list-signals: unknown rules '%s' (valid: default, full)",
                                     a.rules.c_str()));
  const auto signals = enumerate_signals(rules);
  for (const auto& s : signals) std::printf("%s\n", s.id().c_str());
  std::printf("total: %zu\n", signals.size());
  return 0;
}

template <typename T>
int cmd_train(const CommonArgs& common) {
  const ExperimentConfig cfg = load_cli_config(common);
  const ExperimentEnv<T> env = ExperimentEnv<T>::load(cfg);
  TrainOutcome<T> out = train_model(cfg, env);
  if (const fs::path dir = fs::path(common.checkpoint).parent_path(); !dir.empty())
    fs::create_directories(dir);
  save_checkpoint(common.checkpoint, out.net, out.mask);
  std::printf("trained %s for %d steps (seed %llu)\n", cfg.model.c_str(), cfg.train_steps,
              static_cast<unsigned long long>(cfg.seed));
  std::printf("train_acc=%.4f eval_acc=%.4f test_acc=%.4f\n", out.train_acc, out.eval_acc,
              out.test_acc);
  std::printf("checkpoint: %s\n", common.checkpoint.c_str());
  return 0;
}

SignalSpec parse_signal_arg(const std::string& id) {
  try {
    return SignalSpec::parse(id);
  } catch (const Error&) {
    std::string nearest;
    for (const auto& n : nearest_signal_ids(id)) {
      if (!nearest.empty()) nearest += ", ";
      nearest += n;
    }
    fail(strf("unknown signal id '%s'; closest matches: %s", id.c_str(), nearest.c_str()));
  }
}

bool parse_retrain(const std::string& v) {
  check(v == "on" || v == "off", strf("--retrain must be 'on' or 'off', got '%s'", v.c_str()));
  return v == "on";
}

template <typename T>
int cmd_prune(const CommonArgs& common, const PruneArgs& a) {
  const ExperimentConfig cfg = load_cli_config(common);
  const SignalSpec spec = parse_signal_arg(a.signal);
  const bool retrain = parse_retrain(a.retrain);
  const ExperimentEnv<T> env = ExperimentEnv<T>::load(cfg);
  const Checkpoint<T> ck = load_checkpoint<T>(common.checkpoint);
  SignalRun<T> run = run_signal(cfg, ck.net, ck.mask, spec, retrain, env);

  fs::create_directories(cfg.out_dir);
  const std::string csv_path =
      a.out_csv.empty() ? (fs::path(cfg.out_dir) / (spec.id() + ".csv")).string() : a.out_csv;
  write_result_csv(csv_path, run.rows);
  const std::string ck_path =
      a.save_checkpoint.empty() ? (fs::path(cfg.out_dir) / (spec.id() + ".prnw")).string()
                                : a.save_checkpoint;
  save_checkpoint(ck_path, run.net, run.mask);

  const SummaryRow s = summarize_run(spec.id(), cfg.seed, run.result);
  std::printf("signal %s: %d steps, sparsity %.4f at stop (%.4f at 1%%-drop), test_acc %.4f\n",
              spec.id().c_str(), s.steps, s.sparsity_at_stop, s.sparsity_at_1pct_drop,
              s.test_acc_at_stop);
  std::printf("results: %s\nchckpoint: %s\n", csv_path.c_str(), ck_path.c_str());
  return 0;
}

template <typename T>
int cmd_sweep(const CommonArgs& common, const SweepArgs& a) {
  const ExperimentConfig cfg = load_cli_config(common);
  const bool retrain = parse_retrain(a.retrain);
  const std::vector<SignalSpec> specs =
      resolve_signals(a.signals.empty() ? cfg.signals : a.signals);
  const ExperimentEnv<T> env = ExperimentEnv<T>::load(cfg);
  const Checkpoint<T> ck = load_checkpoint<T>(common.checkpoint);
  const auto summary =
      sweep(cfg, ck.net, ck.mask, specs, retrain, common.threads, cfg.out_dir, env);
  int failures = 0;
  for (const auto& row : summary)
    if (row.status != "ok") ++failures;
  std::printf("swept %zu signals (%d failed); summary: %s\n", summary.size(), failures,
              (fs::path(cfg.out_dir) / "summary.csv").string().c_str());
  return failures == static_cast<int>(summary.size()) && !summary.empty() ? 1 : 0;
}

int cmd_pareto(const ParetoArgs& a) {
  const CsvTable t = read_csv(a.summary);
  check(!t.rows.empty(), strf("%s: no data rows", a.summary.c_str()));
  const int xi = t.column(a.x_col);
  const int yi = t.column(a.y_col);
  int status_col = -1;
  for (size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == "status") status_col = static_cast<int>(i);
  std::vector<double> x, y;
  std::vector<size_t> rows;
  for (size_t r = 0; r < t.rows.size(); ++r) {
    if (status_col >= 0 && t.rows[r][static_cast<size_t>(status_col)] != "ok") continue;
    x.push_back(std::stod(t.rows[r][static_cast<size_t>(xi)]));
    y.push_back(std::stod(t.rows[r][static_cast<size_t>(yi)]));
    rows.push_back(r);
  }
  check(!rows.empty(), strf("%s: no usable rows", a.summary.c_str()));
  const auto front = pareto_front(x, y);
  std::string buf;
  for (size_t i = 0; i < t.header.size(); ++i) {
    if (i) buf += ',';
    buf += t.header[i];
  }
  buf += '\n';
  for (size_t k : front) {
    const auto& fields = t.rows[rows[k]];
    for (size_t i = 0; i < fields.size(); ++i) {
      if (i) buf += ',';
      buf += fields[i];
    }
    buf += '\n';
  }
  detail::write_file(a.out, buf);
  std::printf("pareto front: %zu of %zu points -> %s\n", front.size(), rows.size(),
              a.out.c_str());
  return 0;
}

int cmd_compare_reductions(const CompareArgs& a) {
  const auto summary = read_summary_csv((fs::path(a.sweep_dir) / "summary.csv").string());
  const auto imps = compare_reductions(summary);
  write_reduction_report(a.out, imps);
  static constexpr Reduction kAlts[] = {Reduction::l1, Reduction::abs_of_sum,
                                        Reduction::sum_of_squares, Reduction::square_of_sum,
                                        Reduction::l2};
  for (Reduction r : kAlts) {
    int n = 0;
    for (const auto& i : imps) n += i.alt == r ? 1 : 0;
    if (n > 0)
      std::printf("%-16s %3d pairs, mean improvement %+.6f\n", detail::reduction_token(r), n,
                  mean_improvement(imps, r));
  }
  std::printf("report: %s\n", a.out.c_str());
  return 0;
}

int cmd_retrain_report(const RetrainReportArgs& a) {
  const auto with =
      read_summary_csv((fs::path(a.sweep_dir) / "summary.csv").string());
  const auto without =
      read_summary_csv((fs::path(a.no_retrain_dir) / "summary.csv").string());
  const RetrainReport report = retrain_report(with, without, a.min_sparsity);
  for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  write_retrain_report(a.out, report.rows);
  std::printf("%zu signals at min sparsity %.4f -> %s\n", report.rows.size(), a.min_sparsity,
              a.out.c_str());
  return 0;
}

bool verify_mode() {
  const char* v = std::getenv("PRUNETAX_VERIFY");
  return v != nullptr && std::string(v) == "1";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prunetax: channel-pruning signal experiments"};
  app.require_subcommand(1);

  CommonArgs common;
  GenDataArgs gen;
  PruneArgs prune_args;
  SweepArgs sweep_args;
  ParetoArgs pareto_args;
  CompareArgs compare_args;
  RetrainReportArgs rr_args;
  ListArgs list_args;

  auto add_common = [&](CLI::App* sub, bool needs_config, bool needs_checkpoint) {
    if (needs_config) sub->add_option("--config", common.config_path, "config file")->required();
    if (needs_checkpoint) sub->add_option("--checkpoint", common.checkpoint, "checkpoint path");
    sub->add_option("--seed", common.seed, "override the config seed")
        ->each([&](const std::string&) { common.seed_set = true; });
    sub->add_option("--out-dir", common.out_dir, "override the config output directory");
    sub->add_option("--threads", common.threads, "worker threads for sweeps");
  };

  CLI::App* sc_gen = app.add_subcommand("gen-data", "generate a synthetic PRND dataset");
  sc_gen->add_option("--out", gen.out, "output PRND file")->required();
  sc_gen->add_option("--mode", gen.mode, "blobs | linear2");
  sc_gen->add_option("--count", gen.count, "sample count");
  sc_gen->add_option("--classes", gen.classes, "class count (blobs)");
  sc_gen->add_option("--channels", gen.channels, "image channels");
  sc_gen->add_option("--height", gen.height, "image height");
  sc_gen->add_option("--width", gen.width, "image width");
  sc_gen->add_option("--noise", gen.noise, "pixel noise stddev (blobs)");
  sc_gen->add_option("--seed", gen.seed, "generator seed");

  CLI::App* sc_train = app.add_subcommand("train", "train a model from scratch");
  add_common(sc_train, true, true);

  CLI::App* sc_list = app.add_subcommand("list-signals", "enumerate taxonomy signals");
  sc_list->add_option("--rules", list_args.rules, "default | full (no equivalence pruning)");
  sc_list->add_flag("--published", list_args.published, "print the published-signal catalog");

  CLI::App* sc_prune = app.add_subcommand("prune", "run one pruning experiment");
  add_common(sc_prune, true, true);
  sc_prune->add_option("--signal", prune_args.signal, "signal id")->required();
  sc_prune->add_option("--retrain", prune_args.retrain, "on | off");
  sc_prune->add_option("--out", prune_args.out_csv, "results CSV path");
  sc_prune->add_option("--save-checkpoint", prune_args.save_checkpoint,
                       "pruned checkpoint path");

  CLI::App* sc_sweep = app.add_subcommand("sweep", "run many signals and summarize");
  add_common(sc_sweep, true, true);
  sc_sweep->add_option("--signals", sweep_args.signals,
                       "all | published | comma-separated ids (default: config)");
  sc_sweep->add_option("--retrain", sweep_args.retrain, "on | off");

  CLI::App* sc_pareto = app.add_subcommand("pareto", "extract the Pareto front of a summary");
  sc_pareto->add_option("--summary", pareto_args.summary, "summary CSV")->required();
  sc_pareto->add_option("--out", pareto_args.out, "output CSV");
  sc_pareto->add_option("--x-col", pareto_args.x_col, "sparsity column");
  sc_pareto->add_option("--y-col", pareto_args.y_col, "accuracy column");

  CLI::App* sc_cmp = app.add_subcommand("compare-reductions",
                                        "improvement distribution vs the sum reduction");
  sc_cmp->add_option("--sweep-dir", compare_args.sweep_dir, "sweep output directory")->required();
  sc_cmp->add_option("--out", compare_args.out, "output CSV");

  CLI::App* sc_rr = app.add_subcommand("retrain-report",
                                       "no-retrain sparsity vs retraining steps");
  sc_rr->add_option("--sweep-dir", rr_args.sweep_dir, "retrain-on sweep directory")->required();
  sc_rr->add_option("--no-retrain-dir", rr_args.no_retrain_dir, "retrain-off sweep directory")
      ->required();
  sc_rr->add_option("--min-sparsity", rr_args.min_sparsity,
                    "minimum 1%-drop sparsity reached with retraining");
  sc_rr->add_option("--out", rr_args.out, "output CSV");

  CLI11_PARSE(app, argc, argv);

  const bool verify = verify_mode();
  try {
    if (sc_gen->parsed()) return cmd_gen_data(gen);
    if (sc_list->parsed()) return cmd_list_signals(list_args);
    if (sc_train->parsed()) return verify ? cmd_train<double>(common) : cmd_train<float>(common);
    if (sc_prune->parsed())
      return verify ? cmd_prune<double>(common, prune_args)
                    : cmd_prune<float>(common, prune_args);
    if (sc_sweep->parsed())
      return verify ? cmd_sweep<double>(common, sweep_args)
                    : cmd_sweep<float>(common, sweep_args);
    if (sc_pareto->parsed()) return cmd_pareto(pareto_args);
    if (sc_cmp->parsed()) return cmd_compare_reductions(compare_args);
    if (sc_rr->parsed()) return cmd_retrain_report(rr_args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

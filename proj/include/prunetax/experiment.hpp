#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "prunetax/checkpoint.hpp"
#include "prunetax/config.hpp"
#include "prunetax/csv.hpp"
#include "prunetax/dataset.hpp"
#include "prunetax/pruning.hpp"
#include "prunetax/rng.hpp"
#include "prunetax/sgd.hpp"

namespace prunetax {

inline uint64_t derive_seed(uint64_t seed, const std::string& tag) {
  uint64_t sm = seed ^ fnv1a64(tag);
  return splitmix64(sm);
}

// Loaded datasets plus the retrain/eval split. Views are built on demand so
// they always point at this instance.
template <typename T>
struct ExperimentEnv {
  Dataset<T> train;
  Dataset<T> test;
  SplitIndices split;

  static ExperimentEnv load(const ExperimentConfig& cfg) {
    ExperimentEnv env;
    env.train = load_dataset<T>(cfg.train_data);
    env.test = load_dataset<T>(cfg.test_data);
    check(env.train.dims() == env.test.dims() &&
              env.train.num_classes == env.test.num_classes,
          "train and test datasets disagree on shape or class count");
    env.split = split_indices(env.train.count(), cfg.split_retrain, cfg.split_eval, cfg.seed);
    return env;
  }

  DataView<T> retrain_view() const { return {&train, split.retrain}; }
  DataView<T> eval_view() const { return {&train, split.eval}; }
  DataView<T> test_view() const { return full_view(test); }
  PruneRunData<T> run_data() const { return {retrain_view(), eval_view(), test_view()}; }
};

template <typename T>
struct TrainOutcome {
  NetworkGraph<T> net;
  PruneMask mask;
  double train_acc = 0.0;
  double eval_acc = 0.0;
  double test_acc = 0.0;
};

// From-scratch training on the retraining split; deterministic per seed.
template <typename T>
TrainOutcome<T> train_model(const ExperimentConfig& cfg, const ExperimentEnv<T>& env) {
  TrainOutcome<T> out;
  out.net = make_model<T>(cfg.model, env.train.dims(), env.train.num_classes);
  Rng rng = Rng::derive(cfg.seed, "weight-init");
  init_weights(out.net, rng);
  out.mask = out.net.empty_mask();

  SgdTrainer<T> trainer(out.net, cfg.learning_rate, cfg.momentum);
  BatchStream<T> stream(env.retrain_view(), cfg.batch_size,
                        derive_seed(cfg.seed, "train-stream"));
  for (int s = 0; s < cfg.train_steps; ++s) trainer.step(out.net, out.mask, stream.next());

  const int acc_batch = 256;
  out.train_acc = accuracy(out.net, out.mask, env.retrain_view().batches(acc_batch));
  out.eval_acc = accuracy(out.net, out.mask, env.eval_view().batches(acc_batch));
  out.test_acc = accuracy(out.net, out.mask, env.test_view().batches(acc_batch));
  return out;
}

template <typename T>
struct SignalRun {
  PruneRunResult result;
  std::vector<ResultRow> rows;
  NetworkGraph<T> net;
  PruneMask mask;
};

// One pruning experiment for one signal, on a private copy of the network.
// The harness RNG stream is derived from (seed, signal id) so results do not
// depend on which signals run alongside or in which order.
template <typename T>
SignalRun<T> run_signal(const ExperimentConfig& cfg, const NetworkGraph<T>& base_net,
                        const PruneMask& base_mask, const SignalSpec& spec, bool retrain,
                        const ExperimentEnv<T>& env) {
  SignalRun<T> run;
  run.net = base_net;
  run.mask = base_mask;
  HarnessConfig hc = cfg.harness;
  hc.seed = derive_seed(cfg.seed, "signal:" + spec.id());
  const PruneRunData<T> data = env.run_data();
  run.result = retrain ? run_prune_with_retrain(run.net, run.mask, spec, data, hc)
                       : run_prune_no_retrain(run.net, run.mask, spec, data, hc);
  for (const auto& rec : run.result.records)
    run.rows.push_back(to_result_row(spec.id(), cfg.seed, rec));
  return run;
}

// Sweep over signals with optional fan-out. Each signal writes its own step
// CSV; failures are recorded in the summary and do not abort the sweep. The
// summary is assembled in signal order after all runs complete, so serial
// and parallel execution produce identical bytes.
template <typename T>
std::vector<SummaryRow> sweep(const ExperimentConfig& cfg, const NetworkGraph<T>& base_net,
                              const PruneMask& base_mask, const std::vector<SignalSpec>& specs,
                              bool retrain, int threads, const std::string& out_dir,
                              const ExperimentEnv<T>& env) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<SummaryRow> summary(specs.size());

  // The datasets and split are read-only during the sweep; every run works
  // on its own network copy and writes its own file.
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const size_t idx = next.fetch_add(1);
      if (idx >= specs.size()) return;
      const SignalSpec& spec = specs[idx];
      SummaryRow& row = summary[idx];
      try {
        SignalRun<T> run = run_signal(cfg, base_net, base_mask, spec, retrain, env);
        write_result_csv((fs::path(out_dir) / (spec.id() + ".csv")).string(), run.rows);
        row = summarize_run(spec.id(), cfg.seed, run.result);
      } catch (const std::exception& e) {
        row = SummaryRow{};
        row.signal_id = spec.id();
        row.seed = cfg.seed;
        row.status = "error:" + sanitize_csv_field(e.what());
      }
    }
  };

  const int nthreads = std::max(1, std::min<int>(threads, static_cast<int>(specs.size())));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  write_summary_csv((fs::path(out_dir) / "summary.csv").string(), summary);
  return summary;
}

}  // namespace prunetax

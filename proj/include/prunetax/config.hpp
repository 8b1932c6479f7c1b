#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prunetax/common.hpp"
#include "prunetax/dataset.hpp"
#include "prunetax/pruning.hpp"
#include "prunetax/saliency.hpp"

namespace prunetax {

// Experiment configuration, parsed from a `key = value` text file. Unknown
// keys are hard errors so a config archived next to results replays exactly.
struct ExperimentConfig {
  std::string model;       // lenet5-like | cifar10-quick-like
  std::string train_data;  // PRND path, split into retrain/eval sets
  std::string test_data;   // PRND path
  double split_retrain = 0.8;
  double split_eval = 0.2;
  uint64_t seed = 1;
  int train_steps = 800;
  int batch_size = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  HarnessConfig harness;
  std::string signals = "all";  // all | published | comma-separated ids
  std::string out_dir = "out";

  void validate() const {
    check(!model.empty(), "config: 'model' is required");
    check(!train_data.empty(), "config: 'train_data' is required");
    check(!test_data.empty(), "config: 'test_data' is required");
    check(split_retrain > 0 && split_eval > 0 && split_retrain + split_eval <= 1.0 + 1e-12,
          "config: split fractions must be positive and sum to <= 1");
    check(train_steps >= 0 && batch_size >= 1, "config: bad training budget");
    check(harness.max_retrain_steps_per_iteration >= 0 && harness.retrain_batch_size >= 1,
          "config: bad retraining limits");
    check(harness.stop_test_acc_drop >= 0, "config: stop_test_acc_drop must be >= 0");
    check(harness.train_acc_recovery_target < 0 || harness.train_acc_recovery_target <= 1.0,
          "config: train_acc_recovery_target must be 'auto' or a fraction <= 1");
    check(harness.eval_batches_for_saliency >= 1, "config: eval_batches_for_saliency must be >= 1");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  size_t b = s.find_last_not_of(" \t");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  size_t start = 0;
  int lineno = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    start = end + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    check(eq != std::string::npos,
          strf("%s:%d: expected 'key = value', got '%s'", origin.c_str(), lineno, line.c_str()));
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    check(!key.empty() && !value.empty(),
          strf("%s:%d: empty key or value", origin.c_str(), lineno));

    auto as_double = [&]() {
      try {
        return std::stod(value);
      } catch (...) {
        fail(strf("%s:%d: '%s' is not a number", origin.c_str(), lineno, value.c_str()));
      }
    };
    auto as_int = [&]() {
      try {
        return std::stoi(value);
      } catch (...) {
        fail(strf("%s:%d: '%s' is not an integer", origin.c_str(), lineno, value.c_str()));
      }
    };

    if (key == "model") cfg.model = value;
    else if (key == "train_data") cfg.train_data = value;
    else if (key == "test_data") cfg.test_data = value;
    else if (key == "split_retrain") cfg.split_retrain = as_double();
    else if (key == "split_eval") cfg.split_eval = as_double();
    else if (key == "seed") cfg.seed = static_cast<uint64_t>(std::stoull(value));
    else if (key == "train_steps") cfg.train_steps = as_int();
    else if (key == "batch_size") cfg.batch_size = as_int();
    else if (key == "learning_rate") cfg.learning_rate = as_double();
    else if (key == "momentum") cfg.momentum = as_double();
    else if (key == "max_retrain_steps") cfg.harness.max_retrain_steps_per_iteration = as_int();
    else if (key == "retrain_batch_size") cfg.harness.retrain_batch_size = as_int();
    else if (key == "retrain_learning_rate") cfg.harness.retrain_learning_rate = as_double();
    else if (key == "retrain_momentum") cfg.harness.retrain_momentum = as_double();
    else if (key == "train_acc_recovery_target")
      cfg.harness.train_acc_recovery_target = value == "auto" ? -1.0 : as_double();
    else if (key == "stop_test_acc_drop") cfg.harness.stop_test_acc_drop = as_double();
    else if (key == "eval_batches_for_saliency") cfg.harness.eval_batches_for_saliency = as_int();
    else if (key == "train_acc_probe_size") cfg.harness.train_acc_probe_size = as_int();
    else if (key == "recovery_check_interval") cfg.harness.recovery_check_interval = as_int();
    else if (key == "activation_tap") {
      if (value == "post_nonlinearity") cfg.harness.activation_tap = ActivationTap::post_nonlinearity;
      else if (value == "conv_output") cfg.harness.activation_tap = ActivationTap::conv_output;
      else fail(strf("%s:%d: activation_tap must be post_nonlinearity or conv_output",
                     origin.c_str(), lineno));
    }
    else if (key == "signals") cfg.signals = value;
    else if (key == "out_dir") cfg.out_dir = value;
    else fail(strf("%s:%d: unknown key '%s'", origin.c_str(), lineno, key.c_str()));
  }
  cfg.harness.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  return parse_config_text(detail::read_file(path), path);
}

// Resolves the config's signal selection to concrete specs.
inline std::vector<SignalSpec> resolve_signals(const std::string& selection) {
  std::vector<SignalSpec> out;
  if (selection == "all") return enumerate_signals();
  if (selection == "published") {
    for (const auto& p : published_catalog()) out.push_back(p.spec);
    return out;
  }
  for (const auto& tok : detail::split(selection, ',')) {
    const std::string id = detail::trim(tok);
    if (id.empty()) continue;
    try {
      out.push_back(SignalSpec::parse(id));
    } catch (const Error&) {
      std::string nearest;
      for (const auto& n : nearest_signal_ids(id)) {
        if (!nearest.empty()) nearest += ", ";
        nearest += n;
      }
      fail(strf("unknown signal id '%s'; closest matches: %s", id.c_str(), nearest.c_str()));
    }
  }
  check(!out.empty(), "signal selection resolved to an empty list");
  return out;
}

}  // namespace prunetax

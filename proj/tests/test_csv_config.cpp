#include <cstdio>
#include <filesystem>

#include <catch2/catch_amalgamated.hpp>

#include "support/test_support.hpp"

using namespace prunetax;

TEST_CASE("result CSV schema") {
  SECTION("header matches the ResultRow field order exactly") {
    REQUIRE(std::string(kResultHeader) ==
            "signal_id,seed,step,pruned_layer,pruned_channel,sparsity,train_acc,test_acc,"
            "retrain_steps,cumulative_retrain_steps");
  }
  SECTION("fractions carry six fixed decimals") {
    ResultRow r;
    r.signal_id = "weights.value.l1.none";
    r.seed = 7;
    r.step = 3;
    r.pruned_layer = 2;
    r.pruned_channel = 5;
    r.sparsity = 0.5;
    r.train_acc = 1.0 / 3.0;
    r.test_acc = 0.98765432;
    r.retrain_steps = 12;
    r.cumulative_retrain_steps = 40;
    REQUIRE(format_result_row(r) ==
            "weights.value.l1.none,7,3,2,5,0.500000,0.333333,0.987654,12,40");
  }
  SECTION("write/read and LF endings") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "prunetax_rows.csv").string();
    ResultRow r;
    r.signal_id = "a.b.c.d";
    write_result_csv(path, {r, r});
    const std::string bytes = detail::read_file(path);
    REQUIRE(bytes.find('\r') == std::string::npos);
    REQUIRE(bytes.back() == '\n');
    const CsvTable t = read_csv(path);
    REQUIRE(t.header.size() == 10);
    REQUIRE(t.rows.size() == 2);
    std::remove(path.c_str());
  }
}

TEST_CASE("summary extraction") {
  PruneRunResult run;
  run.baseline_train_acc = 0.95;
  run.baseline_test_acc = 0.90;
  auto add = [&](double sparsity, double test_acc, int steps, int64_t cum) {
    ExperimentRecord r;
    r.step = static_cast<int>(run.records.size()) + 1;
    r.sparsity = sparsity;
    r.test_acc = test_acc;
    r.retrain_steps = steps;
    r.cumulative_retrain_steps = cum;
    run.records.push_back(r);
  };
  SECTION("1%-drop point is the last compliant step, stop point the last record") {
    add(0.10, 0.899, 5, 5);   // within 1%
    add(0.20, 0.893, 10, 15); // within 1% (drop 0.007)
    add(0.30, 0.885, 20, 35); // violates
    add(0.40, 0.870, 30, 65); // violates
    const SummaryRow s = summarize_run("x", 1, run);
    REQUIRE(s.sparsity_at_1pct_drop == 0.20);
    REQUIRE(s.test_acc_at_1pct_drop == 0.893);
    REQUIRE(s.retrain_steps_at_1pct_drop == 15);
    REQUIRE(s.sparsity_at_stop == 0.40);
    REQUIRE(s.cumulative_retrain_steps == 65);
    REQUIRE(s.sparsity_at_1pct_drop <= s.sparsity_at_stop);
  }
  SECTION("immediate violation reports zero sparsity at baseline accuracy") {
    add(0.10, 0.70, 0, 0);
    const SummaryRow s = summarize_run("x", 1, run);
    REQUIRE(s.sparsity_at_1pct_drop == 0.0);
    REQUIRE(s.test_acc_at_1pct_drop == 0.90);
    REQUIRE(s.sparsity_at_stop == 0.10);
  }
  SECTION("summary row round trips through the CSV") {
    add(0.25, 0.895, 3, 3);
    const SummaryRow s = summarize_run("weights.value.l1.none", 9, run);
    const std::string path =
        (std::filesystem::temp_directory_path() / "prunetax_summary.csv").string();
    write_summary_csv(path, {s});
    const auto back = read_summary_csv(path);
    REQUIRE(back.size() == 1);
    REQUIRE(back[0].signal_id == s.signal_id);
    REQUIRE(back[0].seed == 9);
    REQUIRE(back[0].status == "ok");
    REQUIRE_THAT(back[0].sparsity_at_1pct_drop,
                 Catch::Matchers::WithinAbs(s.sparsity_at_1pct_drop, 5e-7));
    std::remove(path.c_str());
  }
}

TEST_CASE("config parsing") {
  SECTION("full config with comments") {
    const std::string text =
        "# experiment\n"
        "model = lenet5-like\n"
        "train_data = data/train.prnd\n"
        "test_data = data/test.prnd   # held out\n"
        "split_retrain = 0.75\n"
        "split_eval = 0.25\n"
        "seed = 42\n"
        "train_steps = 100\n"
        "batch_size = 32\n"
        "learning_rate = 0.1\n"
        "momentum = 0.8\n"
        "max_retrain_steps = 25\n"
        "retrain_batch_size = 16\n"
        "retrain_learning_rate = 0.02\n"
        "retrain_momentum = 0.85\n"
        "train_acc_recovery_target = auto\n"
        "stop_test_acc_drop = 0.04\n"
        "eval_batches_for_saliency = 4\n"
        "train_acc_probe_size = 512\n"
        "recovery_check_interval = 5\n"
        "activation_tap = conv_output\n"
        "signals = published\n"
        "out_dir = results\n";
    const ExperimentConfig cfg = parse_config_text(text, "test");
    REQUIRE(cfg.model == "lenet5-like");
    REQUIRE(cfg.test_data == "data/test.prnd");
    REQUIRE(cfg.seed == 42);
    REQUIRE(cfg.harness.seed == 42);
    REQUIRE(cfg.harness.max_retrain_steps_per_iteration == 25);
    REQUIRE(cfg.harness.train_acc_recovery_target == -1.0);
    REQUIRE(cfg.harness.activation_tap == ActivationTap::conv_output);
    REQUIRE(cfg.signals == "published");
  }
  SECTION("unknown keys are hard errors with a line number") {
    REQUIRE_THROWS_WITH(
        parse_config_text("model = lenet5-like\nbogus_key = 1\n", "cfg"),
        Catch::Matchers::ContainsSubstring("cfg:2") &&
            Catch::Matchers::ContainsSubstring("unknown key 'bogus_key'"));
  }
  SECTION("split fractions must stay within 1") {
    const std::string text =
        "model = lenet5-like\ntrain_data = a\ntest_data = b\n"
        "split_retrain = 0.9\nsplit_eval = 0.2\n";
    REQUIRE_THROWS_WITH(parse_config_text(text, "cfg"),
                        Catch::Matchers::ContainsSubstring("split fractions"));
  }
  SECTION("missing required keys") {
    REQUIRE_THROWS_WITH(parse_config_text("model = lenet5-like\n", "cfg"),
                        Catch::Matchers::ContainsSubstring("train_data"));
  }
}

TEST_CASE("signal selection resolution") {
  SECTION("all resolves to the documented enumeration") {
    REQUIRE(resolve_signals("all").size() == kDefaultSignalCount);
  }
  SECTION("published resolves to the 8-row catalog") {
    REQUIRE(resolve_signals("published").size() == 8);
  }
  SECTION("explicit comma-separated list") {
    const auto specs = resolve_signals("weights.value.l1.none, activations.taylor1.sum.none");
    REQUIRE(specs.size() == 2);
    REQUIRE(specs[1].base == BaseInput::activations);
  }
  SECTION("unknown ids report the nearest matches") {
    REQUIRE_THROWS_WITH(resolve_signals("weights.value.l1.nonne"),
                        Catch::Matchers::ContainsSubstring("closest matches") &&
                            Catch::Matchers::ContainsSubstring("weights.value.l1.none"));
  }
}

#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "prunetax/common.hpp"
#include "prunetax/dataset.hpp"
#include "prunetax/pruning.hpp"

namespace prunetax {

// One pruning step as it appears in a results CSV. Header order is frozen;
// fractions are written with 6 decimals so identical runs produce identical
// bytes.
struct ResultRow {
  std::string signal_id;
  uint64_t seed = 0;
  int step = 0;
  int pruned_layer = -1;
  int pruned_channel = -1;
  double sparsity = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  int retrain_steps = 0;
  int64_t cumulative_retrain_steps = 0;
};

inline constexpr const char* kResultHeader =
    "signal_id,seed,step,pruned_layer,pruned_channel,sparsity,train_acc,test_acc,"
    "retrain_steps,cumulative_retrain_steps";

inline std::string format_fixed(double v) { return strf("%.6f", v); }

inline std::string format_result_row(const ResultRow& r) {
  return strf("%s,%llu,%d,%d,%d,%s,%s,%s,%d,%lld", r.signal_id.c_str(),
              static_cast<unsigned long long>(r.seed), r.step, r.pruned_layer, r.pruned_channel,
              format_fixed(r.sparsity).c_str(), format_fixed(r.train_acc).c_str(),
              format_fixed(r.test_acc).c_str(), r.retrain_steps,
              static_cast<long long>(r.cumulative_retrain_steps));
}

inline ResultRow to_result_row(const std::string& signal_id, uint64_t seed,
                               const ExperimentRecord& rec) {
  ResultRow r;
  r.signal_id = signal_id;
  r.seed = seed;
  r.step = rec.step;
  r.pruned_layer = rec.layer;
  r.pruned_channel = rec.channel;
  r.sparsity = rec.sparsity;
  r.train_acc = rec.train_acc;
  r.test_acc = rec.test_acc;
  r.retrain_steps = rec.retrain_steps;
  r.cumulative_retrain_steps = rec.cumulative_retrain_steps;
  return r;
}

inline void write_result_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  std::string buf = kResultHeader;
  buf += '\n';
  for (const auto& r : rows) {
    buf += format_result_row(r);
    buf += '\n';
  }
  detail::write_file(path, buf);
}

// Per-signal sweep outcome. The 1%-drop operating point is the last step
// whose test accuracy stayed within 0.01 of the baseline (no interpolation);
// when even the first prune violates it the sparsity is reported as 0 at
// baseline accuracy.
struct SummaryRow {
  std::string signal_id;
  uint64_t seed = 0;
  std::string status = "ok";
  int steps = 0;
  double baseline_test_acc = 0.0;
  double sparsity_at_1pct_drop = 0.0;
  double test_acc_at_1pct_drop = 0.0;
  int64_t retrain_steps_at_1pct_drop = 0;
  double sparsity_at_stop = 0.0;
  double test_acc_at_stop = 0.0;
  int64_t cumulative_retrain_steps = 0;
};

inline constexpr const char* kSummaryHeader =
    "signal_id,seed,status,steps,baseline_test_acc,sparsity_at_1pct_drop,"
    "test_acc_at_1pct_drop,retrain_steps_at_1pct_drop,sparsity_at_stop,test_acc_at_stop,"
    "cumulative_retrain_steps";

inline constexpr double kOnePctDrop = 0.01;

inline SummaryRow summarize_run(const std::string& signal_id, uint64_t seed,
                                const PruneRunResult& run) {
  SummaryRow s;
  s.signal_id = signal_id;
  s.seed = seed;
  s.steps = static_cast<int>(run.records.size());
  s.baseline_test_acc = run.baseline_test_acc;
  s.test_acc_at_1pct_drop = run.baseline_test_acc;
  s.test_acc_at_stop = run.baseline_test_acc;
  for (const auto& rec : run.records) {
    if (run.baseline_test_acc - rec.test_acc <= kOnePctDrop) {
      s.sparsity_at_1pct_drop = rec.sparsity;
      s.test_acc_at_1pct_drop = rec.test_acc;
      s.retrain_steps_at_1pct_drop = rec.cumulative_retrain_steps;
    }
    s.sparsity_at_stop = rec.sparsity;
    s.test_acc_at_stop = rec.test_acc;
    s.cumulative_retrain_steps = rec.cumulative_retrain_steps;
  }
  return s;
}

inline std::string format_summary_row(const SummaryRow& s) {
  return strf("%s,%llu,%s,%d,%s,%s,%s,%lld,%s,%s,%lld", s.signal_id.c_str(),
              static_cast<unsigned long long>(s.seed), s.status.c_str(), s.steps,
              format_fixed(s.baseline_test_acc).c_str(),
              format_fixed(s.sparsity_at_1pct_drop).c_str(),
              format_fixed(s.test_acc_at_1pct_drop).c_str(),
              static_cast<long long>(s.retrain_steps_at_1pct_drop),
              format_fixed(s.sparsity_at_stop).c_str(),
              format_fixed(s.test_acc_at_stop).c_str(),
              static_cast<long long>(s.cumulative_retrain_steps));
}

inline void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
  std::string buf = kSummaryHeader;
  buf += '\n';
  for (const auto& r : rows) {
    buf += format_summary_row(r);
    buf += '\n';
  }
  detail::write_file(path, buf);
}

// Minimal CSV reading for the analysis subcommands. No quoting: none of the
// emitted fields contain commas (error statuses are sanitized on write).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    fail(strf("CSV is missing column '%s'", name.c_str()));
  }
};

inline CsvTable read_csv(const std::string& path) {
  const std::string data = detail::read_file(path);
  CsvTable t;
  size_t start = 0;
  bool first = true;
  while (start < data.size()) {
    size_t end = data.find('\n', start);
    if (end == std::string::npos) end = data.size();
    std::string line = data.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) {
      auto fields = detail::split(line, ',');
      if (first)
        t.header = std::move(fields);
      else
        t.rows.push_back(std::move(fields));
      first = false;
    }
    start = end + 1;
  }
  check(!t.header.empty(), strf("%s: empty CSV", path.c_str()));
  return t;
}

inline std::vector<SummaryRow> read_summary_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  check(t.header == detail::split(kSummaryHeader, ','),
        strf("%s: not a sweep summary CSV", path.c_str()));
  std::vector<SummaryRow> rows;
  for (const auto& f : t.rows) {
    SummaryRow s;
    s.signal_id = f[0];
    s.seed = std::stoull(f[1]);
    s.status = f[2];
    s.steps = std::stoi(f[3]);
    s.baseline_test_acc = std::stod(f[4]);
    s.sparsity_at_1pct_drop = std::stod(f[5]);
    s.test_acc_at_1pct_drop = std::stod(f[6]);
    s.retrain_steps_at_1pct_drop = std::stoll(f[7]);
    s.sparsity_at_stop = std::stod(f[8]);
    s.test_acc_at_stop = std::stod(f[9]);
    s.cumulative_retrain_steps = std::stoll(f[10]);
    rows.push_back(std::move(s));
  }
  return rows;
}

inline std::string sanitize_csv_field(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

}  // namespace prunetax

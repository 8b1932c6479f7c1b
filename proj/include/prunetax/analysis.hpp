#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "prunetax/csv.hpp"
#include "prunetax/saliency.hpp"

namespace prunetax {

// Indices of rows not dominated in (x up, y up), ordered by x ascending
// (stable on ties). A point dominates another when it is >= in both
// coordinates and > in at least one.
inline std::vector<size_t> pareto_front(const std::vector<double>& x,
                                        const std::vector<double>& y) {
  check(x.size() == y.size(), "pareto_front: coordinate size mismatch");
  std::vector<size_t> keep;
  for (size_t i = 0; i < x.size(); ++i) {
    bool dominated = false;
    for (size_t j = 0; j < x.size() && !dominated; ++j) {
      if (j == i) continue;
      dominated = x[j] >= x[i] && y[j] >= y[i] && (x[j] > x[i] || y[j] > y[i]);
    }
    if (!dominated) keep.push_back(i);
  }
  std::stable_sort(keep.begin(), keep.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
  return keep;
}

// Fig.-5-style comparison: improvement in 1%-drop sparsity from swapping the
// sum reduction for each alternative, across matched
// (base, pointwise, scaling, seed) groups.
struct ReductionImprovement {
  Reduction alt = Reduction::l1;
  std::string group;  // signal id with the reduction slot replaced by '*'
  uint64_t seed = 0;
  double sparsity_sum = 0.0;
  double sparsity_alt = 0.0;
  double improvement = 0.0;
};

inline std::string reduction_group_id(const SignalSpec& spec) {
  SignalSpec s = spec;
  s.reduction = Reduction::sum;
  std::string id = s.id();
  const std::string tok = ".sum.";
  const size_t pos = id.rfind(tok);
  return id.substr(0, pos) + ".*." + id.substr(pos + tok.size());
}

inline std::vector<ReductionImprovement> compare_reductions(
    const std::vector<SummaryRow>& summary) {
  struct Key {
    std::string group;
    uint64_t seed;
    bool operator<(const Key& o) const {
      return group != o.group ? group < o.group : seed < o.seed;
    }
  };
  std::map<Key, std::map<Reduction, const SummaryRow*>> groups;
  for (const auto& row : summary) {
    if (row.status != "ok") continue;
    const SignalSpec spec = SignalSpec::parse(row.signal_id);
    groups[{reduction_group_id(spec), row.seed}][spec.reduction] = &row;
  }
  std::vector<ReductionImprovement> out;
  for (const auto& [key, byred] : groups) {
    const auto sum_it = byred.find(Reduction::sum);
    if (sum_it == byred.end()) continue;
    for (const auto& [red, row] : byred) {
      if (red == Reduction::sum) continue;
      ReductionImprovement imp;
      imp.alt = red;
      imp.group = key.group;
      imp.seed = key.seed;
      imp.sparsity_sum = sum_it->second->sparsity_at_1pct_drop;
      imp.sparsity_alt = row->sparsity_at_1pct_drop;
      imp.improvement = imp.sparsity_alt - imp.sparsity_sum;
      out.push_back(std::move(imp));
    }
  }
  check(!out.empty(),
        "compare-reductions: no (base, pointwise, scaling) group pairs a sum reduction "
        "with an alternative");
  return out;
}

inline constexpr const char* kReductionReportHeader =
    "reduction,group,seed,sparsity_sum,sparsity_alt,improvement";

inline double mean_improvement(const std::vector<ReductionImprovement>& imps, Reduction alt) {
  double s = 0.0;
  int n = 0;
  for (const auto& i : imps) {
    if (i.alt != alt) continue;
    s += i.improvement;
    ++n;
  }
  return n == 0 ? 0.0 : s / n;
}

// Detail rows followed by one mean row per reduction (group column "mean").
inline void write_reduction_report(const std::string& path,
                                   const std::vector<ReductionImprovement>& imps) {
  std::string buf = kReductionReportHeader;
  buf += '\n';
  for (const auto& i : imps) {
    buf += strf("%s,%s,%llu,%s,%s,%s\n", detail::reduction_token(i.alt), i.group.c_str(),
                static_cast<unsigned long long>(i.seed), format_fixed(i.sparsity_sum).c_str(),
                format_fixed(i.sparsity_alt).c_str(), format_fixed(i.improvement).c_str());
  }
  static constexpr Reduction kAlts[] = {Reduction::l1, Reduction::abs_of_sum,
                                        Reduction::sum_of_squares, Reduction::square_of_sum,
                                        Reduction::l2};
  for (Reduction r : kAlts) {
    bool present = false;
    for (const auto& i : imps) present = present || i.alt == r;
    if (!present) continue;
    buf += strf("%s,mean,,,,%s\n", detail::reduction_token(r),
                format_fixed(mean_improvement(imps, r)).c_str());
  }
  detail::write_file(path, buf);
}

// Fig.-4-style join: for signals that reach min_sparsity with retraining,
// pair the sparsity the same signal reached without retraining with the
// retraining steps it consumed (both at the 1%-drop operating point).
struct RetrainReportRow {
  std::string signal_id;
  uint64_t seed = 0;
  double sparsity_no_retrain = 0.0;
  double sparsity_with_retrain = 0.0;
  int64_t cumulative_retrain_steps = 0;
};

inline constexpr const char* kRetrainReportHeader =
    "signal_id,seed,sparsity_no_retrain,sparsity_with_retrain,cumulative_retrain_steps";

struct RetrainReport {
  std::vector<RetrainReportRow> rows;
  std::vector<std::string> warnings;  // signals missing from the no-retrain sweep
};

inline RetrainReport retrain_report(const std::vector<SummaryRow>& with_retrain,
                                    const std::vector<SummaryRow>& without_retrain,
                                    double min_sparsity) {
  std::map<std::pair<std::string, uint64_t>, const SummaryRow*> without;
  for (const auto& row : without_retrain)
    if (row.status == "ok") without[{row.signal_id, row.seed}] = &row;

  RetrainReport report;
  for (const auto& row : with_retrain) {
    if (row.status != "ok") continue;
    if (row.sparsity_at_1pct_drop < min_sparsity) continue;
    const auto it = without.find({row.signal_id, row.seed});
    if (it == without.end()) {
      report.warnings.push_back(
          strf("signal %s (seed %llu) missing from the no-retrain sweep; excluded",
               row.signal_id.c_str(), static_cast<unsigned long long>(row.seed)));
      continue;
    }
    RetrainReportRow out;
    out.signal_id = row.signal_id;
    out.seed = row.seed;
    out.sparsity_no_retrain = it->second->sparsity_at_1pct_drop;
    out.sparsity_with_retrain = row.sparsity_at_1pct_drop;
    out.cumulative_retrain_steps = row.retrain_steps_at_1pct_drop;
    report.rows.push_back(std::move(out));
  }
  return report;
}

inline void write_retrain_report(const std::string& path,
                                 const std::vector<RetrainReportRow>& rows) {
  std::string buf = kRetrainReportHeader;
  buf += '\n';
  for (const auto& r : rows) {
    buf += strf("%s,%llu,%s,%s,%lld\n", r.signal_id.c_str(),
                static_cast<unsigned long long>(r.seed),
                format_fixed(r.sparsity_no_retrain).c_str(),
                format_fixed(r.sparsity_with_retrain).c_str(),
                static_cast<long long>(r.cumulative_retrain_steps));
  }
  detail::write_file(path, buf);
}

}  // namespace prunetax

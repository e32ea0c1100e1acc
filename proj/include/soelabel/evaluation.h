#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace soelabel {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

enum class MetricMode { kMicro, kMacroPerProtocol };
enum class Metric { kRecall, kPrecision, kF1, kAccuracy };

std::string_view to_string(MetricMode m);
std::string_view to_string(Metric m);
MetricMode metric_mode_from_string(std::string_view s);

struct Interval {
  double low = 0.0;
  double high = 0.0;
  bool operator==(const Interval&) const = default;
};

struct MetricsReport {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::optional<Interval> recall_ci;
  std::optional<Interval> precision_ci;
  std::optional<Interval> f1_ci;
  std::optional<Interval> accuracy_ci;
  MetricMode mode = MetricMode::kMicro;

  double value(Metric m) const;
  std::optional<Interval>& ci(Metric m);
  const std::optional<Interval>& ci(Metric m) const;
  std::string to_json() const;
};

// Counts over identical key sets; KEY_MISMATCH otherwise.
ConfusionCounts confusion(const std::map<std::string, bool>& predictions,
                          const std::map<std::string, bool>& truth);

// Precision and recall are 1 when their denominator is 0; F1 is 0 when both
// are 0. EMPTY_SET when the counts are all zero.
MetricsReport compute_metrics(const ConfusionCounts& counts);

// Per-protocol metrics averaged with equal protocol weight. F1 is the mean of
// per-protocol F1.
MetricsReport macro_metrics(const std::vector<ConfusionCounts>& per_protocol);

struct EvalItem {
  bool prediction = false;
  bool truth = false;
  std::string protocol_id;
};

std::map<std::string, ConfusionCounts> per_protocol_counts(
    const std::vector<EvalItem>& items);

MetricsReport evaluate(const std::vector<EvalItem>& items, MetricMode mode);

struct BootstrapOptions {
  MetricMode mode = MetricMode::kMicro;
  std::size_t replications = 10000;
  double level = 0.95;
  std::uint64_t seed = 0;
  // Resampling unit; defaults to table-level for MICRO, protocol-level for
  // MACRO.
  std::optional<bool> resample_protocols;
  std::size_t threads = 0;  // 0 = hardware concurrency
};

// One metric value per replication. Replication r draws its indices from
// mt19937_64(derive_seed(seed, r)) with uniform_index, so serial and parallel
// runs agree exactly.
std::vector<double> bootstrap_distribution(const std::vector<EvalItem>& items,
                                           Metric metric,
                                           const BootstrapOptions& options);

// Linear-interpolation quantile of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q);

// Percentile interval at (1-level)/2 and 1-(1-level)/2.
Interval bootstrap_ci(const std::vector<EvalItem>& items, Metric metric,
                      const BootstrapOptions& options);

// Point estimates plus all four intervals.
MetricsReport evaluate_with_ci(const std::vector<EvalItem>& items,
                               const BootstrapOptions& options);

struct ProtocolThresholdReport {
  double pct_precision_gt_60 = 0.0;
  double pct_precision_gt_80 = 0.0;
  double pct_precision_100 = 0.0;
  double pct_recall_100 = 0.0;

  std::string to_json() const;
};

ProtocolThresholdReport protocol_threshold_report(
    const std::vector<MetricsReport>& per_protocol);

struct AgreementMatrix {
  std::uint64_t a_pos_b_pos = 0;
  std::uint64_t a_pos_b_neg = 0;
  std::uint64_t a_neg_b_pos = 0;
  std::uint64_t a_neg_b_neg = 0;
  double overall_agreement = 0.0;

  static AgreementMatrix from_cells(std::uint64_t pp, std::uint64_t pn,
                                    std::uint64_t np, std::uint64_t nn);
  std::uint64_t total() const {
    return a_pos_b_pos + a_pos_b_neg + a_neg_b_pos + a_neg_b_neg;
  }
  std::string to_json() const;
  bool operator==(const AgreementMatrix&) const = default;
};

AgreementMatrix agreement_matrix(const std::map<std::string, bool>& ann_a,
                                 const std::map<std::string, bool>& ann_b);

struct RaterLabel {
  std::string item_id;
  std::string rater_id;
  bool label = false;
};

// Mean over overlap sets of the mean pairwise raw agreement among raters who
// labeled every item of the set.
double inter_rater_agreement(const std::vector<RaterLabel>& assignments,
                             const std::vector<std::vector<std::string>>& overlap_sets);

// CSV with header model,recall,precision,f1,accuracy and CI columns.
std::string metrics_table_csv(
    const std::vector<std::pair<std::string, MetricsReport>>& rows);
std::string threshold_table_csv(
    const std::vector<std::pair<std::string, ProtocolThresholdReport>>& rows);
// Fixed-width text rendering for terminals.
std::string metrics_table_text(
    const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace soelabel

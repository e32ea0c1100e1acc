#include "soelabel/evaluation.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <thread>

#include "json.hpp"
#include "soelabel/error.h"
#include "soelabel/util.h"

namespace soelabel {

using nlohmann::ordered_json;

std::string_view to_string(MetricMode m) {
  return m == MetricMode::kMicro ? "MICRO" : "MACRO_PER_PROTOCOL";
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::kRecall: return "recall";
    case Metric::kPrecision: return "precision";
    case Metric::kF1: return "f1";
    case Metric::kAccuracy: return "accuracy";
  }
  return "accuracy";
}

MetricMode metric_mode_from_string(std::string_view s) {
  if (s == "micro" || s == "MICRO") return MetricMode::kMicro;
  if (s == "macro" || s == "MACRO" || s == "MACRO_PER_PROTOCOL") {
    return MetricMode::kMacroPerProtocol;
  }
  throw Error(ErrorCode::kConfigError, "unknown metric mode '" + std::string(s) + "'");
}

double MetricsReport::value(Metric m) const {
  switch (m) {
    case Metric::kRecall: return recall;
    case Metric::kPrecision: return precision;
    case Metric::kF1: return f1;
    case Metric::kAccuracy: return accuracy;
  }
  return accuracy;
}

std::optional<Interval>& MetricsReport::ci(Metric m) {
  switch (m) {
    case Metric::kRecall: return recall_ci;
    case Metric::kPrecision: return precision_ci;
    case Metric::kF1: return f1_ci;
    case Metric::kAccuracy: return accuracy_ci;
  }
  return accuracy_ci;
}

const std::optional<Interval>& MetricsReport::ci(Metric m) const {
  return const_cast<MetricsReport*>(this)->ci(m);
}

std::string MetricsReport::to_json() const {
  ordered_json j;
  j["mode"] = to_string(mode);
  for (auto m : {Metric::kRecall, Metric::kPrecision, Metric::kF1, Metric::kAccuracy}) {
    ordered_json entry;
    entry["value"] = value(m);
    if (const auto& c = ci(m)) {
      entry["ci_low"] = c->low;
      entry["ci_high"] = c->high;
    }
    j[std::string(to_string(m))] = std::move(entry);
  }
  return j.dump(2);
}

ConfusionCounts confusion(const std::map<std::string, bool>& predictions,
                          const std::map<std::string, bool>& truth) {
  if (predictions.size() != truth.size()) {
    throw Error(ErrorCode::kKeyMismatch, "prediction and truth sizes differ");
  }
  ConfusionCounts c;
  auto t = truth.begin();
  for (const auto& [id, pred] : predictions) {
    if (t->first != id) throw Error(ErrorCode::kKeyMismatch, id);
    const bool actual = t->second;
    if (pred && actual) ++c.tp;
    else if (pred && !actual) ++c.fp;
    else if (!pred && actual) ++c.fn;
    else ++c.tn;
    ++t;
  }
  return c;
}

MetricsReport compute_metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw Error(ErrorCode::kEmptySet, "no items");
  MetricsReport r;
  r.mode = MetricMode::kMicro;
  const auto tp = static_cast<double>(c.tp);
  r.recall = (c.tp + c.fn) == 0 ? 1.0 : tp / static_cast<double>(c.tp + c.fn);
  r.precision = (c.tp + c.fp) == 0 ? 1.0 : tp / static_cast<double>(c.tp + c.fp);
  r.f1 = (r.precision + r.recall) == 0.0
             ? 0.0
             : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  return r;
}

MetricsReport macro_metrics(const std::vector<ConfusionCounts>& per_protocol) {
  if (per_protocol.empty()) throw Error(ErrorCode::kEmptySet, "no protocols");
  MetricsReport out;
  out.mode = MetricMode::kMacroPerProtocol;
  for (const auto& c : per_protocol) {
    auto r = compute_metrics(c);
    out.recall += r.recall;
    out.precision += r.precision;
    out.f1 += r.f1;
    out.accuracy += r.accuracy;
  }
  const auto n = static_cast<double>(per_protocol.size());
  out.recall /= n;
  out.precision /= n;
  out.f1 /= n;
  out.accuracy /= n;
  return out;
}

namespace {

void count_into(ConfusionCounts& c, bool pred, bool truth) {
  if (pred) {
    truth ? ++c.tp : ++c.fp;
  } else {
    truth ? ++c.fn : ++c.tn;
  }
}

}  // namespace

std::map<std::string, ConfusionCounts> per_protocol_counts(
    const std::vector<EvalItem>& items) {
  std::map<std::string, ConfusionCounts> out;
  for (const auto& it : items) count_into(out[it.protocol_id], it.prediction, it.truth);
  return out;
}

MetricsReport evaluate(const std::vector<EvalItem>& items, MetricMode mode) {
  if (items.empty()) throw Error(ErrorCode::kEmptySet, "no items");
  if (mode == MetricMode::kMicro) {
    ConfusionCounts c;
    for (const auto& it : items) count_into(c, it.prediction, it.truth);
    return compute_metrics(c);
  }
  std::vector<ConfusionCounts> per;
  for (const auto& [_, c] : per_protocol_counts(items)) per.push_back(c);
  return macro_metrics(per);
}

std::vector<double> bootstrap_distribution(const std::vector<EvalItem>& items,
                                           Metric metric,
                                           const BootstrapOptions& options) {
  if (items.empty()) throw Error(ErrorCode::kEmptySet, "no items");
  if (options.replications == 0) {
    throw Error(ErrorCode::kConfigError, "replications must be positive");
  }
  const bool by_protocol =
      options.resample_protocols.value_or(options.mode == MetricMode::kMacroPerProtocol);

  // Protocol-level units: per-protocol confusion counts in protocol-id order.
  std::vector<ConfusionCounts> units;
  if (by_protocol) {
    for (const auto& [_, c] : per_protocol_counts(items)) units.push_back(c);
  }
  const std::size_t n = by_protocol ? units.size() : items.size();

  auto one = [&](std::size_t r) {
    std::mt19937_64 rng(derive_seed(options.seed, r));
    if (!by_protocol) {
      ConfusionCounts c;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& it = items[uniform_index(rng, n)];
        count_into(c, it.prediction, it.truth);
      }
      return compute_metrics(c).value(metric);
    }
    std::vector<ConfusionCounts> drawn;
    drawn.reserve(n);
    for (std::size_t i = 0; i < n; ++i) drawn.push_back(units[uniform_index(rng, n)]);
    if (options.mode == MetricMode::kMicro) {
      ConfusionCounts c;
      for (const auto& d : drawn) c += d;
      return compute_metrics(c).value(metric);
    }
    return macro_metrics(drawn).value(metric);
  };

  std::vector<double> out(options.replications);
  std::size_t threads = options.threads ? options.threads
                                        : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, options.replications);
  if (threads <= 1) {
    for (std::size_t r = 0; r < options.replications; ++r) out[r] = one(r);
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t r = t; r < options.replications; r += threads) out[r] = one(r);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::kEmptySet, "no samples");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Interval bootstrap_ci(const std::vector<EvalItem>& items, Metric metric,
                      const BootstrapOptions& options) {
  if (!(options.level > 0.0 && options.level < 1.0)) {
    throw Error(ErrorCode::kConfigError, "level must lie in (0,1)");
  }
  auto dist = bootstrap_distribution(items, metric, options);
  std::sort(dist.begin(), dist.end());
  const double alpha = 1.0 - options.level;
  return {quantile_sorted(dist, alpha / 2.0), quantile_sorted(dist, 1.0 - alpha / 2.0)};
}

MetricsReport evaluate_with_ci(const std::vector<EvalItem>& items,
                               const BootstrapOptions& options) {
  auto report = evaluate(items, options.mode);
  for (auto m : {Metric::kRecall, Metric::kPrecision, Metric::kF1, Metric::kAccuracy}) {
    report.ci(m) = bootstrap_ci(items, m, options);
  }
  return report;
}

std::string ProtocolThresholdReport::to_json() const {
  ordered_json j;
  j["pct_protocols_precision_gt_60"] = pct_precision_gt_60;
  j["pct_precision_gt_80"] = pct_precision_gt_80;
  j["pct_precision_100"] = pct_precision_100;
  j["pct_recall_100"] = pct_recall_100;
  return j.dump(2);
}

ProtocolThresholdReport protocol_threshold_report(
    const std::vector<MetricsReport>& per_protocol) {
  if (per_protocol.empty()) throw Error(ErrorCode::kEmptySet, "no protocols");
  std::size_t gt60 = 0, gt80 = 0, p100 = 0, r100 = 0;
  for (const auto& r : per_protocol) {
    if (r.precision > 0.60) ++gt60;
    if (r.precision > 0.80) ++gt80;
    if (r.precision == 1.0) ++p100;
    if (r.recall == 1.0) ++r100;
  }
  const double n = static_cast<double>(per_protocol.size());
  auto pct = [n](std::size_t k) { return 100.0 * static_cast<double>(k) / n; };
  return {pct(gt60), pct(gt80), pct(p100), pct(r100)};
}

AgreementMatrix AgreementMatrix::from_cells(std::uint64_t pp, std::uint64_t pn,
                                            std::uint64_t np, std::uint64_t nn) {
  AgreementMatrix m{pp, pn, np, nn, 0.0};
  if (m.total() == 0) throw Error(ErrorCode::kEmptySet, "no items");
  m.overall_agreement = static_cast<double>(pp + nn) / static_cast<double>(m.total());
  return m;
}

std::string AgreementMatrix::to_json() const {
  ordered_json j;
  j["a_soe_b_soe"] = a_pos_b_pos;
  j["a_soe_b_non"] = a_pos_b_neg;
  j["a_non_b_soe"] = a_neg_b_pos;
  j["a_non_b_non"] = a_neg_b_neg;
  j["overall_agreement"] = overall_agreement;
  return j.dump(2);
}

AgreementMatrix agreement_matrix(const std::map<std::string, bool>& ann_a,
                                 const std::map<std::string, bool>& ann_b) {
  const auto c = confusion(ann_a, ann_b);
  // confusion() treats a as prediction and b as truth.
  return AgreementMatrix::from_cells(c.tp, c.fp, c.fn, c.tn);
}

double inter_rater_agreement(const std::vector<RaterLabel>& assignments,
                             const std::vector<std::vector<std::string>>& overlap_sets) {
  if (overlap_sets.empty()) {
    throw Error(ErrorCode::kInsufficientOverlap, "no overlap sets");
  }
  std::map<std::string, std::map<std::string, bool>> by_rater;
  for (const auto& a : assignments) by_rater[a.rater_id][a.item_id] = a.label;

  double total = 0.0;
  for (std::size_t s = 0; s < overlap_sets.size(); ++s) {
    const auto& items = overlap_sets[s];
    if (items.empty()) {
      throw Error(ErrorCode::kInsufficientOverlap, "overlap set " + std::to_string(s) + " is empty");
    }
    std::vector<const std::map<std::string, bool>*> raters;
    for (const auto& [rater, labels] : by_rater) {
      bool covers = std::all_of(items.begin(), items.end(),
                                [&](const auto& id) { return labels.count(id) > 0; });
      if (covers) raters.push_back(&labels);
    }
    if (raters.size() < 2) {
      throw Error(ErrorCode::kInsufficientOverlap,
                  "overlap set " + std::to_string(s) + " has fewer than 2 raters");
    }
    double pair_sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < raters.size(); ++i) {
      for (std::size_t j = i + 1; j < raters.size(); ++j) {
        std::size_t agree = 0;
        for (const auto& id : items) agree += raters[i]->at(id) == raters[j]->at(id);
        pair_sum += static_cast<double>(agree) / static_cast<double>(items.size());
        ++pairs;
      }
    }
    total += pair_sum / static_cast<double>(pairs);
  }
  return total / static_cast<double>(overlap_sets.size());
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string fmt_ci(const std::optional<Interval>& c) {
  return c ? fmt(c->low) + "," + fmt(c->high) : std::string(",");
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string metrics_table_csv(
    const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::string out =
      "model,mode,recall,recall_ci_low,recall_ci_high,precision,precision_ci_low,"
      "precision_ci_high,f1,f1_ci_low,f1_ci_high,accuracy,accuracy_ci_low,"
      "accuracy_ci_high\n";
  for (const auto& [name, r] : rows) {
    out += csv_quote(name) + "," + std::string(to_string(r.mode));
    for (auto m : {Metric::kRecall, Metric::kPrecision, Metric::kF1, Metric::kAccuracy}) {
      out += "," + fmt(r.value(m)) + "," + fmt_ci(r.ci(m));
    }
    out += "\n";
  }
  return out;
}

std::string threshold_table_csv(
    const std::vector<std::pair<std::string, ProtocolThresholdReport>>& rows) {
  std::string out =
      "model,pct_precision_gt_60,pct_precision_gt_80,pct_precision_100,pct_recall_100\n";
  char buf[128];
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof(buf), ",%.1f,%.1f,%.1f,%.1f\n", r.pct_precision_gt_60,
                  r.pct_precision_gt_80, r.pct_precision_100, r.pct_recall_100);
    out += csv_quote(name) + buf;
  }
  return out;
}

std::string metrics_table_text(
    const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-28s %-24s %-24s %-24s %-24s\n", "model",
                "recall", "precision", "f1", "accuracy");
  out += buf;
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof(buf), "%-28s", name.c_str());
    out += buf;
    for (auto m : {Metric::kRecall, Metric::kPrecision, Metric::kF1, Metric::kAccuracy}) {
      const auto& c = r.ci(m);
      if (c) {
        std::snprintf(buf, sizeof(buf), " %.3f (%.3f, %.3f)     ", r.value(m), c->low, c->high);
      } else {
        std::snprintf(buf, sizeof(buf), " %-24.3f", r.value(m));
      }
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace soelabel

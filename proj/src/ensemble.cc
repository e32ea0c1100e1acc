#include "soelabel/ensemble.h"

#include <algorithm>
#include <cstdio>

#include "soelabel/error.h"

namespace soelabel {

std::string Channel::name() const {
  return labeler_id + ":" + std::string(to_string(view));
}

void EnsembleConfig::validate() const {
  if (channels.empty()) throw Error(ErrorCode::kConfigError, "no channels");
  if (threshold < 1 || threshold > static_cast<int>(channels.size())) {
    throw Error(ErrorCode::kBadThreshold, std::to_string(threshold));
  }
}

bool ensemble_classify(std::span<const Verdict> verdicts, int k) {
  if (k < 1 || k > static_cast<int>(verdicts.size())) {
    throw Error(ErrorCode::kBadThreshold,
                "k=" + std::to_string(k) + " with " +
                    std::to_string(verdicts.size()) + " verdicts");
  }
  const auto yes = std::count(verdicts.begin(), verdicts.end(), Verdict::kYes);
  return yes >= k;
}

VerdictTable verdict_table(const std::vector<Annotation>& annotations) {
  VerdictTable out;
  for (const auto& a : annotations) {
    out[a.table_id][Channel{a.annotator_id, a.view}] = a.verdict;
  }
  return out;
}

std::vector<SweepRow> sweep_thresholds(const EnsembleConfig& config,
                                       const VerdictTable& verdicts,
                                       const std::map<std::string, bool>& truth,
                                       MetricMode mode,
                                       const std::map<std::string, std::string>& protocol_of) {
  if (config.channels.empty()) throw Error(ErrorCode::kConfigError, "no channels");
  // Gather each table's verdict vector once, in channel order.
  std::vector<std::pair<std::string, std::vector<Verdict>>> rows;
  rows.reserve(truth.size());
  for (const auto& [id, _] : truth) {
    auto t = verdicts.find(id);
    std::vector<Verdict> v;
    v.reserve(config.channels.size());
    for (const auto& ch : config.channels) {
      if (t == verdicts.end()) throw Error(ErrorCode::kMissingVerdict, id + " " + ch.name());
      auto c = t->second.find(ch);
      if (c == t->second.end()) throw Error(ErrorCode::kMissingVerdict, id + " " + ch.name());
      v.push_back(c->second);
    }
    rows.emplace_back(id, std::move(v));
  }

  std::vector<SweepRow> out;
  const int n = static_cast<int>(config.channels.size());
  for (int k = 1; k <= n; ++k) {
    std::vector<EvalItem> items;
    items.reserve(rows.size());
    for (const auto& [id, v] : rows) {
      EvalItem it;
      it.prediction = ensemble_classify(v, k);
      it.truth = truth.at(id);
      if (mode == MetricMode::kMacroPerProtocol) {
        auto p = protocol_of.find(id);
        if (p == protocol_of.end()) throw Error(ErrorCode::kUnknownTable, id);
        it.protocol_id = p->second;
      }
      items.push_back(std::move(it));
    }
    out.push_back({k, evaluate(items, mode)});
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "k,recall,precision,f1,accuracy\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.4f,%.4f,%.4f,%.4f\n", r.k, r.report.recall,
                  r.report.precision, r.report.f1, r.report.accuracy);
    out += buf;
  }
  return out;
}

}  // namespace soelabel

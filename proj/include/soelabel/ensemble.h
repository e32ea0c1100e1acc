#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "soelabel/evaluation.h"
#include "soelabel/labeling.h"

namespace soelabel {

// One verdict stream: a labeler viewed through one table representation.
struct Channel {
  std::string labeler_id;
  ViewKind view = ViewKind::kJson;

  auto operator<=>(const Channel&) const = default;
  std::string name() const;
};

struct EnsembleConfig {
  std::vector<Channel> channels;
  int threshold = 1;

  void validate() const;
};

// True iff at least k verdicts are YES. BAD_THRESHOLD unless 1 <= k <= n.
bool ensemble_classify(std::span<const Verdict> verdicts, int k);

// table_id -> channel -> verdict
using VerdictTable = std::map<std::string, std::map<Channel, Verdict>>;

VerdictTable verdict_table(const std::vector<Annotation>& annotations);

struct SweepRow {
  int k = 0;
  MetricsReport report;
};

// One report per k in 1..channels. MACRO mode needs protocol_of for every
// table. MISSING_VERDICT when a channel lacks a table.
std::vector<SweepRow> sweep_thresholds(const EnsembleConfig& config,
                                       const VerdictTable& verdicts,
                                       const std::map<std::string, bool>& truth,
                                       MetricMode mode = MetricMode::kMicro,
                                       const std::map<std::string, std::string>& protocol_of = {});

// Header k,recall,precision,f1,accuracy.
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace soelabel

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "soelabel/corpus.h"
#include "soelabel/labeling.h"

namespace soelabel {

// True iff at least one view said YES. UNKNOWN is not YES.
constexpr bool classify_or_rule(Verdict json_verdict, Verdict text_verdict) {
  return json_verdict == Verdict::kYes || text_verdict == Verdict::kYes;
}

struct ScreeningResult {
  std::set<std::string> screened;
  std::vector<Annotation> annotations;
};

// Runs the base screener over every table; keeps those the OR rule calls
// positive.
ScreeningResult screen_tables(Labeler& screener, const Corpus& corpus,
                              std::size_t max_in_flight = 8);

enum class ConsensusStatus { kAgree, kDisagree };

struct ConsensusOutcome {
  std::string table_id;
  ConsensusStatus status = ConsensusStatus::kDisagree;
  std::optional<bool> agreed_label;
  Verdict json_verdict = Verdict::kUnknown;
  Verdict text_verdict = Verdict::kUnknown;

  bool operator==(const ConsensusOutcome&) const = default;
};

ConsensusOutcome consensus(const Annotation& json_ann, const Annotation& text_ann);

// Pairs each table's JSON and text annotations from one annotator (all
// annotators when annotator_id is empty) and runs consensus. Sorted by
// table_id. A table missing either view raises MISSING_VERDICT.
std::vector<ConsensusOutcome> consensus_all(const std::vector<Annotation>& annotations,
                                            const std::string& annotator_id = "");

std::string_view to_string(ConsensusStatus s);
std::string outcome_to_json(const ConsensusOutcome& o);
ConsensusOutcome outcome_from_json(std::string_view line);

enum class LabelingPolicy { kAll, kFiltered, kHybrid };
enum class LabelSource { kLlmConsensus, kLlmOrRule, kHuman };

std::string_view to_string(LabelingPolicy p);
std::string_view to_string(LabelSource s);
LabelingPolicy policy_from_string(std::string_view s);

struct LabeledTable {
  std::string table_id;
  bool label = false;
  LabelSource label_source = LabelSource::kLlmConsensus;
  LabelingPolicy policy = LabelingPolicy::kAll;

  bool operator==(const LabeledTable&) const = default;
};

// ALL: every table; AGREE via the consensus label, DISAGREE via the OR rule.
// FILTERED: AGREE tables only. HYBRID: AGREE tables plus DISAGREE tables
// relabeled from human_labels (MISSING_HUMAN_LABEL if one is absent).
std::vector<LabeledTable> apply_policy(LabelingPolicy policy,
                                       const std::vector<ConsensusOutcome>& outcomes,
                                       const std::map<std::string, bool>& or_labels,
                                       const std::map<std::string, bool>& human_labels);

// OR-rule label for every outcome.
std::map<std::string, bool> or_rule_labels(const std::vector<ConsensusOutcome>& outcomes);

enum class SplitName { kTrain, kValidation, kTest };
std::string_view to_string(SplitName s);
SplitName split_from_string(std::string_view s);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;

  std::size_t total() const { return train + validation + test; }
  bool operator==(const SplitSizes&) const = default;
};

struct SplitAssignment {
  std::map<std::string, SplitName> assignment;
  std::uint64_t seed = 0;
  SplitSizes sizes;

  std::string to_json() const;
  static SplitAssignment from_json(std::string_view text);
  bool operator==(const SplitAssignment&) const = default;
};

// Uniform random partition of protocol ids. Input order does not matter: ids
// are sorted before the seeded shuffle.
SplitAssignment split_protocols(std::vector<std::string> protocol_ids,
                                SplitSizes sizes, std::uint64_t seed);

enum class ViewChoice { kJson, kText, kBoth };
ViewChoice view_choice_from_string(std::string_view s);

struct FineTuneExample {
  std::string input_text;
  std::string target;
  std::string table_id;
  std::string protocol_id;
  std::string split;
  ViewKind view = ViewKind::kJson;  // not exported; orders examples

  bool operator==(const FineTuneExample&) const = default;
};

std::vector<FineTuneExample> assemble_dataset(const std::vector<LabeledTable>& labels,
                                              const Corpus& corpus,
                                              const SplitAssignment& split,
                                              ViewChoice view_choice = ViewChoice::kBoth);

std::string example_to_json(const FineTuneExample& ex);
FineTuneExample example_from_json(std::string_view line);

// Recovers the view kind and substituted content from a built prompt.
std::optional<std::pair<ViewKind, std::string>> extract_view_content(
    const std::string& prompt);

}  // namespace soelabel

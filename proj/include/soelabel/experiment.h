#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "soelabel/corpus.h"
#include "soelabel/evaluation.h"
#include "soelabel/labeling.h"
#include "soelabel/pipeline.h"
#include "soelabel/proxy.h"

namespace soelabel {

// Simulated non-expert decision for one table: correct with probability
// `accuracy`. Deterministic in (seed, annotator_id, table_id).
bool simulate_human_label(bool true_label, double accuracy, std::uint64_t seed,
                          const std::string& annotator_id, const std::string& table_id);

// Feature text for one view of a table (the substituted prompt content).
std::string view_content(const TableRecord& table, ViewKind view);

// Training examples from exported fine-tune records, featurized on the view
// content embedded in each prompt.
std::vector<TrainingExample> training_examples(const std::vector<FineTuneExample>& examples,
                                               std::size_t dim = kDefaultFeatureDim);

// Table-level proxy prediction. With BOTH, the two view scores are averaged.
Prediction predict_table(const LinearModel& model, const TableRecord& table,
                         ViewChoice views);

struct PolicyComparisonConfig {
  SyntheticCorpusSpec corpus;
  SplitSizes split{300, 18, 90};
  NoiseModel noise;
  double human_accuracy = 0.9;
  ViewChoice views = ViewChoice::kBoth;
  TrainOptions train;
  std::size_t feature_dim = kDefaultFeatureDim;
};

struct PolicyResult {
  std::size_t n_labels = 0;
  std::size_t n_human = 0;
  double label_accuracy = 0.0;  // against true labels, over training tables
  MetricsReport test_micro;
  MetricsReport test_macro;
};

struct PolicyComparison {
  std::size_t train_tables = 0;
  std::size_t disagreements = 0;
  std::map<LabelingPolicy, PolicyResult> results;
};

// Generates a corpus, labels the training split with the noise model, trains
// one proxy per policy and scores each on the test split.
PolicyComparison run_policy_comparison(const PolicyComparisonConfig& config);

}  // namespace soelabel

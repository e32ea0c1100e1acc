#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "soelabel/corpus.h"
#include "soelabel/error.h"
#include "soelabel/evaluation.h"
#include "soelabel/labeling.h"
#include "soelabel/pipeline.h"
#include "soelabel/proxy.h"
#include "soelabel/review.h"

namespace soelabel {

inline constexpr std::string_view kVersion = "0.1.0";

// Artifact file names, relative to the output directory.
namespace artifact {
inline constexpr std::string_view kCorpus = "corpus.jsonl";
inline constexpr std::string_view kScreenAnnotations = "screen_annotations.jsonl";
inline constexpr std::string_view kScreened = "screened.json";
inline constexpr std::string_view kAnnotations = "annotations.jsonl";
inline constexpr std::string_view kConsensus = "consensus.jsonl";
inline constexpr std::string_view kSplit = "split.json";
inline constexpr std::string_view kLabels = "labels.jsonl";
inline constexpr std::string_view kTrainSet = "dataset_train.jsonl";
inline constexpr std::string_view kValidationSet = "dataset_validation.jsonl";
inline constexpr std::string_view kTestSet = "dataset_test.jsonl";
inline constexpr std::string_view kModel = "model.json";
inline constexpr std::string_view kPredictions = "predictions.jsonl";
inline constexpr std::string_view kMetrics = "metrics.json";
inline constexpr std::string_view kMetricsCsv = "metrics.csv";
inline constexpr std::string_view kThresholdsCsv = "thresholds.csv";
inline constexpr std::string_view kEnsembleCsv = "ensemble_sweep.csv";
inline constexpr std::string_view kManifest = "manifest.json";
}  // namespace artifact

struct RunConfig {
  std::filesystem::path out_dir = ".";

  // ingest
  std::filesystem::path corpus_path;
  // simulate
  SyntheticCorpusSpec synthetic;

  // LLM labeler: HTTP endpoint when set, otherwise the noise model.
  std::string labeler_url;
  std::string labeler_token;
  std::string labeler_id;  // consensus annotator; empty picks the first
  NoiseModel noise;
  int n_labelers = 1;
  std::size_t max_in_flight = 8;

  // Screening gate.
  bool screening = true;
  std::string screener_url;
  double screener_sensitivity = 0.97;
  double screener_specificity = 0.80;
  double screener_correlation = 1.0;
  std::uint64_t screener_seed = 0;

  LabelingPolicy policy = LabelingPolicy::kFiltered;
  // All zero: derived from the protocol count.
  SplitSizes split;
  std::uint64_t split_seed = 0;
  ViewChoice views = ViewChoice::kBoth;

  TrainOptions train;
  std::size_t feature_dim = kDefaultFeatureDim;

  MetricMode eval_mode = MetricMode::kMacroPerProtocol;
  std::size_t bootstrap_replications = 10000;
  double ci_level = 0.95;
  std::uint64_t bootstrap_seed = 0;

  // "labeler_id:JSON_VIEW" style; empty uses every channel present.
  std::vector<std::string> channels;

  // Review service.
  std::filesystem::path review_dir;
  std::chrono::seconds claim_ttl{900};
  RoleTable roles;
  std::optional<double> simulate_human_accuracy;
  std::uint64_t human_seed = 0;
  std::string listen_host = "127.0.0.1";
  int port = 8765;
  std::filesystem::path static_dir;

  // Relative paths resolve against out_dir.
  std::filesystem::path resolve(const std::filesystem::path& p) const;
  // CONFIG_ERROR when the settings cannot work for `stage`.
  void validate(const std::string& stage) const;
};

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"ingest",   "screen",   "annotate", "filter",
                                              "assemble", "train",    "evaluate", "ensemble",
                                              "serve",    "simulate"};
  return names;
}

// Split sizes for n protocols in the 300/18/90 proportions.
SplitSizes default_split(std::size_t n_protocols);

// Runs one non-serving stage, writing its artifacts atomically and its
// manifest entry. Returns the stage's stats as compact JSON.
std::string run_stage(const std::string& stage, const RunConfig& config);

std::unique_ptr<ReviewQueue> open_review_queue(const RunConfig& config);
// Enqueues DISAGREE tables from the filter stage's output; returns the count.
std::size_t enqueue_from_artifacts(ReviewQueue& queue, const RunConfig& config);

// 1 config error, 2 missing dependency, 3 runtime failure.
int exit_code_for(ErrorCode code);

}  // namespace soelabel

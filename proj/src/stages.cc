#include "soelabel/stages.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "json.hpp"
#include "soelabel/ensemble.h"
#include "soelabel/experiment.h"
#include "soelabel/util.h"

namespace soelabel {

using nlohmann::ordered_json;

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return out_dir / p;
}

void RunConfig::validate(const std::string& stage) const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfigError, msg); };
  if (std::find(stage_names().begin(), stage_names().end(), stage) == stage_names().end()) {
    fail("unknown stage '" + stage + "'");
  }
  if (out_dir.empty()) fail("--out-dir is required");
  if (stage == "ingest" && corpus_path.empty()) fail("ingest needs --corpus");
  if (stage == "simulate" || stage == "annotate" || stage == "screen") {
    try {
      noise.validate();
    } catch (const Error& e) {
      fail(e.detail());
    }
    if (n_labelers < 1) fail("--labelers must be >= 1");
    if (!labeler_url.empty() && n_labelers != 1) fail("--labelers > 1 needs the simulated labeler");
  }
  if (stage == "simulate") {
    if (synthetic.n_protocols < 1) fail("--protocols must be >= 1");
    if (synthetic.min_tables_per_protocol < 1 ||
        synthetic.max_tables_per_protocol < synthetic.min_tables_per_protocol) {
      fail("bad tables-per-protocol range");
    }
    if (!(synthetic.positive_rate >= 0.0 && synthetic.positive_rate <= 1.0)) {
      fail("--positive-rate must be in [0,1]");
    }
  }
  if (stage == "assemble" && policy == LabelingPolicy::kHybrid && review_dir.empty()) {
    fail("--policy hybrid needs --review-dir");
  }
  if (stage == "serve" && review_dir.empty()) fail("serve needs --review-dir");
  if (simulate_human_accuracy &&
      !(*simulate_human_accuracy >= 0.0 && *simulate_human_accuracy <= 1.0)) {
    fail("--simulate-human must be in [0,1]");
  }
  if (stage == "train" && (train.epochs < 0 || !(train.learning_rate > 0.0) || train.l2 < 0.0)) {
    fail("bad training options");
  }
  if (feature_dim < 2) fail("--feature-dim must be >= 2");
  if (stage == "evaluate" && (bootstrap_replications < 1 || !(ci_level > 0.0 && ci_level < 1.0))) {
    fail("bad bootstrap options");
  }
  if (claim_ttl.count() <= 0) fail("--claim-ttl must be positive");
}

SplitSizes default_split(std::size_t n) {
  SplitSizes s;
  s.test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * 90.0 / 408.0));
  s.validation = static_cast<std::size_t>(std::llround(static_cast<double>(n) * 18.0 / 408.0));
  if (s.test + s.validation > n) s.validation = n - std::min(n, s.test);
  s.train = n - s.test - s.validation;
  return s;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kInvalidSpec:
    case ErrorCode::kBadThreshold:
      return 1;
    case ErrorCode::kMissingDependency:
    case ErrorCode::kMissingHumanLabel:
      return 2;
    default:
      return 3;
  }
}

namespace {

// Manifest: one entry per stage plus one entry per artifact file.
class Manifest {
 public:
  explicit Manifest(const RunConfig& config) : path_(config.out_dir / artifact::kManifest) {
    if (std::filesystem::exists(path_)) {
      try {
        doc_ = ordered_json::parse(read_file(path_));
      } catch (const ordered_json::exception& e) {
        throw Error(ErrorCode::kMalformedLine, "manifest: " + std::string(e.what()));
      }
    }
    if (!doc_.is_object()) doc_ = ordered_json::object();
    doc_["version"] = kVersion;
    if (!doc_.contains("stages")) doc_["stages"] = ordered_json::object();
    if (!doc_.contains("artifacts")) doc_["artifacts"] = ordered_json::object();
  }

  void record(const std::string& stage, const RunConfig& config,
              const std::vector<std::filesystem::path>& inputs,
              const std::vector<std::string>& outputs, ordered_json seeds, ordered_json params,
              ordered_json stats) {
    // A stage that rewrites another stage's outputs supersedes it.
    auto& stages = doc_["stages"];
    std::vector<std::string> stale;
    for (auto it = stages.begin(); it != stages.end(); ++it) {
      if (it.key() == stage) continue;
      for (const auto& o : it.value()["outputs"].items()) {
        if (std::find(outputs.begin(), outputs.end(), o.key()) != outputs.end()) {
          stale.push_back(it.key());
          break;
        }
      }
    }
    auto& artifacts = doc_["artifacts"];
    auto drop_outputs = [&](const std::string& name) {
      if (!stages.contains(name)) return;
      for (const auto& o : stages[name]["outputs"].items()) artifacts.erase(o.key());
    };
    for (const auto& s : stale) {
      drop_outputs(s);
      stages.erase(s);
    }
    drop_outputs(stage);

    ordered_json entry;
    ordered_json in = ordered_json::object();
    for (const auto& p : inputs) in[display(config, p)] = sha256_file(p);
    ordered_json out = ordered_json::object();
    for (const auto& o : outputs) {
      const auto hash = sha256_file(config.out_dir / o);
      out[o] = hash;
      artifacts[o] = {{"sha256", hash}, {"stage", stage}};
    }
    entry["inputs"] = std::move(in);
    entry["outputs"] = std::move(out);
    entry["seeds"] = std::move(seeds);
    entry["params"] = std::move(params);
    entry["stats"] = std::move(stats);
    stages[stage] = std::move(entry);
    write_file_atomic(path_, doc_.dump(2) + "\n");
  }

 private:
  static std::string display(const RunConfig& config, const std::filesystem::path& p) {
    auto rel = p.lexically_relative(config.out_dir);
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return p.generic_string();
  }

  std::filesystem::path path_;
  ordered_json doc_;
};

std::filesystem::path require(const RunConfig& config, std::string_view name,
                              const std::string& producer) {
  auto p = config.out_dir / name;
  if (!std::filesystem::exists(p)) {
    throw Error(ErrorCode::kMissingDependency,
                std::string(name) + " not found; run '" + producer + "' first");
  }
  return p;
}

ordered_json noise_json(const NoiseModel& n) {
  return {{"sensitivity_json", n.sensitivity_json},
          {"specificity_json", n.specificity_json},
          {"sensitivity_text", n.sensitivity_text},
          {"specificity_text", n.specificity_text},
          {"cross_view_correlation", n.cross_view_correlation}};
}

std::vector<std::unique_ptr<Labeler>> make_labelers(const RunConfig& config) {
  std::vector<std::unique_ptr<Labeler>> out;
  if (!config.labeler_url.empty()) {
    HttpLabelerConfig http;
    http.url = config.labeler_url;
    http.token = config.labeler_token;
    out.push_back(std::make_unique<HttpLabeler>(
        config.labeler_id.empty() ? "llm" : config.labeler_id, http));
    return out;
  }
  for (int i = 1; i <= config.n_labelers; ++i) {
    NoiseModel m = config.noise;
    if (i > 1) m.seed = derive_seed(config.noise.seed, static_cast<std::uint64_t>(i));
    out.push_back(std::make_unique<SimulatedLabeler>("sim-llm-" + std::to_string(i), m));
  }
  return out;
}

std::vector<Annotation> annotate_with(const RunConfig& config,
                                      const std::vector<const TableRecord*>& tables) {
  std::vector<Annotation> all;
  for (auto& labeler : make_labelers(config)) {
    auto part = annotate_tables(*labeler, tables, AnnotationSource::kLlmLabeler,
                                config.max_in_flight);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

std::vector<const TableRecord*> all_tables(const Corpus& corpus) {
  std::vector<const TableRecord*> out;
  for (const auto& doc : corpus) {
    for (const auto& t : doc.tables) out.push_back(&t);
  }
  return out;
}

ordered_json count_sources(const std::vector<Annotation>& anns) {
  std::map<std::string, std::size_t> verdicts;
  std::size_t errors = 0;
  for (const auto& a : anns) {
    verdicts[std::string(to_string(a.verdict))]++;
    if (a.error) ++errors;
  }
  ordered_json j = {{"annotations", anns.size()}, {"transport_errors", errors}};
  for (const auto& [k, v] : verdicts) j[k] = v;
  return j;
}

std::string primary_labeler(const RunConfig& config, const std::vector<Annotation>& anns) {
  if (!config.labeler_id.empty()) return config.labeler_id;
  std::set<std::string> ids;
  for (const auto& a : anns) ids.insert(a.annotator_id);
  if (ids.empty()) throw Error(ErrorCode::kEmptySet, "no annotations");
  return *ids.begin();
}

std::vector<ConsensusOutcome> read_outcomes(const std::filesystem::path& path) {
  std::vector<ConsensusOutcome> out;
  for (const auto& line : read_lines(path)) {
    if (!line.empty()) out.push_back(outcome_from_json(line));
  }
  return out;
}

std::string labeled_to_json(const LabeledTable& l) {
  ordered_json j;
  j["table_id"] = l.table_id;
  j["label"] = l.label;
  j["label_source"] = to_string(l.label_source);
  j["policy"] = to_string(l.policy);
  return j.dump();
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  write_file_atomic(path, out);
}

ordered_json report_json(const MetricsReport& r) { return ordered_json::parse(r.to_json()); }

// ---------------------------------------------------------------------------

ordered_json stage_ingest(const RunConfig& config, Manifest& manifest) {
  const auto src = config.resolve(config.corpus_path);
  if (!std::filesystem::exists(src)) {
    throw Error(ErrorCode::kMissingDependency, "corpus not found: " + src.string());
  }
  const Corpus corpus = ingest_corpus(src);
  write_corpus(config.out_dir / artifact::kCorpus, corpus);
  std::size_t tables = 0;
  std::size_t labeled = 0;
  std::size_t positives = 0;
  for (const auto& doc : corpus) {
    for (const auto& t : doc.tables) {
      ++tables;
      if (t.true_label) {
        ++labeled;
        if (*t.true_label) ++positives;
      }
    }
  }
  ordered_json stats = {{"protocols", corpus.size()},
                        {"tables", tables},
                        {"labeled", labeled},
                        {"positives", positives}};
  manifest.record("ingest", config, {src}, {std::string(artifact::kCorpus)},
                  ordered_json::object(), ordered_json::object(), stats);
  return stats;
}

ordered_json stage_simulate(const RunConfig& config, Manifest& manifest) {
  const Corpus corpus = generate_synthetic_corpus(config.synthetic);
  write_corpus(config.out_dir / artifact::kCorpus, corpus);
  const auto tables = all_tables(corpus);
  const auto anns = annotate_with(config, tables);
  AnnotationStore::write(config.out_dir / artifact::kAnnotations, anns);
  std::size_t positives = 0;
  for (const auto* t : tables) positives += (t->true_label && *t->true_label) ? 1 : 0;
  ordered_json stats = {{"protocols", corpus.size()},
                        {"tables", tables.size()},
                        {"positives", positives},
                        {"annotation", count_sources(anns)}};
  ordered_json params = {{"protocols", config.synthetic.n_protocols},
                         {"min_tables", config.synthetic.min_tables_per_protocol},
                         {"max_tables", config.synthetic.max_tables_per_protocol},
                         {"positive_rate", config.synthetic.positive_rate},
                         {"labelers", config.n_labelers},
                         {"noise", noise_json(config.noise)}};
  ordered_json seeds = {{"corpus", config.synthetic.seed}, {"noise", config.noise.seed}};
  manifest.record("simulate", config, {},
                  {std::string(artifact::kCorpus), std::string(artifact::kAnnotations)},
                  seeds, params, stats);
  return stats;
}

ordered_json stage_screen(const RunConfig& config, Manifest& manifest) {
  const auto corpus_path = require(config, artifact::kCorpus, "ingest");
  const Corpus corpus = ingest_corpus(corpus_path);
  std::unique_ptr<Labeler> screener;
  if (!config.screener_url.empty()) {
    HttpLabelerConfig http;
    http.url = config.screener_url;
    http.token = config.labeler_token;
    screener = std::make_unique<HttpLabeler>("base-screener", http);
  } else {
    NoiseModel m;
    m.sensitivity_json = m.sensitivity_text = config.screener_sensitivity;
    m.specificity_json = m.specificity_text = config.screener_specificity;
    m.cross_view_correlation = config.screener_correlation;
    m.seed = config.screener_seed;
    m.validate();
    screener = std::make_unique<SimulatedLabeler>("base-screener", m);
  }
  const auto result = screen_tables(*screener, corpus, config.max_in_flight);
  AnnotationStore::write(config.out_dir / artifact::kScreenAnnotations, result.annotations);
  const std::size_t total = all_tables(corpus).size();
  ordered_json screened = {{"total", total},
                           {"screened", std::vector<std::string>(result.screened.begin(),
                                                                 result.screened.end())}};
  write_file_atomic(config.out_dir / artifact::kScreened, screened.dump() + "\n");
  ordered_json stats = {{"tables", total},
                        {"screened", result.screened.size()},
                        {"fraction", total ? static_cast<double>(result.screened.size()) /
                                                 static_cast<double>(total)
                                           : 0.0}};
  ordered_json params = {{"sensitivity", config.screener_sensitivity},
                         {"specificity", config.screener_specificity},
                         {"correlation", config.screener_correlation},
                         {"endpoint", config.screener_url}};
  manifest.record("screen", config, {corpus_path},
                  {std::string(artifact::kScreenAnnotations), std::string(artifact::kScreened)},
                  {{"screener", config.screener_seed}}, params, stats);
  return stats;
}

ordered_json stage_annotate(const RunConfig& config, Manifest& manifest) {
  const auto corpus_path = require(config, artifact::kCorpus, "ingest");
  const Corpus corpus = ingest_corpus(corpus_path);
  std::vector<std::filesystem::path> inputs{corpus_path};
  auto tables = all_tables(corpus);
  if (config.screening) {
    const auto screened_path = require(config, artifact::kScreened, "screen");
    inputs.push_back(screened_path);
    const auto j = ordered_json::parse(read_file(screened_path));
    std::set<std::string> keep;
    for (const auto& id : j.at("screened")) keep.insert(id.get<std::string>());
    std::erase_if(tables, [&](const TableRecord* t) { return !keep.count(t->table_id); });
  }
  const auto anns = annotate_with(config, tables);
  AnnotationStore::write(config.out_dir / artifact::kAnnotations, anns);
  ordered_json stats = {{"tables", tables.size()}, {"annotation", count_sources(anns)}};
  ordered_json params = {{"screening", config.screening},
                         {"labelers", config.labeler_url.empty() ? config.n_labelers : 1},
                         {"endpoint", config.labeler_url},
                         {"noise", noise_json(config.noise)}};
  manifest.record("annotate", config, inputs, {std::string(artifact::kAnnotations)},
                  {{"noise", config.noise.seed}}, params, stats);
  return stats;
}

ordered_json stage_filter(const RunConfig& config, Manifest& manifest) {
  const auto ann_path = require(config, artifact::kAnnotations, "annotate");
  const auto anns = AnnotationStore::read(ann_path);
  const auto labeler = primary_labeler(config, anns);
  const auto outcomes = consensus_all(anns, labeler);
  std::vector<std::string> lines;
  std::size_t kept = 0;
  for (const auto& o : outcomes) {
    lines.push_back(outcome_to_json(o));
    if (o.status == ConsensusStatus::kAgree) ++kept;
  }
  write_lines(config.out_dir / artifact::kConsensus, lines);
  ordered_json stats = {{"labeler", labeler},
                        {"total", outcomes.size()},
                        {"kept", kept},
                        {"disagreements", outcomes.size() - kept}};
  if (!config.review_dir.empty()) {
    auto queue = open_review_queue(config);
    std::size_t added = 0;
    {
      const auto corpus = ingest_corpus(require(config, artifact::kCorpus, "ingest"));
      added = queue->enqueue_disagreements(outcomes, corpus);
      if (config.simulate_human_accuracy) {
        CorpusIndex index(corpus);
        const std::string annotator = "sim-human";
        std::size_t labeled = 0;
        while (auto item = queue->claim(annotator)) {
          const auto& t = index.at(item->table_id);
          if (!t.true_label) {
            throw Error(ErrorCode::kMissingDependency,
                        "simulated review needs true labels (" + t.table_id + ")");
          }
          const bool label = simulate_human_label(*t.true_label, *config.simulate_human_accuracy,
                                                  config.human_seed, annotator, t.table_id);
          queue->submit_label(annotator, t.table_id, label ? Decision::kSoe : Decision::kNonSoe);
          ++labeled;
        }
        stats["simulated_human_labels"] = labeled;
      }
      queue->write_snapshot();
    }
    stats["enqueued"] = added;
    stats["unresolved"] = queue->unresolved();
  }
  manifest.record("filter", config, {ann_path}, {std::string(artifact::kConsensus)},
                  {{"human", config.human_seed}}, {{"labeler_id", labeler}}, stats);
  return stats;
}

ordered_json stage_assemble(const RunConfig& config, Manifest& manifest) {
  const auto corpus_path = require(config, artifact::kCorpus, "ingest");
  const auto consensus_path = require(config, artifact::kConsensus, "filter");
  const Corpus corpus = ingest_corpus(corpus_path);
  const auto outcomes = read_outcomes(consensus_path);

  std::map<std::string, bool> human;
  std::size_t disagreements = 0;
  for (const auto& o : outcomes) disagreements += o.status == ConsensusStatus::kDisagree;
  if (config.policy == LabelingPolicy::kHybrid) {
    auto queue = open_review_queue(config);
    human = queue->export_human_labels();
    std::size_t missing = 0;
    for (const auto& o : outcomes) {
      if (o.status == ConsensusStatus::kDisagree && !human.count(o.table_id)) ++missing;
    }
    if (missing > 0) {
      throw Error(ErrorCode::kMissingDependency,
                  std::to_string(missing) + " unresolved review items");
    }
  }
  const auto labels = apply_policy(config.policy, outcomes, or_rule_labels(outcomes), human);

  std::vector<std::string> ids;
  for (const auto& doc : corpus) ids.push_back(doc.protocol_id);
  const SplitSizes sizes = config.split.total() == 0 ? default_split(ids.size()) : config.split;
  const auto split = split_protocols(ids, sizes, config.split_seed);
  write_file_atomic(config.out_dir / artifact::kSplit, split.to_json());

  std::vector<std::string> label_lines;
  std::size_t n_human = 0;
  for (const auto& l : labels) {
    label_lines.push_back(labeled_to_json(l));
    n_human += l.label_source == LabelSource::kHuman;
  }
  write_lines(config.out_dir / artifact::kLabels, label_lines);

  const auto examples = assemble_dataset(labels, corpus, split, config.views);
  std::map<std::string, std::vector<std::string>> by_split;
  for (const auto& ex : examples) by_split[ex.split].push_back(example_to_json(ex));
  write_lines(config.out_dir / artifact::kTrainSet, by_split["TRAIN"]);
  write_lines(config.out_dir / artifact::kValidationSet, by_split["VALIDATION"]);
  write_lines(config.out_dir / artifact::kTestSet, by_split["TEST"]);

  ordered_json stats = {{"labels", labels.size()},
                        {"human_labels", n_human},
                        {"disagreements", disagreements},
                        {"examples",
                         {{"train", by_split["TRAIN"].size()},
                          {"validation", by_split["VALIDATION"].size()},
                          {"test", by_split["TEST"].size()}}}};
  ordered_json params = {{"policy", to_string(config.policy)},
                         {"split", {{"train", sizes.train},
                                    {"validation", sizes.validation},
                                    {"test", sizes.test}}},
                         {"views", config.views == ViewChoice::kJson   ? "JSON"
                                   : config.views == ViewChoice::kText ? "TEXT"
                                                                       : "BOTH"}};
  manifest.record("assemble", config, {corpus_path, consensus_path},
                  {std::string(artifact::kSplit), std::string(artifact::kLabels),
                   std::string(artifact::kTrainSet), std::string(artifact::kValidationSet),
                   std::string(artifact::kTestSet)},
                  {{"split", config.split_seed}}, params, stats);
  return stats;
}

ordered_json stage_train(const RunConfig& config, Manifest& manifest) {
  const auto train_path = require(config, artifact::kTrainSet, "assemble");
  std::vector<FineTuneExample> examples;
  for (const auto& line : read_lines(train_path)) {
    if (!line.empty()) examples.push_back(example_from_json(line));
  }
  if (examples.empty()) throw Error(ErrorCode::kEmptySet, "training set is empty");
  const auto model = train(training_examples(examples, config.feature_dim), config.train);
  model.save(config.out_dir / artifact::kModel);
  std::size_t positives = 0;
  for (const auto& ex : examples) positives += ex.target == "YES";
  ordered_json stats = {{"examples", examples.size()},
                        {"positives", positives},
                        {"initial_loss", model.loss_trace.front()},
                        {"final_loss", model.loss_trace.back()}};
  ordered_json params = {{"feature_dim", config.feature_dim},
                         {"epochs", config.train.epochs},
                         {"learning_rate", config.train.learning_rate},
                         {"l2", config.train.l2}};
  manifest.record("train", config, {train_path}, {std::string(artifact::kModel)},
                  {{"init", config.train.seed}}, params, stats);
  return stats;
}

ordered_json stage_evaluate(const RunConfig& config, Manifest& manifest) {
  const auto model_path = require(config, artifact::kModel, "train");
  const auto corpus_path = require(config, artifact::kCorpus, "ingest");
  const auto split_path = require(config, artifact::kSplit, "assemble");
  const auto model = LinearModel::load(model_path);
  const Corpus corpus = ingest_corpus(corpus_path);
  const auto split = SplitAssignment::from_json(read_file(split_path));

  std::vector<EvalItem> items;
  std::vector<std::string> lines;
  for (const auto& doc : corpus) {
    auto it = split.assignment.find(doc.protocol_id);
    if (it == split.assignment.end() || it->second != SplitName::kTest) continue;
    for (const auto& t : doc.tables) {
      if (!t.true_label) {
        throw Error(ErrorCode::kMissingDependency, "ground truth missing for " + t.table_id);
      }
      const auto p = predict_table(model, t, config.views);
      items.push_back({p.label, *t.true_label, t.protocol_id});
      ordered_json j;
      j["table_id"] = t.table_id;
      j["protocol_id"] = t.protocol_id;
      j["score"] = p.score;
      j["prediction"] = p.label;
      j["truth"] = *t.true_label;
      lines.push_back(j.dump());
    }
  }
  if (items.empty()) throw Error(ErrorCode::kEmptySet, "test split has no tables");
  write_lines(config.out_dir / artifact::kPredictions, lines);

  BootstrapOptions opts;
  opts.replications = config.bootstrap_replications;
  opts.level = config.ci_level;
  opts.seed = config.bootstrap_seed;
  opts.mode = MetricMode::kMicro;
  const auto micro = evaluate_with_ci(items, opts);
  opts.mode = MetricMode::kMacroPerProtocol;
  const auto macro = evaluate_with_ci(items, opts);

  std::vector<MetricsReport> per_protocol;
  for (const auto& [_, c] : per_protocol_counts(items)) per_protocol.push_back(compute_metrics(c));
  const auto thresholds = protocol_threshold_report(per_protocol);

  ordered_json metrics;
  metrics["tables"] = items.size();
  metrics["protocols"] = per_protocol.size();
  metrics["micro"] = report_json(micro);
  metrics["macro"] = report_json(macro);
  metrics["protocol_thresholds"] = ordered_json::parse(thresholds.to_json());
  write_file_atomic(config.out_dir / artifact::kMetrics, metrics.dump(2) + "\n");
  write_file_atomic(config.out_dir / artifact::kMetricsCsv,
                    metrics_table_csv({{"proxy/micro", micro}, {"proxy/macro", macro}}));
  write_file_atomic(config.out_dir / artifact::kThresholdsCsv,
                    threshold_table_csv({{"proxy", thresholds}}));

  ordered_json stats = {{"tables", items.size()},
                        {"f1_micro", micro.f1},
                        {"f1_macro", macro.f1}};
  ordered_json params = {{"replications", config.bootstrap_replications},
                         {"level", config.ci_level}};
  manifest.record("evaluate", config, {model_path, corpus_path, split_path},
                  {std::string(artifact::kPredictions), std::string(artifact::kMetrics),
                   std::string(artifact::kMetricsCsv), std::string(artifact::kThresholdsCsv)},
                  {{"bootstrap", config.bootstrap_seed}}, params, stats);
  return stats;
}

Channel parse_channel(const std::string& s) {
  const auto pos = s.rfind(':');
  if (pos == std::string::npos || pos == 0) {
    throw Error(ErrorCode::kConfigError, "channel must be labeler:VIEW, got '" + s + "'");
  }
  try {
    return {s.substr(0, pos), view_from_string(s.substr(pos + 1))};
  } catch (const Error&) {
    throw Error(ErrorCode::kConfigError, "bad channel view in '" + s + "'");
  }
}

ordered_json stage_ensemble(const RunConfig& config, Manifest& manifest) {
  const auto ann_path = require(config, artifact::kAnnotations, "annotate");
  const auto corpus_path = require(config, artifact::kCorpus, "ingest");
  const auto verdicts = verdict_table(AnnotationStore::read(ann_path));
  const Corpus corpus = ingest_corpus(corpus_path);
  CorpusIndex index(corpus);

  EnsembleConfig ens;
  if (config.channels.empty()) {
    std::set<Channel> present;
    for (const auto& [_, row] : verdicts) {
      for (const auto& [c, __] : row) present.insert(c);
    }
    ens.channels.assign(present.begin(), present.end());
  } else {
    for (const auto& c : config.channels) ens.channels.push_back(parse_channel(c));
  }
  ens.threshold = 1;
  ens.validate();

  std::map<std::string, bool> truth;
  std::map<std::string, std::string> protocol_of;
  for (const auto& [id, _] : verdicts) {
    const auto& t = index.at(id);
    if (!t.true_label) throw Error(ErrorCode::kMissingDependency, "ground truth missing for " + id);
    truth[id] = *t.true_label;
    protocol_of[id] = t.protocol_id;
  }
  const auto rows = sweep_thresholds(ens, verdicts, truth, config.eval_mode, protocol_of);
  write_file_atomic(config.out_dir / artifact::kEnsembleCsv, sweep_csv(rows));

  ordered_json best;
  for (const auto& r : rows) {
    if (best.is_null() || r.report.f1 > best["f1"].get<double>()) {
      best = {{"k", r.k}, {"f1", r.report.f1}};
    }
  }
  std::vector<std::string> names;
  for (const auto& c : ens.channels) names.push_back(c.name());
  ordered_json stats = {{"tables", truth.size()}, {"channels", names.size()}, {"best", best}};
  ordered_json params = {{"channels", names}, {"mode", to_string(config.eval_mode)}};
  manifest.record("ensemble", config, {ann_path, corpus_path},
                  {std::string(artifact::kEnsembleCsv)}, ordered_json::object(), params, stats);
  return stats;
}

}  // namespace

std::unique_ptr<ReviewQueue> open_review_queue(const RunConfig& config) {
  if (config.review_dir.empty()) throw Error(ErrorCode::kConfigError, "no review directory");
  ReviewConfig rc;
  rc.data_dir = config.resolve(config.review_dir);
  rc.claim_ttl = std::chrono::duration_cast<std::chrono::milliseconds>(config.claim_ttl);
  rc.roles = config.roles;
  return std::make_unique<ReviewQueue>(rc);
}

std::size_t enqueue_from_artifacts(ReviewQueue& queue, const RunConfig& config) {
  const auto consensus_path = config.out_dir / artifact::kConsensus;
  const auto corpus_path = config.out_dir / artifact::kCorpus;
  if (!std::filesystem::exists(consensus_path) || !std::filesystem::exists(corpus_path)) return 0;
  return queue.enqueue_disagreements(read_outcomes(consensus_path), ingest_corpus(corpus_path));
}

std::string run_stage(const std::string& stage, const RunConfig& config) {
  config.validate(stage);
  std::filesystem::create_directories(config.out_dir);
  Manifest manifest(config);
  ordered_json stats;
  if (stage == "ingest") stats = stage_ingest(config, manifest);
  else if (stage == "simulate") stats = stage_simulate(config, manifest);
  else if (stage == "screen") stats = stage_screen(config, manifest);
  else if (stage == "annotate") stats = stage_annotate(config, manifest);
  else if (stage == "filter") stats = stage_filter(config, manifest);
  else if (stage == "assemble") stats = stage_assemble(config, manifest);
  else if (stage == "train") stats = stage_train(config, manifest);
  else if (stage == "evaluate") stats = stage_evaluate(config, manifest);
  else if (stage == "ensemble") stats = stage_ensemble(config, manifest);
  else throw Error(ErrorCode::kConfigError, "stage '" + stage + "' is not a batch stage");
  return stats.dump();
}

}  // namespace soelabel

#include "soelabel/experiment.h"

#include <random>

#include "soelabel/error.h"
#include "soelabel/util.h"

namespace soelabel {

bool simulate_human_label(bool true_label, double accuracy, std::uint64_t seed,
                          const std::string& annotator_id, const std::string& table_id) {
  std::mt19937_64 rng(derive_seed(seed, fnv1a64(table_id, fnv1a64(annotator_id))));
  const bool correct = unit_double(rng) < accuracy;
  return correct ? true_label : !true_label;
}

std::string view_content(const TableRecord& table, ViewKind view) {
  if (view == ViewKind::kJson) return render_json_view(table).serialize();
  return render_text_view(table).text;
}

std::vector<TrainingExample> training_examples(const std::vector<FineTuneExample>& examples,
                                               std::size_t dim) {
  std::vector<TrainingExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    auto content = extract_view_content(ex.input_text);
    if (!content) {
      throw Error(ErrorCode::kMalformedLine, ex.table_id + ": input_text is not a known prompt");
    }
    out.push_back({featurize(content->second, dim), ex.target == "YES"});
  }
  return out;
}

Prediction predict_table(const LinearModel& model, const TableRecord& table,
                         ViewChoice views) {
  if (views == ViewChoice::kJson) {
    return predict(model, featurize(view_content(table, ViewKind::kJson), model.dim));
  }
  if (views == ViewChoice::kText) {
    return predict(model, featurize(view_content(table, ViewKind::kText), model.dim));
  }
  const double s =
      0.5 * (predict(model, featurize(view_content(table, ViewKind::kJson), model.dim)).score +
             predict(model, featurize(view_content(table, ViewKind::kText), model.dim)).score);
  return {s >= 0.5, s};
}

PolicyComparison run_policy_comparison(const PolicyComparisonConfig& config) {
  SyntheticCorpusSpec spec = config.corpus;
  spec.n_protocols = static_cast<int>(config.split.total());
  const Corpus corpus = generate_synthetic_corpus(spec);

  std::vector<std::string> ids;
  for (const auto& doc : corpus) ids.push_back(doc.protocol_id);
  const auto split = split_protocols(ids, config.split, config.corpus.seed);

  std::vector<const TableRecord*> train_tables;
  std::vector<const TableRecord*> test_tables;
  for (const auto& doc : corpus) {
    const auto s = split.assignment.at(doc.protocol_id);
    for (const auto& t : doc.tables) {
      if (s == SplitName::kTrain) train_tables.push_back(&t);
      if (s == SplitName::kTest) test_tables.push_back(&t);
    }
  }

  SimulatedLabeler labeler("sim-llm", config.noise);
  const auto annotations = annotate_tables(labeler, train_tables);
  const auto outcomes = consensus_all(annotations);
  const auto or_labels = or_rule_labels(outcomes);

  CorpusIndex index(corpus);
  std::map<std::string, bool> human;
  PolicyComparison out;
  out.train_tables = train_tables.size();
  for (const auto& o : outcomes) {
    if (o.status == ConsensusStatus::kDisagree) {
      ++out.disagreements;
      human[o.table_id] = simulate_human_label(*index.at(o.table_id).true_label,
                                               config.human_accuracy, config.noise.seed,
                                               "sim-human", o.table_id);
    }
  }

  for (auto policy : {LabelingPolicy::kAll, LabelingPolicy::kFiltered, LabelingPolicy::kHybrid}) {
    const auto labels = apply_policy(policy, outcomes, or_labels, human);
    PolicyResult r;
    r.n_labels = labels.size();
    std::size_t correct = 0;
    for (const auto& l : labels) {
      if (l.label_source == LabelSource::kHuman) ++r.n_human;
      if (l.label == *index.at(l.table_id).true_label) ++correct;
    }
    r.label_accuracy = labels.empty() ? 0.0
                                      : static_cast<double>(correct) /
                                            static_cast<double>(labels.size());
    const auto examples = assemble_dataset(labels, corpus, split, config.views);
    const auto model = train(training_examples(examples, config.feature_dim), config.train);

    std::vector<EvalItem> items;
    items.reserve(test_tables.size());
    for (const auto* t : test_tables) {
      items.push_back({predict_table(model, *t, config.views).label, *t->true_label,
                       t->protocol_id});
    }
    r.test_micro = evaluate(items, MetricMode::kMicro);
    r.test_macro = evaluate(items, MetricMode::kMacroPerProtocol);
    out.results[policy] = r;
  }
  return out;
}

}  // namespace soelabel

#include "soelabel/pipeline.h"

#include <algorithm>
#include <random>

#include "json.hpp"
#include "soelabel/error.h"
#include "soelabel/util.h"

namespace soelabel {

using nlohmann::json;
using nlohmann::ordered_json;

ScreeningResult screen_tables(Labeler& screener, const Corpus& corpus,
                              std::size_t max_in_flight) {
  std::vector<const TableRecord*> tables;
  for (const auto& doc : corpus) {
    for (const auto& t : doc.tables) tables.push_back(&t);
  }
  ScreeningResult result;
  result.annotations = annotate_tables(screener, tables,
                                       AnnotationSource::kBaseScreener, max_in_flight);
  for (const auto& o : consensus_all(result.annotations)) {
    if (classify_or_rule(o.json_verdict, o.text_verdict)) {
      result.screened.insert(o.table_id);
    }
  }
  return result;
}

ConsensusOutcome consensus(const Annotation& json_ann, const Annotation& text_ann) {
  if (json_ann.table_id != text_ann.table_id) {
    throw Error(ErrorCode::kTableIdMismatch,
                json_ann.table_id + " vs " + text_ann.table_id);
  }
  if (json_ann.view != ViewKind::kJson || text_ann.view != ViewKind::kText) {
    throw Error(ErrorCode::kViewMismatch, json_ann.table_id);
  }
  ConsensusOutcome out;
  out.table_id = json_ann.table_id;
  out.json_verdict = json_ann.verdict;
  out.text_verdict = text_ann.verdict;
  if (json_ann.verdict == text_ann.verdict && json_ann.verdict != Verdict::kUnknown) {
    out.status = ConsensusStatus::kAgree;
    out.agreed_label = json_ann.verdict == Verdict::kYes;
  }
  return out;
}

std::vector<ConsensusOutcome> consensus_all(const std::vector<Annotation>& annotations,
                                            const std::string& annotator_id) {
  std::map<std::string, std::pair<const Annotation*, const Annotation*>> by_table;
  for (const auto& a : annotations) {
    if (!annotator_id.empty() && a.annotator_id != annotator_id) continue;
    auto& slot = by_table[a.table_id];
    if (a.view == ViewKind::kJson) {
      slot.first = &a;
    } else if (a.view == ViewKind::kText) {
      slot.second = &a;
    }
  }
  std::vector<ConsensusOutcome> out;
  out.reserve(by_table.size());
  for (const auto& [id, pair] : by_table) {
    if (!pair.first || !pair.second) {
      throw Error(ErrorCode::kMissingVerdict,
                  id + (pair.first ? " TEXT_VIEW" : " JSON_VIEW"));
    }
    out.push_back(consensus(*pair.first, *pair.second));
  }
  return out;
}

std::string_view to_string(ConsensusStatus s) {
  return s == ConsensusStatus::kAgree ? "AGREE" : "DISAGREE";
}

std::string outcome_to_json(const ConsensusOutcome& o) {
  ordered_json j;
  j["table_id"] = o.table_id;
  j["status"] = to_string(o.status);
  j["agreed_label"] = o.agreed_label ? ordered_json(*o.agreed_label) : ordered_json();
  j["json_verdict"] = to_string(o.json_verdict);
  j["text_verdict"] = to_string(o.text_verdict);
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

ConsensusOutcome outcome_from_json(std::string_view line) {
  try {
    auto j = json::parse(line);
    ConsensusOutcome o;
    o.table_id = j.at("table_id").get<std::string>();
    const auto status = j.at("status").get<std::string>();
    if (status != "AGREE" && status != "DISAGREE") {
      throw Error(ErrorCode::kMalformedLine, "bad status " + status);
    }
    o.status = status == "AGREE" ? ConsensusStatus::kAgree : ConsensusStatus::kDisagree;
    if (!j.at("agreed_label").is_null()) o.agreed_label = j["agreed_label"].get<bool>();
    o.json_verdict = verdict_from_string(j.at("json_verdict").get<std::string>());
    o.text_verdict = verdict_from_string(j.at("text_verdict").get<std::string>());
    return o;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedLine, e.what());
  }
}

std::string_view to_string(LabelingPolicy p) {
  switch (p) {
    case LabelingPolicy::kAll: return "ALL";
    case LabelingPolicy::kFiltered: return "FILTERED";
    case LabelingPolicy::kHybrid: return "HYBRID";
  }
  return "ALL";
}

std::string_view to_string(LabelSource s) {
  switch (s) {
    case LabelSource::kLlmConsensus: return "LLM_CONSENSUS";
    case LabelSource::kLlmOrRule: return "LLM_OR_RULE";
    case LabelSource::kHuman: return "HUMAN";
  }
  return "LLM_CONSENSUS";
}

LabelingPolicy policy_from_string(std::string_view s) {
  std::string up(s);
  std::transform(up.begin(), up.end(), up.begin(), ::toupper);
  if (up == "ALL") return LabelingPolicy::kAll;
  if (up == "FILTERED") return LabelingPolicy::kFiltered;
  if (up == "HYBRID") return LabelingPolicy::kHybrid;
  throw Error(ErrorCode::kConfigError, "unknown policy '" + std::string(s) + "'");
}

std::map<std::string, bool> or_rule_labels(const std::vector<ConsensusOutcome>& outcomes) {
  std::map<std::string, bool> out;
  for (const auto& o : outcomes) {
    out[o.table_id] = classify_or_rule(o.json_verdict, o.text_verdict);
  }
  return out;
}

std::vector<LabeledTable> apply_policy(LabelingPolicy policy,
                                       const std::vector<ConsensusOutcome>& outcomes,
                                       const std::map<std::string, bool>& or_labels,
                                       const std::map<std::string, bool>& human_labels) {
  std::vector<LabeledTable> out;
  out.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    if (o.status == ConsensusStatus::kAgree) {
      out.push_back({o.table_id, *o.agreed_label, LabelSource::kLlmConsensus, policy});
      continue;
    }
    switch (policy) {
      case LabelingPolicy::kFiltered:
        break;
      case LabelingPolicy::kAll: {
        auto it = or_labels.find(o.table_id);
        if (it == or_labels.end()) throw Error(ErrorCode::kMissingVerdict, o.table_id);
        out.push_back({o.table_id, it->second, LabelSource::kLlmOrRule, policy});
        break;
      }
      case LabelingPolicy::kHybrid: {
        auto it = human_labels.find(o.table_id);
        if (it == human_labels.end()) {
          throw Error(ErrorCode::kMissingHumanLabel, o.table_id);
        }
        out.push_back({o.table_id, it->second, LabelSource::kHuman, policy});
        break;
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.table_id < b.table_id; });
  return out;
}

std::string_view to_string(SplitName s) {
  switch (s) {
    case SplitName::kTrain: return "TRAIN";
    case SplitName::kValidation: return "VALIDATION";
    case SplitName::kTest: return "TEST";
  }
  return "TRAIN";
}

SplitName split_from_string(std::string_view s) {
  if (s == "TRAIN") return SplitName::kTrain;
  if (s == "VALIDATION") return SplitName::kValidation;
  if (s == "TEST") return SplitName::kTest;
  throw Error(ErrorCode::kMalformedLine, "bad split '" + std::string(s) + "'");
}

std::string SplitAssignment::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["sizes"] = {{"train", sizes.train},
                {"validation", sizes.validation},
                {"test", sizes.test}};
  ordered_json a = ordered_json::object();
  for (const auto& [id, s] : assignment) a[id] = to_string(s);
  j["assignment"] = std::move(a);
  return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

SplitAssignment SplitAssignment::from_json(std::string_view text) {
  try {
    auto j = json::parse(text);
    SplitAssignment out;
    out.seed = j.at("seed").get<std::uint64_t>();
    out.sizes.train = j.at("sizes").at("train").get<std::size_t>();
    out.sizes.validation = j.at("sizes").at("validation").get<std::size_t>();
    out.sizes.test = j.at("sizes").at("test").get<std::size_t>();
    for (const auto& [id, s] : j.at("assignment").items()) {
      out.assignment[id] = split_from_string(s.get<std::string>());
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedLine, e.what());
  }
}

SplitAssignment split_protocols(std::vector<std::string> protocol_ids,
                                SplitSizes sizes, std::uint64_t seed) {
  if (sizes.total() != protocol_ids.size()) {
    throw Error(ErrorCode::kSizeMismatch,
                std::to_string(sizes.total()) + " requested, " +
                    std::to_string(protocol_ids.size()) + " protocols");
  }
  std::sort(protocol_ids.begin(), protocol_ids.end());
  if (std::adjacent_find(protocol_ids.begin(), protocol_ids.end()) != protocol_ids.end()) {
    throw Error(ErrorCode::kDuplicateId, "protocol ids must be unique");
  }
  std::mt19937_64 rng(derive_seed(seed, 0x5b117));
  // Fisher-Yates with the pinned index rule.
  for (std::size_t i = protocol_ids.size(); i > 1; --i) {
    std::swap(protocol_ids[i - 1], protocol_ids[uniform_index(rng, i)]);
  }
  SplitAssignment out;
  out.seed = seed;
  out.sizes = sizes;
  for (std::size_t i = 0; i < protocol_ids.size(); ++i) {
    SplitName s = i < sizes.train ? SplitName::kTrain
                  : i < sizes.train + sizes.validation ? SplitName::kValidation
                                                       : SplitName::kTest;
    out.assignment[protocol_ids[i]] = s;
  }
  return out;
}

ViewChoice view_choice_from_string(std::string_view s) {
  std::string up(s);
  std::transform(up.begin(), up.end(), up.begin(), ::toupper);
  if (up == "JSON" || up == "JSON_VIEW") return ViewChoice::kJson;
  if (up == "TEXT" || up == "TEXT_VIEW") return ViewChoice::kText;
  if (up == "BOTH") return ViewChoice::kBoth;
  throw Error(ErrorCode::kConfigError, "unknown view choice '" + std::string(s) + "'");
}

std::vector<FineTuneExample> assemble_dataset(const std::vector<LabeledTable>& labels,
                                              const Corpus& corpus,
                                              const SplitAssignment& split,
                                              ViewChoice view_choice) {
  CorpusIndex index(corpus);
  std::vector<ViewKind> views;
  if (view_choice != ViewChoice::kText) views.push_back(ViewKind::kJson);
  if (view_choice != ViewChoice::kJson) views.push_back(ViewKind::kText);

  std::vector<FineTuneExample> out;
  out.reserve(labels.size() * views.size());
  for (const auto& l : labels) {
    const auto* table = index.find(l.table_id);
    if (!table) throw Error(ErrorCode::kUnknownTable, l.table_id);
    auto s = split.assignment.find(table->protocol_id);
    if (s == split.assignment.end()) {
      throw Error(ErrorCode::kUnknownTable,
                  l.table_id + ": protocol " + table->protocol_id + " has no split");
    }
    for (auto v : views) {
      FineTuneExample ex;
      ex.input_text = prompt_for(*table, v);
      ex.target = l.label ? "YES" : "NO";
      ex.table_id = l.table_id;
      ex.protocol_id = table->protocol_id;
      ex.split = to_string(s->second);
      ex.view = v;
      out.push_back(std::move(ex));
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.protocol_id, a.table_id, a.view) <
           std::tie(b.protocol_id, b.table_id, b.view);
  });
  return out;
}

std::string example_to_json(const FineTuneExample& ex) {
  ordered_json j;
  j["input_text"] = ex.input_text;
  j["target"] = ex.target;
  j["table_id"] = ex.table_id;
  j["protocol_id"] = ex.protocol_id;
  j["split"] = ex.split;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

FineTuneExample example_from_json(std::string_view line) {
  try {
    auto j = json::parse(line);
    FineTuneExample ex;
    ex.input_text = j.at("input_text").get<std::string>();
    ex.target = j.at("target").get<std::string>();
    if (ex.target != "YES" && ex.target != "NO") {
      throw Error(ErrorCode::kMalformedLine, "target must be YES or NO");
    }
    ex.table_id = j.at("table_id").get<std::string>();
    ex.protocol_id = j.at("protocol_id").get<std::string>();
    ex.split = j.at("split").get<std::string>();
    split_from_string(ex.split);
    if (auto c = extract_view_content(ex.input_text)) ex.view = c->first;
    return ex;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedLine, e.what());
  }
}

std::optional<std::pair<ViewKind, std::string>> extract_view_content(
    const std::string& prompt) {
  for (const auto* tmpl : {&PromptTemplate::json_prompt(), &PromptTemplate::text_prompt()}) {
    const auto pos = tmpl->body.find(tmpl->slot());
    const std::string_view prefix(tmpl->body.data(), pos);
    const std::string_view suffix(tmpl->body.data() + pos + tmpl->slot().size(),
                                  tmpl->body.size() - pos - tmpl->slot().size());
    if (prompt.size() >= prefix.size() + suffix.size() &&
        std::string_view(prompt).substr(0, prefix.size()) == prefix &&
        std::string_view(prompt).substr(prompt.size() - suffix.size()) == suffix) {
      ViewKind kind =
          tmpl->kind == PromptKind::kJsonPrompt ? ViewKind::kJson : ViewKind::kText;
      return std::make_pair(kind, prompt.substr(prefix.size(), prompt.size() -
                                                                 prefix.size() -
                                                                 suffix.size()));
    }
  }
  return std::nullopt;
}

}  // namespace soelabel

#include "soelabel/labeling.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "soelabel/error.h"
#include "soelabel/util.h"

namespace soelabel {

#include "prompt_templates.inc"

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kYes: return "YES";
    case Verdict::kNo: return "NO";
    case Verdict::kUnknown: return "UNKNOWN";
  }
  return "UNKNOWN";
}

std::string_view to_string(AnnotationSource s) {
  switch (s) {
    case AnnotationSource::kBaseScreener: return "BASE_SCREENER";
    case AnnotationSource::kLlmLabeler: return "LLM_LABELER";
    case AnnotationSource::kHumanNonexpert: return "HUMAN_NONEXPERT";
    case AnnotationSource::kHumanExpert: return "HUMAN_EXPERT";
  }
  return "LLM_LABELER";
}

std::string_view to_string(ViewKind v) {
  switch (v) {
    case ViewKind::kJson: return "JSON_VIEW";
    case ViewKind::kText: return "TEXT_VIEW";
    case ViewKind::kNa: return "NA";
  }
  return "NA";
}

Verdict verdict_from_string(std::string_view s) {
  if (s == "YES") return Verdict::kYes;
  if (s == "NO") return Verdict::kNo;
  if (s == "UNKNOWN") return Verdict::kUnknown;
  throw Error(ErrorCode::kMalformedLine, "bad verdict '" + std::string(s) + "'");
}

AnnotationSource source_from_string(std::string_view s) {
  for (auto src : {AnnotationSource::kBaseScreener, AnnotationSource::kLlmLabeler,
                   AnnotationSource::kHumanNonexpert,
                   AnnotationSource::kHumanExpert}) {
    if (to_string(src) == s) return src;
  }
  throw Error(ErrorCode::kMalformedLine, "bad source '" + std::string(s) + "'");
}

ViewKind view_from_string(std::string_view s) {
  for (auto v : {ViewKind::kJson, ViewKind::kText, ViewKind::kNa}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::kMalformedLine, "bad view '" + std::string(s) + "'");
}

std::string annotation_to_json(const Annotation& a) {
  ordered_json j;
  j["table_id"] = a.table_id;
  j["source"] = to_string(a.source);
  j["view"] = to_string(a.view);
  j["verdict"] = to_string(a.verdict);
  j["annotator_id"] = a.annotator_id;
  j["timestamp"] = a.timestamp;
  j["raw_response"] = a.raw_response ? ordered_json(*a.raw_response) : ordered_json();
  if (a.error) j["error"] = *a.error;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

Annotation annotation_from_json(std::string_view line) {
  try {
    auto j = json::parse(line);
    Annotation a;
    a.table_id = j.at("table_id").get<std::string>();
    a.source = source_from_string(j.at("source").get<std::string>());
    a.view = view_from_string(j.at("view").get<std::string>());
    a.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    a.annotator_id = j.at("annotator_id").get<std::string>();
    a.timestamp = j.at("timestamp").get<std::int64_t>();
    if (j.contains("raw_response") && !j["raw_response"].is_null()) {
      a.raw_response = j["raw_response"].get<std::string>();
    }
    if (j.contains("error") && !j["error"].is_null()) {
      a.error = j["error"].get<std::string>();
    }
    return a;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedLine, e.what());
  }
}

// ---------------------------------------------------------------------------

const PromptTemplate& PromptTemplate::json_prompt() {
  static const PromptTemplate t{PromptKind::kJsonPrompt,
                                std::string(kJsonPromptBody)};
  return t;
}

const PromptTemplate& PromptTemplate::text_prompt() {
  static const PromptTemplate t{PromptKind::kTextPrompt,
                                std::string(kTextPromptBody)};
  return t;
}

std::string build_prompt(const PromptTemplate& tmpl, const RenderedView& view) {
  std::string content;
  if (tmpl.kind == PromptKind::kJsonPrompt) {
    const auto* jv = std::get_if<JsonView>(&view);
    if (!jv) throw Error(ErrorCode::kKindMismatch, "JSON prompt needs a JSON view");
    content = jv->serialize();
  } else {
    const auto* tv = std::get_if<TextView>(&view);
    if (!tv) throw Error(ErrorCode::kKindMismatch, "text prompt needs a text view");
    content = tv->text;
  }
  const auto slot = tmpl.slot();
  const auto pos = tmpl.body.find(slot);
  if (pos == std::string::npos) {
    throw Error(ErrorCode::kInvalidSpec, "template has no slot");
  }
  std::string out;
  out.reserve(tmpl.body.size() + content.size());
  out.append(tmpl.body, 0, pos);
  out.append(content);
  out.append(tmpl.body, pos + slot.size());
  return out;
}

std::string prompt_for(const TableRecord& table, ViewKind view) {
  if (view == ViewKind::kJson) {
    return build_prompt(PromptTemplate::json_prompt(), render_json_view(table));
  }
  if (view == ViewKind::kText) {
    return build_prompt(PromptTemplate::text_prompt(), render_text_view(table));
  }
  throw Error(ErrorCode::kViewMismatch, "no prompt for NA view");
}

Verdict parse_verdict(std::string_view raw) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t i = 0;
  // Leading punctuation and whitespace (e.g. "**YES**", "\"no\"").
  while (i < raw.size() && (is_space(raw[i]) || std::ispunct(static_cast<unsigned char>(raw[i])))) {
    ++i;
  }
  std::size_t j = i;
  while (j < raw.size() && !is_space(raw[j])) ++j;
  std::string token(raw.substr(i, j - i));
  while (!token.empty() && std::ispunct(static_cast<unsigned char>(token.back()))) {
    token.pop_back();
  }
  std::transform(token.begin(), token.end(), token.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (token == "yes") return Verdict::kYes;
  if (token == "no") return Verdict::kNo;
  return Verdict::kUnknown;
}

// ---------------------------------------------------------------------------

HttpLabelerConfig HttpLabelerConfig::from_env() {
  HttpLabelerConfig cfg;
  if (const char* url = std::getenv("LABELER_URL")) cfg.url = url;
  if (const char* tok = std::getenv("LABELER_TOKEN")) cfg.token = tok;
  return cfg;
}

HttpLabeler::HttpLabeler(std::string id, HttpLabelerConfig config)
    : id_(std::move(id)), config_(std::move(config)) {
  if (config_.url.empty()) throw Error(ErrorCode::kConfigError, "labeler url is empty");
  if (config_.max_attempts < 1) {
    throw Error(ErrorCode::kConfigError, "max_attempts must be >= 1");
  }
  // Split "scheme://host:port/base/path" into client address and path prefix.
  auto scheme_end = config_.url.find("://");
  auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = config_.url.find('/', host_start);
  if (path_start == std::string::npos) {
    scheme_host_port_ = config_.url;
    path_ = "";
  } else {
    scheme_host_port_ = config_.url.substr(0, path_start);
    path_ = config_.url.substr(path_start);
  }
  while (!path_.empty() && path_.back() == '/') path_.pop_back();
  path_ += "/complete";
}

std::string HttpLabeler::complete(const TableRecord& table, ViewKind view,
                                  const std::string& prompt) {
  (void)view;
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  if (!config_.token.empty()) client.set_bearer_token_auth(config_.token);

  const std::string body = json{{"prompt", prompt}}.dump(
      -1, ' ', false, json::error_handler_t::replace);
  std::string last_error;
  auto backoff = config_.initial_backoff;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    auto res = client.Post(path_, body, "application/json");
    if (res && res->status == 200) {
      try {
        return json::parse(res->body).at("text").get<std::string>();
      } catch (const json::exception& e) {
        last_error = std::string("bad response body: ") + e.what();
      }
    } else if (res) {
      last_error = "HTTP " + std::to_string(res->status);
    } else {
      last_error = httplib::to_string(res.error());
    }
    if (attempt < config_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw Error(ErrorCode::kTransportError, table.table_id + ": " + last_error);
}

// ---------------------------------------------------------------------------

void NoiseModel::validate() const {
  for (double v : {sensitivity_json, specificity_json, sensitivity_text,
                   specificity_text, cross_view_correlation}) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::kInvalidSpec, "noise parameters must lie in [0,1]");
    }
  }
}

std::pair<Verdict, Verdict> simulate_verdicts(const NoiseModel& model,
                                              bool true_label,
                                              const std::string& table_id) {
  std::mt19937_64 rng(derive_seed(model.seed, fnv1a64(table_id)));
  // Always consume four draws so each stream position has a fixed meaning.
  const double couple = unit_double(rng);
  const double shared = unit_double(rng);
  const double own_json = unit_double(rng);
  const double own_text = unit_double(rng);

  const double err_json =
      true_label ? 1.0 - model.sensitivity_json : 1.0 - model.specificity_json;
  const double err_text =
      true_label ? 1.0 - model.sensitivity_text : 1.0 - model.specificity_text;
  const bool coupled = couple < model.cross_view_correlation;
  const bool wrong_json = (coupled ? shared : own_json) < err_json;
  const bool wrong_text = (coupled ? shared : own_text) < err_text;
  auto verdict = [&](bool wrong) {
    return (true_label != wrong) ? Verdict::kYes : Verdict::kNo;
  };
  return {verdict(wrong_json), verdict(wrong_text)};
}

SimulatedLabeler::SimulatedLabeler(std::string id, NoiseModel model)
    : id_(std::move(id)), model_(model) {
  model_.validate();
}

std::string SimulatedLabeler::complete(const TableRecord& table, ViewKind view,
                                       const std::string& prompt) {
  (void)prompt;
  if (!table.true_label) {
    throw Error(ErrorCode::kConfigError,
                "simulated labeler needs true_label on " + table.table_id);
  }
  auto [json_v, text_v] = simulate_verdicts(model_, *table.true_label, table.table_id);
  return std::string(to_string(view == ViewKind::kJson ? json_v : text_v));
}

std::pair<Annotation, Annotation> annotate_table(Labeler& labeler,
                                                 const TableRecord& table,
                                                 AnnotationSource source,
                                                 std::int64_t base_ts) {
  auto one = [&](ViewKind view, std::int64_t ts) {
    Annotation a;
    a.table_id = table.table_id;
    a.source = source;
    a.view = view;
    a.annotator_id = labeler.id();
    a.timestamp = ts;
    try {
      std::string raw = labeler.complete(table, view, prompt_for(table, view));
      a.verdict = parse_verdict(raw);
      if (a.verdict == Verdict::kUnknown) {
        std::cerr << "unparseable labeler output for " << table.table_id << " "
                  << to_string(view) << "\n";
      }
      a.raw_response = std::move(raw);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTransportError) throw;
      a.verdict = Verdict::kUnknown;
      a.error = e.what();
    }
    return a;
  };
  auto json_ann = one(ViewKind::kJson, base_ts);
  auto text_ann = one(ViewKind::kText, base_ts + 1);
  return {std::move(json_ann), std::move(text_ann)};
}

std::vector<Annotation> annotate_tables(
    Labeler& labeler, const std::vector<const TableRecord*>& tables,
    AnnotationSource source, std::size_t max_in_flight) {
  std::vector<const TableRecord*> ordered = tables;
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->table_id < b->table_id; });
  std::vector<Annotation> out(ordered.size() * 2);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= ordered.size()) return;
      try {
        auto [j, t] = annotate_table(labeler, *ordered[i], source,
                                     static_cast<std::int64_t>(2 * i));
        out[2 * i] = std::move(j);
        out[2 * i + 1] = std::move(t);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(ordered.size());
        return;
      }
    }
  };
  const std::size_t n_threads =
      std::max<std::size_t>(1, std::min(max_in_flight, ordered.size()));
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

// ---------------------------------------------------------------------------

AnnotationStore::AnnotationStore(std::filesystem::path path)
    : path_(std::move(path)) {}

void AnnotationStore::append(const Annotation& a) {
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot append " + path_.string());
  out << annotation_to_json(a) << '\n';
}

void AnnotationStore::append_all(const std::vector<Annotation>& items) {
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot append " + path_.string());
  for (const auto& a : items) out << annotation_to_json(a) << '\n';
}

std::vector<Annotation> AnnotationStore::load() const {
  std::lock_guard lock(mu_);
  if (!std::filesystem::exists(path_)) return {};
  return read(path_);
}

std::vector<Annotation> AnnotationStore::read(const std::filesystem::path& path) {
  std::vector<Annotation> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      out.push_back(annotation_from_json(lines[i]));
    } catch (const Error& e) {
      throw Error(ErrorCode::kMalformedLine,
                  path.string() + " line " + std::to_string(i + 1) + ": " + e.detail());
    }
  }
  return out;
}

void AnnotationStore::write(const std::filesystem::path& path,
                            const std::vector<Annotation>& items) {
  std::string out;
  for (const auto& a : items) {
    out += annotation_to_json(a);
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace soelabel

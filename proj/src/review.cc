#include "soelabel/review.h"

#include <algorithm>
#include <fstream>
#include <mutex>

#include "json.hpp"
#include "soelabel/error.h"
#include "soelabel/util.h"

namespace soelabel {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string dump(const ordered_json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

}  // namespace

std::string_view to_string(ReviewStatus s) {
  switch (s) {
    case ReviewStatus::kPending: return "PENDING";
    case ReviewStatus::kClaimed: return "CLAIMED";
    case ReviewStatus::kLabeled: return "LABELED";
    case ReviewStatus::kEscalated: return "ESCALATED";
    case ReviewStatus::kResolved: return "RESOLVED";
  }
  return "PENDING";
}

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::kSoe: return "SOE";
    case Decision::kNonSoe: return "NON_SOE";
    case Decision::kUnknown: return "UNKNOWN";
  }
  return "UNKNOWN";
}

std::string_view to_string(ReviewEventKind k) {
  switch (k) {
    case ReviewEventKind::kEnqueued: return "ENQUEUED";
    case ReviewEventKind::kClaimed: return "CLAIMED";
    case ReviewEventKind::kClaimExpired: return "CLAIM_EXPIRED";
    case ReviewEventKind::kLabeled: return "LABELED";
    case ReviewEventKind::kMarkedUnknown: return "MARKED_UNKNOWN";
    case ReviewEventKind::kEscalated: return "ESCALATED";
    case ReviewEventKind::kExpertResolved: return "EXPERT_RESOLVED";
    case ReviewEventKind::kOverridden: return "OVERRIDDEN";
  }
  return "ENQUEUED";
}

ReviewStatus review_status_from_string(std::string_view s) {
  for (auto v : {ReviewStatus::kPending, ReviewStatus::kClaimed, ReviewStatus::kLabeled,
                 ReviewStatus::kEscalated, ReviewStatus::kResolved}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::kMalformedLine, "bad status '" + std::string(s) + "'");
}

Decision decision_from_string(std::string_view s) {
  if (s == "SOE") return Decision::kSoe;
  if (s == "NON_SOE") return Decision::kNonSoe;
  if (s == "UNKNOWN") return Decision::kUnknown;
  throw Error(ErrorCode::kMalformedLine, "bad decision '" + std::string(s) + "'");
}

ReviewEventKind review_event_kind_from_string(std::string_view s) {
  for (auto k : {ReviewEventKind::kEnqueued, ReviewEventKind::kClaimed,
                 ReviewEventKind::kClaimExpired, ReviewEventKind::kLabeled,
                 ReviewEventKind::kMarkedUnknown, ReviewEventKind::kEscalated,
                 ReviewEventKind::kExpertResolved, ReviewEventKind::kOverridden}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::kMalformedLine, "bad event kind '" + std::string(s) + "'");
}

namespace {

ordered_json item_json(const ReviewItem& item) {
  ordered_json j;
  j["table_id"] = item.table_id;
  j["status"] = to_string(item.status);
  j["rendered_json_view"] = item.rendered_json_view;
  j["rendered_text_view"] = item.rendered_text_view;
  j["llm_verdicts"] = {{"json_view", to_string(item.llm_verdicts.first)},
                       {"text_view", to_string(item.llm_verdicts.second)}};
  if (item.claim) {
    j["claim"] = {{"annotator_id", item.claim->annotator_id},
                  {"expiry_ms", item.claim->expiry_ms}};
  } else {
    j["claim"] = nullptr;
  }
  if (item.resolution) {
    j["resolution"] = {{"label", item.resolution->label},
                       {"source", to_string(item.resolution->source)},
                       {"actor_id", item.resolution->actor_id},
                       {"timestamp", item.resolution->timestamp}};
  } else {
    j["resolution"] = nullptr;
  }
  j["enqueue_seq"] = item.enqueue_seq;
  ordered_json subs = ordered_json::array();
  for (const auto& [actor, d] : item.submissions) {
    subs.push_back({{"actor_id", actor}, {"decision", to_string(d)}});
  }
  j["submissions"] = std::move(subs);
  return j;
}

ReviewItem item_from_json(const json& j) {
  ReviewItem item;
  item.table_id = j.at("table_id").get<std::string>();
  item.status = review_status_from_string(j.at("status").get<std::string>());
  item.rendered_json_view = j.at("rendered_json_view").get<std::string>();
  item.rendered_text_view = j.at("rendered_text_view").get<std::string>();
  item.llm_verdicts = {
      verdict_from_string(j.at("llm_verdicts").at("json_view").get<std::string>()),
      verdict_from_string(j.at("llm_verdicts").at("text_view").get<std::string>())};
  if (!j.at("claim").is_null()) {
    item.claim = Claim{j["claim"].at("annotator_id").get<std::string>(),
                       j["claim"].at("expiry_ms").get<std::int64_t>()};
  }
  if (!j.at("resolution").is_null()) {
    const auto& r = j["resolution"];
    item.resolution = Resolution{r.at("label").get<bool>(),
                                 source_from_string(r.at("source").get<std::string>()),
                                 r.at("actor_id").get<std::string>(),
                                 r.at("timestamp").get<std::int64_t>()};
  }
  item.enqueue_seq = j.at("enqueue_seq").get<std::uint64_t>();
  for (const auto& s : j.at("submissions")) {
    item.submissions.emplace_back(s.at("actor_id").get<std::string>(),
                                  decision_from_string(s.at("decision").get<std::string>()));
  }
  return item;
}

bool decision_label(Decision d) { return d == Decision::kSoe; }

// The single state transition function; live operations and replay both go
// through it.
void apply_event(std::map<std::string, ReviewItem>& items, const ReviewEvent& e) {
  const json payload = e.payload.empty() ? json::object() : json::parse(e.payload);
  if (e.kind == ReviewEventKind::kEnqueued) {
    ReviewItem item;
    item.table_id = e.table_id;
    item.rendered_json_view = payload.at("json_view").get<std::string>();
    item.rendered_text_view = payload.at("text_view").get<std::string>();
    item.llm_verdicts = {verdict_from_string(payload.at("json_verdict").get<std::string>()),
                         verdict_from_string(payload.at("text_verdict").get<std::string>())};
    item.enqueue_seq = e.sequence_no;
    items[e.table_id] = std::move(item);
    return;
  }
  auto it = items.find(e.table_id);
  if (it == items.end()) {
    throw Error(ErrorCode::kUnknownItem, "event " + std::to_string(e.sequence_no) +
                                             " references " + e.table_id);
  }
  ReviewItem& item = it->second;
  switch (e.kind) {
    case ReviewEventKind::kEnqueued:
      break;
    case ReviewEventKind::kClaimed:
      item.status = ReviewStatus::kClaimed;
      item.claim = Claim{e.actor_id, payload.at("expiry_ms").get<std::int64_t>()};
      break;
    case ReviewEventKind::kClaimExpired:
      item.status = ReviewStatus::kPending;
      item.claim.reset();
      break;
    case ReviewEventKind::kLabeled: {
      const auto d = decision_from_string(payload.at("decision").get<std::string>());
      item.submissions.emplace_back(e.actor_id, d);
      if (payload.at("applied").get<bool>()) {
        item.status = ReviewStatus::kLabeled;
        item.claim.reset();
        item.resolution = Resolution{decision_label(d),
                                     source_from_string(payload.at("source").get<std::string>()),
                                     e.actor_id, e.timestamp};
      }
      break;
    }
    case ReviewEventKind::kMarkedUnknown:
      item.submissions.emplace_back(e.actor_id, Decision::kUnknown);
      item.claim.reset();
      break;
    case ReviewEventKind::kEscalated:
      item.status = ReviewStatus::kEscalated;
      item.claim.reset();
      break;
    case ReviewEventKind::kExpertResolved: {
      const auto d = decision_from_string(payload.at("decision").get<std::string>());
      item.submissions.emplace_back(e.actor_id, d);
      item.status = ReviewStatus::kResolved;
      item.resolution =
          Resolution{decision_label(d), AnnotationSource::kHumanExpert, e.actor_id, e.timestamp};
      break;
    }
    case ReviewEventKind::kOverridden: {
      const auto d = decision_from_string(payload.at("decision").get<std::string>());
      item.resolution =
          Resolution{decision_label(d), AnnotationSource::kHumanExpert, e.actor_id, e.timestamp};
      break;
    }
  }
}

}  // namespace

std::string review_item_to_json(const ReviewItem& item) { return dump(item_json(item)); }

std::string ReviewEvent::to_json() const {
  ordered_json j;
  j["sequence_no"] = sequence_no;
  j["kind"] = to_string(kind);
  j["table_id"] = table_id;
  j["actor_id"] = actor_id;
  j["payload"] = payload.empty() ? ordered_json::object() : ordered_json::parse(payload);
  j["timestamp"] = timestamp;
  return dump(j);
}

ReviewEvent ReviewEvent::from_json(std::string_view line) {
  try {
    auto j = ordered_json::parse(line);
    ReviewEvent e;
    e.sequence_no = j.at("sequence_no").get<std::uint64_t>();
    e.kind = review_event_kind_from_string(j.at("kind").get<std::string>());
    e.table_id = j.at("table_id").get<std::string>();
    e.actor_id = j.at("actor_id").get<std::string>();
    e.payload = dump(j.at("payload"));
    e.timestamp = j.at("timestamp").get<std::int64_t>();
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kMalformedLine, ex.what());
  }
}

bool RoleTable::may_annotate(const std::string& id) const {
  if (id.empty()) return false;
  return annotators.empty() || annotators.count(id) > 0 || experts.count(id) > 0;
}

std::string ReviewStats::to_json() const {
  ordered_json j;
  j["enqueued"] = enqueued;
  for (auto s : {ReviewStatus::kPending, ReviewStatus::kClaimed, ReviewStatus::kLabeled,
                 ReviewStatus::kEscalated, ReviewStatus::kResolved}) {
    auto it = by_status.find(s);
    j[std::string(to_string(s))] = it == by_status.end() ? 0 : it->second;
  }
  j["last_sequence"] = last_sequence;
  return dump(j);
}

// ---------------------------------------------------------------------------

ReviewQueue::ReviewQueue(ReviewConfig config) : config_(std::move(config)) {
  if (config_.claim_ttl.count() <= 0) {
    throw Error(ErrorCode::kConfigError, "claim TTL must be positive");
  }
  if (config_.data_dir.empty()) return;
  std::filesystem::create_directories(config_.data_dir);

  std::uint64_t snapshot_seq = 0;
  if (std::filesystem::exists(snapshot_path())) {
    try {
      auto j = json::parse(read_file(snapshot_path()));
      snapshot_seq = j.at("last_sequence").get<std::uint64_t>();
      for (const auto& item : j.at("items")) {
        auto parsed = item_from_json(item);
        items_[parsed.table_id] = std::move(parsed);
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedLine, "snapshot: " + std::string(e.what()));
    }
  }
  if (std::filesystem::exists(event_log_path())) {
    events_ = read_event_log(event_log_path());
  }
  std::uint64_t prev = 0;
  for (const auto& e : events_) {
    if (e.sequence_no <= prev) {
      throw Error(ErrorCode::kMalformedLine,
                  "event log sequence not increasing at " + std::to_string(e.sequence_no));
    }
    prev = e.sequence_no;
    if (e.sequence_no > snapshot_seq) apply_event(items_, e);
    if (e.kind == ReviewEventKind::kEnqueued) ++enqueue_counter_;
  }
  next_seq_ = std::max(prev, snapshot_seq) + 1;
}

std::filesystem::path ReviewQueue::event_log_path() const {
  return config_.data_dir / "events.jsonl";
}

std::filesystem::path ReviewQueue::snapshot_path() const {
  return config_.data_dir / "snapshot.json";
}

std::int64_t ReviewQueue::now() const {
  if (config_.clock) return config_.clock();
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

const ReviewEvent& ReviewQueue::record(ReviewEventKind kind, const std::string& table_id,
                                       const std::string& actor_id, std::string payload) {
  ReviewEvent e{next_seq_, kind, table_id, actor_id, std::move(payload), now()};
  if (!config_.data_dir.empty()) {
    std::ofstream out(event_log_path(), std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::kIoError, "cannot append event log");
    out << e.to_json() << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::kIoError, "event log write failed");
  }
  apply_event(items_, e);
  ++next_seq_;
  events_.push_back(std::move(e));
  if (!config_.data_dir.empty() && config_.snapshot_every > 0 &&
      ++since_snapshot_ >= config_.snapshot_every) {
    write_snapshot();
  }
  return events_.back();
}

void ReviewQueue::write_snapshot() {
  if (config_.data_dir.empty()) return;
  ordered_json j;
  j["last_sequence"] = next_seq_ - 1;
  ordered_json arr = ordered_json::array();
  for (const auto& [_, item] : items_) arr.push_back(item_json(item));
  j["items"] = std::move(arr);
  write_file_atomic(snapshot_path(), dump(j) + "\n");
  since_snapshot_ = 0;
}

std::size_t ReviewQueue::enqueue_disagreements(const std::vector<ConsensusOutcome>& outcomes,
                                               const Corpus& corpus) {
  CorpusIndex index(corpus);
  // Resolve every table before recording anything so failure is all-or-nothing.
  std::vector<std::pair<const ConsensusOutcome*, const TableRecord*>> todo;
  for (const auto& o : outcomes) {
    if (o.status != ConsensusStatus::kDisagree) continue;
    const auto* t = index.find(o.table_id);
    if (!t) throw Error(ErrorCode::kUnknownTable, o.table_id);
    todo.emplace_back(&o, t);
  }
  std::unique_lock lock(mu_);
  std::size_t added = 0;
  for (const auto& [o, t] : todo) {
    if (items_.count(o->table_id)) continue;
    ordered_json payload;
    payload["json_view"] = render_json_view(*t).serialize();
    payload["text_view"] = render_text_view(*t).text;
    payload["json_verdict"] = to_string(o->json_verdict);
    payload["text_verdict"] = to_string(o->text_verdict);
    record(ReviewEventKind::kEnqueued, o->table_id, "system", dump(payload));
    ++enqueue_counter_;
    ++added;
  }
  return added;
}

std::size_t ReviewQueue::expire_locked() {
  const auto t = now();
  std::vector<std::string> expired;
  for (const auto& [id, item] : items_) {
    if (item.status == ReviewStatus::kClaimed && item.claim && item.claim->expiry_ms <= t) {
      expired.push_back(id);
    }
  }
  for (const auto& id : expired) {
    record(ReviewEventKind::kClaimExpired, id, items_.at(id).claim->annotator_id, "{}");
  }
  return expired.size();
}

std::size_t ReviewQueue::expire_claims() {
  std::unique_lock lock(mu_);
  return expire_locked();
}

ReviewItem& ReviewQueue::item_or_throw(const std::string& table_id) {
  auto it = items_.find(table_id);
  if (it == items_.end()) throw Error(ErrorCode::kUnknownItem, table_id);
  return it->second;
}

void ReviewQueue::require_annotator(const std::string& id) const {
  if (!config_.roles.may_annotate(id)) {
    throw Error(ErrorCode::kNotRegistered, "'" + id + "' is not a registered annotator");
  }
}

ReviewItem ReviewQueue::claim_locked(ReviewItem& item, const std::string& annotator_id) {
  ordered_json payload;
  payload["expiry_ms"] = now() + config_.claim_ttl.count();
  record(ReviewEventKind::kClaimed, item.table_id, annotator_id, dump(payload));
  return item;
}

std::optional<ReviewItem> ReviewQueue::claim(const std::string& annotator_id) {
  require_annotator(annotator_id);
  std::unique_lock lock(mu_);
  expire_locked();
  ReviewItem* oldest = nullptr;
  for (auto& [_, item] : items_) {
    if (item.status != ReviewStatus::kPending) continue;
    if (!oldest || item.enqueue_seq < oldest->enqueue_seq) oldest = &item;
  }
  if (!oldest) return std::nullopt;
  return claim_locked(*oldest, annotator_id);
}

ReviewItem ReviewQueue::claim_item(const std::string& annotator_id,
                                   const std::string& table_id) {
  require_annotator(annotator_id);
  std::unique_lock lock(mu_);
  expire_locked();
  auto& item = item_or_throw(table_id);
  if (item.status != ReviewStatus::kPending) {
    throw Error(ErrorCode::kInvalidState,
                table_id + " is " + std::string(to_string(item.status)));
  }
  return claim_locked(item, annotator_id);
}

ReviewItem ReviewQueue::submit_label(const std::string& annotator_id,
                                     const std::string& table_id, Decision decision) {
  require_annotator(annotator_id);
  std::unique_lock lock(mu_);
  expire_locked();
  auto& item = item_or_throw(table_id);
  const auto source = config_.roles.is_expert(annotator_id) ? AnnotationSource::kHumanExpert
                                                            : AnnotationSource::kHumanNonexpert;
  if (item.status == ReviewStatus::kLabeled) {
    // First annotation wins; later ones are kept for agreement analysis only.
    ordered_json payload;
    payload["decision"] = to_string(decision);
    payload["applied"] = false;
    payload["source"] = to_string(source);
    if (decision == Decision::kUnknown) {
      record(ReviewEventKind::kMarkedUnknown, table_id, annotator_id, "{}");
    } else {
      record(ReviewEventKind::kLabeled, table_id, annotator_id, dump(payload));
    }
    return item;
  }
  if (item.status == ReviewStatus::kEscalated || item.status == ReviewStatus::kResolved) {
    throw Error(ErrorCode::kInvalidState,
                table_id + " is " + std::string(to_string(item.status)));
  }
  if (item.status != ReviewStatus::kClaimed || !item.claim ||
      item.claim->annotator_id != annotator_id) {
    throw Error(ErrorCode::kNotClaimHolder, annotator_id + " does not hold " + table_id);
  }
  if (decision == Decision::kUnknown) {
    record(ReviewEventKind::kMarkedUnknown, table_id, annotator_id, "{}");
    record(ReviewEventKind::kEscalated, table_id, annotator_id, "{}");
    return item;
  }
  ordered_json payload;
  payload["decision"] = to_string(decision);
  payload["applied"] = true;
  payload["source"] = to_string(source);
  record(ReviewEventKind::kLabeled, table_id, annotator_id, dump(payload));
  return item;
}

ReviewItem ReviewQueue::expert_resolve(const std::string& expert_id,
                                       const std::string& table_id, Decision decision) {
  if (!config_.roles.is_expert(expert_id)) {
    throw Error(ErrorCode::kNotExpert, "'" + expert_id + "' is not an expert");
  }
  if (decision == Decision::kUnknown) {
    throw Error(ErrorCode::kInvalidState, "expert decision must be SOE or NON_SOE");
  }
  std::unique_lock lock(mu_);
  auto& item = item_or_throw(table_id);
  if (item.status != ReviewStatus::kEscalated) {
    throw Error(ErrorCode::kNotEscalated,
                table_id + " is " + std::string(to_string(item.status)));
  }
  ordered_json payload;
  payload["decision"] = to_string(decision);
  record(ReviewEventKind::kExpertResolved, table_id, expert_id, dump(payload));
  return item;
}

ReviewItem ReviewQueue::admin_override(const std::string& expert_id,
                                       const std::string& table_id, Decision decision) {
  if (!config_.roles.is_expert(expert_id)) {
    throw Error(ErrorCode::kNotExpert, "'" + expert_id + "' is not an expert");
  }
  if (decision == Decision::kUnknown) {
    throw Error(ErrorCode::kInvalidState, "override decision must be SOE or NON_SOE");
  }
  std::unique_lock lock(mu_);
  auto& item = item_or_throw(table_id);
  if (!item.resolution) {
    throw Error(ErrorCode::kInvalidState, table_id + " has no resolution to override");
  }
  ordered_json payload;
  payload["decision"] = to_string(decision);
  record(ReviewEventKind::kOverridden, table_id, expert_id, dump(payload));
  return item;
}

std::map<std::string, bool> ReviewQueue::export_human_labels() const {
  std::shared_lock lock(mu_);
  std::map<std::string, bool> out;
  for (const auto& [id, item] : items_) {
    if ((item.status == ReviewStatus::kLabeled || item.status == ReviewStatus::kResolved) &&
        item.resolution) {
      out[id] = item.resolution->label;
    }
  }
  return out;
}

std::optional<ReviewItem> ReviewQueue::get(const std::string& table_id) const {
  std::shared_lock lock(mu_);
  auto it = items_.find(table_id);
  if (it == items_.end()) return std::nullopt;
  return it->second;
}

std::vector<ReviewItem> ReviewQueue::list(std::optional<ReviewStatus> status) const {
  std::shared_lock lock(mu_);
  std::vector<ReviewItem> out;
  for (const auto& [_, item] : items_) {
    if (!status || item.status == *status) out.push_back(item);
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.enqueue_seq < b.enqueue_seq; });
  return out;
}

ReviewStats ReviewQueue::stats() const {
  std::shared_lock lock(mu_);
  ReviewStats s;
  s.enqueued = enqueue_counter_;
  for (const auto& [_, item] : items_) s.by_status[item.status]++;
  s.last_sequence = next_seq_ - 1;
  return s;
}

std::vector<ReviewEvent> ReviewQueue::events() const {
  std::shared_lock lock(mu_);
  return events_;
}

std::map<std::string, ReviewItem> ReviewQueue::items() const {
  std::shared_lock lock(mu_);
  return items_;
}

std::string ReviewQueue::state_hash() const {
  std::shared_lock lock(mu_);
  std::string canonical;
  for (const auto& [_, item] : items_) {
    canonical += dump(item_json(item));
    canonical += '\n';
  }
  return sha256_hex(canonical);
}

std::size_t ReviewQueue::unresolved() const {
  std::shared_lock lock(mu_);
  return static_cast<std::size_t>(std::count_if(items_.begin(), items_.end(), [](const auto& kv) {
    return kv.second.status != ReviewStatus::kLabeled &&
           kv.second.status != ReviewStatus::kResolved;
  }));
}

std::map<std::string, ReviewItem> ReviewQueue::replay(const std::vector<ReviewEvent>& events) {
  std::map<std::string, ReviewItem> items;
  for (const auto& e : events) apply_event(items, e);
  return items;
}

std::vector<ReviewEvent> ReviewQueue::read_event_log(const std::filesystem::path& path) {
  std::vector<ReviewEvent> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    out.push_back(ReviewEvent::from_json(lines[i]));
  }
  return out;
}

}  // namespace soelabel

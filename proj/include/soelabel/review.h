#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "soelabel/corpus.h"
#include "soelabel/labeling.h"
#include "soelabel/pipeline.h"

namespace soelabel {

enum class ReviewStatus { kPending, kClaimed, kLabeled, kEscalated, kResolved };
enum class Decision { kSoe, kNonSoe, kUnknown };

enum class ReviewEventKind {
  kEnqueued,
  kClaimed,
  kClaimExpired,
  kLabeled,
  kMarkedUnknown,
  kEscalated,
  kExpertResolved,
  kOverridden,
};

std::string_view to_string(ReviewStatus s);
std::string_view to_string(Decision d);
std::string_view to_string(ReviewEventKind k);
ReviewStatus review_status_from_string(std::string_view s);
Decision decision_from_string(std::string_view s);
ReviewEventKind review_event_kind_from_string(std::string_view s);

struct Claim {
  std::string annotator_id;
  std::int64_t expiry_ms = 0;
  bool operator==(const Claim&) const = default;
};

struct Resolution {
  bool label = false;
  AnnotationSource source = AnnotationSource::kHumanNonexpert;
  std::string actor_id;
  std::int64_t timestamp = 0;
  bool operator==(const Resolution&) const = default;
};

struct ReviewItem {
  std::string table_id;
  std::string rendered_json_view;
  std::string rendered_text_view;
  std::pair<Verdict, Verdict> llm_verdicts{Verdict::kUnknown, Verdict::kUnknown};
  ReviewStatus status = ReviewStatus::kPending;
  std::optional<Claim> claim;
  std::optional<Resolution> resolution;
  std::uint64_t enqueue_seq = 0;
  // Every human decision received, in arrival order (actor, decision).
  std::vector<std::pair<std::string, Decision>> submissions;

  bool operator==(const ReviewItem&) const = default;
};

std::string review_item_to_json(const ReviewItem& item);

struct ReviewEvent {
  std::uint64_t sequence_no = 0;
  ReviewEventKind kind = ReviewEventKind::kEnqueued;
  std::string table_id;
  std::string actor_id;
  std::string payload;  // compact JSON object
  std::int64_t timestamp = 0;

  std::string to_json() const;
  static ReviewEvent from_json(std::string_view line);
  bool operator==(const ReviewEvent&) const = default;
};

// Static role table. With no annotators listed, any non-empty id may
// annotate. Experts may also annotate.
struct RoleTable {
  std::set<std::string> annotators;
  std::set<std::string> experts;

  bool may_annotate(const std::string& id) const;
  bool is_expert(const std::string& id) const { return experts.count(id) > 0; }
};

struct ReviewStats {
  std::size_t enqueued = 0;
  std::map<ReviewStatus, std::size_t> by_status;
  std::uint64_t last_sequence = 0;

  std::string to_json() const;
};

struct ReviewConfig {
  // Empty: in-memory only.
  std::filesystem::path data_dir;
  std::chrono::milliseconds claim_ttl = std::chrono::minutes(15);
  RoleTable roles;
  std::size_t snapshot_every = 100;
  std::function<std::int64_t()> clock;  // ms; defaults to system clock
};

// Human review queue for tables whose two LLM views disagree. All mutations
// serialize through one writer lock and are recorded as events before they
// are applied; state is always the fold of the event log.
class ReviewQueue {
 public:
  // Opens (or creates) the queue, restoring state from data_dir's snapshot
  // and event log when present.
  explicit ReviewQueue(ReviewConfig config);

  ReviewQueue(const ReviewQueue&) = delete;
  ReviewQueue& operator=(const ReviewQueue&) = delete;

  // One PENDING item per DISAGREE outcome not yet queued. UNKNOWN_TABLE if a
  // DISAGREE table is missing from the corpus.
  std::size_t enqueue_disagreements(const std::vector<ConsensusOutcome>& outcomes,
                                    const Corpus& corpus);

  // Leases the oldest PENDING item, or nullopt when none is pending.
  std::optional<ReviewItem> claim(const std::string& annotator_id);
  // Leases a specific PENDING item.
  ReviewItem claim_item(const std::string& annotator_id, const std::string& table_id);

  // SOE/NON_SOE label the item (first annotation wins); UNKNOWN escalates it.
  ReviewItem submit_label(const std::string& annotator_id, const std::string& table_id,
                          Decision decision);
  ReviewItem expert_resolve(const std::string& expert_id, const std::string& table_id,
                            Decision decision);
  // Replaces an existing resolution; expert only, logged.
  ReviewItem admin_override(const std::string& expert_id, const std::string& table_id,
                            Decision decision);

  // Returns the CLAIM_EXPIRED count.
  std::size_t expire_claims();

  std::map<std::string, bool> export_human_labels() const;
  std::optional<ReviewItem> get(const std::string& table_id) const;
  std::vector<ReviewItem> list(std::optional<ReviewStatus> status = std::nullopt) const;
  ReviewStats stats() const;
  std::vector<ReviewEvent> events() const;
  std::map<std::string, ReviewItem> items() const;
  std::string state_hash() const;
  // Count of items not yet LABELED or RESOLVED.
  std::size_t unresolved() const;

  void write_snapshot();

  // Folds events into a state map from scratch.
  static std::map<std::string, ReviewItem> replay(const std::vector<ReviewEvent>& events);
  static std::vector<ReviewEvent> read_event_log(const std::filesystem::path& path);

  std::filesystem::path event_log_path() const;
  std::filesystem::path snapshot_path() const;

 private:
  std::int64_t now() const;
  const ReviewEvent& record(ReviewEventKind kind, const std::string& table_id,
                            const std::string& actor_id, std::string payload);
  std::size_t expire_locked();
  ReviewItem& item_or_throw(const std::string& table_id);
  void require_annotator(const std::string& id) const;
  ReviewItem claim_locked(ReviewItem& item, const std::string& annotator_id);

  ReviewConfig config_;
  mutable std::shared_mutex mu_;
  std::map<std::string, ReviewItem> items_;
  std::vector<ReviewEvent> events_;
  std::uint64_t next_seq_ = 1;
  std::uint64_t enqueue_counter_ = 0;
  std::size_t since_snapshot_ = 0;
};

}  // namespace soelabel

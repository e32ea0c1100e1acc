#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "soelabel/corpus.h"

namespace soelabel {

enum class Verdict { kYes, kNo, kUnknown };

enum class AnnotationSource {
  kBaseScreener,
  kLlmLabeler,
  kHumanNonexpert,
  kHumanExpert
};

enum class ViewKind { kJson, kText, kNa };

std::string_view to_string(Verdict v);
std::string_view to_string(AnnotationSource s);
std::string_view to_string(ViewKind v);
Verdict verdict_from_string(std::string_view s);
AnnotationSource source_from_string(std::string_view s);
ViewKind view_from_string(std::string_view s);

inline bool is_human(AnnotationSource s) {
  return s == AnnotationSource::kHumanNonexpert ||
         s == AnnotationSource::kHumanExpert;
}

struct Annotation {
  std::string table_id;
  AnnotationSource source = AnnotationSource::kLlmLabeler;
  ViewKind view = ViewKind::kNa;
  Verdict verdict = Verdict::kUnknown;
  std::string annotator_id;
  std::int64_t timestamp = 0;
  std::optional<std::string> raw_response;
  std::optional<std::string> error;

  bool operator==(const Annotation&) const = default;
};

std::string annotation_to_json(const Annotation& a);
Annotation annotation_from_json(std::string_view line);

// ---------------------------------------------------------------------------
// Prompts

enum class PromptKind { kJsonPrompt, kTextPrompt };

struct PromptTemplate {
  PromptKind kind;
  std::string body;  // exactly one "{table}" or "{text}" slot

  static const PromptTemplate& json_prompt();
  static const PromptTemplate& text_prompt();

  std::string_view slot() const {
    return kind == PromptKind::kJsonPrompt ? "{table}" : "{text}";
  }
};

using RenderedView = std::variant<JsonView, TextView>;

// Substitutes the canonical view serialization into the template slot.
// Throws KIND_MISMATCH when the template and view kinds differ.
std::string build_prompt(const PromptTemplate& tmpl, const RenderedView& view);

// Builds the prompt for one view of a table.
std::string prompt_for(const TableRecord& table, ViewKind view);

// First whitespace-delimited token, stripped of punctuation, matched
// case-insensitively against yes/no. Everything else is UNKNOWN.
Verdict parse_verdict(std::string_view raw);

// ---------------------------------------------------------------------------
// Labelers

// A black-box verdict source. complete() returns the raw completion text for
// one prompt; implementations throw Error(TRANSPORT_ERROR) once their own
// retry budget is spent.
class Labeler {
 public:
  virtual ~Labeler() = default;
  virtual const std::string& id() const = 0;
  virtual std::string complete(const TableRecord& table, ViewKind view,
                               const std::string& prompt) = 0;
};

struct HttpLabelerConfig {
  std::string url;    // e.g. http://localhost:8080 ; POST <url>/complete
  std::string token;  // optional bearer token
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{60};

  // LABELER_URL / LABELER_TOKEN.
  static HttpLabelerConfig from_env();
};

class HttpLabeler : public Labeler {
 public:
  HttpLabeler(std::string id, HttpLabelerConfig config);

  const std::string& id() const override { return id_; }
  std::string complete(const TableRecord& table, ViewKind view,
                       const std::string& prompt) override;

 private:
  std::string id_;
  HttpLabelerConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

struct NoiseModel {
  double sensitivity_json = 0.85;
  double specificity_json = 0.85;
  double sensitivity_text = 0.85;
  double specificity_text = 0.85;
  double cross_view_correlation = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Draws the (JSON view, text view) verdicts for one table. Deterministic in
// (seed, table_id). With probability rho both views read the same uniform
// draw (comonotone errors); otherwise each view draws independently. The
// per-view error marginals are the configured rates in either branch.
std::pair<Verdict, Verdict> simulate_verdicts(const NoiseModel& model,
                                              bool true_label,
                                              const std::string& table_id);

// Answers from simulate_verdicts; requires TableRecord::true_label.
class SimulatedLabeler : public Labeler {
 public:
  SimulatedLabeler(std::string id, NoiseModel model);

  const std::string& id() const override { return id_; }
  std::string complete(const TableRecord& table, ViewKind view,
                       const std::string& prompt) override;
  const NoiseModel& model() const { return model_; }

 private:
  std::string id_;
  NoiseModel model_;
};

// One call per view. Persistent transport failure yields an UNKNOWN
// annotation with the error recorded. Timestamps are base_ts (JSON view) and
// base_ts + 1 (text view).
std::pair<Annotation, Annotation> annotate_table(
    Labeler& labeler, const TableRecord& table,
    AnnotationSource source = AnnotationSource::kLlmLabeler,
    std::int64_t base_ts = 0);

// Annotates every table with a bounded number of in-flight requests. Output
// is ordered by (table_id, view) regardless of completion order.
std::vector<Annotation> annotate_tables(
    Labeler& labeler, const std::vector<const TableRecord*>& tables,
    AnnotationSource source = AnnotationSource::kLlmLabeler,
    std::size_t max_in_flight = 8);

// Append-only JSON-Lines annotation log.
class AnnotationStore {
 public:
  explicit AnnotationStore(std::filesystem::path path);

  void append(const Annotation& a);
  void append_all(const std::vector<Annotation>& items);
  std::vector<Annotation> load() const;

  static std::vector<Annotation> read(const std::filesystem::path& path);
  static void write(const std::filesystem::path& path,
                    const std::vector<Annotation>& items);

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
};

}  // namespace soelabel

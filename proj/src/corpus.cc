#include "soelabel/corpus.h"

#include <algorithm>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "soelabel/error.h"
#include "soelabel/util.h"

namespace soelabel {

using nlohmann::json;
using nlohmann::ordered_json;

std::string JsonView::serialize() const {
  ordered_json out = ordered_json::object();
  for (const auto& [col, rows] : columns) {
    ordered_json column = ordered_json::object();
    for (const auto& [row, cell] : rows) {
      column[std::to_string(row)] = cell;
    }
    out[std::to_string(col)] = std::move(column);
  }
  return out.dump(-1, ' ', false, json::error_handler_t::replace);
}

JsonView render_json_view(const TableRecord& table) {
  bool any_cell = std::any_of(table.grid.begin(), table.grid.end(),
                              [](const auto& row) { return !row.empty(); });
  if (!any_cell) throw Error(ErrorCode::kEmptyGrid, table.table_id);
  JsonView view;
  for (std::size_t r = 0; r < table.grid.size(); ++r) {
    const auto& row = table.grid[r];
    for (std::size_t c = 0; c < row.size(); ++c) {
      view.columns[c][r] = row[c];
    }
  }
  return view;
}

TextView render_text_view(const TableRecord& table) {
  return TextView{table.context_text};
}

namespace {

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  throw Error(ErrorCode::kMalformedLine,
              "line " + std::to_string(line_no) + ": " + why);
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                std::initializer_list<std::string_view> required,
                std::size_t line_no, const std::string& where) {
  if (!obj.is_object()) malformed(line_no, where + " is not an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      malformed(line_no, "unknown field '" + key + "' in " + where);
    }
  }
  for (auto key : required) {
    if (!obj.contains(std::string(key))) {
      malformed(line_no, "missing field '" + std::string(key) + "' in " + where);
    }
  }
}

std::string get_string(const json& obj, const char* key, std::size_t line_no) {
  const auto& v = obj.at(key);
  if (!v.is_string()) malformed(line_no, std::string(key) + " must be a string");
  return v.get<std::string>();
}

TableRecord parse_table(const json& t, const std::string& protocol_id,
                        std::size_t line_no) {
  check_keys(t,
             {"table_id", "page_number", "grid", "context_text", "true_label"},
             {"table_id", "page_number", "grid", "context_text"}, line_no,
             "table");
  TableRecord table;
  table.protocol_id = protocol_id;
  table.table_id = get_string(t, "table_id", line_no);
  if (table.table_id.empty()) malformed(line_no, "empty table_id");
  const auto& page = t.at("page_number");
  if (!page.is_number_integer() || page.get<long long>() < 1 ||
      page.get<long long>() > std::numeric_limits<int>::max()) {
    malformed(line_no, "page_number must be a positive integer");
  }
  table.page_number = page.get<int>();
  const auto& grid = t.at("grid");
  if (!grid.is_array()) malformed(line_no, "grid must be an array");
  for (const auto& row : grid) {
    if (!row.is_array()) malformed(line_no, "grid rows must be arrays");
    std::vector<std::string> cells;
    cells.reserve(row.size());
    for (const auto& cell : row) {
      if (!cell.is_string()) malformed(line_no, "grid cells must be strings");
      cells.push_back(cell.get<std::string>());
    }
    table.grid.push_back(std::move(cells));
  }
  bool any_cell = std::any_of(table.grid.begin(), table.grid.end(),
                              [](const auto& row) { return !row.empty(); });
  if (!any_cell) throw Error(ErrorCode::kEmptyGrid, table.table_id);
  table.context_text = get_string(t, "context_text", line_no);
  if (t.contains("true_label")) {
    const auto& label = t.at("true_label");
    if (label.is_boolean()) {
      table.true_label = label.get<bool>();
    } else if (!label.is_null()) {
      malformed(line_no, "true_label must be bool or null");
    }
  }
  return table;
}

}  // namespace

Corpus parse_corpus(const std::vector<std::string>& lines) {
  Corpus corpus;
  std::set<std::string> protocol_ids;
  std::set<std::string> table_ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto& line = lines[i];
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      malformed(line_no, e.what());
    }
    check_keys(rec, {"protocol_id", "title", "tables", "source_meta"},
               {"protocol_id", "title", "tables"}, line_no, "protocol");
    ProtocolDoc doc;
    doc.protocol_id = get_string(rec, "protocol_id", line_no);
    if (doc.protocol_id.empty()) malformed(line_no, "empty protocol_id");
    if (!protocol_ids.insert(doc.protocol_id).second) {
      throw Error(ErrorCode::kDuplicateId, doc.protocol_id);
    }
    doc.title = get_string(rec, "title", line_no);
    if (rec.contains("source_meta")) {
      const auto& meta = rec.at("source_meta");
      if (!meta.is_object()) malformed(line_no, "source_meta must be an object");
      for (const auto& [k, v] : meta.items()) {
        if (!v.is_string()) malformed(line_no, "source_meta values must be strings");
        doc.source_meta[k] = v.get<std::string>();
      }
    }
    const auto& tables = rec.at("tables");
    if (!tables.is_array()) malformed(line_no, "tables must be an array");
    for (const auto& t : tables) {
      auto table = parse_table(t, doc.protocol_id, line_no);
      if (!table_ids.insert(table.table_id).second) {
        throw Error(ErrorCode::kDuplicateId, table.table_id);
      }
      doc.tables.push_back(std::move(table));
    }
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

Corpus ingest_corpus(const std::filesystem::path& path) {
  return parse_corpus(read_lines(path));
}

std::string serialize_protocol(const ProtocolDoc& doc) {
  ordered_json rec;
  rec["protocol_id"] = doc.protocol_id;
  rec["title"] = doc.title;
  ordered_json tables = ordered_json::array();
  for (const auto& t : doc.tables) {
    ordered_json jt;
    jt["table_id"] = t.table_id;
    jt["page_number"] = t.page_number;
    jt["grid"] = t.grid;
    jt["context_text"] = t.context_text;
    jt["true_label"] = t.true_label ? ordered_json(*t.true_label) : ordered_json();
    tables.push_back(std::move(jt));
  }
  rec["tables"] = std::move(tables);
  if (!doc.source_meta.empty()) rec["source_meta"] = doc.source_meta;
  return rec.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& doc : corpus) {
    out += serialize_protocol(doc);
    out += '\n';
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  write_file_atomic(path, serialize_corpus(corpus));
}

CorpusIndex::CorpusIndex(const Corpus& corpus) {
  for (const auto& doc : corpus) {
    for (const auto& t : doc.tables) {
      if (!tables_.emplace(t.table_id, &t).second) {
        throw Error(ErrorCode::kDuplicateId, t.table_id);
      }
    }
  }
}

const TableRecord* CorpusIndex::find(const std::string& table_id) const {
  auto it = tables_.find(table_id);
  return it == tables_.end() ? nullptr : it->second;
}

const TableRecord& CorpusIndex::at(const std::string& table_id) const {
  const auto* t = find(table_id);
  if (!t) throw Error(ErrorCode::kUnknownTable, table_id);
  return *t;
}

// ---------------------------------------------------------------------------
// Synthetic corpus.
//
// Positive tables follow the schedule-of-events layout: visit columns spanning
// screening, treatment and follow-up, procedure rows, X marks, and usually a
// caption naming the schedule. Negatives are drawn from the distractor
// archetypes (pharmacokinetic timepoints, document history, objectives, organ
// function criteria, dose modifications). A fraction of each class is made
// deliberately ambiguous so that label noise has a measurable effect on a
// model trained from the labels.

namespace {

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& items) {
  return items[uniform_index(rng, items.size())];
}

bool coin(std::mt19937_64& rng, double p) { return unit_double(rng) < p; }

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(
                  uniform_index(rng, static_cast<std::size_t>(hi - lo + 1)));
}

const std::vector<std::string> kScreeningVisits = {
    "Screening", "Day -28 to -1", "Baseline", "Screening Visit 1",
    "Pre-treatment"};
const std::vector<std::string> kTreatmentVisits = {
    "Cycle 1 Day 1", "Cycle 1 Day 8", "Cycle 2 Day 1", "Week 2", "Week 4",
    "Week 12", "Visit 3", "Visit 4", "Day 15", "Randomization Visit"};
const std::vector<std::string> kFollowUpVisits = {
    "Follow-up", "End of Treatment", "Safety Follow-up", "Early Termination",
    "Long-term Follow-up", "Final Visit"};
const std::vector<std::string> kProcedures = {
    "Informed Consent", "Randomization", "Medical history",
    "Demographics", "Physical examination", "Vital signs", "12-lead ECG",
    "Hematology", "Serum chemistry", "Urinalysis", "Pregnancy test",
    "Adverse events", "Concomitant medications", "Study treatment dispensing",
    "Tumor assessment", "Inclusion/exclusion criteria", "Quality of life questionnaire",
    "Drug accountability"};
const std::vector<std::string> kScheduleCaptions = {
    "Schedule of Events", "Schedule of Activities", "Schedule of Assessments",
    "Study Calendar", "Study Schedule", "Study Parameters"};
const std::vector<std::string> kMarks = {"X", "X", "X", "✓", "•"};
const std::vector<std::string> kBoilerplate = {
    "Confidential", "Protocol version 3.0", "Page footer",
    "Sponsor study code", "Investigational product",
    "Refer to the laboratory manual for details", "All times are approximate",
    "Study site personnel", "See section 8 for details",
    "Assessments may be performed within the visit window"};

const std::vector<std::string> kPkTimepoints = {
    "Pre-dose", "0h post-dose", "0.5h post-dose", "1h post-dose",
    "2h post-dose", "4h post-dose", "6h post-dose", "8h post-dose",
    "24h post-dose"};
const std::vector<std::string> kPkRows = {
    "PK blood sample", "Plasma concentration", "PD biomarker sample",
    "Urine PK collection", "Anti-drug antibody sample"};

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string grid_text(const Grid& grid) {
  std::string out;
  for (const auto& row : grid) {
    std::vector<std::string> cells;
    for (const auto& c : row) {
      if (!c.empty()) cells.push_back(c);
    }
    out += join(cells, " ");
    out += '\n';
  }
  return out;
}

std::string boilerplate(std::mt19937_64& rng, int n) {
  std::vector<std::string> parts;
  for (int i = 0; i < n; ++i) parts.push_back(pick(rng, kBoilerplate));
  return join(parts, ". ");
}

Grid visit_grid(std::mt19937_64& rng, bool full_phases) {
  std::vector<std::string> header = {"Procedure"};
  if (full_phases || coin(rng, 0.5)) header.push_back(pick(rng, kScreeningVisits));
  int n_treat = uniform_int(rng, 2, 5);
  for (int i = 0; i < n_treat; ++i) header.push_back(pick(rng, kTreatmentVisits));
  if (full_phases || coin(rng, 0.5)) header.push_back(pick(rng, kFollowUpVisits));
  Grid grid{header};
  int n_rows = uniform_int(rng, 3, 8);
  for (int r = 0; r < n_rows; ++r) {
    std::vector<std::string> row = {pick(rng, kProcedures)};
    for (std::size_t c = 1; c < header.size(); ++c) {
      row.push_back(coin(rng, 0.55) ? pick(rng, kMarks) : "");
    }
    grid.push_back(std::move(row));
  }
  return grid;
}

struct Rendered {
  Grid grid;
  std::string caption;
};

Rendered positive_table(std::mt19937_64& rng) {
  // Ambiguous positives: partial phases, generic caption.
  bool ambiguous = coin(rng, 0.3);
  Rendered out;
  out.grid = visit_grid(rng, !ambiguous);
  if (!ambiguous && coin(rng, 0.85)) {
    out.caption = pick(rng, kScheduleCaptions);
  } else {
    out.caption = pick(rng, std::vector<std::string>{
                                "Study Procedures", "Visit Assessments",
                                "Overview of Assessments", "Study Flow Chart"});
  }
  if (!ambiguous) {
    // Most full schedules open with consent.
    if (coin(rng, 0.8) && out.grid.size() > 1) out.grid[1][0] = "Informed Consent";
  }
  return out;
}

Rendered pk_table(std::mt19937_64& rng, bool hard) {
  Rendered out;
  std::vector<std::string> header = {"Study Day"};
  int n = uniform_int(rng, 3, 6);
  for (int i = 0; i < n; ++i) header.push_back(pick(rng, kPkTimepoints));
  out.grid.push_back(header);
  int rows = uniform_int(rng, 2, 5);
  for (int r = 0; r < rows; ++r) {
    std::vector<std::string> row = {
        hard ? pick(rng, kTreatmentVisits) : pick(rng, kPkRows)};
    for (std::size_t c = 1; c < header.size(); ++c) {
      row.push_back(coin(rng, 0.6) ? "X" : "");
    }
    out.grid.push_back(std::move(row));
  }
  if (hard) {
    out.grid.push_back({pick(rng, kProcedures), "X", "", "X"});
    out.caption = pick(rng, std::vector<std::string>{
                                "Pharmacokinetic Sampling Schedule",
                                "Schedule of PK Assessments",
                                "PK/PD Collection Schedule"});
  } else {
    out.caption = "Pharmacokinetic Sampling Timepoints";
  }
  return out;
}

Rendered history_table(std::mt19937_64& rng) {
  Rendered out;
  out.grid.push_back({"Version", "Date", "Summary of Changes"});
  int n = uniform_int(rng, 2, 6);
  for (int i = 0; i < n; ++i) {
    const int month = uniform_int(rng, 1, 9);
    const int day = uniform_int(rng, 10, 28);
    out.grid.push_back({"Amendment " + std::to_string(i + 1),
                        std::to_string(2015 + i) + "-0" +
                            std::to_string(month) + "-" + std::to_string(day),
                        pick(rng, std::vector<std::string>{
                                      "Updated inclusion criteria",
                                      "Revised dosing schedule",
                                      "Clarified visit windows",
                                      "Administrative changes",
                                      "Added safety follow-up visit"})});
  }
  out.caption = pick(rng, std::vector<std::string>{"Document History",
                                                   "Protocol Amendment History",
                                                   "Summary of Changes"});
  return out;
}

Rendered objectives_table(std::mt19937_64& rng) {
  Rendered out;
  out.grid.push_back({"Objectives", "Endpoints"});
  out.grid.push_back({"Primary", "Overall survival"});
  if (coin(rng, 0.8)) out.grid.push_back({"Secondary", "Progression-free survival"});
  if (coin(rng, 0.6)) out.grid.push_back({"Secondary", "Objective response rate"});
  if (coin(rng, 0.5)) out.grid.push_back({"Exploratory", "Biomarker outcomes"});
  if (coin(rng, 0.4)) {
    out.grid.push_back({"Safety", "Adverse events at each treatment visit"});
  }
  out.caption = "Objectives and Endpoints";
  return out;
}

Rendered organ_table(std::mt19937_64& rng) {
  Rendered out;
  out.grid.push_back({"System", "Laboratory Value"});
  const std::vector<std::pair<std::string, std::string>> rows = {
      {"Hematological", "ANC >= 1.5 x 10^9/L"},
      {"Hematological", "Platelets >= 100 x 10^9/L"},
      {"Hematological", "Hemoglobin >= 9 g/dL"},
      {"Renal", "Serum creatinine <= 1.5 x ULN"},
      {"Hepatic", "Total bilirubin <= 1.5 x ULN"},
      {"Hepatic", "AST and ALT <= 2.5 x ULN"}};
  int n = uniform_int(rng, 3, 6);
  for (int i = 0; i < n; ++i) {
    const auto& r = rows[uniform_index(rng, rows.size())];
    out.grid.push_back({r.first, r.second});
  }
  out.caption = "Adequate Organ Function Laboratory Values";
  return out;
}

Rendered dose_table(std::mt19937_64& rng) {
  Rendered out;
  out.grid.push_back({"Toxicity", "Grade", "Dose Modification"});
  int n = uniform_int(rng, 2, 5);
  for (int i = 0; i < n; ++i) {
    out.grid.push_back(
        {pick(rng, std::vector<std::string>{"Neutropenia", "Diarrhea", "Rash",
                                            "Hepatotoxicity", "Fatigue"}),
         "Grade " + std::to_string(uniform_int(rng, 1, 4)),
         pick(rng, std::vector<std::string>{"Hold until recovery",
                                            "Reduce by one dose level",
                                            "Discontinue treatment",
                                            "No change"})});
  }
  out.caption = "Dose Modifications for Treatment-related Toxicity";
  return out;
}

Rendered negative_table(std::mt19937_64& rng) {
  switch (uniform_index(rng, 6)) {
    case 0: return pk_table(rng, false);
    case 1: return pk_table(rng, true);
    case 2: return history_table(rng);
    case 3: return objectives_table(rng);
    case 4: return organ_table(rng);
    default: return dose_table(rng);
  }
}

}  // namespace

Corpus generate_synthetic_corpus(const SyntheticCorpusSpec& spec) {
  if (spec.n_protocols < 0 || spec.min_tables_per_protocol < 1 ||
      spec.max_tables_per_protocol < spec.min_tables_per_protocol ||
      !(spec.positive_rate >= 0.0 && spec.positive_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidSpec, "bad synthetic corpus spec");
  }
  std::mt19937_64 rng(derive_seed(spec.seed, 0x5eed));
  Corpus corpus;
  corpus.reserve(static_cast<std::size_t>(spec.n_protocols));
  for (int p = 0; p < spec.n_protocols; ++p) {
    ProtocolDoc doc;
    char id[16];
    std::snprintf(id, sizeof(id), "P%05d", p + 1);
    doc.protocol_id = id;
    doc.title = "Synthetic protocol " + std::to_string(p + 1);
    doc.source_meta["generator"] = "synthetic";
    doc.source_meta["seed"] = std::to_string(spec.seed);
    int n_tables = uniform_int(rng, spec.min_tables_per_protocol,
                               spec.max_tables_per_protocol);
    int page = 1;
    for (int t = 0; t < n_tables; ++t) {
      TableRecord table;
      table.protocol_id = doc.protocol_id;
      char tid[32];
      std::snprintf(tid, sizeof(tid), "%s-T%03d", id, t + 1);
      table.table_id = tid;
      page += uniform_int(rng, 1, 6);
      table.page_number = page;
      const bool positive = coin(rng, spec.positive_rate);
      Rendered r = positive ? positive_table(rng) : negative_table(rng);
      table.grid = std::move(r.grid);
      table.true_label = positive;
      std::ostringstream text;
      text << boilerplate(rng, uniform_int(rng, 1, 3)) << "\n";
      text << "Table " << (t + 1) << ": " << r.caption << "\n";
      text << grid_text(table.grid);
      text << boilerplate(rng, uniform_int(rng, 1, 3)) << "\n";
      table.context_text = text.str();
      doc.tables.push_back(std::move(table));
    }
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

}  // namespace soelabel

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace soelabel {

using Grid = std::vector<std::vector<std::string>>;

// One extracted table plus all text on its page (before, inside, after).
struct TableRecord {
  std::string table_id;
  std::string protocol_id;
  int page_number = 1;
  Grid grid;
  std::string context_text;
  std::optional<bool> true_label;

  bool operator==(const TableRecord&) const = default;
};

struct ProtocolDoc {
  std::string protocol_id;
  std::string title;
  std::vector<TableRecord> tables;
  std::map<std::string, std::string> source_meta;

  bool operator==(const ProtocolDoc&) const = default;
};

using Corpus = std::vector<ProtocolDoc>;

// Column-major view: column index -> row index -> cell. Missing cells of a
// ragged grid are absent keys; empty-string cells are kept.
struct JsonView {
  std::map<std::size_t, std::map<std::size_t, std::string>> columns;

  // Canonical compact JSON, columns then rows in ascending numeric order,
  // all keys as decimal strings.
  std::string serialize() const;

  bool operator==(const JsonView&) const = default;
};

struct TextView {
  std::string text;

  bool operator==(const TextView&) const = default;
};

JsonView render_json_view(const TableRecord& table);
TextView render_text_view(const TableRecord& table);

// Reads a JSON-Lines corpus file. The whole file is rejected on the first
// schema violation (MALFORMED_LINE carries the 1-based line number).
Corpus ingest_corpus(const std::filesystem::path& path);
Corpus parse_corpus(const std::vector<std::string>& lines);

std::string serialize_protocol(const ProtocolDoc& doc);
std::string serialize_corpus(const Corpus& corpus);
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

struct SyntheticCorpusSpec {
  int n_protocols = 100;
  int min_tables_per_protocol = 4;
  int max_tables_per_protocol = 12;
  double positive_rate = 0.136;
  std::uint64_t seed = 0;
};

Corpus generate_synthetic_corpus(const SyntheticCorpusSpec& spec);

// Flat lookup of tables by id across a corpus. Holds pointers into the
// corpus, which must outlive the index.
class CorpusIndex {
 public:
  explicit CorpusIndex(const Corpus& corpus);

  const TableRecord* find(const std::string& table_id) const;
  const TableRecord& at(const std::string& table_id) const;
  std::size_t size() const { return tables_.size(); }
  const std::map<std::string, const TableRecord*>& tables() const {
    return tables_;
  }

 private:
  std::map<std::string, const TableRecord*> tables_;
};

}  // namespace soelabel

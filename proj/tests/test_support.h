#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "soelabel/corpus.h"
#include "soelabel/labeling.h"
#include "soelabel/pipeline.h"

namespace test {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("soelabel-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string table_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "T%05zu", i);
  return buf;
}

// n outcomes of which the first `disagree` (by index) are DISAGREE; AGREE
// tables alternate YES/NO.
inline std::vector<soelabel::ConsensusOutcome> outcome_fixture(std::size_t n,
                                                               std::size_t disagree) {
  using namespace soelabel;
  std::vector<ConsensusOutcome> out;
  for (std::size_t i = 0; i < n; ++i) {
    ConsensusOutcome o;
    o.table_id = table_id(i);
    if (i < disagree) {
      o.status = ConsensusStatus::kDisagree;
      o.json_verdict = i % 2 ? Verdict::kYes : Verdict::kNo;
      o.text_verdict = i % 2 ? Verdict::kNo : Verdict::kYes;
    } else {
      o.status = ConsensusStatus::kAgree;
      const bool yes = i % 2 == 0;
      o.agreed_label = yes;
      o.json_verdict = o.text_verdict = yes ? Verdict::kYes : Verdict::kNo;
    }
    out.push_back(o);
  }
  return out;
}

// Annotation pairs for outcome_fixture.
inline std::vector<soelabel::Annotation> annotation_fixture(std::size_t n, std::size_t disagree) {
  using namespace soelabel;
  std::vector<Annotation> anns;
  std::int64_t ts = 0;
  for (const auto& o : outcome_fixture(n, disagree)) {
    for (auto [view, v] : {std::pair{ViewKind::kJson, o.json_verdict},
                           std::pair{ViewKind::kText, o.text_verdict}}) {
      Annotation a;
      a.table_id = o.table_id;
      a.view = view;
      a.verdict = v;
      a.annotator_id = "llm";
      a.timestamp = ts++;
      anns.push_back(a);
    }
  }
  return anns;
}

// Tables T00000.. grouped ten to a protocol, matching outcome_fixture ids.
inline soelabel::Corpus fixture_corpus(std::size_t n) {
  using namespace soelabel;
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 10 == 0) {
      ProtocolDoc d;
      d.protocol_id = "P" + std::to_string(i / 10);
      c.push_back(d);
    }
    TableRecord t;
    t.table_id = table_id(i);
    t.protocol_id = c.back().protocol_id;
    t.grid = {{"Visit", std::to_string(i)}};
    t.context_text = "page text " + std::to_string(i);
    t.true_label = i % 2 == 0;
    c.back().tables.push_back(t);
  }
  return c;
}

}  // namespace test

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>

#include "soelabel/corpus.h"
#include "soelabel/error.h"
#include "soelabel/util.h"
#include "test_support.h"

using namespace soelabel;

namespace {

TableRecord table_with(Grid grid, std::string context = "") {
  TableRecord t;
  t.table_id = "T1";
  t.protocol_id = "P1";
  t.grid = std::move(grid);
  t.context_text = std::move(context);
  return t;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIoError;
}

}  // namespace

TEST(Util, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Util, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Util, AtomicWriteCreatesParentsAndReplaces) {
  test::TempDir dir;
  const auto p = dir.path() / "a" / "b.txt";
  write_file_atomic(p, "one");
  write_file_atomic(p, "two");
  EXPECT_EQ(read_file(p), "two");
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(p.parent_path())) ++n;
  EXPECT_EQ(n, 1u);
}

TEST(Util, UniformIndexInRange) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10000; ++i) EXPECT_LT(uniform_index(rng, 7), 7u);
}

TEST(JsonView, Transposes2x2) {
  auto v = render_json_view(table_with({{"a", "b"}, {"c", "d"}}));
  EXPECT_EQ(v.serialize(), R"({"0":{"0":"a","1":"c"},"1":{"0":"b","1":"d"}})");
}

TEST(JsonView, Singleton) {
  EXPECT_EQ(render_json_view(table_with({{"x"}})).serialize(), R"({"0":{"0":"x"}})");
}

TEST(JsonView, RaggedGridOmitsMissingCells) {
  auto v = render_json_view(table_with({{"a", "b"}, {"c"}}));
  EXPECT_EQ(v.serialize(), R"({"0":{"0":"a","1":"c"},"1":{"0":"b"}})");
}

TEST(JsonView, EmptyCellsKept) {
  auto v = render_json_view(table_with({{"", "b"}}));
  EXPECT_EQ(v.serialize(), R"({"0":{"0":""},"1":{"0":"b"}})");
}

TEST(JsonView, NumericKeyOrder) {
  Grid g(12, std::vector<std::string>{"v"});
  auto s = render_json_view(table_with(g)).serialize();
  EXPECT_LT(s.find("\"2\""), s.find("\"10\""));
}

TEST(JsonView, EmptyGridRejected) {
  EXPECT_EQ(code_of([] { render_json_view(table_with({})); }), ErrorCode::kEmptyGrid);
  EXPECT_EQ(code_of([] { render_json_view(table_with({{}, {}})); }), ErrorCode::kEmptyGrid);
}

TEST(JsonView, CellMultisetMatchesGrid) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Grid g(1 + rng() % 6);
    std::multiset<std::string> expected;
    for (auto& row : g) {
      row.resize(rng() % 5);
      for (auto& c : row) {
        c = std::to_string(rng() % 4);
        expected.insert(c);
      }
    }
    if (expected.empty()) continue;
    auto v = render_json_view(table_with(g));
    std::multiset<std::string> got;
    for (const auto& [_, col] : v.columns) {
      for (const auto& [__, cell] : col) got.insert(cell);
    }
    EXPECT_EQ(got, expected);
    EXPECT_EQ(v.serialize(), render_json_view(table_with(g)).serialize());
    // Column keys contiguous from 0.
    std::size_t k = 0;
    for (const auto& [c, _] : v.columns) EXPECT_EQ(c, k++);
  }
}

TEST(TextView, Identity) {
  EXPECT_EQ(render_text_view(table_with({{"a"}}, "")).text, "");
  const std::string s = "Schedule of Events\nVisit 1 Visit 2";
  EXPECT_EQ(render_text_view(table_with({{"a"}}, s)).text, s);
}

TEST(Ingest, EmptyFile) {
  test::TempDir dir;
  write_file_atomic(dir.path() / "c.jsonl", "");
  EXPECT_TRUE(ingest_corpus(dir.path() / "c.jsonl").empty());
}

TEST(Ingest, MinimalRecord) {
  auto c = parse_corpus({R"({"protocol_id":"P1","title":"t","tables":[{"table_id":"T1",)"
                         R"("page_number":2,"grid":[["a","b"],["c","d"]],"context_text":"x"}]})"});
  ASSERT_EQ(c.size(), 1u);
  ASSERT_EQ(c[0].tables.size(), 1u);
  EXPECT_EQ(c[0].tables[0].protocol_id, "P1");
  EXPECT_EQ(c[0].tables[0].page_number, 2);
  EXPECT_FALSE(c[0].tables[0].true_label.has_value());
}

TEST(Ingest, DuplicateProtocol) {
  const std::string line = R"({"protocol_id":"P1","title":"t","tables":[]})";
  try {
    parse_corpus({line, line});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicateId);
    EXPECT_EQ(e.detail(), "P1");
  }
}

TEST(Ingest, DuplicateTableAcrossProtocols) {
  EXPECT_EQ(code_of([] {
              parse_corpus({R"({"protocol_id":"P1","title":"","tables":[{"table_id":"T","page_number":1,"grid":[["a"]],"context_text":""}]})",
                            R"({"protocol_id":"P2","title":"","tables":[{"table_id":"T","page_number":1,"grid":[["a"]],"context_text":""}]})"});
            }),
            ErrorCode::kDuplicateId);
}

TEST(Ingest, MalformedLinesCarryLineNumber) {
  const std::vector<std::string> bad{
      "not json",
      R"({"protocol_id":"P1","title":"t","tables":[],"extra":1})",
      R"({"protocol_id":"P1","tables":[]})",
      R"({"protocol_id":"P1","title":"t","tables":[{"table_id":"T","page_number":0,"grid":[["a"]],"context_text":""}]})",
      R"({"protocol_id":"P1","title":"t","tables":[{"table_id":"T","page_number":1,"grid":[[1]],"context_text":""}]})",
      R"({"protocol_id":"P1","title":"t","tables":[{"table_id":"T","page_number":1,"grid":[["a"]],"context_text":"","true_label":"yes"}]})",
  };
  for (const auto& b : bad) {
    try {
      parse_corpus({"", b});
      FAIL() << b;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kMalformedLine) << b;
      EXPECT_NE(e.detail().find("line 2"), std::string::npos) << e.detail();
    }
  }
}

TEST(Ingest, EmptyGridRejected) {
  EXPECT_EQ(code_of([] {
              parse_corpus({R"({"protocol_id":"P1","title":"","tables":[{"table_id":"T","page_number":1,"grid":[],"context_text":""}]})"});
            }),
            ErrorCode::kEmptyGrid);
}

TEST(Ingest, RoundTripSynthetic) {
  SyntheticCorpusSpec spec;
  spec.n_protocols = 25;
  spec.seed = 11;
  auto corpus = generate_synthetic_corpus(spec);
  corpus[0].source_meta["source"] = "unit";
  corpus[1].tables[0].true_label.reset();
  test::TempDir dir;
  write_corpus(dir.path() / "c.jsonl", corpus);
  EXPECT_EQ(ingest_corpus(dir.path() / "c.jsonl"), corpus);
}

TEST(Synthetic, ZeroProtocols) {
  SyntheticCorpusSpec spec;
  spec.n_protocols = 0;
  EXPECT_TRUE(generate_synthetic_corpus(spec).empty());
}

TEST(Synthetic, SeedDeterminism) {
  SyntheticCorpusSpec spec;
  spec.seed = 7;
  EXPECT_EQ(generate_synthetic_corpus(spec), generate_synthetic_corpus(spec));
  auto other = spec;
  other.seed = 8;
  EXPECT_NE(generate_synthetic_corpus(spec), generate_synthetic_corpus(other));
}

TEST(Synthetic, PositiveRate) {
  SyntheticCorpusSpec spec;
  spec.n_protocols = 100;
  spec.positive_rate = 0.136;
  std::size_t all_n = 0, all_pos = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    spec.seed = seed;
    std::size_t n = 0, pos = 0;
    for (const auto& doc : generate_synthetic_corpus(spec)) {
      EXPECT_GE(doc.tables.size(), 4u);
      EXPECT_LE(doc.tables.size(), 12u);
      for (const auto& t : doc.tables) {
        ++n;
        ASSERT_TRUE(t.true_label.has_value());
        pos += *t.true_label;
        EXPECT_GE(t.page_number, 1);
      }
    }
    // Four binomial standard deviations.
    EXPECT_NEAR(double(pos) / double(n), 0.136, 4 * std::sqrt(0.136 * 0.864 / double(n)))
        << "seed " << seed;
    all_n += n;
    all_pos += pos;
  }
  EXPECT_NEAR(double(all_pos) / double(all_n), 0.136, 4 * std::sqrt(0.136 * 0.864 / double(all_n)));
}

TEST(Synthetic, InvalidSpec) {
  SyntheticCorpusSpec spec;
  spec.positive_rate = 1.5;
  EXPECT_EQ(code_of([&] { generate_synthetic_corpus(spec); }), ErrorCode::kInvalidSpec);
  spec.positive_rate = 0.1;
  spec.min_tables_per_protocol = 5;
  spec.max_tables_per_protocol = 4;
  EXPECT_EQ(code_of([&] { generate_synthetic_corpus(spec); }), ErrorCode::kInvalidSpec);
}

TEST(CorpusIndex, LookupAndUnknown) {
  SyntheticCorpusSpec spec;
  spec.n_protocols = 2;
  auto corpus = generate_synthetic_corpus(spec);
  CorpusIndex idx(corpus);
  EXPECT_EQ(idx.at("P00001-T001").protocol_id, "P00001");
  EXPECT_EQ(idx.find("nope"), nullptr);
  EXPECT_EQ(code_of([&] { idx.at("nope"); }), ErrorCode::kUnknownTable);
}

#include <gtest/gtest.h>

#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "soelabel/review_server.h"
#include "test_support.h"

using namespace soelabel;
using nlohmann::json;

namespace {

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ReviewConfig c;
    c.roles.annotators = {"ann1", "ann2"};
    c.roles.experts = {"exp"};
    queue_ = std::make_unique<ReviewQueue>(c);
    queue_->enqueue_disagreements(test::outcome_fixture(20, 4), test::fixture_corpus(20));
    server_ = std::make_unique<ReviewServer>(*queue_);
    port_ = server_->bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    server_->stop();
    thread_.join();
  }

  std::pair<int, json> post(const std::string& path, const json& body) {
    auto r = client_->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(r);
    return {r->status, json::parse(r->body)};
  }
  std::pair<int, json> get(const std::string& path) {
    auto r = client_->Get(path);
    EXPECT_TRUE(r);
    return {r->status, json::parse(r->body)};
  }

  std::unique_ptr<ReviewQueue> queue_;
  std::unique_ptr<ReviewServer> server_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace

TEST_F(ServerTest, HealthAndQueue) {
  auto [s, h] = get("/health");
  EXPECT_EQ(s, 200);
  EXPECT_EQ(h["status"], "ok");
  auto [qs, q] = get("/queue?status=PENDING");
  EXPECT_EQ(qs, 200);
  EXPECT_EQ(q["items"].size(), 4u);
  auto [bs, b] = get("/queue?status=BOGUS");
  EXPECT_EQ(bs, 400);
  EXPECT_EQ(b["code"], "MALFORMED_LINE");
}

TEST_F(ServerTest, ClaimLabelExportRoundTrip) {
  auto [s, c] = post("/claim", {{"annotator_id", "ann1"}});
  ASSERT_EQ(s, 200);
  const std::string id = c["item"]["table_id"];
  EXPECT_EQ(c["item"]["status"], "CLAIMED");
  auto [ls, l] = post("/items/" + id + "/label", {{"annotator_id", "ann1"}, {"decision", "SOE"}});
  EXPECT_EQ(ls, 200);
  EXPECT_EQ(l["status"], "LABELED");
  auto [es, e] = get("/export/human-labels");
  EXPECT_EQ(es, 200);
  EXPECT_EQ(e, json({{id, true}}));
  auto [gs, g] = get("/items/" + id);
  EXPECT_EQ(gs, 200);
  EXPECT_EQ(g["table_id"], id);
  auto [ss, st] = get("/stats");
  EXPECT_EQ(ss, 200);
  EXPECT_EQ(st["enqueued"], 4);
}

TEST_F(ServerTest, ErrorStatuses) {
  const std::string id = test::table_id(0);
  EXPECT_EQ(get("/items/ghost").first, 404);
  EXPECT_EQ(post("/items/ghost/claim", {{"annotator_id", "ann1"}}).first, 404);
  EXPECT_EQ(post("/claim", {{"annotator_id", "stranger"}}).first, 403);
  EXPECT_EQ(post("/items/" + id + "/claim", {{"annotator_id", "ann1"}}).first, 200);
  auto [cs, conflict] = post("/items/" + id + "/claim", {{"annotator_id", "ann2"}});
  EXPECT_EQ(cs, 409);
  EXPECT_EQ(conflict["code"], "INVALID_STATE");
  EXPECT_EQ(post("/items/" + id + "/label", {{"annotator_id", "ann2"}, {"decision", "SOE"}}).first,
            409);
  EXPECT_EQ(post("/items/" + id + "/resolve", {{"expert_id", "exp"}, {"decision", "SOE"}}).first,
            409);
  EXPECT_EQ(post("/items/" + id + "/label", {{"annotator_id", "ann1"}, {"decision", "UNKNOWN"}}).first,
            200);
  EXPECT_EQ(post("/items/" + id + "/resolve", {{"expert_id", "ann1"}, {"decision", "SOE"}}).first,
            403);
  auto [rs, r] = post("/items/" + id + "/resolve", {{"expert_id", "exp"}, {"decision", "NON_SOE"}});
  EXPECT_EQ(rs, 200);
  EXPECT_EQ(r["status"], "RESOLVED");
  auto [os, o] = post("/items/" + id + "/override", {{"expert_id", "exp"}, {"decision", "SOE"}});
  EXPECT_EQ(os, 200);
  EXPECT_EQ(get("/export/human-labels").second[id], true);
  auto bad = client_->Post("/claim", "not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
}

TEST_F(ServerTest, EmptyQueueClaimReturnsNull) {
  for (int i = 0; i < 4; ++i) post("/claim", {{"annotator_id", "ann1"}});
  auto [s, c] = post("/claim", {{"annotator_id", "ann2"}});
  EXPECT_EQ(s, 200);
  EXPECT_TRUE(c["item"].is_null());
}

TEST(HttpStatus, Mapping) {
  EXPECT_EQ(http_status_for(ErrorCode::kUnknownItem), 404);
  EXPECT_EQ(http_status_for(ErrorCode::kNotClaimHolder), 409);
  EXPECT_EQ(http_status_for(ErrorCode::kNotEscalated), 409);
  EXPECT_EQ(http_status_for(ErrorCode::kNotExpert), 403);
  EXPECT_EQ(http_status_for(ErrorCode::kIoError), 500);
}

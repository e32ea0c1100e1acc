#include <gtest/gtest.h>

#include <random>

#include "soelabel/error.h"
#include "soelabel/proxy.h"
#include "soelabel/util.h"
#include "test_support.h"

using namespace soelabel;

namespace {

std::vector<TrainingExample> toy_set(std::uint64_t seed, std::size_t n, std::size_t dim = 64) {
  const std::vector<std::string> pos{"visit", "screening", "day", "week", "x"};
  const std::vector<std::string> neg{"adverse", "event", "dose", "mg", "x"};
  std::mt19937_64 rng(seed);
  std::vector<TrainingExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool y = i % 2 == 0;
    const auto& vocab = (rng() % 10 == 0) != y ? pos : neg;
    std::string text;
    for (int k = 0; k < 6; ++k) text += vocab[rng() % vocab.size()] + " ";
    out.push_back({featurize(text, dim), y});
  }
  return out;
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

TEST(Featurize, RelativeCounts) {
  auto v = featurize("a a b", 4096);
  EXPECT_DOUBLE_EQ(v.at(fnv1a64("a") % 4096), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(v.at(fnv1a64("b") % 4096), 1.0 / 3.0);
  EXPECT_EQ(v.entries.size(), 2u);
}

TEST(Featurize, CaseAndPunctuation) {
  EXPECT_EQ(featurize("Visit, VISIT!"), featurize("visit visit"));
  EXPECT_TRUE(featurize("").entries.empty());
  EXPECT_TRUE(featurize(" ,.;").entries.empty());
  auto v = featurize("x", 8);
  EXPECT_EQ(v.dense().size(), 8u);
  EXPECT_THROW(featurize("x", 1), Error);
}

TEST(Gradient, MatchesFiniteDifferences) {
  auto ex = toy_set(1, 30, 16);
  std::mt19937_64 rng(2);
  std::vector<double> w(17);
  for (auto& v : w) v = unit_double(rng) - 0.5;
  const double l2 = 0.01, h = 1e-6;
  auto g = logistic_gradient(w, ex, l2);
  for (std::size_t i = 0; i < w.size(); ++i) {
    auto up = w, down = w;
    up[i] += h;
    down[i] -= h;
    const double fd = (logistic_loss(up, ex, l2) - logistic_loss(down, ex, l2)) / (2 * h);
    EXPECT_NEAR(g[i], fd, 1e-4) << i;
  }
}

TEST(Train, SeparableTwoPoints) {
  std::vector<TrainingExample> ex{{featurize("alpha", 32), true}, {featurize("beta", 32), false}};
  auto m = train(ex);
  EXPECT_TRUE(predict(m, ex[0].x).label);
  EXPECT_FALSE(predict(m, ex[1].x).label);
}

TEST(Train, LearnsToySet) {
  auto ex = toy_set(3, 400);
  auto m = train(ex);
  auto held = toy_set(4, 400);
  int ok = 0;
  for (const auto& e : held) ok += predict(m, e.x).label == e.y;
  EXPECT_GT(ok / 400.0, 0.8);
}

TEST(Train, Deterministic) {
  auto ex = toy_set(5, 100);
  TrainOptions o;
  o.seed = 9;
  EXPECT_EQ(train(ex, o).weights, train(ex, o).weights);
  auto other = o;
  other.seed = 10;
  EXPECT_NE(train(ex, o).weights, train(ex, other).weights);
}

TEST(Train, LossTraceNonincreasing) {
  auto ex = toy_set(6, 200);
  TrainOptions o;
  o.epochs = 100;
  auto m = train(ex, o);
  ASSERT_EQ(m.loss_trace.size(), 101u);
  for (std::size_t i = 1; i < m.loss_trace.size(); ++i) {
    EXPECT_LE(m.loss_trace[i], m.loss_trace[i - 1] + 1e-9) << i;
  }
  EXPECT_LT(m.loss_trace.back(), m.loss_trace.front());
}

TEST(Train, Errors) {
  auto ex = toy_set(7, 10);
  for (auto& e : ex) e.y = true;
  EXPECT_EQ(code_of([&] { train(ex); }), ErrorCode::kSingleClass);
  EXPECT_EQ(code_of([] { train({}); }), ErrorCode::kSingleClass);
  auto mixed = toy_set(7, 10);
  mixed[0].x = featurize("a", 8);
  EXPECT_EQ(code_of([&] { train(mixed); }), ErrorCode::kDimMismatch);
}

TEST(Predict, ZeroWeightsGiveHalf) {
  LinearModel m;
  m.dim = 8;
  m.weights.assign(9, 0.0);
  auto p = predict(m, featurize("anything", 8));
  EXPECT_EQ(p.score, 0.5);
  EXPECT_TRUE(p.label);
  EXPECT_EQ(code_of([&] { predict(m, featurize("x", 16)); }), ErrorCode::kDimMismatch);
}

TEST(Predict, MonotoneInWeight) {
  LinearModel m;
  m.dim = 8;
  m.weights.assign(9, 0.0);
  auto x = featurize("token", 8);
  const auto i = x.entries[0].first;
  double last = 0;
  for (double w : {-2.0, -1.0, 0.0, 1.0, 3.0}) {
    m.weights[i] = w;
    const double s = predict(m, x).score;
    EXPECT_GT(s, last);
    last = s;
  }
}

TEST(Model, SaveLoadRoundTrip) {
  auto m = train(toy_set(8, 50));
  test::TempDir dir;
  m.save(dir.path() / "m.json");
  auto back = LinearModel::load(dir.path() / "m.json");
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.loss_trace, m.loss_trace);
  EXPECT_EQ(back.dim, m.dim);
  EXPECT_EQ(back.options.seed, m.options.seed);
  EXPECT_THROW(LinearModel::from_json("{}"), Error);
}

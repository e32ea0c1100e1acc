#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace soelabel {

inline constexpr std::size_t kDefaultFeatureDim = 4096;

// Sparse storage of a fixed-dimension vector; entries are sorted by index and
// unique.
struct FeatureVector {
  std::size_t dim = kDefaultFeatureDim;
  std::vector<std::pair<std::uint32_t, double>> entries;

  double at(std::size_t i) const;
  std::vector<double> dense() const;
  bool operator==(const FeatureVector&) const = default;
};

// Lowercases, splits on runs of non-alphanumeric bytes, hashes each token
// with FNV-1a 64 modulo dim, and divides counts by the token count.
FeatureVector featurize(std::string_view text, std::size_t dim = kDefaultFeatureDim);

struct TrainingExample {
  FeatureVector x;
  bool y = false;
};

struct TrainOptions {
  std::uint64_t seed = 0;
  int epochs = 200;
  double learning_rate = 0.5;
  double l2 = 1e-4;
};

struct LinearModel {
  std::size_t dim = kDefaultFeatureDim;
  std::vector<double> weights;  // dim + 1 values, bias last
  TrainOptions options;
  std::vector<double> loss_trace;  // loss before each epoch's update, then final

  double bias() const { return weights.back(); }
  std::string to_json() const;
  static LinearModel from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static LinearModel load(const std::filesystem::path& path);
};

// Mean logistic loss plus (l2/2)*|w|^2 over the non-bias weights.
double logistic_loss(const std::vector<double>& weights,
                     const std::vector<TrainingExample>& examples, double l2);

// Analytic gradient of logistic_loss.
std::vector<double> logistic_gradient(const std::vector<double>& weights,
                                      const std::vector<TrainingExample>& examples,
                                      double l2);

// Full-batch gradient descent from a small seeded initialization.
// SINGLE_CLASS unless both labels occur.
LinearModel train(const std::vector<TrainingExample>& examples,
                  const TrainOptions& options = {});

struct Prediction {
  bool label = false;
  double score = 0.5;
};

// score = logistic(w.x + b); label = score >= 0.5. DIM_MISMATCH on size.
Prediction predict(const LinearModel& model, const FeatureVector& x);

}  // namespace soelabel

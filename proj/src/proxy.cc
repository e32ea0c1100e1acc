#include "soelabel/proxy.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <random>

#include "json.hpp"
#include "soelabel/error.h"
#include "soelabel/util.h"

namespace soelabel {

using nlohmann::json;
using nlohmann::ordered_json;

double FeatureVector::at(std::size_t i) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), i,
                             [](const auto& e, std::size_t idx) { return e.first < idx; });
  return (it != entries.end() && it->first == i) ? it->second : 0.0;
}

std::vector<double> FeatureVector::dense() const {
  std::vector<double> out(dim, 0.0);
  for (const auto& [i, v] : entries) out[i] = v;
  return out;
}

FeatureVector featurize(std::string_view text, std::size_t dim) {
  if (dim < 2) throw Error(ErrorCode::kConfigError, "feature dimension must be >= 2");
  std::map<std::uint32_t, std::uint64_t> counts;
  std::uint64_t n_tokens = 0;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    counts[static_cast<std::uint32_t>(fnv1a64(token) % dim)]++;
    ++n_tokens;
    token.clear();
  };
  for (unsigned char c : text) {
    if (c < 0x80 && std::isalnum(c)) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  FeatureVector v;
  v.dim = dim;
  v.entries.reserve(counts.size());
  for (const auto& [i, c] : counts) {
    v.entries.emplace_back(i, static_cast<double>(c) / static_cast<double>(n_tokens));
  }
  return v;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double margin(const std::vector<double>& w, const FeatureVector& x) {
  double z = w.back();
  for (const auto& [i, v] : x.entries) z += w[i] * v;
  return z;
}

void check_dims(const std::vector<double>& w, const std::vector<TrainingExample>& ex) {
  for (const auto& e : ex) {
    if (e.x.dim + 1 != w.size()) throw Error(ErrorCode::kDimMismatch, "example dimension");
  }
}

}  // namespace

double logistic_loss(const std::vector<double>& weights,
                     const std::vector<TrainingExample>& examples, double l2) {
  check_dims(weights, examples);
  double loss = 0.0;
  for (const auto& e : examples) {
    const double z = margin(weights, e.x);
    // -[y log s + (1-y) log(1-s)] = softplus(z) - y z
    loss += softplus(z) - (e.y ? z : 0.0);
  }
  loss /= static_cast<double>(examples.size());
  double reg = 0.0;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) reg += weights[i] * weights[i];
  return loss + 0.5 * l2 * reg;
}

std::vector<double> logistic_gradient(const std::vector<double>& weights,
                                      const std::vector<TrainingExample>& examples,
                                      double l2) {
  check_dims(weights, examples);
  std::vector<double> g(weights.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(examples.size());
  for (const auto& e : examples) {
    const double r = (sigmoid(margin(weights, e.x)) - (e.y ? 1.0 : 0.0)) * inv_n;
    for (const auto& [i, v] : e.x.entries) g[i] += r * v;
    g.back() += r;
  }
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) g[i] += l2 * weights[i];
  return g;
}

LinearModel train(const std::vector<TrainingExample>& examples,
                  const TrainOptions& options) {
  const bool has_pos = std::any_of(examples.begin(), examples.end(),
                                   [](const auto& e) { return e.y; });
  const bool has_neg = std::any_of(examples.begin(), examples.end(),
                                   [](const auto& e) { return !e.y; });
  if (!has_pos || !has_neg) {
    throw Error(ErrorCode::kSingleClass, "training needs both labels");
  }
  if (options.epochs < 0 || !(options.learning_rate > 0.0) || options.l2 < 0.0) {
    throw Error(ErrorCode::kConfigError, "bad training options");
  }
  const std::size_t dim = examples.front().x.dim;
  LinearModel model;
  model.dim = dim;
  model.options = options;
  std::vector<double> w(dim + 1, 0.0);
  std::mt19937_64 rng(derive_seed(options.seed, 0x11ea));
  for (auto& v : w) v = (unit_double(rng) - 0.5) * 0.02;
  check_dims(w, examples);

  // Descent runs in coordinates where every used feature has unit RMS over
  // the training set; the scale is folded back into the returned weights.
  std::vector<double> scale(dim, 0.0);
  for (const auto& e : examples) {
    for (const auto& [i, v] : e.x.entries) scale[i] += v * v;
  }
  const double n = static_cast<double>(examples.size());
  for (auto& s : scale) s = s > 0.0 ? 1.0 / std::sqrt(s / n) : 0.0;
  std::vector<TrainingExample> scaled = examples;
  for (auto& e : scaled) {
    for (auto& [i, v] : e.x.entries) v *= scale[i];
  }
  for (std::size_t i = 0; i < dim; ++i) {
    if (scale[i] == 0.0) w[i] = 0.0;
  }

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    model.loss_trace.push_back(logistic_loss(w, scaled, options.l2));
    const auto g = logistic_gradient(w, scaled, options.l2);
    for (std::size_t i = 0; i < g.size(); ++i) w[i] -= options.learning_rate * g[i];
  }
  model.loss_trace.push_back(logistic_loss(w, scaled, options.l2));
  model.weights = w;
  for (std::size_t i = 0; i < dim; ++i) model.weights[i] *= scale[i];
  return model;
}

Prediction predict(const LinearModel& model, const FeatureVector& x) {
  if (x.dim != model.dim || model.weights.size() != model.dim + 1) {
    throw Error(ErrorCode::kDimMismatch,
                std::to_string(x.dim) + " vs " + std::to_string(model.dim));
  }
  const double s = sigmoid(margin(model.weights, x));
  return {s >= 0.5, s};
}

std::string LinearModel::to_json() const {
  ordered_json j;
  j["format"] = "soelabel-linear-v1";
  j["dim"] = dim;
  j["seed"] = options.seed;
  j["epochs"] = options.epochs;
  j["learning_rate"] = options.learning_rate;
  j["l2"] = options.l2;
  j["loss_trace"] = loss_trace;
  j["weights"] = weights;
  return j.dump() + "\n";
}

LinearModel LinearModel::from_json(std::string_view text) {
  try {
    auto j = json::parse(text);
    if (j.at("format").get<std::string>() != "soelabel-linear-v1") {
      throw Error(ErrorCode::kConfigError, "unsupported model format");
    }
    LinearModel m;
    m.dim = j.at("dim").get<std::size_t>();
    m.options.seed = j.at("seed").get<std::uint64_t>();
    m.options.epochs = j.at("epochs").get<int>();
    m.options.learning_rate = j.at("learning_rate").get<double>();
    m.options.l2 = j.at("l2").get<double>();
    m.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    if (m.weights.size() != m.dim + 1) {
      throw Error(ErrorCode::kDimMismatch, "weight count does not match dim");
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedLine, e.what());
  }
}

void LinearModel::save(const std::filesystem::path& path) const {
  write_file_atomic(path, to_json());
}

LinearModel LinearModel::load(const std::filesystem::path& path) {
  return from_json(read_file(path));
}

}  // namespace soelabel

// Independent reference implementations used as test oracles. Nothing here
// calls into the library; the RNG protocol is re-derived from its documented
// constants.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace oracle {

struct Pair {
  bool pred;
  bool truth;
  std::string protocol;
};

struct Scores {
  double recall, precision, f1, accuracy;
};

// Direct per-item loop with the zero-denominator conventions.
inline Scores brute_metrics(const std::vector<Pair>& items) {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& p : items) {
    if (p.pred && p.truth) tp++;
    if (p.pred && !p.truth) fp++;
    if (!p.pred && p.truth) fn++;
    if (!p.pred && !p.truth) tn++;
  }
  Scores s;
  s.recall = (tp + fn) ? double(tp) / double(tp + fn) : 1.0;
  s.precision = (tp + fp) ? double(tp) / double(tp + fp) : 1.0;
  s.f1 = (s.precision + s.recall) > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                                      : 0.0;
  s.accuracy = double(tp + tn) / double(items.size());
  return s;
}

inline Scores brute_macro(const std::vector<Pair>& items) {
  std::map<std::string, std::vector<Pair>> groups;
  for (const auto& p : items) groups[p.protocol].push_back(p);
  Scores s{0, 0, 0, 0};
  for (const auto& [_, g] : groups) {
    auto m = brute_metrics(g);
    s.recall += m.recall;
    s.precision += m.precision;
    s.f1 += m.f1;
    s.accuracy += m.accuracy;
  }
  const double n = double(groups.size());
  return {s.recall / n, s.precision / n, s.f1 / n, s.accuracy / n};
}

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t r) {
  return splitmix(splitmix(seed) ^ (r * 0xd1b54a32d192ed03ULL));
}

// Type-7 sample quantile.
inline double type7(std::vector<double> xs, double q) {
  std::sort(xs.begin(), xs.end());
  const double h = (double(xs.size()) - 1.0) * q;
  const double lo = std::floor(h);
  const auto i = static_cast<std::size_t>(lo);
  const auto j = std::min(i + 1, xs.size() - 1);
  return xs[i] + (h - lo) * (xs[j] - xs[i]);
}

// Table-level percentile bootstrap of F1 (metric selects the field).
inline std::pair<double, double> bootstrap(const std::vector<Pair>& items,
                                           double Scores::*metric, std::size_t reps,
                                           std::uint64_t seed, double level) {
  std::vector<double> stats;
  stats.reserve(reps);
  const std::size_t n = items.size();
  for (std::size_t r = 0; r < reps; ++r) {
    std::mt19937_64 gen(stream_seed(seed, r));
    std::vector<Pair> sample;
    sample.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double u = double(gen() >> 11) / 9007199254740992.0;
      auto idx = static_cast<std::size_t>(u * double(n));
      if (idx >= n) idx = n - 1;
      sample.push_back(items[idx]);
    }
    stats.push_back(brute_metrics(sample).*metric);
  }
  const double a = 1.0 - level;
  return {type7(stats, a / 2), type7(stats, 1 - a / 2)};
}

}  // namespace oracle

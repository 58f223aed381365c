#include "metrics.hpp"

#include "common.hpp"

namespace uqxai {

double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
  require(truth.size() == pred.size() && !truth.empty(), "accuracy: size mismatch");
  long hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == pred[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double weighted_f1(const std::vector<int>& truth, const std::vector<int>& pred, int n_classes) {
  require(truth.size() == pred.size() && !truth.empty(), "weighted_f1: size mismatch");
  std::vector<long> tp(static_cast<std::size_t>(n_classes), 0);
  std::vector<long> fp(static_cast<std::size_t>(n_classes), 0);
  std::vector<long> fn(static_cast<std::size_t>(n_classes), 0);
  std::vector<long> support(static_cast<std::size_t>(n_classes), 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]);
    const auto p = static_cast<std::size_t>(pred[i]);
    ++support[t];
    if (t == p) {
      ++tp[t];
    } else {
      ++fn[t];
      ++fp[p];
    }
  }
  double acc = 0.0;
  for (int c = 0; c < n_classes; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    const double denom = 2.0 * tp[ci] + fp[ci] + fn[ci];
    const double f1 = denom > 0 ? 2.0 * tp[ci] / denom : 0.0;
    acc += f1 * static_cast<double>(support[ci]);
  }
  return acc / static_cast<double>(truth.size());
}

}  // namespace uqxai

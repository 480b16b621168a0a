#include "splitbench/paradigms/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "splitbench/nn/loss.hpp"

namespace splitbench::paradigms {

Evaluation evaluate(std::span<const nn::LayerStack<float>> segments, const data::Dataset& test,
                    std::size_t chunk) {
  if (segments.empty()) throw Error("invalid_model", "no segments to evaluate");
  const std::size_t k = segments.back().output_shape().at(0);
  if (k != test.class_count)
    throw ShapeError("model has " + std::to_string(k) + " outputs, test set has " +
                     std::to_string(test.class_count) + " classes");
  Evaluation ev;
  if (test.size() == 0) return ev;

  std::size_t correct = 0;
  double loss_sum = 0;
  std::vector<double> scores;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < test.size(); start += chunk) {
    const std::size_t end = std::min(test.size(), start + chunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    data::Batch b = data::gather(test, idx);
    nn::Tensor out = std::move(b.features);
    for (const auto& seg : segments) out = nn::predict(seg, std::move(out));
    loss_sum += nn::cross_entropy_value(out, b.labels) * static_cast<double>(idx.size());
    for (std::size_t s = 0; s < idx.size(); ++s) {
      const float* z = out.raw() + s * k;
      const auto best = static_cast<std::int32_t>(std::max_element(z, z + k) - z);
      correct += best == b.labels[s] ? 1 : 0;
      if (k == 2) scores.push_back(1.0 / (1.0 + std::exp(static_cast<double>(z[0] - z[1]))));
    }
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  ev.mean_loss = loss_sum / static_cast<double>(test.size());
  if (k == 2) ev.auc = auc_binary(scores, test.labels);
  return ev;
}

double auc_binary(std::span<const double> scores, std::span<const std::int32_t> labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == 1) {
      pos += 1;
      rank_sum += rank[i];
    } else {
      neg += 1;
    }
  }
  if (pos == 0 || neg == 0) return std::numeric_limits<double>::quiet_NaN();
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

Evaluation mean_evaluation(std::span<const Evaluation> evals) {
  Evaluation m;
  if (evals.empty()) return m;
  double auc = 0;
  bool has_auc = true;
  for (const auto& e : evals) {
    m.accuracy += e.accuracy;
    m.mean_loss += e.mean_loss;
    if (e.auc) auc += *e.auc; else has_auc = false;
  }
  const auto n = static_cast<double>(evals.size());
  m.accuracy /= n;
  m.mean_loss /= n;
  if (has_auc) m.auc = auc / n;
  return m;
}

}  // namespace splitbench::paradigms

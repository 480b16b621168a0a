#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "splitbench/data/dataset.hpp"
#include "splitbench/nn/stack.hpp"

namespace splitbench::paradigms {

struct Evaluation {
  double accuracy = 0;
  double mean_loss = 0;
  std::optional<double> auc;  // binary tasks only
};

// Runs the test set through `segments` in order (chunked) and scores the
// final logits. AUC is reported when the model has two outputs, scored on
// the softmax probability of class 1.
Evaluation evaluate(std::span<const nn::LayerStack<float>> segments, const data::Dataset& test,
                    std::size_t chunk = 512);

// Area under the ROC curve via the rank statistic, with tied scores given
// their average rank. Returns NaN if either class is absent.
double auc_binary(std::span<const double> scores, std::span<const std::int32_t> labels);

// Field-wise mean.
Evaluation mean_evaluation(std::span<const Evaluation> evals);

}  // namespace splitbench::paradigms

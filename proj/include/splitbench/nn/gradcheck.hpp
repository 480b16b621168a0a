#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "splitbench/nn/stack.hpp"

namespace splitbench::nn {

// Central differences (f(p+eps) - f(p-eps)) / (2 eps) of the mean
// cross-entropy loss, one parameter element at a time. Uses forward only.
std::vector<Tensor64> finite_diff_grad(const LayerStack<double>& stack, const Tensor64& batch,
                                       std::span<const std::int32_t> labels, double eps);

// Same, with respect to the batch input.
Tensor64 finite_diff_input_grad(const LayerStack<double>& stack, const Tensor64& batch,
                                std::span<const std::int32_t> labels, double eps);

// max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|), maximized over tensor
// pairs; 0 when both sides are identically zero.
double max_relative_error(std::span<const Tensor64> a, std::span<const Tensor64> b);

struct GradCheckResult {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t parameters = 0;
  double param_error = 0;  // analytic vs numeric parameter gradients
  double input_error = 0;  // analytic vs numeric input gradient
};

GradCheckResult check_gradients(const std::string& name, std::uint64_t seed,
                                const LayerStack<double>& stack, const Tensor64& batch,
                                std::span<const std::int32_t> labels, double eps);

// Small stacks that together exercise every layer kind, each checked on
// N(0,1) inputs for every seed.
std::vector<std::string> gradient_suite_cases();
LayerStack<double> gradient_suite_stack(const std::string& name, std::uint64_t seed);
std::vector<GradCheckResult> run_gradient_suite(std::span<const std::uint64_t> seeds,
                                                double eps = 1e-4);

}  // namespace splitbench::nn

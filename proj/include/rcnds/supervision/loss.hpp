#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "rcnds/core/tensor.hpp"
#include "rcnds/graph/graph_spec.hpp"

namespace rcnds::supervision {

/// Max-shifted softmax of one row. Throws NumericError on non-finite input.
template <typename T>
std::vector<T> softmax(std::span<const T> logits);

/// Row-wise softmax of (n, classes) logits.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits);

/// -ln p[label], with p clamped to >= 1e-12. Throws InputError when the
/// label is out of range.
template <typename T>
double cross_entropy(std::span<const T> probs, int label);

struct LossReport {
  double main_loss = 0.0;
  std::vector<double> branch_losses;
  double alpha = 0.0;
  double combined = 0.0;
};

/// L0 + alpha * sum(branch_losses). Throws ConfigError for alpha < 0.
double combined_loss(double main_loss, const std::vector<double>& branch_losses, double alpha);

/// alpha0 * (1 - t/N). t > N clamps to 0 with a warning; N < 1 or t < 0
/// throws ConfigError.
double alpha_at(double alpha0, double t, double total);

/// Batch-mean cross-entropy of (n, classes) logits, computed as
/// logsumexp - logit[label] (no clamp, so it stays consistent with the
/// gradient under saturation), and d(loss)/d(logits) = (softmax - onehot) / n.
template <typename T>
struct BatchLoss {
  double loss = 0.0;
  Tensor<T> grad;
  Tensor<T> probs;
};

template <typename T>
BatchLoss<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

/// The combined objective over every output of a train-mode forward.
/// Branch gradients are pre-scaled by alpha; with alpha == 0 the branch
/// outputs get no gradient entry at all, so backward skips them.
template <typename T>
struct Objective {
  LossReport report;
  std::map<std::string, Tensor<T>> logit_grads;
};

template <typename T>
Objective<T> combined_objective(const graph::GraphSpec& g, const std::map<std::string, Tensor<T>>& logits,
                                std::span<const int> labels, double alpha);

/// Rank of the true class among the scores (0 = best). Ties are broken
/// by class index, so the result is deterministic.
template <typename T>
int label_rank(std::span<const T> scores, int label);

/// Number of rows of (n, classes) scores whose label ranks below k.
template <typename T>
int topk_correct(const Tensor<T>& scores, std::span<const int> labels, int k);

}  // namespace rcnds::supervision

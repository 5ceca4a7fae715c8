#include "rcnds/supervision/loss.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <utility>

namespace rcnds::supervision {

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  if (logits.empty()) throw ShapeError("softmax of an empty row");
  T peak = logits[0];
  for (T v : logits) {
    if (!std::isfinite(v)) throw NumericError("softmax: non-finite logit");
    peak = std::max(peak, v);
  }
  std::vector<T> p(logits.size());
  T sum = T(0);
  for (std::size_t i = 0; i < p.size(); ++i) sum += p[i] = std::exp(logits[i] - peak);
  for (T& v : p) v /= sum;
  return p;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax_rows: expected (n, classes), got " + logits.shape().str());
  Tensor<T> out(logits.shape());
  const std::size_t k = logits.features();
  for (int n = 0; n < logits.batch(); ++n) {
    const auto row = softmax(logits.span().subspan(static_cast<std::size_t>(n) * k, k));
    std::copy(row.begin(), row.end(), out.data() + static_cast<std::size_t>(n) * k);
  }
  return out;
}

template <typename T>
double cross_entropy(std::span<const T> probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
    throw InputError("label " + std::to_string(label) + " outside [0, " + std::to_string(probs.size()) + ")");
  }
  return -std::log(std::max(static_cast<double>(probs[static_cast<std::size_t>(label)]), 1e-12));
}

double combined_loss(double main_loss, const std::vector<double>& branch_losses, double alpha) {
  if (alpha < 0) throw ConfigError("negative auxiliary weight");
  double sum = 0.0;
  for (double l : branch_losses) sum += l;
  return main_loss + alpha * sum;
}

double alpha_at(double alpha0, double t, double total) {
  if (total < 1) throw ConfigError("alpha_at: total must be >= 1");
  if (t < 0) throw ConfigError("alpha_at: negative step");
  if (t > total) {
    spdlog::warn("alpha_at: step {} beyond total {}; clamping to 0", t, total);
    return 0.0;
  }
  return std::max(0.0, alpha0 * (1.0 - t / total));
}

template <typename T>
BatchLoss<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || static_cast<std::size_t>(logits.batch()) != labels.size()) {
    throw ShapeError("softmax_cross_entropy: logits " + logits.shape().str() + " vs " + std::to_string(labels.size()) +
                     " labels");
  }
  BatchLoss<T> r{0.0, Tensor<T>(logits.shape()), softmax_rows(logits)};
  const std::size_t k = logits.features();
  const T inv = T(1) / static_cast<T>(labels.size());
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const auto row = std::as_const(r.probs).span().subspan(n * k, k);
    const auto z = logits.span().subspan(n * k, k);
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= k) {
      throw InputError("label " + std::to_string(labels[n]) + " outside [0, " + std::to_string(k) + ")");
    }
    // Log-space, unclamped: a clamped -ln p goes flat once p underflows
    // while (p - onehot) does not, and saturated deep nets hit that.
    const double peak = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (T v : z) sum += std::exp(static_cast<double>(v) - peak);
    r.loss += peak + std::log(sum) - static_cast<double>(z[static_cast<std::size_t>(labels[n])]);
    for (std::size_t j = 0; j < k; ++j) {
      r.grad[n * k + j] = (row[j] - (static_cast<int>(j) == labels[n] ? T(1) : T(0))) * inv;
    }
  }
  r.loss /= static_cast<double>(labels.size());
  return r;
}

template <typename T>
Objective<T> combined_objective(const graph::GraphSpec& g, const std::map<std::string, Tensor<T>>& logits,
                                std::span<const int> labels, double alpha) {
  if (alpha < 0) throw ConfigError("negative auxiliary weight");
  Objective<T> out;
  auto main = logits.find(g.main_output);
  if (main == logits.end()) throw StateError("main output '" + g.main_output + "' missing from forward result");
  BatchLoss<T> l0 = softmax_cross_entropy(main->second, labels);
  out.report.main_loss = l0.loss;
  out.logit_grads.emplace(g.main_output, std::move(l0.grad));
  for (const std::string& b : g.branch_outputs) {
    auto it = logits.find(b);
    if (it == logits.end()) throw StateError("branch output '" + b + "' missing; was forward run in train mode?");
    BatchLoss<T> lb = softmax_cross_entropy(it->second, labels);
    out.report.branch_losses.push_back(lb.loss);
    if (alpha > 0) {
      for (auto& v : lb.grad.vec()) v *= static_cast<T>(alpha);
      out.logit_grads.emplace(b, std::move(lb.grad));
    }
  }
  out.report.alpha = alpha;
  out.report.combined = combined_loss(out.report.main_loss, out.report.branch_losses, alpha);
  return out;
}

template <typename T>
int label_rank(std::span<const T> scores, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= scores.size()) throw InputError("label out of range");
  const T s = scores[static_cast<std::size_t>(label)];
  int rank = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > s || (scores[j] == s && static_cast<int>(j) < label)) ++rank;
  }
  return rank;
}

template <typename T>
int topk_correct(const Tensor<T>& scores, std::span<const int> labels, int k) {
  const std::size_t classes = scores.features();
  int correct = 0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (label_rank(scores.span().subspan(n * classes, classes), labels[n]) < k) ++correct;
  }
  return correct;
}

#define RCNDS_INSTANTIATE(T)                                                                               \
  template std::vector<T> softmax(std::span<const T>);                                                     \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                                       \
  template double cross_entropy(std::span<const T>, int);                                                  \
  template BatchLoss<T> softmax_cross_entropy(const Tensor<T>&, std::span<const int>);                     \
  template Objective<T> combined_objective(const graph::GraphSpec&, const std::map<std::string, Tensor<T>>&, \
                                           std::span<const int>, double);                                  \
  template int label_rank(std::span<const T>, int);                                                        \
  template int topk_correct(const Tensor<T>&, std::span<const int>, int);

RCNDS_INSTANTIATE(float)
RCNDS_INSTANTIATE(double)

#undef RCNDS_INSTANTIATE

}  // namespace rcnds::supervision

#include "rcnds/train/trainer.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <future>
#include <numeric>

#include "rcnds/graph/dsl.hpp"
#include "rcnds/io/preprocess_info.hpp"
#include "rcnds/supervision/loss.hpp"
#include "rcnds/train/sgd.hpp"

namespace rcnds::train {
namespace {

// Rng streams forked off the run seed.
enum Stream : std::uint64_t { kInit = 1, kShuffle = 2, kAugment = 3, kDropout = 4, kReinit = 5 };

Batch assemble(const Dataset& d, const std::vector<std::size_t>& order, std::size_t first, std::size_t count,
               const MeanPixel& mean, const TrainConfig& cfg, Rng rng, bool augment) {
  std::vector<Tensor<float>> views;
  Batch b;
  for (std::size_t i = first; i < first + count; ++i) {
    const std::size_t idx = order[i];
    Tensor<float> s = preprocess(d.images[idx], mean, cfg.source_side);
    views.push_back(augment ? augment_train(s, cfg.crop, rng) : center_crop(s, cfg.crop));
    b.labels.push_back(d.labels[idx]);
  }
  b.images = stack(views);
  return b;
}

// Assembles the batches of one pass in order, up to `threads` ahead on
// worker threads. Each batch owns its Rng, so the content is independent of
// the thread count.
class BatchStream {
 public:
  BatchStream(const Dataset& d, std::vector<std::size_t> order, int batch, const MeanPixel& mean, const TrainConfig& cfg,
              const Rng& augment_rng, bool augment)
      : d_(d), order_(std::move(order)), batch_(static_cast<std::size_t>(batch)), mean_(mean), cfg_(cfg),
        rng_(augment_rng), augment_(augment) {
    while (queue_.size() < static_cast<std::size_t>(cfg_.threads - 1) && launch()) {
    }
  }

  std::size_t batches() const { return (order_.size() + batch_ - 1) / batch_; }

  bool next(Batch& out) {
    if (queue_.empty() && !launch(std::launch::deferred)) return false;
    out = queue_.front().get();
    queue_.pop_front();
    if (cfg_.threads > 1) launch();
    return true;
  }

 private:
  bool launch(std::launch policy = std::launch::async) {
    const std::size_t first = next_ * batch_;
    if (first >= order_.size()) return false;
    const std::size_t count = std::min(batch_, order_.size() - first);
    queue_.push_back(std::async(policy, assemble, std::cref(d_), std::cref(order_), first, count, std::cref(mean_),
                                std::cref(cfg_), rng_.fork(next_), augment_));
    ++next_;
    return true;
  }

  const Dataset& d_;
  std::vector<std::size_t> order_;
  std::size_t batch_;
  const MeanPixel& mean_;
  const TrainConfig& cfg_;
  Rng rng_;
  bool augment_;
  std::size_t next_ = 0;
  std::deque<std::future<Batch>> queue_;
};

std::vector<std::size_t> shuffled(std::size_t n, Rng rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

io::Checkpoint snapshot(const graph::GraphSpec& g, const graph::ParameterSet<float>& params,
                        const graph::ParameterSet<float>& velocity, int epoch, const TrainConfig& cfg,
                        const MeanPixel& mean) {
  io::Checkpoint c;
  c.arch = io::annotate_arch(graph::serialize_arch(g), {mean, cfg.crop, cfg.source_side});
  c.epoch = epoch;
  c.seed = cfg.seed;
  c.params = params;
  c.velocity = velocity;
  return c;
}

void check_compatible(const graph::GraphSpec& g, const Dataset& d, const TrainConfig& cfg, const char* which) {
  if (d.size() == 0) throw InputError(std::string(which) + " set is empty");
  if (d.num_classes() != g.num_classes) {
    throw ConfigError(std::string(which) + " set has " + std::to_string(d.num_classes()) + " classes, graph outputs " +
                      std::to_string(g.num_classes));
  }
  if (g.input_shape.c != 3 || g.input_shape.h != cfg.crop || g.input_shape.w != cfg.crop) {
    throw ConfigError("graph input does not match crop " + std::to_string(cfg.crop));
  }
}

}  // namespace

Accuracy evaluate(const graph::GraphSpec& g, const graph::ParameterSet<float>& params, const Dataset& data,
                  const MeanPixel& mean, int crop, int batch, bool ten_crop) {
  graph::Executor<float> exec(g);
  Rng unused(0);
  Accuracy acc;
  const int k5 = std::min(5, g.num_classes);
  int top1 = 0, top5 = 0;
  if (ten_crop) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::vector<float> p = evaluate_10crop(exec, params, data.images[i], mean, crop);
      const int rank = supervision::label_rank(std::span<const float>(p), data.labels[i]);
      top1 += rank < 1;
      top5 += rank < k5;
    }
  } else {
    TrainConfig view;
    view.crop = crop;
    view.source_side = data.size() ? data.images[0].height : crop;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t first = 0; first < data.size(); first += static_cast<std::size_t>(batch)) {
      const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(batch), data.size() - first);
      Batch b = assemble(data, order, first, count, mean, view, Rng(0), false);
      auto logits = exec.forward(params, b.images, ops::Mode::kEval, unused);
      const Tensor<float>& out = logits.at(g.main_output);
      top1 += supervision::topk_correct(out, b.labels, 1);
      top5 += supervision::topk_correct(out, b.labels, k5);
    }
  }
  acc.count = static_cast<int>(data.size());
  if (acc.count > 0) {
    acc.top1 = 100.0 * top1 / acc.count;
    acc.top5 = 100.0 * top5 / acc.count;
  }
  return acc;
}

std::vector<float> evaluate_10crop(graph::Executor<float>& exec, const graph::ParameterSet<float>& params,
                                   const io::Image8& image, const MeanPixel& mean, int crop) {
  const Tensor<float> sample = preprocess(image, mean, image.height);
  Rng unused(0);
  auto logits = exec.forward(params, stack(ten_crops(sample, crop)), ops::Mode::kEval, unused);
  const Tensor<float> probs = supervision::softmax_rows(logits.at(exec.graph().main_output));
  const std::size_t k = probs.features();
  std::vector<double> acc(k, 0.0);
  for (int n = 0; n < probs.batch(); ++n) {
    for (std::size_t j = 0; j < k; ++j) acc[j] += probs[static_cast<std::size_t>(n) * k + j];
  }
  std::vector<float> out(k);
  for (std::size_t j = 0; j < k; ++j) out[j] = static_cast<float>(acc[j] / probs.batch());
  return out;
}

TrainResult train(const graph::GraphSpec& g, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch, const graph::ParameterSet<float>* initial) {
  cfg.validate();
  check_compatible(g, train_set, cfg, "training");
  check_compatible(g, val_set, cfg, "validation");

  const Rng root(cfg.seed);
  graph::ParameterSet<float> params;
  if (initial) {
    params = graph::select_parameters(g, *initial);
  } else {
    Rng init = root.fork(kInit);
    params = graph::init_parameters(g, cfg.init_std, init);
  }
  graph::ParameterSet<float> velocity = params.zeros_like();
  graph::Executor<float> exec(g);
  Rng dropout = root.fork(kDropout);

  TrainResult r;
  r.mean = mean_pixel(train_set);
  r.best = snapshot(g, params, velocity, 0, cfg, r.mean);
  r.best_val_top1 = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr_at_epoch(cfg, epoch);
    m.alpha = supervision::alpha_at(cfg.alpha0, epoch, cfg.epochs);

    BatchStream stream(train_set, shuffled(train_set.size(), root.fork(kShuffle).fork(static_cast<std::uint64_t>(epoch))),
                       cfg.batch_train, r.mean, cfg, root.fork(kAugment).fork(static_cast<std::uint64_t>(epoch)), true);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    Batch b;
    for (int index = 0; stream.next(b); ++index) {
      auto logits = exec.forward(params, b.images, ops::Mode::kTrain, dropout);
      supervision::Objective<float> obj;
      try {
        obj = supervision::combined_objective(g, logits, b.labels, m.alpha);
      } catch (const NumericError& e) {
        throw DivergedError(epoch, index, e.what());
      }
      if (!std::isfinite(obj.report.combined)) throw DivergedError(epoch, index, "non-finite loss");
      auto grads = exec.backward(params, obj.logit_grads);
      sgd_step(params, grads, velocity, m.lr, cfg.momentum, cfg.weight_decay);
      loss_sum += obj.report.combined * b.size();
      seen += static_cast<std::size_t>(b.size());
    }
    m.train_loss = loss_sum / static_cast<double>(seen);

    const Accuracy val = evaluate(g, params, val_set, r.mean, cfg.crop, cfg.batch_val);
    m.val_top1 = val.top1;
    m.val_top5 = val.top5;
    m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.metrics.push_back(m);
    if (m.val_top1 > r.best_val_top1) {
      r.best_val_top1 = m.val_top1;
      r.best_epoch = epoch;
      r.best = snapshot(g, params, velocity, epoch, cfg, r.mean);
    }
    if (on_epoch) on_epoch(m);
  }
  if (r.best_epoch < 0) r.best_val_top1 = evaluate(g, params, val_set, r.mean, cfg.crop, cfg.batch_val).top1;
  r.final_params = std::move(params);
  return r;
}

graph::ParameterSet<float> transfer_parameters(const io::Checkpoint& base, const graph::GraphSpec& g_new, Rng& rng) {
  std::vector<std::string> output_fcs;
  for (const graph::LayerNode& n : g_new.nodes) {
    if (n.kind == graph::LayerKind::kOutput) output_fcs.push_back(n.inputs[0]);
  }
  auto is_output_fc = [&](const std::string& node) {
    return std::find(output_fcs.begin(), output_fcs.end(), node) != output_fcs.end();
  };

  graph::ParameterSet<float> out;
  for (const graph::ParamSpec& p : graph::param_specs(g_new)) {
    if (base.params.contains(p.name) && base.params.at(p.name).shape() == p.shape) {
      out.add(p.name, base.params.at(p.name));
    } else if (is_output_fc(p.node)) {
      out.add(p.name, p.role == graph::ParamRole::kWeight ? gaussian_init<float>(p.shape, 0.0, 0.001, rng)
                                                          : Tensor<float>(p.shape));
    } else if (!base.params.contains(p.name)) {
      throw CheckpointError("base checkpoint has no parameter '" + p.name + "'");
    } else {
      throw CheckpointError("parameter '" + p.name + "' is " + base.params.at(p.name).shape().str() +
                            " in the base checkpoint but " + p.shape.str() + " in the new graph");
    }
  }
  return out;
}

TrainResult fine_tune(const io::Checkpoint& base, const graph::GraphSpec& g_new, const Dataset& train_set,
                      const Dataset& val_set, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  Rng rng = Rng(cfg.seed).fork(kReinit);
  const graph::ParameterSet<float> start = transfer_parameters(base, g_new, rng);
  return train(g_new, train_set, val_set, cfg, on_epoch, &start);
}

void write_metrics_header(std::ostream& os) { os << "epoch,lr,alpha,train_loss,val_top1,val_top5,wall_time_s\n"; }

void write_metrics_row(std::ostream& os, const EpochMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", m.epoch, m.lr, m.alpha, m.train_loss, m.val_top1,
                m.val_top5, m.wall_time_s);
  os << buf;
}

}  // namespace rcnds::train

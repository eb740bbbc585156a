#ifndef MACBIG_OPTIM_HPP
#define MACBIG_OPTIM_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "macbig/model.hpp"

namespace macbig {

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double l2 = 0.001;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  std::size_t folds = 10;
  double train_frac = 0.80;
  double val_frac = 0.05;
  double test_frac = 0.15;
  std::uint64_t seed = 1234;
};

// -log(p[target]) with p clipped to [1e-7, 1]. The clip guards the value
// only; backward uses the fused softmax gradient.
template <class T>
T cross_entropy(const TensorT<T>& probs, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= probs.numel())
    throw ShapeError("cross_entropy: target outside class range");
  double p = static_cast<double>(probs[static_cast<std::size_t>(target)]);
  p = std::min(std::max(p, 1e-7), 1.0);
  return static_cast<T>(-std::log(p));
}

// Sum of squared weights over the regularized tensors (conv kernels, GRU
// input/recurrent weights, dense weights, attention projections).
template <class T>
double l2_sum(const MacbigParamsT<T>& p) {
  double acc = 0.0;
  for_each_tensor(p, [&](const std::string&, const TensorT<T>& t, bool reg) {
    if (!reg) return;
    for (T v : t.data) acc += static_cast<double>(v) * static_cast<double>(v);
  });
  return acc;
}

inline double regularized_cost(double mean_ce, double l2s, double lambda,
                               std::size_t m) {
  return mean_ce + lambda / (2.0 * static_cast<double>(m)) * l2s;
}

struct Sample {
  const TokenGrid* doc = nullptr;
  int label = -1;
};
using SampleList = std::vector<Sample>;

// Inference-mode batch cost: mean cross-entropy plus the L2 penalty. This is
// the scalar that backprop_batch differentiates (with dropout disabled).
template <class T>
double batch_cost(const SampleList& batch, const MacbigParamsT<T>& p,
                  double lambda) {
  if (batch.empty()) throw UsageError("empty batch");
  double ce = 0.0;
  for (const auto& s : batch) {
    TensorT<T> probs = model_forward(*s.doc, p, false, nullptr);
    ce += static_cast<double>(cross_entropy(probs, s.label));
  }
  ce /= static_cast<double>(batch.size());
  return regularized_cost(ce, l2_sum(p), lambda, batch.size());
}

struct AdamState {
  std::vector<Tensor> m, v;  // one pair per tensor, visitation order
  std::uint64_t t = 0;
};

AdamState make_adam_state(const MacbigParams& p);

// w -= lr * mhat / (sqrt(vhat) + eps) with bias-corrected moments.
void adam_step(MacbigParams& p, const MacbigParams& grads, AdamState& s,
               const TrainConfig& cfg);

// Reusable gradient accumulation buffers; samples are spread over a fixed
// number of shards (position mod kGradShards) that are reduced in index
// order, so the result does not depend on how many threads ran.
struct BatchWorkspace {
  std::vector<MacbigParams> shards;
};

constexpr std::size_t kGradShards = 16;

// Training-mode forward/backward over one batch. Writes the gradient of the
// regularized cost, (1/m) sum dCE + (lambda/m) w on regularized tensors, into
// `grads` and returns the cost. Dropout masks come from master.child(stream)
// with stream = (epoch << 32) | position so any execution order draws the
// same masks.
double backprop_batch(const SampleList& batch, const MacbigParams& params,
                      const TrainConfig& cfg, const Rng& master,
                      std::uint64_t epoch, std::size_t position_base,
                      MacbigParams& grads, BatchWorkspace* ws = nullptr);

}  // namespace macbig

#endif

#include "macbig/optim.hpp"

#include <cmath>
#include <string>

namespace macbig {

AdamState make_adam_state(const MacbigParams& p) {
  AdamState s;
  for_each_tensor(p, [&](const std::string&, const Tensor& t, bool) {
    s.m.push_back(Tensor(t.shape));
    s.v.push_back(Tensor(t.shape));
  });
  return s;
}

void adam_step(MacbigParams& p, const MacbigParams& grads, AdamState& s,
               const TrainConfig& cfg) {
  s.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.t));
  const real b1 = static_cast<real>(cfg.beta1);
  const real b2 = static_cast<real>(cfg.beta2);
  const real lr = static_cast<real>(cfg.lr);
  const real eps = static_cast<real>(cfg.epsilon);
  const real ibc1 = static_cast<real>(1.0 / bc1);
  const real ibc2 = static_cast<real>(1.0 / bc2);

  std::size_t ti = 0;
  std::vector<const Tensor*> gts;
  for_each_tensor(grads, [&](const std::string&, const Tensor& t, bool) {
    gts.push_back(&t);
  });
  for_each_tensor(p, [&](const std::string& name, Tensor& w, bool) {
    const Tensor& g = *gts[ti];
    Tensor& m = s.m[ti];
    Tensor& v = s.v[ti];
    if (!w.same_shape(g) || !w.same_shape(m))
      throw ShapeError("adam_step: state shape mismatch at " + name);
    const std::size_t n = w.numel();
    for (std::size_t i = 0; i < n; ++i) {
      const real gi = g[i];
      m[i] = b1 * m[i] + (real(1) - b1) * gi;
      v[i] = b2 * v[i] + (real(1) - b2) * gi * gi;
      const real mhat = m[i] * ibc1;
      const real vhat = v[i] * ibc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    ++ti;
  });
}

namespace {

void zero_like(MacbigParams& dst) {
  for_each_tensor(dst, [](const std::string&, Tensor& t, bool) { t.fill(0); });
}

void accumulate(MacbigParams& dst, const MacbigParams& src) {
  std::vector<const Tensor*> sts;
  for_each_tensor(src, [&](const std::string&, const Tensor& t, bool) {
    sts.push_back(&t);
  });
  std::size_t ti = 0;
  for_each_tensor(dst, [&](const std::string&, Tensor& t, bool) {
    const Tensor& s = *sts[ti++];
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] += s[i];
  });
}

}  // namespace

double backprop_batch(const SampleList& batch, const MacbigParams& params,
                      const TrainConfig& cfg, const Rng& master,
                      std::uint64_t epoch, std::size_t position_base,
                      MacbigParams& grads, BatchWorkspace* ws) {
  const std::size_t m = batch.size();
  if (m == 0) throw UsageError("empty batch");

  const std::size_t n_shards = std::min(kGradShards, m);
  BatchWorkspace local;
  BatchWorkspace& w = ws ? *ws : local;
  while (w.shards.size() < n_shards)
    w.shards.push_back(zero_params(params.hp, params.vocab()));
  for (std::size_t s = 0; s < n_shards; ++s) zero_like(w.shards[s]);

  // Per-sample losses are stored and reduced in index order; shard s owns
  // samples s, s+n_shards, ... and walks them sequentially, so the floating
  // point accumulation order is fixed regardless of scheduling.
  std::vector<double> losses(m, 0.0);
  for (std::size_t s = 0; s < n_shards; ++s) {
    for (std::size_t i = s; i < m; i += n_shards) {
      const Sample& smp = batch[i];
      if (smp.label < 0 ||
          static_cast<std::size_t>(smp.label) >= params.hp.classes)
        throw DataError("label out of range at batch position " +
                        std::to_string(i));
      const std::uint64_t stream =
          (epoch << 32) | static_cast<std::uint64_t>(position_base + i);
      Rng drop_rng = master.child(stream);
      DocCacheT<real> cache;
      TensorT<real> probs =
          model_forward(*smp.doc, params, true, &drop_rng, &cache);
      const double ce = static_cast<double>(cross_entropy(probs, smp.label));
      if (!std::isfinite(ce))
        throw NumericError("non-finite loss at batch position " +
                           std::to_string(i));
      losses[i] = ce;
      model_backward(*smp.doc, cache, params, smp.label, w.shards[s]);
    }
  }

  zero_like(grads);
  for (std::size_t s = 0; s < n_shards; ++s) accumulate(grads, w.shards[s]);

  double ce_sum = 0.0;
  for (double l : losses) ce_sum += l;
  const double mean_ce = ce_sum / static_cast<double>(m);

  // Scale to batch means and add the L2 pull on regularized tensors.
  const real inv_m = static_cast<real>(1.0 / static_cast<double>(m));
  const real pull = static_cast<real>(cfg.l2 / static_cast<double>(m));
  double l2s = 0.0;
  std::vector<std::pair<const Tensor*, bool>> pts;
  for_each_tensor(params, [&](const std::string&, const Tensor& t, bool reg) {
    pts.emplace_back(&t, reg);
  });
  std::size_t ti = 0;
  for_each_tensor(grads, [&](const std::string&, Tensor& g, bool) {
    const Tensor& wv = *pts[ti].first;
    const bool reg = pts[ti].second;
    ++ti;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      g[i] *= inv_m;
      if (reg) {
        g[i] += pull * wv[i];
        l2s += static_cast<double>(wv[i]) * static_cast<double>(wv[i]);
      }
    }
    if (!g.all_finite()) throw NumericError("non-finite gradient");
  });

  return regularized_cost(mean_ce, l2s, cfg.l2, m);
}

}  // namespace macbig

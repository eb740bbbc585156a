#include "macbig/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace macbig {

EvalLA eval_loss_acc(const SampleList& data, const MacbigParams& p) {
  if (data.empty()) throw UsageError("evaluation set is empty");
  double ce = 0.0;
  std::size_t hits = 0;
  for (const Sample& s : data) {
    auto [probs, pred] = predict(*s.doc, p);
    ce += static_cast<double>(cross_entropy(probs, s.label));
    if (pred == s.label) ++hits;
  }
  return {ce / static_cast<double>(data.size()),
          static_cast<double>(hits) / static_cast<double>(data.size())};
}

TrainResult train_model(const SampleList& train, const SampleList& val,
                        const MacbigParams& init, const TrainConfig& cfg,
                        std::ostream* log) {
  if (train.empty()) throw UsageError("training set is empty");
  if (val.empty()) throw UsageError("validation set is empty");
  if (cfg.batch_size == 0) throw UsageError("batch size must be positive");
  for (std::size_t i = 0; i < train.size(); ++i)
    if (train[i].label < 0 ||
        static_cast<std::size_t>(train[i].label) >= init.hp.classes)
      throw DataError("label out of range at training sample " +
                      std::to_string(i));

  TrainResult res;
  res.best_params = init;
  res.final_params = init;
  if (cfg.epochs == 0) return res;

  MacbigParams params = init;
  AdamState adam = make_adam_state(params);
  MacbigParams grads = zero_params(params.hp, params.vocab());
  BatchWorkspace ws;
  Rng master(cfg.seed);

  std::vector<std::size_t> perm(train.size());
  double best_acc = -1.0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng order = master.child(epoch);
    shuffle(perm, order);
    for (std::size_t start = 0; start < perm.size();
         start += cfg.batch_size) {
      std::size_t end = std::min(perm.size(), start + cfg.batch_size);
      SampleList batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i)
        batch.push_back(train[perm[i]]);
      backprop_batch(batch, params, cfg, master, epoch, start, grads, &ws);
      adam_step(params, grads, adam, cfg);
    }
    EpochStats st;
    EvalLA tr = eval_loss_acc(train, params);
    EvalLA va = eval_loss_acc(val, params);
    st.train_loss = tr.loss;
    st.train_acc = tr.acc;
    st.val_loss = va.loss;
    st.val_acc = va.acc;
    res.history.push_back(st);
    if (va.acc > best_acc) {
      best_acc = va.acc;
      res.best_params = params;
      res.best_epoch = epoch;
    }
    if (log) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "epoch %zu  train loss %.6f acc %.4f  val loss %.6f acc "
                    "%.4f\n",
                    epoch, st.train_loss, st.train_acc, st.val_loss,
                    st.val_acc);
      (*log) << buf << std::flush;
    }
  }
  res.final_params = std::move(params);
  return res;
}

std::string history_csv(const std::vector<EpochStats>& history) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char buf[160];
  for (std::size_t i = 0; i < history.size(); ++i) {
    const EpochStats& s = history[i];
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g\n", i + 1,
                  s.train_loss, s.train_acc, s.val_loss, s.val_acc);
    out += buf;
  }
  return out;
}

SplitIndices split_stratified(const std::vector<int>& labels,
                              std::size_t n_classes, double train_frac,
                              double val_frac, double test_frac,
                              std::uint64_t seed) {
  for (double f : {train_frac, val_frac, test_frac})
    if (f < 0.0 || f > 1.0)
      throw UsageError("split fractions must lie in [0, 1]");
  if (std::fabs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw UsageError("split fractions must sum to 1");

  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int l = labels[i];
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes)
      throw DataError("label out of range at index " + std::to_string(i));
    by_class[static_cast<std::size_t>(l)].push_back(i);
  }

  Rng rng(seed);
  SplitIndices out;
  const char* split_names[3] = {"train", "validation", "test"};
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto& idx = by_class[c];
    if (idx.empty())
      throw DataError("class " + std::to_string(c) + " has no samples");
    shuffle(idx, rng);

    const std::size_t n = idx.size();
    const double fr[3] = {train_frac, val_frac, test_frac};
    std::size_t cnt[3];
    double frac_part[3];
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      double exact = fr[s] * static_cast<double>(n);
      cnt[s] = static_cast<std::size_t>(std::floor(exact));
      frac_part[s] = exact - std::floor(exact);
      assigned += cnt[s];
    }
    // hand out the remainder by largest fractional part; ties favor the
    // earlier split (train, then validation, then test)
    std::size_t left = n - assigned;
    int order[3] = {0, 1, 2};
    std::stable_sort(order, order + 3,
                     [&](int a, int b) { return frac_part[a] > frac_part[b]; });
    for (std::size_t r = 0; r < left; ++r) ++cnt[order[r % 3]];
    for (int s = 0; s < 3; ++s)
      if (cnt[s] == 0)
        throw DataError("stratified split leaves class " + std::to_string(c) +
                        " empty in the " + split_names[s] + " split");
    std::size_t at = 0;
    for (std::size_t i = 0; i < cnt[0]; ++i) out.train.push_back(idx[at++]);
    for (std::size_t i = 0; i < cnt[1]; ++i) out.val.push_back(idx[at++]);
    for (std::size_t i = 0; i < cnt[2]; ++i) out.test.push_back(idx[at++]);
  }
  return out;
}

EvalReport evaluate_samples(const SampleList& data, const MacbigParams& p,
                            const std::vector<std::string>& class_names,
                            std::vector<PredRecord>* preds) {
  if (data.empty()) throw DataError("no samples");
  const std::size_t k = p.hp.classes;
  std::vector<int> truth, predicted;
  std::vector<std::vector<double>> probs(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sample& s = data[i];
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= k)
      throw DataError("label out of range at index " + std::to_string(i));
    auto [pr, pd] = predict(*s.doc, p);
    truth.push_back(s.label);
    predicted.push_back(pd);
    probs[i].assign(pr.data.begin(), pr.data.end());
    if (preds)
      preds->push_back({i, s.label, pd, probs[i]});
  }

  EvalReport rep;
  rep.n = data.size();
  rep.class_names = class_names;
  rep.cm = confusion(truth, predicted, k);
  rep.cls = class_report(rep.cm);
  rep.roc.resize(k);
  double auc_sum = 0.0;
  std::size_t auc_n = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> scores(data.size());
    std::vector<int> lab(data.size());
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < data.size(); ++i) {
      scores[i] = probs[i][c];
      lab[i] = truth[i] == static_cast<int>(c) ? 1 : 0;
      (lab[i] ? pos : neg) = true;
    }
    if (!pos || !neg) continue;  // curve left empty, skipped in the macro AUC
    rep.roc[c] = roc_curve(scores, lab);
    auc_sum += rep.roc[c].auc;
    ++auc_n;
  }
  rep.macro_auc = auc_n ? auc_sum / static_cast<double>(auc_n) : 0.0;
  return rep;
}

CvOutcome cross_validate(const SampleList& all, const HyperParams& hp,
                         std::size_t vocab_size, const TrainConfig& cfg,
                         const std::vector<std::string>& class_names,
                         const Tensor* pretrained_embedding, std::ostream* log,
                         const FoldCallback& on_fold) {
  if (cfg.folds == 0) throw UsageError("need at least one fold");
  std::vector<int> labels;
  labels.reserve(all.size());
  for (const Sample& s : all) labels.push_back(s.label);

  CvOutcome out;
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    const std::uint64_t fold_seed = cfg.seed + f;
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = fold_seed;

    FoldOutcome fo;
    fo.split = split_stratified(labels, hp.classes, cfg.train_frac,
                                cfg.val_frac, cfg.test_frac, fold_seed);
    auto pick = [&](const std::vector<std::size_t>& idx) {
      SampleList s;
      s.reserve(idx.size());
      for (std::size_t i : idx) s.push_back(all[i]);
      return s;
    };
    SampleList tr = pick(fo.split.train), va = pick(fo.split.val),
               te = pick(fo.split.test);

    Rng init_rng = Rng(fold_seed).child(1000000007ULL);
    MacbigParams init = build_params(hp, vocab_size, init_rng);
    if (pretrained_embedding) {
      if (!init.embedding.same_shape(*pretrained_embedding))
        throw ShapeError("pretrained embedding shape does not match model");
      init.embedding = *pretrained_embedding;
    }

    if (log)
      (*log) << "fold " << f << ": train " << tr.size() << ", val "
             << va.size() << ", test " << te.size() << "\n";
    fo.result = train_model(tr, va, init, fold_cfg, log);
    fo.report = evaluate_samples(te, fo.result.best_params, class_names);
    if (log) {
      char buf[120];
      std::snprintf(buf, sizeof(buf),
                    "fold %zu: test accuracy %.4f, macro f1 %.4f\n", f,
                    fo.report.cls.accuracy, fo.report.cls.macro_f1);
      (*log) << buf << std::flush;
    }
    if (on_fold) on_fold(f, fo);
    out.folds.push_back(std::move(fo));
  }

  for (const FoldOutcome& fo : out.folds) {
    out.mean_accuracy += fo.report.cls.accuracy;
    out.mean_macro_precision += fo.report.cls.macro_precision;
    out.mean_macro_recall += fo.report.cls.macro_recall;
    out.mean_macro_f1 += fo.report.cls.macro_f1;
    out.mean_macro_auc += fo.report.macro_auc;
  }
  const double nf = static_cast<double>(out.folds.size());
  out.mean_accuracy /= nf;
  out.mean_macro_precision /= nf;
  out.mean_macro_recall /= nf;
  out.mean_macro_f1 /= nf;
  out.mean_macro_auc /= nf;
  return out;
}

}  // namespace macbig

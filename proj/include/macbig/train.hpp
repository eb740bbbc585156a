#ifndef MACBIG_TRAIN_HPP
#define MACBIG_TRAIN_HPP

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "macbig/metrics.hpp"
#include "macbig/optim.hpp"

namespace macbig {

struct EpochStats {
  double train_loss = 0.0;  // mean cross-entropy, no L2 penalty
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  MacbigParams best_params;   // highest validation accuracy, earliest on ties
  std::size_t best_epoch = 0; // 1-based; 0 when no epochs ran
  MacbigParams final_params;  // state after the last epoch
  std::vector<EpochStats> history;
};

struct EvalLA {
  double loss = 0.0;
  double acc = 0.0;
};

// Inference-mode mean cross-entropy and accuracy.
EvalLA eval_loss_acc(const SampleList& data, const MacbigParams& p);

// Minibatch Adam over shuffled epochs. Shuffle order comes from
// Rng(cfg.seed).child(epoch); dropout masks are keyed on (epoch, position)
// inside backprop_batch, so the whole run is a pure function of seed, config,
// data order and the initial parameters.
TrainResult train_model(const SampleList& train, const SampleList& val,
                        const MacbigParams& init, const TrainConfig& cfg,
                        std::ostream* log = nullptr);

// "epoch,train_loss,train_acc,val_loss,val_acc" rows, %.9g values.
std::string history_csv(const std::vector<EpochStats>& history);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Per-class shuffle + largest-remainder apportionment of the fractions.
// Throws DataError if a class is absent or a split would lose a class.
SplitIndices split_stratified(const std::vector<int>& labels,
                              std::size_t n_classes, double train_frac,
                              double val_frac, double test_frac,
                              std::uint64_t seed);

struct PredRecord {
  std::size_t index = 0;
  int truth = -1;
  int pred = -1;
  std::vector<double> probs;
};

// Full evaluation: confusion, per-class stats, one-vs-rest ROC curves. A
// class with no positives or no negatives in `data` gets an empty curve and
// is left out of the macro AUC.
EvalReport evaluate_samples(const SampleList& data, const MacbigParams& p,
                            const std::vector<std::string>& class_names,
                            std::vector<PredRecord>* preds = nullptr);

struct FoldOutcome {
  TrainResult result;
  EvalReport report;
  SplitIndices split;
};

struct CvOutcome {
  std::vector<FoldOutcome> folds;
  double mean_accuracy = 0.0;
  double mean_macro_precision = 0.0;
  double mean_macro_recall = 0.0;
  double mean_macro_f1 = 0.0;
  double mean_macro_auc = 0.0;
};

using FoldCallback = std::function<void(std::size_t, const FoldOutcome&)>;

// Repeated stratified splits (fold f reseeds with cfg.seed + f), fresh
// parameter init per fold, arithmetic means of the test metrics. The
// optional pretrained embedding table overrides the random one (pad row and
// shape must already agree). on_fold fires after each completed fold so
// callers can persist partial results before a later fold can fail.
CvOutcome cross_validate(const SampleList& all, const HyperParams& hp,
                         std::size_t vocab_size, const TrainConfig& cfg,
                         const std::vector<std::string>& class_names,
                         const Tensor* pretrained_embedding = nullptr,
                         std::ostream* log = nullptr,
                         const FoldCallback& on_fold = {});

}  // namespace macbig

#endif

#ifndef MACBIG_METRICS_HPP
#define MACBIG_METRICS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "macbig/util.hpp"

namespace macbig {

// All metric arithmetic is done in double regardless of the model precision.

struct ConfusionMatrix {
  std::size_t k = 0;
  std::vector<std::uint64_t> cells;  // cells[truth * k + pred]

  std::uint64_t at(std::size_t t, std::size_t p) const {
    return cells[t * k + p];
  }
  std::uint64_t total() const;
};

ConfusionMatrix confusion(const std::vector<int>& truth,
                          const std::vector<int>& pred, std::size_t k);

struct ClassStats {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double ovr_accuracy = 0.0;  // one-vs-rest: (TP + TN) / total
  bool precision_undefined = false;  // no predictions for the class
  bool recall_undefined = false;     // no true samples of the class
};

struct ClassReport {
  std::vector<ClassStats> per_class;
  double macro_precision = 0.0;  // unweighted class means
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

// 0/0 ratios are reported as 0 with the matching undefined flag set.
ClassReport class_report(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // starts at (0,0), ends at (1,1)
  double auc = 0.0;              // trapezoidal area
};

// Threshold sweep over descending scores; tied scores move as one step.
// Throws DataError when only one class is present.
RocCurve roc_curve(const std::vector<double>& scores,
                   const std::vector<int>& labels01);

struct EvalReport {
  ConfusionMatrix cm;
  ClassReport cls;
  std::vector<RocCurve> roc;  // one-vs-rest per class
  double macro_auc = 0.0;
  std::size_t n = 0;
  std::vector<std::string> class_names;
};

std::string report_text(const EvalReport& rep);
std::string report_json(const EvalReport& rep);
std::string roc_csv(const RocCurve& curve);

}  // namespace macbig

#endif

#include "macbig/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

namespace macbig {

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(cells.begin(), cells.end(), std::uint64_t{0});
}

ConfusionMatrix confusion(const std::vector<int>& truth,
                          const std::vector<int>& pred, std::size_t k) {
  if (truth.size() != pred.size())
    throw UsageError("confusion: truth and prediction counts differ");
  if (k == 0) throw UsageError("confusion: need at least one class");
  ConfusionMatrix cm;
  cm.k = k;
  cm.cells.assign(k * k, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    int t = truth[i], p = pred[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= k ||
        static_cast<std::size_t>(p) >= k)
      throw DataError("confusion: label outside class range at index " +
                      std::to_string(i));
    ++cm.cells[static_cast<std::size_t>(t) * k + static_cast<std::size_t>(p)];
  }
  return cm;
}

ClassReport class_report(const ConfusionMatrix& cm) {
  const std::size_t k = cm.k;
  const double total = static_cast<double>(cm.total());
  ClassReport rep;
  rep.per_class.resize(k);
  std::uint64_t diag = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t tp = cm.at(c, c);
    std::uint64_t pred_c = 0, true_c = 0;
    for (std::size_t j = 0; j < k; ++j) {
      pred_c += cm.at(j, c);
      true_c += cm.at(c, j);
    }
    diag += tp;
    ClassStats& s = rep.per_class[c];
    if (pred_c == 0) {
      s.precision_undefined = true;
    } else {
      s.precision = static_cast<double>(tp) / static_cast<double>(pred_c);
    }
    if (true_c == 0) {
      s.recall_undefined = true;
    } else {
      s.recall = static_cast<double>(tp) / static_cast<double>(true_c);
    }
    double pr = s.precision + s.recall;
    s.f1 = pr > 0.0 ? 2.0 * s.precision * s.recall / pr : 0.0;
    std::uint64_t fp = pred_c - tp, fn = true_c - tp;
    std::uint64_t tn = cm.total() - tp - fp - fn;
    s.ovr_accuracy = total > 0.0 ? static_cast<double>(tp + tn) / total : 0.0;
  }
  for (const auto& s : rep.per_class) {
    rep.macro_precision += s.precision;
    rep.macro_recall += s.recall;
    rep.macro_f1 += s.f1;
  }
  rep.macro_precision /= static_cast<double>(k);
  rep.macro_recall /= static_cast<double>(k);
  rep.macro_f1 /= static_cast<double>(k);
  rep.accuracy = total > 0.0 ? static_cast<double>(diag) / total : 0.0;
  return rep;
}

RocCurve roc_curve(const std::vector<double>& scores,
                   const std::vector<int>& labels01) {
  if (scores.size() != labels01.size())
    throw UsageError("roc_curve: score and label counts differ");
  std::uint64_t P = 0, N = 0;
  for (int l : labels01) {
    if (l == 1)
      ++P;
    else if (l == 0)
      ++N;
    else
      throw DataError("roc_curve: labels must be 0 or 1");
  }
  if (P == 0 || N == 0)
    throw DataError("roc_curve: need both a positive and a negative sample");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::uint64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    double s = scores[order[i]];
    // all samples sharing this score cross the threshold together
    while (i < order.size() && scores[order[i]] == s) {
      if (labels01[order[i]] == 1)
        ++tp;
      else
        ++fp;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(N),
                            static_cast<double>(tp) / static_cast<double>(P)});
  }
  double auc = 0.0;
  for (std::size_t j = 1; j < curve.points.size(); ++j) {
    const RocPoint& a = curve.points[j - 1];
    const RocPoint& b = curve.points[j];
    auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  curve.auc = auc;
  return curve;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string report_text(const EvalReport& rep) {
  std::string out;
  const std::size_t k = rep.cm.k;
  auto name = [&](std::size_t c) {
    return c < rep.class_names.size() ? rep.class_names[c]
                                      : "class_" + std::to_string(c);
  };
  out += "samples: " + std::to_string(rep.n) + "\n";
  out += "accuracy: " + fmt(rep.cls.accuracy) + "\n\n";
  out += "confusion matrix (rows = truth, cols = predicted)\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%12s", "");
  out += buf;
  for (std::size_t c = 0; c < k; ++c) {
    std::snprintf(buf, sizeof(buf), " %10s", name(c).c_str());
    out += buf;
  }
  out += "\n";
  for (std::size_t t = 0; t < k; ++t) {
    std::snprintf(buf, sizeof(buf), "%12s", name(t).c_str());
    out += buf;
    for (std::size_t p = 0; p < k; ++p) {
      std::snprintf(buf, sizeof(buf), " %10llu",
                    static_cast<unsigned long long>(rep.cm.at(t, p)));
      out += buf;
    }
    out += "\n";
  }
  out += "\n";
  std::snprintf(buf, sizeof(buf), "%12s %9s %9s %9s %9s %9s\n", "",
                "precision", "recall", "f1", "ovr-acc", "auc");
  out += buf;
  for (std::size_t c = 0; c < k; ++c) {
    const ClassStats& s = rep.cls.per_class[c];
    std::string p = fmt(s.precision) + (s.precision_undefined ? "*" : "");
    std::string r = fmt(s.recall) + (s.recall_undefined ? "*" : "");
    bool has_roc = c < rep.roc.size() && !rep.roc[c].points.empty();
    std::snprintf(buf, sizeof(buf), "%12s %9s %9s %9s %9s %9s\n",
                  name(c).c_str(), p.c_str(), r.c_str(), fmt(s.f1).c_str(),
                  fmt(s.ovr_accuracy).c_str(),
                  has_roc ? fmt(rep.roc[c].auc).c_str() : "-");
    out += buf;
  }
  out += "\n";
  out += "macro precision: " + fmt(rep.cls.macro_precision) + "\n";
  out += "macro recall:    " + fmt(rep.cls.macro_recall) + "\n";
  out += "macro f1:        " + fmt(rep.cls.macro_f1) + "\n";
  if (!rep.roc.empty()) out += "macro auc:       " + fmt(rep.macro_auc) + "\n";
  bool flagged = false;
  for (const auto& s : rep.cls.per_class)
    flagged = flagged || s.precision_undefined || s.recall_undefined;
  if (flagged) out += "* undefined ratio (0/0), reported as zero\n";
  return out;
}

std::string report_json(const EvalReport& rep) {
  nlohmann::json j;
  j["samples"] = rep.n;
  j["accuracy"] = rep.cls.accuracy;
  const std::size_t k = rep.cm.k;
  std::vector<std::vector<std::uint64_t>> cm(k);
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t p = 0; p < k; ++p) cm[t].push_back(rep.cm.at(t, p));
  j["confusion"] = cm;
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < k; ++c) {
    const ClassStats& s = rep.cls.per_class[c];
    nlohmann::json jc;
    jc["name"] = c < rep.class_names.size() ? rep.class_names[c]
                                            : "class_" + std::to_string(c);
    jc["precision"] = s.precision;
    jc["recall"] = s.recall;
    jc["f1"] = s.f1;
    jc["ovr_accuracy"] = s.ovr_accuracy;
    jc["precision_undefined"] = s.precision_undefined;
    jc["recall_undefined"] = s.recall_undefined;
    if (c < rep.roc.size() && !rep.roc[c].points.empty())
      jc["auc"] = rep.roc[c].auc;
    classes.push_back(jc);
  }
  j["classes"] = classes;
  j["macro_precision"] = rep.cls.macro_precision;
  j["macro_recall"] = rep.cls.macro_recall;
  j["macro_f1"] = rep.cls.macro_f1;
  if (!rep.roc.empty()) j["macro_auc"] = rep.macro_auc;
  return j.dump(2) + "\n";
}

std::string roc_csv(const RocCurve& curve) {
  std::string out = "fpr,tpr\n";
  char buf[64];
  for (const RocPoint& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", p.fpr, p.tpr);
    out += buf;
  }
  return out;
}

}  // namespace macbig

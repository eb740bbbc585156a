#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "macbig/metrics.hpp"
#include "macbig/rng.hpp"

using namespace macbig;

namespace {

// AUC as the probability a positive outscores a negative, ties worth half
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (s[i] > s[j])
        num += 1.0;
      else if (s[i] == s[j])
        num += 0.5;
    }
  }
  return num / static_cast<double>(pairs);
}

ConfusionMatrix oracle_cm() {
  // rows = truth, cols = predicted:
  //   [8 2 0]
  //   [1 9 0]
  //   [0 0 10]
  std::vector<int> truth, pred;
  auto add = [&](int t, int p, int times) {
    for (int i = 0; i < times; ++i) {
      truth.push_back(t);
      pred.push_back(p);
    }
  };
  add(0, 0, 8);
  add(0, 1, 2);
  add(1, 0, 1);
  add(1, 1, 9);
  add(2, 2, 10);
  return confusion(truth, pred, 3);
}

}  // namespace

TEST_CASE("confusion counting matches a brute-force tally") {
  Rng rng(42);
  for (int rep = 0; rep < 20; ++rep) {
    std::size_t k = 2 + rng.below(3);
    std::size_t n = 1 + rng.below(60);
    std::vector<int> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng.below(k));
      pred[i] = static_cast<int>(rng.below(k));
    }
    ConfusionMatrix cm = confusion(truth, pred, k);
    REQUIRE(cm.k == k);
    for (std::size_t t = 0; t < k; ++t)
      for (std::size_t p = 0; p < k; ++p) {
        std::uint64_t count = 0;
        for (std::size_t i = 0; i < n; ++i)
          if (truth[i] == static_cast<int>(t) && pred[i] == static_cast<int>(p))
            ++count;
        CHECK(cm.at(t, p) == count);
      }
    CHECK(cm.total() == n);
  }

  CHECK_THROWS_AS(confusion({0, 1}, {0}, 2), UsageError);
  CHECK_THROWS_AS(confusion({}, {}, 0), UsageError);
  CHECK_THROWS_AS(confusion({0, 2}, {0, 0}, 2), DataError);
  CHECK_THROWS_AS(confusion({0, -1}, {0, 0}, 2), DataError);
}

TEST_CASE("class report reproduces the published hand oracle") {
  ClassReport rep = class_report(oracle_cm());
  REQUIRE(rep.per_class.size() == 3);

  CHECK(rep.per_class[0].precision == doctest::Approx(8.0 / 9.0));
  CHECK(rep.per_class[0].recall == doctest::Approx(0.8));
  CHECK(rep.per_class[1].precision == doctest::Approx(9.0 / 11.0));
  CHECK(rep.per_class[1].recall == doctest::Approx(0.9));
  CHECK(rep.per_class[2].precision == doctest::Approx(1.0));
  CHECK(rep.per_class[2].recall == doctest::Approx(1.0));
  CHECK(rep.accuracy == doctest::Approx(0.9));

  CHECK(rep.per_class[0].f1 == doctest::Approx(16.0 / 19.0));
  CHECK(rep.per_class[1].f1 == doctest::Approx(6.0 / 7.0));
  CHECK(rep.per_class[0].ovr_accuracy == doctest::Approx(0.9));
  CHECK(rep.per_class[1].ovr_accuracy == doctest::Approx(0.9));
  CHECK(rep.per_class[2].ovr_accuracy == doctest::Approx(1.0));

  CHECK(rep.macro_precision ==
        doctest::Approx((8.0 / 9.0 + 9.0 / 11.0 + 1.0) / 3.0));
  CHECK(rep.macro_recall == doctest::Approx(0.9));
  CHECK(rep.macro_f1 == doctest::Approx((16.0 / 19.0 + 6.0 / 7.0 + 1.0) / 3.0));
  for (const auto& s : rep.per_class) {
    CHECK(!s.precision_undefined);
    CHECK(!s.recall_undefined);
  }
}

TEST_CASE("perfect predictions score one everywhere") {
  ClassReport rep = class_report(confusion({0, 1, 2, 2}, {0, 1, 2, 2}, 3));
  CHECK(rep.accuracy == doctest::Approx(1.0));
  for (const auto& s : rep.per_class) {
    CHECK(s.precision == doctest::Approx(1.0));
    CHECK(s.recall == doctest::Approx(1.0));
    CHECK(s.f1 == doctest::Approx(1.0));
    CHECK(s.ovr_accuracy == doctest::Approx(1.0));
  }
}

TEST_CASE("zero-over-zero ratios report zero and raise the undefined flag") {
  // class 2 never occurs at all; class 1 is never predicted
  ClassReport rep = class_report(confusion({0, 1}, {0, 0}, 3));

  CHECK(rep.per_class[1].precision == 0.0);
  CHECK(rep.per_class[1].precision_undefined);
  CHECK(!rep.per_class[1].recall_undefined);
  CHECK(rep.per_class[1].recall == 0.0);

  CHECK(rep.per_class[2].precision_undefined);
  CHECK(rep.per_class[2].recall_undefined);
  CHECK(rep.per_class[2].precision == 0.0);
  CHECK(rep.per_class[2].recall == 0.0);
  CHECK(rep.per_class[2].f1 == 0.0);
  // absent class: every sample is a true negative for it
  CHECK(rep.per_class[2].ovr_accuracy == doctest::Approx(1.0));
}

TEST_CASE("roc sweep separates, degenerates, and bounds correctly") {
  RocCurve perfect = roc_curve({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
  CHECK(perfect.auc == doctest::Approx(1.0));
  REQUIRE(!perfect.points.empty());
  CHECK(perfect.points.front().fpr == 0.0);
  CHECK(perfect.points.front().tpr == 0.0);
  CHECK(perfect.points.back().fpr == 1.0);
  CHECK(perfect.points.back().tpr == 1.0);

  // one shared score collapses the sweep to a single diagonal step
  RocCurve flat = roc_curve({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0});
  CHECK(flat.auc == doctest::Approx(0.5));
  REQUIRE(flat.points.size() == 2);
  CHECK(flat.points[1].fpr == 1.0);
  CHECK(flat.points[1].tpr == 1.0);

  RocCurve inverted = roc_curve({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0});
  CHECK(inverted.auc == doctest::Approx(0.0));

  CHECK_THROWS_AS(roc_curve({0.4, 0.6}, {1, 1}), DataError);
  CHECK_THROWS_AS(roc_curve({0.4, 0.6}, {0, 0}), DataError);
  CHECK_THROWS_AS(roc_curve({0.4, 0.6}, {0, 2}), DataError);
  CHECK_THROWS_AS(roc_curve({0.4}, {0, 1}), UsageError);
}

TEST_CASE("trapezoid auc equals the pairwise ranking probability") {
  Rng rng(1234);
  for (int rep = 0; rep < 60; ++rep) {
    std::size_t n = 4 + rng.below(40);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool tied = rep % 2 == 1;
    labels[0] = 1;
    labels[1] = 0;
    for (std::size_t i = 2; i < n; ++i)
      labels[i] = static_cast<int>(rng.below(2));
    for (std::size_t i = 0; i < n; ++i)
      scores[i] = tied ? static_cast<double>(rng.below(5)) / 4.0
                       : rng.next_unit();

    RocCurve curve = roc_curve(scores, labels);
    double expect = pairwise_auc(scores, labels);
    CHECK(std::abs(curve.auc - expect) < (tied ? 1e-6 : 1e-9));

    for (std::size_t j = 1; j < curve.points.size(); ++j) {
      CHECK(curve.points[j].fpr >= curve.points[j - 1].fpr);
      CHECK(curve.points[j].tpr >= curve.points[j - 1].tpr);
    }
    CHECK(curve.points.front().fpr == 0.0);
    CHECK(curve.points.back().tpr == 1.0);
  }
}

TEST_CASE("report renderers carry the numbers and flag degenerate columns") {
  EvalReport rep;
  rep.cm = oracle_cm();
  rep.cls = class_report(rep.cm);
  rep.n = 30;
  rep.class_names = {"negative", "neutral", "positive"};
  rep.roc.resize(3);
  rep.roc[0] = roc_curve({0.9, 0.1}, {1, 0});
  rep.roc[1] = roc_curve({0.3, 0.7}, {1, 0});
  // class 2 keeps an empty curve, as evaluation does when it degenerates
  rep.macro_auc = (rep.roc[0].auc + rep.roc[1].auc) / 2.0;

  std::string text = report_text(rep);
  CHECK(text.find("samples: 30") != std::string::npos);
  CHECK(text.find("accuracy: 0.9000") != std::string::npos);
  CHECK(text.find("negative") != std::string::npos);
  CHECK(text.find("0.8889") != std::string::npos);  // precision of class 0
  CHECK(text.find("macro f1:") != std::string::npos);
  CHECK(text.find("macro auc:") != std::string::npos);
  CHECK(text.find(" -") != std::string::npos);  // auc column for class 2

  nlohmann::json j = nlohmann::json::parse(report_json(rep));
  CHECK(j["samples"] == 30);
  CHECK(j["accuracy"].get<double>() == doctest::Approx(0.9));
  CHECK(j["confusion"][0][0] == 8);
  CHECK(j["confusion"][2][2] == 10);
  REQUIRE(j["classes"].size() == 3);
  CHECK(j["classes"][0]["precision"].get<double>() ==
        doctest::Approx(8.0 / 9.0));
  CHECK(j["classes"][0].contains("auc"));
  CHECK(!j["classes"][2].contains("auc"));
  CHECK(j["macro_f1"].get<double>() ==
        doctest::Approx((16.0 / 19.0 + 6.0 / 7.0 + 1.0) / 3.0));

  std::string csv = roc_csv(rep.roc[0]);
  CHECK(csv.rfind("fpr,tpr\n", 0) == 0);
  CHECK(csv.find("1,1") != std::string::npos);

  // a 0/0 report marks the affected cells in the rendered table
  EvalReport flagged;
  flagged.cm = confusion({0, 1}, {0, 0}, 3);
  flagged.cls = class_report(flagged.cm);
  flagged.n = 2;
  flagged.class_names = {"negative", "neutral", "positive"};
  std::string ftext = report_text(flagged);
  CHECK(ftext.find("*") != std::string::npos);
  CHECK(ftext.find("undefined ratio") != std::string::npos);
}

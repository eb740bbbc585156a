#ifndef MACBIG_GRADCHECK_HPP
#define MACBIG_GRADCHECK_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "macbig/util.hpp"

namespace macbig {

// Central finite differences against an analytic gradient. The loss closure
// is evaluated in double so the numeric oracle's noise floor stays far below
// the tolerance; the analytic side is whatever the backward under test
// produced. Relative error is taken per named tensor span as
//   |ga - gn| / max(|ga|, |gn|, 1e-8)
// with |.| the L2 norm over that span, and the maximum over spans is gated.
//
// Coordinates whose probe interval brackets an activation kink (relu or a
// pool argmax switch) have no two-sided derivative for the difference
// quotient to converge to. Each coordinate is probed at two step sizes:
// smooth coordinates agree to O(eps^2) while a bracketed kink leaves an
// O(1) disagreement, and such coordinates are excluded from the span norms.
// The exclusion count is capped so a broken gradient cannot hide behind it.

struct GradCheckEntry {
  std::string name;
  double rel_err;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  double tol = 0.0;
  std::size_t skipped = 0;  // kink-bracketing coordinates left out
  bool pass = false;
  std::vector<GradCheckEntry> tensors;
};

inline GradCheckResult grad_check(
    const std::function<double(const std::vector<double>&)>& loss,
    std::vector<double> theta, const std::vector<double>& analytic,
    const std::vector<std::pair<std::string, std::size_t>>& spans,
    double eps = 1e-4, double tol = 1e-3) {
  if (analytic.size() != theta.size())
    throw ShapeError("grad_check: gradient/parameter size mismatch");
  std::vector<double> numeric(theta.size());
  std::vector<char> smooth(theta.size(), 1);
  GradCheckResult res;
  res.tol = tol;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    double saved = theta[i];
    auto slope = [&](double h) {
      theta[i] = saved + h;
      double up = loss(theta);
      theta[i] = saved - h;
      double down = loss(theta);
      theta[i] = saved;
      return (up - down) / (2.0 * h);
    };
    double wide = slope(eps);
    double tight = slope(eps / 2);
    numeric[i] = tight;
    if (std::abs(wide - tight) >
        1e-4 * std::max({std::abs(wide), std::abs(tight), 1.0})) {
      smooth[i] = 0;
      ++res.skipped;
    }
  }
  std::size_t at = 0;
  for (const auto& [name, count] : spans) {
    double na = 0.0, nn = 0.0, nd = 0.0;
    for (std::size_t i = at; i < at + count; ++i) {
      if (!smooth[i]) continue;
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
      double d = analytic[i] - numeric[i];
      nd += d * d;
    }
    at += count;
    double rel = std::sqrt(nd) /
                 std::max({std::sqrt(na), std::sqrt(nn), 1e-8});
    res.tensors.push_back({name, rel});
    res.max_rel_err = std::max(res.max_rel_err, rel);
  }
  if (at != theta.size())
    throw ShapeError("grad_check: spans do not cover the parameter vector");
  std::size_t cap = std::max<std::size_t>(2, theta.size() / 100);
  res.pass = res.max_rel_err < tol && res.skipped <= cap;
  return res;
}

}  // namespace macbig

#endif

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "macbig/gradcheck.hpp"
#include "macbig/gradcheck_suite.hpp"
#include "macbig/layers.hpp"

using namespace macbig;

namespace {

TensorT<double> make2(std::size_t r, std::size_t c,
                      std::initializer_list<double> vals) {
  TensorT<double> t({r, c});
  std::copy(vals.begin(), vals.end(), t.data.begin());
  return t;
}

TensorT<double> rand2(std::size_t r, std::size_t c, Rng& rng, double b = 1.0) {
  TensorT<double> t({r, c});
  for (auto& v : t.data) v = rng.uniform(-b, b);
  return t;
}

}  // namespace

TEST_CASE("softmax matches hand values and its invariants") {
  TensorT<double> z({3});
  z.data = {std::log(1.0), std::log(2.0), std::log(3.0)};
  auto p = softmax(z);
  CHECK(p[0] == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(2.0 / 6).epsilon(1e-12));
  CHECK(p[2] == doctest::Approx(3.0 / 6).epsilon(1e-12));

  Rng rng(5);
  for (int it = 0; it < 20; ++it) {
    TensorT<double> x({7});
    for (auto& v : x.data) v = rng.uniform(-8, 8);
    auto px = softmax(x);
    double sum = std::accumulate(px.data.begin(), px.data.end(), 0.0);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    TensorT<double> shifted = x;
    double c = rng.uniform(-50, 50);
    for (auto& v : shifted.data) v += c;
    auto ps = softmax(shifted);
    for (std::size_t i = 0; i < px.numel(); ++i)
      CHECK(ps[i] == doctest::Approx(px[i]).epsilon(1e-9));
  }
}

TEST_CASE("conv1d with an averaging kernel matches hand arithmetic") {
  auto x = make2(4, 1, {1, 2, 3, 4});
  Conv1dLayerT<double> L;
  L.W = TensorT<double>({2, 1, 1});
  L.W.data = {1.0, 1.0};
  L.b = TensorT<double>({1});
  auto y = conv1d_relu_forward(x, L);
  REQUIRE(y.shape == std::vector<std::size_t>{3, 1});
  CHECK(y[0] == doctest::Approx(3.0));
  CHECK(y[1] == doctest::Approx(5.0));
  CHECK(y[2] == doctest::Approx(7.0));

  L.b[0] = -6.0;  // relu clamps the first two windows
  auto y2 = conv1d_relu_forward(x, L);
  CHECK(y2[0] == 0.0);
  CHECK(y2[1] == 0.0);
  CHECK(y2[2] == doctest::Approx(1.0));
}

TEST_CASE("conv1d is translation equivariant") {
  Rng rng(31);
  auto x = rand2(8, 3, rng);
  Conv1dLayerT<double> L;
  L.W = TensorT<double>({3, 3, 5});
  for (auto& v : L.W.data) v = rng.uniform(-1, 1);
  L.b = TensorT<double>({5});
  for (auto& v : L.b.data) v = rng.uniform(-1, 1);

  TensorT<double> shifted({7, 3});
  std::copy(x.row(1), x.row(8), shifted.data.begin());
  auto y = conv1d_relu_forward(x, L);
  auto ys = conv1d_relu_forward(shifted, L);
  for (std::size_t t = 0; t < ys.rows(); ++t)
    for (std::size_t c = 0; c < 5; ++c)
      CHECK(ys.at2(t, c) == doctest::Approx(y.at2(t + 1, c)).epsilon(1e-12));
}

TEST_CASE("maxpool window 3 picks the first maximum and drops the remainder") {
  auto x = make2(7, 2, {5, 1,   //
                        1, 1,   //
                        3, 1,   //
                        2, 4,   //
                        9, 4,   //
                        4, 2,   //
                        8, 8});  // remainder row, dropped
  std::vector<std::uint32_t> arg;
  auto y = maxpool1d3_forward(x, &arg);
  REQUIRE(y.shape == std::vector<std::size_t>{2, 2});
  CHECK(y.at2(0, 0) == 5.0);
  CHECK(y.at2(0, 1) == 1.0);
  CHECK(y.at2(1, 0) == 9.0);
  CHECK(y.at2(1, 1) == 4.0);
  CHECK(arg[0 * 2 + 0] == 0);  // first max on ties
  CHECK(arg[0 * 2 + 1] == 0);
  CHECK(arg[1 * 2 + 0] == 4);
  CHECK(arg[1 * 2 + 1] == 3);

  TensorT<double> g({2, 2});
  g.data = {1, 2, 3, 4};
  auto dx = maxpool1d3_backward(g, arg, 7);
  CHECK(dx.at2(0, 0) == 1.0);
  CHECK(dx.at2(0, 1) == 2.0);
  CHECK(dx.at2(4, 0) == 3.0);
  CHECK(dx.at2(3, 1) == 4.0);
  double total = std::accumulate(dx.data.begin(), dx.data.end(), 0.0);
  CHECK(total == doctest::Approx(1 + 2 + 3 + 4));
}

TEST_CASE("gru single step matches the scalar desk check") {
  GruCellT<double> cell;
  for (auto* t : {&cell.Wz, &cell.Wr, &cell.Wh}) {
    *t = TensorT<double>({1, 1});
    t->data = {1.0};
  }
  for (auto* t : {&cell.Uz, &cell.Ur, &cell.Uh}) {
    *t = TensorT<double>({1, 1});
    t->data = {1.0};
  }
  for (auto* t : {&cell.bz, &cell.br, &cell.bh}) *t = TensorT<double>({1});

  auto x = make2(1, 1, {1.0});
  auto h = gru_scan_forward(x, cell, false);
  // z = r = sigmoid(1), hcand = tanh(1), h = z * hcand with h0 = 0
  double z = 1.0 / (1.0 + std::exp(-1.0));
  double expect = z * std::tanh(1.0);
  CHECK(h[0] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(h[0] == doctest::Approx(0.55677).epsilon(1e-4));
}

TEST_CASE("gru states stay inside (-1, 1)") {
  Rng rng(77);
  GruCellT<double> cell;
  auto fill = [&](TensorT<double>& t, std::vector<std::size_t> s) {
    t = TensorT<double>(std::move(s));
    for (auto& v : t.data) v = rng.uniform(-2, 2);
  };
  fill(cell.Wz, {4, 3});
  fill(cell.Wr, {4, 3});
  fill(cell.Wh, {4, 3});
  fill(cell.Uz, {3, 3});
  fill(cell.Ur, {3, 3});
  fill(cell.Uh, {3, 3});
  fill(cell.bz, {3});
  fill(cell.br, {3});
  fill(cell.bh, {3});
  auto x = rand2(20, 4, rng, 3.0);
  for (bool rev : {false, true}) {
    auto h = gru_scan_forward(x, cell, rev);
    for (double v : h.data) {
      CHECK(v > -1.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("bigru output is the forward and backward scans side by side") {
  Rng rng(13);
  GruCellT<double> f, b;
  auto fill = [&](GruCellT<double>& c) {
    for (auto* t : {&c.Wz, &c.Wr, &c.Wh}) *t = rand2(2, 3, rng);
    for (auto* t : {&c.Uz, &c.Ur, &c.Uh}) *t = rand2(3, 3, rng);
    for (auto* t : {&c.bz, &c.br, &c.bh}) {
      *t = TensorT<double>({3});
      for (auto& v : t->data) v = rng.uniform(-1, 1);
    }
  };
  fill(f);
  fill(b);
  auto x = rand2(5, 2, rng);
  auto out = bigru_forward(x, f, b);
  REQUIRE(out.shape == std::vector<std::size_t>{5, 6});
  auto hf = gru_scan_forward(x, f, false);
  auto hb = gru_scan_forward(x, b, true);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(out.at2(t, j) == hf.at2(t, j));
      CHECK(out.at2(t, j + 3) == hb.at2(t, j));
    }
}

TEST_CASE("attention weights match hand-computed softmax scores") {
  AttentionLayerT<double> L;
  L.W = make2(2, 2, {1, 0, 0, 1});
  L.b = TensorT<double>({2});
  L.ctx = TensorT<double>({2});
  L.ctx.data = {1.0, 0.0};
  auto x = make2(2, 2, {std::log(2.0), 0.0,  //
                        0.0, 5.0});
  auto [ctx, w] = attention_forward(x, L);
  CHECK(w[0] == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(ctx[0] == doctest::Approx(2.0 / 3 * std::log(2.0)).epsilon(1e-12));
  CHECK(ctx[1] == doctest::Approx(5.0 / 3).epsilon(1e-12));
}

TEST_CASE("attention context is invariant under input row permutation") {
  Rng rng(21);
  AttentionLayerT<double> L;
  L.W = rand2(4, 4, rng);
  L.b = TensorT<double>({4});
  for (auto& v : L.b.data) v = rng.uniform(-1, 1);
  L.ctx = TensorT<double>({4});
  for (auto& v : L.ctx.data) v = rng.uniform(-1, 1);
  auto x = rand2(6, 4, rng);
  auto [ctx, w] = attention_forward(x, L);

  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  TensorT<double> xp({6, 4});
  for (std::size_t t = 0; t < 6; ++t)
    std::copy(x.row(perm[t]), x.row(perm[t]) + 4, xp.row(t));
  auto [ctxp, wp] = attention_forward(xp, L);
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(ctxp[j] == doctest::Approx(ctx[j]).epsilon(1e-9));
  for (std::size_t t = 0; t < 6; ++t)
    CHECK(wp[t] == doctest::Approx(w[perm[t]]).epsilon(1e-9));
  double sum = std::accumulate(w.data.begin(), w.data.end(), 0.0);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dropout scales kept units and is identity outside training") {
  Rng rng(3);
  TensorT<double> x({1000});
  x.fill(1.0);
  auto same = dropout_forward(x, 0.5, false, nullptr);
  CHECK(same.data == x.data);
  auto same2 = dropout_forward(x, 0.0, true, &rng);
  CHECK(same2.data == x.data);

  TensorT<double> mask;
  auto y = dropout_forward(x, 0.5, true, &rng, &mask);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < y.numel(); ++i) {
    bool zero = y[i] == 0.0;
    bool scaled = std::fabs(y[i] - 2.0) < 1e-12;
    CHECK((zero || scaled));
    CHECK(mask[i] == (zero ? 0.0 : 2.0));
    if (scaled) ++kept;
  }
  // inverted dropout keeps the expectation: mean stays near 1
  double mean = std::accumulate(y.data.begin(), y.data.end(), 0.0) / 1000.0;
  CHECK(mean == doctest::Approx(1.0).epsilon(0.1));
  CHECK(kept > 400);
  CHECK(kept < 600);

  TensorT<double> g({1000});
  g.fill(1.0);
  auto dx = dropout_backward(g, mask);
  for (std::size_t i = 0; i < dx.numel(); ++i) CHECK(dx[i] == mask[i]);

  CHECK_THROWS_AS(dropout_forward(x, 1.0, true, &rng), UsageError);
  CHECK_THROWS_AS(dropout_forward(x, -0.1, true, &rng), UsageError);
  CHECK_THROWS_AS(dropout_forward(x, 0.5, true, nullptr), UsageError);
}

TEST_CASE("gradcheck harness accepts a correct gradient and flags a wrong one") {
  auto loss = [](const std::vector<double>& th) {
    double s = 0.0;
    for (double v : th) s += v * v;
    return s;
  };
  std::vector<double> theta{0.3, -0.7, 1.2};
  std::vector<double> good{0.6, -1.4, 2.4};
  std::vector<std::pair<std::string, std::size_t>> spans{{"w", 3}};
  auto ok = grad_check(loss, theta, good, spans, 1e-4, 1e-6);
  CHECK(ok.pass);
  std::vector<double> bad = good;
  bad[1] *= 1.05;  // 5% error on one coordinate must trip the gate
  auto flagged = grad_check(loss, theta, bad, spans, 1e-4, 1e-6);
  CHECK_FALSE(flagged.pass);
  CHECK(flagged.max_rel_err > 1e-3);
}

TEST_CASE("quick finite-difference sweep over every layer passes") {
  std::ostringstream sink;
  CHECK(run_gradcheck_suite(true, sink));
}

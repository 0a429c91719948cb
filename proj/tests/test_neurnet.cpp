#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "skycatch/neurnet.hpp"

using namespace skycatch;
using namespace skycatch::nn;

namespace {

double central(const std::function<double()>& f, double& x, double h = 1e-6) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2 * h);
}

void expect_close(double analytic, double numeric, const std::string& what) {
  const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  EXPECT_LT(std::abs(analytic - numeric) / scale, 1e-7) << what << ": " << analytic << " vs " << numeric;
}

}  // namespace

TEST(Dense, ForwardByHand) {
  DenseLayer d;
  d.weight = Matrix(2, 3);
  d.bias = Matrix(2, 1);
  const double w[] = {1, 2, 3, -1, 0, 0.5};
  for (int i = 0; i < 6; ++i) d.weight.data()[i] = w[i];
  d.bias(0, 0) = 0.1;
  d.bias(1, 0) = -0.2;
  const Vector y = dense_forward(d, std::vector<double>{1, -1, 2});
  EXPECT_DOUBLE_EQ(y[0], 1 - 2 + 6 + 0.1);
  EXPECT_DOUBLE_EQ(y[1], -1 + 0 + 1 - 0.2);
}

TEST(Dense, BackwardMatchesFiniteDifferencesAndAccumulates) {
  Rng rng(1);
  DenseLayer d = make_dense(4, 3, rng);
  std::vector<double> x{0.3, -0.2, 0.9, 0.1};
  const std::vector<double> dy{0.5, -1.0, 2.0};
  auto loss = [&] {
    const Vector y = dense_forward(d, x);
    return dy[0] * y[0] + dy[1] * y[1] + dy[2] * y[2];
  };
  DenseLayer g = zeros_like(d);
  std::vector<double> dx(4, 0.0);
  dense_backward(d, x, dy, g, dx);
  for (std::size_t i = 0; i < d.weight.size(); ++i)
    expect_close(g.weight.data()[i], central(loss, d.weight.data()[i]), "weight");
  for (std::size_t i = 0; i < x.size(); ++i) expect_close(dx[i], central(loss, x[i]), "input");
  const double before = g.bias(1, 0);
  dense_backward(d, x, dy, g, {});
  EXPECT_DOUBLE_EQ(g.bias(1, 0), 2 * before);
}

TEST(Dense, HalfSquaredOutputGradientIsOuterProduct) {
  Rng rng(5);
  DenseLayer d = make_dense(3, 2, rng);
  const std::vector<double> x{0.4, -1.1, 0.25};
  const Vector y = dense_forward(d, x);
  DenseLayer g = zeros_like(d);
  dense_backward(d, x, y, g, {});
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(g.bias(i, 0), y[static_cast<std::size_t>(i)]);
    for (int j = 0; j < 3; ++j) EXPECT_EQ(g.weight(i, j), y[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(j)]);
  }
}

TEST(Lstm, CellForwardByHand) {
  // One hidden unit, one input: every gate is a scalar.
  LstmLayer l;
  l.w_input = Matrix(4, 1);
  l.w_recurrent = Matrix(4, 1);
  l.bias = Matrix(4, 1);
  const double wi[] = {0.5, -0.3, 0.8, 0.1}, wr[] = {0.2, 0.4, -0.6, 0.9}, b[] = {0.0, 1.0, 0.1, -0.2};
  for (int k = 0; k < 4; ++k) {
    l.w_input(k, 0) = wi[k];
    l.w_recurrent(k, 0) = wr[k];
    l.bias(k, 0) = b[k];
  }
  const double x = 0.7, h0 = -0.3, c0 = 0.4;
  LstmCache cache;
  lstm_cell_forward(l, std::vector<double>{x}, std::vector<double>{h0}, std::vector<double>{c0}, cache);
  auto pre = [&](int k) { return wi[k] * x + wr[k] * h0 + b[k]; };
  const double i = 1 / (1 + std::exp(-pre(0))), f = 1 / (1 + std::exp(-pre(1)));
  const double g = std::tanh(pre(2)), o = 1 / (1 + std::exp(-pre(3)));
  const double c = f * c0 + i * g;
  EXPECT_NEAR(cache.c[0], c, 1e-15);
  EXPECT_NEAR(cache.h[0], o * std::tanh(c), 1e-15);
}

TEST(Lstm, MakeLstmInitialisesForgetBiasToOne) {
  Rng rng(2);
  const LstmLayer l = make_lstm(3, 5, rng);
  EXPECT_EQ(l.w_input.rows(), 20);
  EXPECT_EQ(l.w_input.cols(), 3);
  EXPECT_EQ(l.w_recurrent.cols(), 5);
  for (int r = 0; r < 5; ++r) {
    EXPECT_EQ(l.bias(r, 0), 0.0);
    EXPECT_EQ(l.bias(5 + r, 0), 1.0);
  }
  const double bound = 1.0 / std::sqrt(5.0);
  for (double w : l.w_recurrent.values()) EXPECT_LE(std::abs(w), bound);
}

TEST(Lstm, SequenceBackwardMatchesFiniteDifferences) {
  Rng rng(3);
  std::vector<LstmLayer> layers{make_lstm(3, 4, rng), make_lstm(4, 4, rng)};
  std::vector<Vector> xs;
  for (int t = 0; t < 4; ++t) xs.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
  std::vector<Vector> weights;
  for (int t = 0; t < 4; ++t) weights.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
  std::vector<LstmState> init{{{0.1, -0.2, 0.3, 0.0}, {0.0, 0.2, -0.1, 0.4}}, {{0.2, 0.1, 0.0, -0.3}, {0.1, 0.0, 0.2, 0.0}}};

  auto loss = [&] {
    const auto out = lstm_forward(layers, xs, init);
    double s = 0.0;
    for (std::size_t t = 0; t < out.hidden.size(); ++t)
      for (std::size_t j = 0; j < 4; ++j) s += weights[t][j] * out.hidden[t][j];
    return s;
  };
  auto out = lstm_forward(layers, xs, init);
  const LstmGradients g = backward(layers, out.tape, weights);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t i = 0; i < layers[l].w_input.size(); i += 3)
      expect_close(g.layers[l].w_input.data()[i], central(loss, layers[l].w_input.data()[i]), "w_input");
    for (std::size_t i = 0; i < layers[l].w_recurrent.size(); i += 3)
      expect_close(g.layers[l].w_recurrent.data()[i], central(loss, layers[l].w_recurrent.data()[i]), "w_recurrent");
    for (std::size_t i = 0; i < layers[l].bias.size(); ++i)
      expect_close(g.layers[l].bias.data()[i], central(loss, layers[l].bias.data()[i]), "bias");
    for (std::size_t j = 0; j < 4; ++j) {
      expect_close(g.initial[l].h[j], central(loss, init[l].h[j]), "h0");
      expect_close(g.initial[l].c[j], central(loss, init[l].c[j]), "c0");
    }
  }
  for (std::size_t t = 0; t < xs.size(); ++t)
    for (std::size_t j = 0; j < 3; ++j) expect_close(g.inputs[t][j], central(loss, xs[t][j]), "input");

  EXPECT_TRUE(out.tape.consumed());
  EXPECT_THROW(backward(layers, out.tape, weights), InputError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Matrix p(1, 3), g(1, 3);
  p.data()[0] = 1.0;
  g.data()[0] = 0.5;
  g.data()[1] = -2.0;
  std::vector<ParamRef> params{{"p", &p}}, grads{{"p", &g}};
  AdamState st;
  st.lr = 0.01;
  adam_step(params, grads, st);
  // Bias-corrected first step: m_hat / sqrt(v_hat) = sign(g).
  EXPECT_NEAR(p.data()[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(p.data()[1], 0.01, 1e-9);
  EXPECT_EQ(p.data()[2], 0.0);
  EXPECT_EQ(st.step, 1);

  // Second step by hand.
  g.data()[0] = 1.0;
  const double m = 0.9 * 0.05 + 0.1 * 1.0, v = 0.999 * 0.00025 + 0.001 * 1.0;
  const double expected = p.data()[0] - 0.01 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
  adam_step(params, grads, st);
  EXPECT_NEAR(p.data()[0], expected, 1e-12);

  g.data()[2] = std::nan("");
  EXPECT_THROW(adam_step(params, grads, st), InputError);
}

TEST(Clip, RescalesOnlyAboveThreshold) {
  Matrix a(1, 2), b(2, 1);
  a.data()[0] = 3.0;
  b.data()[1] = 4.0;
  std::vector<ParamRef> grads{{"a", &a}, {"b", &b}};
  EXPECT_DOUBLE_EQ(global_norm(grads), 5.0);
  EXPECT_DOUBLE_EQ(clip_grad_norm(grads, 10.0), 5.0);
  EXPECT_DOUBLE_EQ(a.data()[0], 3.0);
  EXPECT_DOUBLE_EQ(clip_grad_norm(grads, 1.0), 5.0);
  EXPECT_NEAR(global_norm(grads), 1.0, 1e-15);
  EXPECT_NEAR(a.data()[0], 0.6, 1e-15);
}

TEST(Sigmoid, StableAtExtremes) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_GT(sigmoid(800.0), 0.999);
  EXPECT_GE(sigmoid(-800.0), 0.0);
  EXPECT_FALSE(std::isnan(sigmoid(-800.0)));
}

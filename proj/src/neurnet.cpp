#include "skycatch/neurnet.hpp"

#include <cmath>

#include <Eigen/Core>

namespace skycatch::nn {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajor>;
using ConstMatMap = Eigen::Map<const RowMajor>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

ConstMatMap view(const Matrix& m) { return {m.data(), m.rows(), m.cols()}; }
MatMap view(Matrix& m) { return {m.data(), m.rows(), m.cols()}; }
ConstVecMap view(std::span<const double> v) { return {v.data(), static_cast<Eigen::Index>(v.size())}; }
VecMap view(std::span<double> v) { return {v.data(), static_cast<Eigen::Index>(v.size())}; }

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  for (double& x : m.values()) x = rng.uniform(-bound, bound);
}

void require(bool ok, const char* what) {
  if (!ok) throw InputError(what);
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

DenseLayer make_dense(int inputs, int outputs, Rng& rng) {
  DenseLayer layer{Matrix(outputs, inputs), Matrix(outputs, 1)};
  fill_uniform(layer.weight, 1.0 / std::sqrt(static_cast<double>(inputs)), rng);
  return layer;
}

LstmLayer make_lstm(int inputs, int hidden, Rng& rng) {
  LstmLayer layer{Matrix(4 * hidden, inputs), Matrix(4 * hidden, hidden), Matrix(4 * hidden, 1)};
  fill_uniform(layer.w_input, 1.0 / std::sqrt(static_cast<double>(inputs)), rng);
  fill_uniform(layer.w_recurrent, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  for (int r = hidden; r < 2 * hidden; ++r) layer.bias(r, 0) = 1.0;
  return layer;
}

DenseLayer zeros_like(const DenseLayer& layer) { return {layer.weight.zeros_like(), layer.bias.zeros_like()}; }

LstmLayer zeros_like(const LstmLayer& layer) {
  return {layer.w_input.zeros_like(), layer.w_recurrent.zeros_like(), layer.bias.zeros_like()};
}

Vector dense_forward(const DenseLayer& layer, std::span<const double> x) {
  require(static_cast<int>(x.size()) == layer.inputs(), "dense layer input dimension mismatch");
  Vector y(static_cast<std::size_t>(layer.outputs()));
  view(std::span<double>(y)) = view(layer.weight) * view(x) + view(layer.bias).col(0);
  return y;
}

void dense_backward(const DenseLayer& layer, std::span<const double> x, std::span<const double> dy, DenseLayer& grad,
                    std::span<double> dx) {
  const auto dyv = view(dy);
  view(grad.weight).noalias() += dyv * view(x).transpose();
  view(grad.bias).col(0) += dyv;
  if (!dx.empty()) view(dx).noalias() += view(layer.weight).transpose() * dyv;
}

void lstm_cell_forward(const LstmLayer& layer, std::span<const double> x, std::span<const double> h_prev,
                       std::span<const double> c_prev, LstmCache& out) {
  const int h = layer.hidden();
  require(static_cast<int>(x.size()) == layer.inputs(), "LSTM input dimension mismatch");
  require(static_cast<int>(h_prev.size()) == h && static_cast<int>(c_prev.size()) == h, "LSTM state dimension mismatch");

  out.x.assign(x.begin(), x.end());
  out.h_prev.assign(h_prev.begin(), h_prev.end());
  out.c_prev.assign(c_prev.begin(), c_prev.end());
  out.gates.resize(static_cast<std::size_t>(4 * h));
  auto z = view(std::span<double>(out.gates));
  z = view(layer.bias).col(0);
  z.noalias() += view(layer.w_input) * view(x);
  z.noalias() += view(layer.w_recurrent) * view(h_prev);

  out.c.resize(static_cast<std::size_t>(h));
  out.tanh_c.resize(static_cast<std::size_t>(h));
  out.h.resize(static_cast<std::size_t>(h));
  for (int k = 0; k < h; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const double ig = sigmoid(out.gates[uk]);
    const double fg = sigmoid(out.gates[uk + static_cast<std::size_t>(h)]);
    const double gg = std::tanh(out.gates[uk + static_cast<std::size_t>(2 * h)]);
    const double og = sigmoid(out.gates[uk + static_cast<std::size_t>(3 * h)]);
    out.gates[uk] = ig;
    out.gates[uk + static_cast<std::size_t>(h)] = fg;
    out.gates[uk + static_cast<std::size_t>(2 * h)] = gg;
    out.gates[uk + static_cast<std::size_t>(3 * h)] = og;
    out.c[uk] = fg * c_prev[uk] + ig * gg;
    out.tanh_c[uk] = std::tanh(out.c[uk]);
    out.h[uk] = og * out.tanh_c[uk];
  }
}

void lstm_cell_backward(const LstmLayer& layer, const LstmCache& cache, std::span<const double> dh,
                        std::span<const double> dc, LstmLayer& grad, std::span<double> dx, std::span<double> dh_prev,
                        std::span<double> dc_prev) {
  const int h = layer.hidden();
  const auto uh = static_cast<std::size_t>(h);
  Vector dz(4 * uh);
  for (std::size_t k = 0; k < uh; ++k) {
    const double ig = cache.gates[k];
    const double fg = cache.gates[k + uh];
    const double gg = cache.gates[k + 2 * uh];
    const double og = cache.gates[k + 3 * uh];
    const double dhk = dh.empty() ? 0.0 : dh[k];
    const double dck = (dc.empty() ? 0.0 : dc[k]) + dhk * og * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
    dz[k] = dck * gg * ig * (1.0 - ig);
    dz[k + uh] = dck * cache.c_prev[k] * fg * (1.0 - fg);
    dz[k + 2 * uh] = dck * ig * (1.0 - gg * gg);
    dz[k + 3 * uh] = dhk * cache.tanh_c[k] * og * (1.0 - og);
    if (!dc_prev.empty()) dc_prev[k] += dck * fg;
  }
  const auto dzv = view(std::span<const double>(dz));
  view(grad.w_input).noalias() += dzv * view(std::span<const double>(cache.x)).transpose();
  view(grad.w_recurrent).noalias() += dzv * view(std::span<const double>(cache.h_prev)).transpose();
  view(grad.bias).col(0) += dzv;
  if (!dx.empty()) view(dx).noalias() += view(layer.w_input).transpose() * dzv;
  if (!dh_prev.empty()) view(dh_prev).noalias() += view(layer.w_recurrent).transpose() * dzv;
}

LstmSequenceOutput lstm_forward(std::span<const LstmLayer> layers, std::span<const Vector> inputs,
                                std::span<const LstmState> initial) {
  require(!layers.empty(), "LSTM stack is empty");
  require(initial.empty() || initial.size() == layers.size(), "initial state count must match layer count");
  LstmSequenceOutput out;
  out.tape.steps.resize(layers.size());
  out.final_state.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto h = static_cast<std::size_t>(layers[l].hidden());
    out.final_state[l] = initial.empty() ? LstmState{Vector(h, 0.0), Vector(h, 0.0)} : initial[l];
  }
  for (const auto& x : inputs) {
    std::span<const double> in = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& cache = out.tape.steps[l].emplace_back();
      lstm_cell_forward(layers[l], in, out.final_state[l].h, out.final_state[l].c, cache);
      out.final_state[l] = {cache.h, cache.c};
      in = cache.h;
    }
    out.hidden.push_back(out.tape.steps.back().back().h);
  }
  return out;
}

LstmGradients backward(std::span<const LstmLayer> layers, LstmTape& tape, std::span<const Vector> d_hidden,
                       std::span<const LstmState> d_final) {
  if (tape.consumed()) throw InputError("LSTM tape was already consumed by a backward pass");
  require(tape.steps.size() == layers.size(), "tape does not match the layer stack");
  tape.mark_consumed();

  const std::size_t n_layers = layers.size();
  const std::size_t n_steps = tape.steps.front().size();
  require(d_hidden.empty() || d_hidden.size() == n_steps, "upstream gradient length mismatch");

  LstmGradients g;
  for (const auto& layer : layers) g.layers.push_back(zeros_like(layer));
  g.inputs.assign(n_steps, Vector(static_cast<std::size_t>(layers.front().inputs()), 0.0));

  // Running gradients w.r.t. each layer's h and c flowing back in time.
  std::vector<Vector> dh(n_layers), dc(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto h = static_cast<std::size_t>(layers[l].hidden());
    dh[l] = d_final.empty() ? Vector(h, 0.0) : d_final[l].h;
    dc[l] = d_final.empty() ? Vector(h, 0.0) : d_final[l].c;
  }
  for (std::size_t step = n_steps; step-- > 0;) {
    if (!d_hidden.empty())
      for (std::size_t k = 0; k < dh.back().size(); ++k) dh.back()[k] += d_hidden[step][k];
    for (std::size_t l = n_layers; l-- > 0;) {
      const auto h = static_cast<std::size_t>(layers[l].hidden());
      Vector dh_prev(h, 0.0), dc_prev(h, 0.0);
      std::span<double> dx = l > 0 ? std::span<double>(dh[l - 1]) : std::span<double>(g.inputs[step]);
      lstm_cell_backward(layers[l], tape.steps[l][step], dh[l], dc[l], g.layers[l], dx, dh_prev, dc_prev);
      dh[l] = std::move(dh_prev);
      dc[l] = std::move(dc_prev);
    }
  }
  for (std::size_t l = 0; l < n_layers; ++l) g.initial.push_back({dh[l], dc[l]});
  return g;
}

void adam_step(std::span<const ParamRef> params, std::span<const ParamRef> grads, AdamState& state) {
  require(params.size() == grads.size(), "parameter and gradient block counts differ");
  for (std::size_t b = 0; b < params.size(); ++b) {
    require(params[b].value->size() == grads[b].value->size(), "parameter and gradient shapes differ");
    for (double g : grads[b].value->values())
      if (!std::isfinite(g)) throw InputError("non-finite gradient in parameter block '" + grads[b].name + "'");
  }
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
      state.m.push_back(p.value->zeros_like());
      state.v.push_back(p.value->zeros_like());
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b].value->values();
    auto g = grads[b].value->values();
    auto m = state.m[b].values();
    auto v = state.v[b].values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

double global_norm(std::span<const ParamRef> blocks) {
  double ss = 0.0;
  for (const auto& b : blocks)
    for (double g : b.value->values()) ss += g * g;
  return std::sqrt(ss);
}

double clip_grad_norm(std::span<const ParamRef> grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& b : grads)
      for (double& g : b.value->values()) g *= scale;
  }
  return norm;
}

}  // namespace skycatch::nn

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "skycatch/common.hpp"

// Small reverse-mode neural engine: dense and LSTM layers with explicit
// caches, plus Adam. Only the fixed graphs used by the predictors are
// supported; there is no general autograd.
namespace skycatch::nn {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c)]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c)]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }
  Matrix zeros_like() const { return Matrix(rows_, cols_); }

  bool operator==(const Matrix&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

struct DenseLayer {
  Matrix weight;  // out x in
  Matrix bias;    // out x 1

  int inputs() const { return weight.cols(); }
  int outputs() const { return weight.rows(); }
};

// Gate order in the stacked 4h rows: input, forget, cell, output.
struct LstmLayer {
  Matrix w_input;      // 4h x d
  Matrix w_recurrent;  // 4h x h
  Matrix bias;         // 4h x 1

  int hidden() const { return w_recurrent.cols(); }
  int inputs() const { return w_input.cols(); }
};

DenseLayer make_dense(int inputs, int outputs, Rng& rng);
LstmLayer make_lstm(int inputs, int hidden, Rng& rng);
DenseLayer zeros_like(const DenseLayer& layer);
LstmLayer zeros_like(const LstmLayer& layer);

Vector dense_forward(const DenseLayer& layer, std::span<const double> x);
// Accumulates parameter gradients into `grad` and the input gradient into `dx` (skipped when empty).
void dense_backward(const DenseLayer& layer, std::span<const double> x, std::span<const double> dy, DenseLayer& grad,
                    std::span<double> dx);

struct LstmCache {
  Vector x, h_prev, c_prev;
  Vector gates;  // activated i, f, g, o
  Vector c, tanh_c, h;
};

void lstm_cell_forward(const LstmLayer& layer, std::span<const double> x, std::span<const double> h_prev,
                       std::span<const double> c_prev, LstmCache& out);
// dh/dc are the gradients w.r.t. this step's h and c. Input and previous-state
// gradients are accumulated into dx, dh_prev, dc_prev (each skipped when empty).
void lstm_cell_backward(const LstmLayer& layer, const LstmCache& cache, std::span<const double> dh,
                        std::span<const double> dc, LstmLayer& grad, std::span<double> dx, std::span<double> dh_prev,
                        std::span<double> dc_prev);

struct LstmState {
  Vector h;
  Vector c;
};

class LstmTape {
 public:
  std::vector<std::vector<LstmCache>> steps;  // [layer][time]
  bool consumed() const { return consumed_; }
  void mark_consumed() { consumed_ = true; }

 private:
  bool consumed_ = false;
};

struct LstmSequenceOutput {
  std::vector<Vector> hidden;  // top-layer h per step
  std::vector<LstmState> final_state;
  LstmTape tape;
};

// Stacked LSTM over a sequence. `initial` may be empty (zero state).
LstmSequenceOutput lstm_forward(std::span<const LstmLayer> layers, std::span<const Vector> inputs,
                                std::span<const LstmState> initial = {});

struct LstmGradients {
  std::vector<LstmLayer> layers;
  std::vector<Vector> inputs;
  std::vector<LstmState> initial;
};

// Reverse pass over a tape from lstm_forward; the tape cannot be reused.
LstmGradients backward(std::span<const LstmLayer> layers, LstmTape& tape, std::span<const Vector> d_hidden,
                       std::span<const LstmState> d_final = {});

struct ParamRef {
  std::string name;
  Matrix* value;
};

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

// Bias-corrected Adam. Throws InputError naming the block on a non-finite gradient.
void adam_step(std::span<const ParamRef> params, std::span<const ParamRef> grads, AdamState& state);

double global_norm(std::span<const ParamRef> blocks);
// Rescales the gradients to max_norm if their global norm exceeds it; returns the norm before clipping.
double clip_grad_norm(std::span<const ParamRef> grads, double max_norm);

double sigmoid(double x);

}  // namespace skycatch::nn

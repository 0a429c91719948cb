#include "skycatch/predictors.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "skycatch/csv.hpp"

namespace skycatch {

using nn::Matrix;
using nn::Vector;
using json = nlohmann::json;

// ---- architecture --------------------------------------------------------------

namespace {

constexpr std::array<ArchKind, 5> kAllKinds = {ArchKind::nae, ArchKind::dpe, ArchKind::dipp_nae, ArchKind::dipp_dpe,
                                               ArchKind::dipp_nae_fc};

constexpr int kImpactDim = 3;

}  // namespace

std::string to_string(ArchKind kind) {
  switch (kind) {
    case ArchKind::nae: return "nae";
    case ArchKind::dpe: return "dpe";
    case ArchKind::dipp_nae: return "dipp_nae";
    case ArchKind::dipp_dpe: return "dipp_dpe";
    case ArchKind::dipp_nae_fc: return "dipp_nae_fc";
  }
  return "unknown";
}

std::string to_string(EncoderKind kind) { return kind == EncoderKind::lstm_1layer ? "lstm_1layer" : "fc_1layer"; }

ArchKind parse_arch_kind(const std::string& name) {
  for (ArchKind k : kAllKinds)
    if (to_string(k) == name) return k;
  throw InputError("unknown architecture kind '" + name + "'");
}

std::span<const ArchKind> all_arch_kinds() { return kAllKinds; }

EncoderKind ArchitectureSpec::encoder() const {
  return (kind == ArchKind::dipp_nae || kind == ArchKind::dipp_dpe) ? EncoderKind::lstm_1layer : EncoderKind::fc_1layer;
}

bool ArchitectureSpec::predicts_trajectory() const {
  return kind == ArchKind::nae || kind == ArchKind::dipp_nae || kind == ArchKind::dipp_nae_fc;
}

Feedback ArchitectureSpec::feedback() const { return kind == ArchKind::nae ? Feedback::state : Feedback::hidden; }

Network Network::create(const ArchitectureSpec& arch, std::uint64_t seed) {
  if (arch.hidden <= 0) throw InputError("hidden size must be positive");
  if (arch.history_steps < 1) throw InputError("history steps T must be at least 1");
  if (arch.state_dim != StateVec::kDim) throw InputError("state dimension must be 9");
  if (arch.core_layers < 1) throw InputError("core needs at least one layer");
  Rng rng(seed);
  Network net;
  net.arch = arch;
  if (arch.encoder() == EncoderKind::lstm_1layer)
    net.encoder_lstm = nn::make_lstm(arch.state_dim, arch.hidden, rng);
  else
    net.encoder_fc = nn::make_dense(arch.state_dim, arch.hidden, rng);
  for (int l = 0; l < arch.core_layers; ++l) net.core.push_back(nn::make_lstm(arch.hidden, arch.hidden, rng));
  net.decoder = nn::make_dense(arch.hidden, arch.predicts_trajectory() ? arch.state_dim : kImpactDim, rng);
  return net;
}

Network Network::zeros_like() const {
  Network g;
  g.arch = arch;
  g.norm = norm;
  g.encoder_lstm = nn::zeros_like(encoder_lstm);
  g.encoder_fc = nn::zeros_like(encoder_fc);
  for (const auto& layer : core) g.core.push_back(nn::zeros_like(layer));
  g.decoder = nn::zeros_like(decoder);
  return g;
}

std::vector<nn::ParamRef> Network::blocks() {
  std::vector<nn::ParamRef> out;
  if (arch.encoder() == EncoderKind::lstm_1layer) {
    out.push_back({"encoder.w_input", &encoder_lstm.w_input});
    out.push_back({"encoder.w_recurrent", &encoder_lstm.w_recurrent});
    out.push_back({"encoder.bias", &encoder_lstm.bias});
  } else {
    out.push_back({"encoder.weight", &encoder_fc.weight});
    out.push_back({"encoder.bias", &encoder_fc.bias});
  }
  for (std::size_t l = 0; l < core.size(); ++l) {
    const std::string p = "core" + std::to_string(l) + ".";
    out.push_back({p + "w_input", &core[l].w_input});
    out.push_back({p + "w_recurrent", &core[l].w_recurrent});
    out.push_back({p + "bias", &core[l].bias});
  }
  out.push_back({"decoder.weight", &decoder.weight});
  out.push_back({"decoder.bias", &decoder.bias});
  return out;
}

std::vector<nn::ParamRef> Network::blocks() const { return const_cast<Network*>(this)->blocks(); }

// ---- forward / backward engine -------------------------------------------------

namespace {

Vector normalize(const Normalization& norm, const StateVec& s) {
  const auto f = s.flat();
  Vector u(StateVec::kDim);
  for (int i = 0; i < StateVec::kDim; ++i) u[i] = (f[i] - norm.mean[i]) / norm.scale[i];
  return u;
}

StateVec denormalize(const Normalization& norm, std::span<const double> y) {
  std::array<double, StateVec::kDim> f{};
  for (int i = 0; i < StateVec::kDim; ++i) f[i] = norm.mean[i] + norm.scale[i] * y[i];
  return StateVec::from_flat(f);
}

Vec3 denormalize_position(const Normalization& norm, std::span<const double> y) {
  return {norm.mean[0] + norm.scale[0] * y[0], norm.mean[1] + norm.scale[1] * y[1], norm.mean[2] + norm.scale[2] * y[2]};
}

void add_into(Vector& acc, std::span<const double> v) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
}

// Records one pass through encoder and core with every cache needed for the
// reverse sweep. Core step k consumes encoder feature k while k <= T, and the
// feedback signal afterwards.
struct Pass {
  const Network& net;
  int hidden;

  std::vector<Vector> u;  // encoder inputs, normalized
  std::vector<nn::LstmCache> enc_cache;
  std::vector<Vector> e;  // encoder features
  Vector enc_h, enc_c;

  std::vector<std::vector<nn::LstmCache>> core_cache;  // [step][layer]
  std::vector<Vector> top;                             // top hidden per core step
  std::vector<Vector> core_h, core_c;

  explicit Pass(const Network& n)
      : net(n),
        hidden(n.arch.hidden),
        enc_h(static_cast<std::size_t>(hidden), 0.0),
        enc_c(static_cast<std::size_t>(hidden), 0.0),
        core_h(n.core.size(), Vector(static_cast<std::size_t>(hidden), 0.0)),
        core_c(n.core.size(), Vector(static_cast<std::size_t>(hidden), 0.0)) {}

  const Vector& encode_step(Vector input) {
    u.push_back(std::move(input));
    if (net.arch.encoder() == EncoderKind::lstm_1layer) {
      nn::LstmCache& cache = enc_cache.emplace_back();
      nn::lstm_cell_forward(net.encoder_lstm, u.back(), enc_h, enc_c, cache);
      enc_h = cache.h;
      enc_c = cache.c;
      e.push_back(cache.h);
    } else {
      Vector pre = nn::dense_forward(net.encoder_fc, u.back());
      for (double& x : pre) x = std::tanh(x);
      e.push_back(std::move(pre));
    }
    return e.back();
  }

  const Vector& core_step(std::span<const double> input) {
    auto& caches = core_cache.emplace_back(net.core.size());
    std::span<const double> x = input;
    for (std::size_t l = 0; l < net.core.size(); ++l) {
      nn::lstm_cell_forward(net.core[l], x, core_h[l], core_c[l], caches[l]);
      core_h[l] = caches[l].h;
      core_c[l] = caches[l].c;
      x = caches[l].h;
    }
    top.push_back(caches.back().h);
    return top.back();
  }

  int steps() const { return static_cast<int>(top.size()); }
};

// Runs the history through encoder and core: T+1 core steps.
void run_history(Pass& pass, std::span<const StateVec> history) {
  for (const StateVec& s : history) {
    const Vector feature = pass.encode_step(normalize(pass.net.norm, s));
    pass.core_step(feature);
  }
}

// One self-fed step; `prev_output` is the decoder output of the previous step
// (state feedback only).
void free_step(Pass& pass, const Vector& prev_output) {
  if (pass.net.arch.feedback() == Feedback::hidden) {
    const Vector input = pass.top.back();
    pass.core_step(input);
  } else {
    const Vector feature = pass.encode_step(prev_output);
    pass.core_step(feature);
  }
}

struct Backward {
  // Gradient w.r.t. decoder output at each core step (normalized units); may be empty.
  std::vector<Vector> dy;
  // Gradient w.r.t. the decoder applied to encoder feature k (reconstruction).
  std::vector<Vector> dr;
};

void run_backward(const Pass& pass, Backward& bw, Network& g) {
  const Network& net = pass.net;
  const std::size_t H = static_cast<std::size_t>(pass.hidden);
  const int T = net.arch.history_steps;
  const bool state_fb = net.arch.feedback() == Feedback::state;
  const bool lstm_enc = net.arch.encoder() == EncoderKind::lstm_1layer;
  const std::size_t L = net.core.size();

  std::vector<Vector> dh_rec(L, Vector(H, 0.0)), dc_rec(L, Vector(H, 0.0));
  Vector dhe_rec(H, 0.0), dce_rec(H, 0.0);
  Vector d_next_input;  // gradient flowing into the previous top hidden (hidden feedback)

  for (int k = pass.steps() - 1; k >= 0; --k) {
    const std::size_t ks = static_cast<std::size_t>(k);
    Vector dH(H, 0.0);
    if (ks < bw.dy.size() && !bw.dy[ks].empty()) nn::dense_backward(net.decoder, pass.top[ks], bw.dy[ks], g.decoder, dH);
    if (!d_next_input.empty()) {
      add_into(dH, d_next_input);
      d_next_input.clear();
    }

    Vector d_below = std::move(dH);
    for (std::size_t li = L; li-- > 0;) {
      const nn::LstmCache& cache = pass.core_cache[ks][li];
      Vector dh = d_below;
      add_into(dh, dh_rec[li]);
      Vector dx(cache.x.size(), 0.0), dh_prev(H, 0.0), dc_prev(H, 0.0);
      nn::lstm_cell_backward(net.core[li], cache, dh, dc_rec[li], g.core[li], dx, dh_prev, dc_prev);
      dh_rec[li] = std::move(dh_prev);
      dc_rec[li] = std::move(dc_prev);
      d_below = std::move(dx);
    }

    const bool consumed_feature = k <= T || state_fb;
    if (!consumed_feature) {
      d_next_input = std::move(d_below);
      continue;
    }
    Vector de = std::move(d_below);
    if (ks < bw.dr.size() && !bw.dr[ks].empty()) nn::dense_backward(net.decoder, pass.e[ks], bw.dr[ks], g.decoder, de);
    const bool need_du = state_fb && k > T;
    Vector du(need_du ? pass.u[ks].size() : 0, 0.0);
    if (lstm_enc) {
      add_into(de, dhe_rec);
      Vector dh_prev(H, 0.0), dc_prev(H, 0.0);
      nn::lstm_cell_backward(net.encoder_lstm, pass.enc_cache[ks], de, dce_rec, g.encoder_lstm, du, dh_prev, dc_prev);
      dhe_rec = std::move(dh_prev);
      dce_rec = std::move(dc_prev);
    } else {
      const Vector& act = pass.e[ks];
      for (std::size_t i = 0; i < de.size(); ++i) de[i] *= 1.0 - act[i] * act[i];
      nn::dense_backward(net.encoder_fc, pass.u[ks], de, g.encoder_fc, du);
    }
    if (need_du) {
      // The fed-back encoder input is the previous decoder output itself.
      Vector& prev = bw.dy[ks - 1];
      if (prev.empty()) prev.assign(du.size(), 0.0);
      add_into(prev, du);
    }
  }
}

double squared_norm(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// d/dy of w * c * |denorm(y) - target|^2 accumulated into dy.
void accumulate_state_grad(const Normalization& norm, const StateVec& pred, const StateVec& target, double coef,
                           Vector& dy) {
  const auto p = pred.flat(), t = target.flat();
  if (dy.empty()) dy.assign(StateVec::kDim, 0.0);
  for (int i = 0; i < StateVec::kDim; ++i) dy[i] += coef * 2.0 * (p[i] - t[i]) * norm.scale[i];
}

void accumulate_position_grad(const Normalization& norm, const Vec3& diff, double coef, Vector& dy, std::size_t dim) {
  if (dy.empty()) dy.assign(dim, 0.0);
  for (int i = 0; i < 3; ++i) dy[i] += coef * 2.0 * diff[i] * norm.scale[i];
}

void require_window(const Network& net, const TrainingWindow& w) {
  if (static_cast<int>(w.history.size()) != net.arch.history_length()) {
    throw InputError("window history has " + std::to_string(w.history.size()) + " states, model expects " +
                     std::to_string(net.arch.history_length()));
  }
}

}  // namespace

std::vector<Vector> encode(const Network& net, std::span<const StateVec> history) {
  if (static_cast<int>(history.size()) != net.arch.history_length()) {
    throw InputError("history has " + std::to_string(history.size()) + " states, model expects " +
                     std::to_string(net.arch.history_length()));
  }
  Pass pass(net);
  for (const StateVec& s : history) pass.encode_step(normalize(net.norm, s));
  return pass.e;
}

StateVec decode_state(const Network& net, std::span<const double> hidden) {
  if (!net.arch.predicts_trajectory()) throw InputError("decode_state needs a trajectory-predicting model");
  return denormalize(net.norm, nn::dense_forward(net.decoder, hidden));
}

Vec3 decode_impact(const Network& net, std::span<const double> hidden) {
  if (net.arch.predicts_trajectory()) throw InputError("decode_impact needs a direct impact-point model");
  return denormalize_position(net.norm, nn::dense_forward(net.decoder, hidden));
}

RolloutResult rollout(const Network& net, std::span<const Vector> features, const PlaneSpec& plane) {
  if (!net.arch.predicts_trajectory()) throw InputError("rollout needs a trajectory-predicting model");
  if (static_cast<int>(features.size()) != net.arch.history_length())
    throw InputError("rollout expects one feature per history state");
  if (net.arch.feedback() == Feedback::state)
    throw InputError("state-feedback models roll out from states; use predict_impact");
  Pass pass(net);
  for (const Vector& f : features) pass.core_step(f);
  RolloutResult out;
  Vector y = nn::dense_forward(net.decoder, pass.top.back());
  out.predicted.push_back(denormalize(net.norm, y));
  while (!(out.predicted.back().position.z() < plane.height)) {
    if (out.steps_to_impact >= net.arch.max_rollout_steps)
      throw NoCrossingError("rollout reached " + std::to_string(net.arch.max_rollout_steps) +
                            " steps without crossing the plane");
    free_step(pass, y);
    ++out.steps_to_impact;
    y = nn::dense_forward(net.decoder, pass.top.back());
    out.predicted.push_back(denormalize(net.norm, y));
  }
  out.hidden = pass.top;
  out.core_steps = pass.steps();
  return out;
}

Vec3 impact_from_trajectory(std::span<const StateVec> states, const PlaneSpec& plane) {
  std::vector<Vec3> positions;
  positions.reserve(states.size());
  for (const auto& s : states) positions.push_back(s.position);
  return find_descending_crossing(positions, plane.height).point;
}

// ---- losses -------------------------------------------------------------------

LossResult loss_nae(const Network& net, const TrainingWindow& w, const LossWeights& weights, bool with_gradients) {
  if (!net.arch.predicts_trajectory()) throw InputError("loss_nae needs a trajectory-predicting model");
  require_window(net, w);
  const int T = net.arch.history_steps;
  const int K = w.steps_to_impact;
  if (K < 2 || static_cast<int>(w.future.size()) < K)
    throw InputError("window " + w.trial_id + "@" + std::to_string(w.t_index) + " has K=" + std::to_string(K) +
                     " < 2 and is skipped");
  const Normalization& norm = net.norm;

  // Free-running steps needed: s_{t+2..t+K} for alignment, s_{t+K+1} for the impact blend.
  const int free = weights.impact != 0.0 ? K : (weights.alignment != 0.0 ? K - 1 : 0);

  Pass pass(net);
  run_history(pass, w.history);
  std::vector<Vector> y;
  for (const Vector& h : pass.top) y.push_back(nn::dense_forward(net.decoder, h));
  for (int j = 1; j <= free; ++j) {
    free_step(pass, y.back());
    y.push_back(nn::dense_forward(net.decoder, pass.top.back()));
  }
  std::vector<StateVec> pred;
  for (const auto& v : y) pred.push_back(denormalize(norm, v));

  LossResult r;
  Backward bw;
  bw.dy.resize(y.size());
  bw.dr.resize(static_cast<std::size_t>(T + 1));
  const double inv_h = 1.0 / static_cast<double>(T + 1);

  // Teacher forcing: step k predicts s_{t-T+k+1}.
  for (int k = 0; k <= T; ++k) {
    const StateVec& target = k < T ? w.history[static_cast<std::size_t>(k + 1)] : w.future[0];
    const auto& p = pred[static_cast<std::size_t>(k)];
    r.teacher_forcing += squared_norm(p.flat(), target.flat()) * inv_h;
    r.teacher_forced.push_back(p);
    if (with_gradients && weights.teacher_forcing != 0.0)
      accumulate_state_grad(norm, p, target, weights.teacher_forcing * inv_h, bw.dy[static_cast<std::size_t>(k)]);
  }

  // Reconstruction through the shared decoder.
  for (int k = 0; k <= T; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const StateVec rec = denormalize(norm, nn::dense_forward(net.decoder, pass.e[ks]));
    r.reconstruction += squared_norm(rec.flat(), w.history[ks].flat()) * inv_h;
    r.reconstructed.push_back(rec);
    if (with_gradients && weights.reconstruction != 0.0)
      accumulate_state_grad(norm, rec, w.history[ks], weights.reconstruction * inv_h, bw.dr[ks]);
  }

  // Alignment: core step T+i-1 predicts s_{t+i}, i = 2..K.
  for (int k = T + 1; k < static_cast<int>(pred.size()); ++k) r.free_running.push_back(pred[static_cast<std::size_t>(k)]);
  if (weights.alignment != 0.0) {
    const double inv_k = 1.0 / static_cast<double>(K - 1);
    for (int i = 2; i <= K; ++i) {
      const auto ks = static_cast<std::size_t>(T + i - 1);
      const StateVec& target = w.future[static_cast<std::size_t>(i - 1)];
      r.alignment += squared_norm(pred[ks].flat(), target.flat()) * inv_k;
      if (with_gradients) accumulate_state_grad(norm, pred[ks], target, weights.alignment * inv_k, bw.dy[ks]);
    }
  }

  // Impact point: the crossing between s_{t+K} and s_{t+K+1} at the window's crossing fraction.
  if (weights.impact != 0.0) {
    const double lam = w.crossing_fraction;
    const auto ka = static_cast<std::size_t>(T + K - 1), kb = static_cast<std::size_t>(T + K);
    r.predicted_impact = (1.0 - lam) * pred[ka].position + lam * pred[kb].position;
    const Vec3 diff = r.predicted_impact - w.impact_point;
    r.impact = diff.squaredNorm();
    if (with_gradients) {
      accumulate_position_grad(norm, diff, weights.impact * (1.0 - lam), bw.dy[ka], StateVec::kDim);
      accumulate_position_grad(norm, diff, weights.impact * lam, bw.dy[kb], StateVec::kDim);
    }
  }

  r.total = weights.teacher_forcing * r.teacher_forcing + weights.reconstruction * r.reconstruction +
            weights.alignment * r.alignment + weights.impact * r.impact;
  if (with_gradients) {
    r.grads = net.zeros_like();
    run_backward(pass, bw, r.grads);
  }
  return r;
}

LossResult loss_dpe(const Network& net, const TrainingWindow& w, const LossWeights& weights, bool with_gradients) {
  if (net.arch.predicts_trajectory()) throw InputError("loss_dpe needs a direct impact-point model");
  require_window(net, w);
  const int T = net.arch.history_steps;
  const Normalization& norm = net.norm;

  Pass pass(net);
  run_history(pass, w.history);

  LossResult r;
  Backward bw;
  bw.dy.resize(static_cast<std::size_t>(T + 1));
  bw.dr.resize(static_cast<std::size_t>(T + 1));
  const double inv_h = 1.0 / static_cast<double>(T + 1);

  for (int k = 0; k <= T; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const Vec3 rec = denormalize_position(norm, nn::dense_forward(net.decoder, pass.e[ks]));
    StateVec rs;
    rs.position = rec;
    r.reconstructed.push_back(rs);
    const Vec3 diff = rec - w.history[ks].position;
    r.reconstruction += diff.squaredNorm() * inv_h;
    if (with_gradients && weights.reconstruction != 0.0)
      accumulate_position_grad(norm, diff, weights.reconstruction * inv_h, bw.dr[ks], kImpactDim);
  }

  r.predicted_impact = denormalize_position(norm, nn::dense_forward(net.decoder, pass.top.back()));
  const Vec3 diff = r.predicted_impact - w.impact_point;
  r.impact = diff.squaredNorm();
  if (with_gradients && weights.impact != 0.0)
    accumulate_position_grad(norm, diff, weights.impact, bw.dy[static_cast<std::size_t>(T)], kImpactDim);

  r.total = weights.reconstruction * r.reconstruction + weights.impact * r.impact;
  if (with_gradients) {
    r.grads = net.zeros_like();
    run_backward(pass, bw, r.grads);
  }
  return r;
}

LossResult window_loss(const Network& net, const TrainingWindow& window, const LossWeights& weights,
                       bool with_gradients) {
  return net.arch.predicts_trajectory() ? loss_nae(net, window, weights, with_gradients)
                                        : loss_dpe(net, window, weights, with_gradients);
}

// ---- inference ----------------------------------------------------------------

PredictionResult predict_impact(const Network& net, std::span<const StateVec> history, const PlaneSpec& plane) {
  const auto start = std::chrono::steady_clock::now();
  PredictionResult out;
  try {
    if (static_cast<int>(history.size()) != net.arch.history_length()) {
      throw InputError("history has " + std::to_string(history.size()) + " states, model expects " +
                       std::to_string(net.arch.history_length()));
    }
    Pass pass(net);
    run_history(pass, history);
    if (!net.arch.predicts_trajectory()) {
      out.impact_point = decode_impact(net, pass.top.back());
      out.core_steps = pass.steps();
    } else {
      std::vector<StateVec> seq{history.back()};
      Vector y = nn::dense_forward(net.decoder, pass.top.back());
      seq.push_back(denormalize(net.norm, y));
      int k = 0;
      while (!(seq.back().position.z() < plane.height)) {
        if (k >= net.arch.max_rollout_steps)
          throw NoCrossingError("rollout reached " + std::to_string(net.arch.max_rollout_steps) +
                                " steps without crossing the plane");
        free_step(pass, y);
        ++k;
        y = nn::dense_forward(net.decoder, pass.top.back());
        seq.push_back(denormalize(net.norm, y));
      }
      out.impact_point = impact_from_trajectory(seq, plane);
      out.steps_to_impact_used = k;
      out.core_steps = pass.steps();
      seq.erase(seq.begin());
      out.predicted_trajectory = std::move(seq);
    }
    out.ok = true;
  } catch (const Error& e) {
    out.ok = false;
    out.diagnostic = e.what();
  }
  out.inference_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

NeuralPredictor::NeuralPredictor(Network net, std::string name) : net_(std::move(net)), name_(std::move(name)) {
  if (name_.empty()) name_ = to_string(net_.arch.kind);
}

ImpactEstimate NeuralPredictor::predict(const History& h, const PlaneSpec& plane) const {
  const PredictionResult r = predict_impact(net_, h.states, plane);
  return r.ok ? ImpactEstimate::success(r.impact_point) : ImpactEstimate::failure(r.diagnostic);
}

// ---- training -----------------------------------------------------------------

double default_learning_rate(ArchKind kind) { return kind == ArchKind::nae ? 1e-4 : 3e-5; }

LossWeights default_loss_weights(ArchKind kind) {
  if (kind == ArchKind::nae) return {1.0, 1.0, 0.0, 0.0};
  return {};
}

TrainHyper default_hyper(ArchKind kind) {
  TrainHyper h;
  h.lr = default_learning_rate(kind);
  h.weights = default_loss_weights(kind);
  return h;
}

Normalization fit_normalization(const std::vector<TrainingWindow>& windows) {
  Normalization norm;
  std::array<double, StateVec::kDim> sum{}, sq{};
  double n = 0.0;
  for (const auto& w : windows) {
    for (const auto& s : w.history) {
      const auto f = s.flat();
      for (int i = 0; i < StateVec::kDim; ++i) {
        sum[i] += f[i];
        sq[i] += f[i] * f[i];
      }
      n += 1.0;
    }
  }
  if (n == 0.0) return norm;
  for (int i = 0; i < StateVec::kDim; ++i) {
    norm.mean[i] = sum[i] / n;
    const double var = std::max(0.0, sq[i] / n - norm.mean[i] * norm.mean[i]);
    norm.scale[i] = std::max(std::sqrt(var), 1e-3);
  }
  return norm;
}

namespace {

std::vector<TrainingWindow> collect_windows(const std::vector<Trajectory>& trajs, std::span<const std::size_t> indices,
                                            int history_steps, const PlaneSpec& plane, int stride, int min_k) {
  if (stride < 1) throw InputError("window stride must be at least 1");
  std::vector<TrainingWindow> out;
  for (std::size_t idx : indices) {
    if (idx >= trajs.size()) throw InputError("split index out of range");
    std::vector<TrainingWindow> ws;
    try {
      ws = make_windows(trajs[idx], history_steps, plane);
    } catch (const NoCrossingError&) {
      continue;
    }
    for (std::size_t i = 0; i < ws.size(); i += static_cast<std::size_t>(stride))
      if (ws[i].steps_to_impact >= min_k) out.push_back(std::move(ws[i]));
  }
  return out;
}

void accumulate(Network& acc, const Network& g) {
  auto a = acc.blocks();
  const auto b = g.blocks();
  for (std::size_t i = 0; i < a.size(); ++i) {
    double* dst = a[i].value->data();
    const double* src = b[i].value->data();
    for (std::size_t j = 0; j < a[i].value->size(); ++j) dst[j] += src[j];
  }
}

void scale(Network& g, double s) {
  for (auto& ref : g.blocks())
    for (double& x : ref.value->values()) x *= s;
}

double validation_ie(const Network& net, const std::vector<TrainingWindow>& windows, const PlaneSpec& plane,
                     double penalty) {
  double sum = 0.0;
  for (const auto& w : windows) {
    const PredictionResult r = predict_impact(net, w.history, plane);
    sum += r.ok ? (r.impact_point - w.impact_point).norm() : penalty;
  }
  return sum / static_cast<double>(windows.size());
}

}  // namespace

std::vector<TrainingWindow> training_windows(const std::vector<Trajectory>& trajs, std::span<const std::size_t> indices,
                                             const ArchitectureSpec& arch, const PlaneSpec& plane, int stride) {
  return collect_windows(trajs, indices, arch.history_steps, plane, stride, arch.predicts_trajectory() ? 2 : 0);
}

ModelCheckpoint train(const ArchitectureSpec& arch, const std::vector<Trajectory>& trajs, const DatasetSplit& split,
                      const TrainHyper& hyper, const PlaneSpec& plane,
                      const std::function<void(const EpochLog&)>& progress) {
  if (split.train.empty()) throw InputError("training partition is empty");
  if (hyper.batch < 1 || hyper.epochs < 0 || hyper.eval_interval < 1 || hyper.shards < 1)
    throw InputError("batch, shards and eval interval must be positive");
  if (!(hyper.lr > 0.0)) throw InputError("learning rate must be positive");

  const std::vector<TrainingWindow> train_set = training_windows(trajs, split.train, arch, plane, hyper.window_stride);
  if (train_set.empty()) throw InputError("training partition yields no usable windows");
  const std::vector<TrainingWindow> val_set =
      collect_windows(trajs, split.val, arch.history_steps, plane, hyper.val_window_stride, 0);

  ModelCheckpoint ckpt;
  ckpt.hyper = hyper;
  Network net = Network::create(arch, derive_seed(hyper.seed, 1));
  net.norm = fit_normalization(train_set);

  nn::AdamState adam;
  adam.lr = hyper.lr;
  Rng rng(derive_seed(hyper.seed, 2));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  Network best = net;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  const int threads = std::max(1, hyper.threads);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    bool finite = true;
    std::string failure;
    const Network snapshot = net;

    for (std::size_t start = 0; start < order.size() && finite; start += static_cast<std::size_t>(hyper.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch));
      const std::size_t count = stop - start;
      const std::size_t n_shards = std::min<std::size_t>(static_cast<std::size_t>(hyper.shards), count);
      std::vector<Network> shard_grads(n_shards);
      std::vector<double> shard_loss(n_shards, 0.0);
      auto work = [&](std::size_t s) {
        const std::size_t lo = start + count * s / n_shards, hi = start + count * (s + 1) / n_shards;
        shard_grads[s] = net.zeros_like();
        for (std::size_t i = lo; i < hi; ++i) {
          LossResult r = window_loss(net, train_set[order[i]], hyper.weights, true);
          shard_loss[s] += r.total;
          accumulate(shard_grads[s], r.grads);
        }
      };
      if (threads > 1 && n_shards > 1) {
        for (std::size_t s0 = 0; s0 < n_shards; s0 += static_cast<std::size_t>(threads)) {
          std::vector<std::thread> pool;
          for (std::size_t s = s0; s < std::min(n_shards, s0 + static_cast<std::size_t>(threads)); ++s)
            pool.emplace_back(work, s);
          for (auto& th : pool) th.join();
        }
      } else {
        for (std::size_t s = 0; s < n_shards; ++s) work(s);
      }
      Network grads = std::move(shard_grads[0]);
      double batch_loss = shard_loss[0];
      for (std::size_t s = 1; s < n_shards; ++s) {
        accumulate(grads, shard_grads[s]);
        batch_loss += shard_loss[s];
      }
      if (!std::isfinite(batch_loss)) {
        finite = false;
        failure = "non-finite training loss at epoch " + std::to_string(epoch);
        break;
      }
      epoch_loss += batch_loss;
      scale(grads, 1.0 / static_cast<double>(count));
      const auto gb = grads.blocks();
      nn::clip_grad_norm(gb, hyper.clip);
      try {
        nn::adam_step(net.blocks(), gb, adam);
      } catch (const InputError& e) {
        finite = false;
        failure = e.what();
      }
    }

    if (!finite) {
      ckpt.aborted = true;
      ckpt.diagnostic = failure;
      if (ckpt.best_epoch < 0) best = snapshot;
      break;
    }

    EpochLog log{epoch, epoch_loss / static_cast<double>(order.size()), std::nullopt};
    ckpt.train_loss.push_back(log.train_loss);

    const bool eval_now = (epoch + 1) % hyper.eval_interval == 0 || epoch + 1 == hyper.epochs;
    if (val_set.empty()) {
      best = net;
      ckpt.best_epoch = epoch;
    } else if (eval_now) {
      const double ie = validation_ie(net, val_set, plane, hyper.val_failure_penalty);
      ckpt.val_ie.push_back(ie);
      log.val_ie = ie;
      if (ie < best_val) {
        best_val = ie;
        best = net;
        ckpt.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    if (progress) progress(log);
    if (!val_set.empty() && since_best >= hyper.patience) break;
  }

  ckpt.net = std::move(best);
  return ckpt;
}

// ---- embeddings ---------------------------------------------------------------

std::vector<EmbeddingRow> export_embeddings(const Network& net, const std::vector<TrainingWindow>& windows,
                                            int early_segments) {
  std::vector<EmbeddingRow> rows;
  std::map<std::pair<std::string, std::string>, int> taken;
  for (const auto& w : windows) {
    if (early_segments > 0) {
      int& n = taken[{w.object_id, w.trial_id}];
      if (n >= early_segments) continue;
      ++n;
    }
    rows.push_back({w.object_id, w.trial_id, w.t_index, encode(net, w.history).back()});
  }
  return rows;
}

void write_embeddings_csv(std::ostream& out, const std::vector<EmbeddingRow>& rows) {
  const std::size_t width = rows.empty() ? 0 : rows.front().features.size();
  out << "object_id,trial_id,t_index";
  for (std::size_t i = 0; i < width; ++i) out << ",f" << i;
  out << '\n';
  for (const auto& r : rows) {
    out << r.object_id << ',' << r.trial_id << ',' << r.t_index;
    for (double f : r.features) out << ',' << csv::num(f);
    out << '\n';
  }
}

double embedding_separation_ratio(const std::vector<EmbeddingRow>& rows) {
  double within = 0.0, across = 0.0;
  std::size_t n_within = 0, n_across = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      const double d = std::sqrt(squared_norm(rows[i].features, rows[j].features));
      if (rows[i].object_id == rows[j].object_id) {
        within += d;
        ++n_within;
      } else {
        across += d;
        ++n_across;
      }
    }
  }
  if (n_within == 0 || n_across == 0) throw InputError("separation ratio needs at least two objects with two rows");
  return (within / static_cast<double>(n_within)) / (across / static_cast<double>(n_across));
}

// ---- persistence --------------------------------------------------------------

namespace {

constexpr std::uint32_t kSchemaVersion = 1;

json arch_json(const ArchitectureSpec& a) {
  return {{"kind", to_string(a.kind)},          {"encoder", to_string(a.encoder())},
          {"core", "lstm_" + std::to_string(a.core_layers) + "layer"},
          {"decoder", "fc_1layer"},             {"hidden", a.hidden},
          {"history_steps", a.history_steps},   {"state_dim", a.state_dim},
          {"core_layers", a.core_layers},       {"max_rollout_steps", a.max_rollout_steps}};
}

ArchitectureSpec arch_from_json(const json& j) {
  ArchitectureSpec a;
  a.kind = parse_arch_kind(j.at("kind").get<std::string>());
  a.hidden = j.at("hidden").get<int>();
  a.history_steps = j.at("history_steps").get<int>();
  a.state_dim = j.at("state_dim").get<int>();
  a.core_layers = j.at("core_layers").get<int>();
  a.max_rollout_steps = j.at("max_rollout_steps").get<int>();
  return a;
}

json hyper_json(const TrainHyper& h) {
  return {{"lr", h.lr},
          {"batch", h.batch},
          {"epochs", h.epochs},
          {"seed", h.seed},
          {"clip", h.clip},
          {"eval_interval", h.eval_interval},
          {"patience", h.patience},
          {"window_stride", h.window_stride},
          {"val_window_stride", h.val_window_stride},
          {"val_failure_penalty", h.val_failure_penalty},
          {"shards", h.shards},
          {"threads", h.threads},
          {"loss_weights",
           {{"teacher_forcing", h.weights.teacher_forcing},
            {"reconstruction", h.weights.reconstruction},
            {"alignment", h.weights.alignment},
            {"impact", h.weights.impact}}}};
}

TrainHyper hyper_from_json(const json& j) {
  TrainHyper h;
  h.lr = j.at("lr").get<double>();
  h.batch = j.at("batch").get<int>();
  h.epochs = j.at("epochs").get<int>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.clip = j.at("clip").get<double>();
  h.eval_interval = j.at("eval_interval").get<int>();
  h.patience = j.at("patience").get<int>();
  h.window_stride = j.at("window_stride").get<int>();
  h.val_window_stride = j.at("val_window_stride").get<int>();
  h.val_failure_penalty = j.at("val_failure_penalty").get<double>();
  h.shards = j.at("shards").get<int>();
  h.threads = j.at("threads").get<int>();
  const json& w = j.at("loss_weights");
  h.weights = {w.at("teacher_forcing").get<double>(), w.at("reconstruction").get<double>(),
               w.at("alignment").get<double>(), w.at("impact").get<double>()};
  return h;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_uint(std::istream& in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw InputError("checkpoint is truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

struct Block {
  std::string name;
  const Matrix* value;
};

void write_container(const std::string& path, json header, const std::vector<Block>& blocks) {
  json shapes = json::array();
  for (const auto& b : blocks) shapes.push_back({{"name", b.name}, {"rows", b.value->rows()}, {"cols", b.value->cols()}});
  header["blocks"] = shapes;
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(out, kSchemaVersion);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& b : blocks)
    for (double x : b.value->values()) put_u64(out, std::bit_cast<std::uint64_t>(x));
  if (!out) throw InputError("failed writing checkpoint " + path);
}

struct Container {
  json header;
  std::map<std::string, Matrix> blocks;
};

Container read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path);
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw InputError(path + " is not a checkpoint");
  const auto version = static_cast<std::uint32_t>(get_uint(in, 4));
  if (version != kSchemaVersion)
    throw InputError("unsupported checkpoint schema version " + std::to_string(version) + " in " + path);
  const std::uint64_t len = get_uint(in, 8);
  if (len > (1u << 26)) throw InputError("checkpoint header is implausibly large");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw InputError("checkpoint is truncated");
  Container c;
  try {
    c.header = json::parse(text);
    for (const auto& b : c.header.at("blocks")) {
      Matrix m(b.at("rows").get<int>(), b.at("cols").get<int>());
      for (double& x : m.values()) x = std::bit_cast<double>(get_uint(in, 8));
      c.blocks.emplace(b.at("name").get<std::string>(), std::move(m));
    }
  } catch (const json::exception& e) {
    throw InputError("malformed checkpoint header in " + path + ": " + e.what());
  }
  return c;
}

void write_sidecar(const std::string& path, const json& j) {
  std::ofstream out(path + ".json");
  if (!out) throw InputError("cannot write " + path + ".json");
  out << j.dump(2) << '\n';
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt) {
  json header;
  header["kind"] = to_string(ckpt.net.arch.kind);
  header["schema_version"] = kSchemaVersion;
  header["architecture"] = arch_json(ckpt.net.arch);
  header["normalization"] = {{"mean", ckpt.net.norm.mean}, {"scale", ckpt.net.norm.scale}};
  header["hyper"] = hyper_json(ckpt.hyper);
  header["train_loss"] = ckpt.train_loss;
  header["val_ie"] = ckpt.val_ie;
  header["best_epoch"] = ckpt.best_epoch;
  header["aborted"] = ckpt.aborted;
  header["diagnostic"] = ckpt.diagnostic;
  std::vector<Block> blocks;
  for (const auto& ref : ckpt.net.blocks()) blocks.push_back({ref.name, ref.value});
  write_container(path, header, blocks);
  write_sidecar(path, {{"kind", header["kind"]},
                       {"architecture", header["architecture"]},
                       {"hyper", header["hyper"]},
                       {"best_epoch", ckpt.best_epoch},
                       {"epochs_run", ckpt.train_loss.size()}});
}

ModelCheckpoint load_checkpoint(const std::string& path) {
  Container c = read_container(path);
  ModelCheckpoint ckpt;
  try {
    if (c.header.at("kind").get<std::string>() == "svr") throw InputError(path + " holds an SVR model");
    const ArchitectureSpec arch = arch_from_json(c.header.at("architecture"));
    ckpt.net = Network::create(arch, 0);
    ckpt.net.norm.mean = c.header.at("normalization").at("mean").get<std::array<double, StateVec::kDim>>();
    ckpt.net.norm.scale = c.header.at("normalization").at("scale").get<std::array<double, StateVec::kDim>>();
    ckpt.hyper = hyper_from_json(c.header.at("hyper"));
    ckpt.train_loss = c.header.at("train_loss").get<std::vector<double>>();
    ckpt.val_ie = c.header.at("val_ie").get<std::vector<double>>();
    ckpt.best_epoch = c.header.at("best_epoch").get<int>();
    ckpt.aborted = c.header.at("aborted").get<bool>();
    ckpt.diagnostic = c.header.at("diagnostic").get<std::string>();
  } catch (const json::exception& e) {
    throw InputError("malformed checkpoint header in " + path + ": " + e.what());
  }
  for (auto& ref : ckpt.net.blocks()) {
    auto it = c.blocks.find(ref.name);
    if (it == c.blocks.end()) throw InputError("checkpoint lacks parameter block " + ref.name);
    if (it->second.rows() != ref.value->rows() || it->second.cols() != ref.value->cols())
      throw InputError("parameter block " + ref.name + " has the wrong shape");
    *ref.value = std::move(it->second);
  }
  return ckpt;
}

void save_svr_checkpoint(const std::string& path, const SvrModel& model, const SvrTrainOptions& options) {
  if (!model.trained) throw InputError("SVR model is not trained");
  const int dim = static_cast<int>(model.feature_mean.size());
  Matrix mean(1, dim), scale(1, dim), weights(3, dim), bias(3, 1);
  for (int i = 0; i < dim; ++i) {
    mean(0, i) = model.feature_mean[static_cast<std::size_t>(i)];
    scale(0, i) = model.feature_scale[static_cast<std::size_t>(i)];
  }
  for (int a = 0; a < 3; ++a) {
    const auto& out = model.outputs[static_cast<std::size_t>(a)];
    for (int i = 0; i < dim; ++i) weights(a, i) = out.weights[static_cast<std::size_t>(i)];
    bias(a, 0) = out.bias;
  }
  json opts = {{"epsilon", options.epsilon}, {"lambda", options.lambda}, {"epochs", options.epochs},
               {"batch", options.batch},     {"step", options.step},     {"seed", options.seed}};
  json header = {{"kind", "svr"},
                 {"schema_version", kSchemaVersion},
                 {"history_length", model.history_length},
                 {"epsilon", model.epsilon},
                 {"lambda", model.lambda},
                 {"hyper", opts}};
  write_container(path, header, {{"feature_mean", &mean}, {"feature_scale", &scale}, {"weights", &weights}, {"bias", &bias}});
  write_sidecar(path, {{"kind", "svr"}, {"history_length", model.history_length}, {"hyper", opts}});
}

SvrModel load_svr_checkpoint(const std::string& path) {
  const Container c = read_container(path);
  SvrModel model;
  try {
    if (c.header.at("kind").get<std::string>() != "svr") throw InputError(path + " does not hold an SVR model");
    model.history_length = c.header.at("history_length").get<int>();
    model.epsilon = c.header.at("epsilon").get<double>();
    model.lambda = c.header.at("lambda").get<double>();
  } catch (const json::exception& e) {
    throw InputError("malformed checkpoint header in " + path + ": " + e.what());
  }
  const auto get = [&](const std::string& name) -> const Matrix& {
    auto it = c.blocks.find(name);
    if (it == c.blocks.end()) throw InputError("checkpoint lacks parameter block " + name);
    return it->second;
  };
  const Matrix& mean = get("feature_mean");
  const Matrix& scale = get("feature_scale");
  const Matrix& weights = get("weights");
  const Matrix& bias = get("bias");
  const int dim = mean.cols();
  if (scale.cols() != dim || weights.rows() != 3 || weights.cols() != dim || bias.rows() != 3)
    throw InputError("SVR parameter blocks have inconsistent shapes");
  model.feature_mean.assign(mean.values().begin(), mean.values().end());
  model.feature_scale.assign(scale.values().begin(), scale.values().end());
  for (int a = 0; a < 3; ++a) {
    auto& out = model.outputs[static_cast<std::size_t>(a)];
    out.weights.resize(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) out.weights[static_cast<std::size_t>(i)] = weights(a, i);
    out.bias = bias(a, 0);
  }
  model.trained = true;
  return model;
}

std::string checkpoint_kind(const std::string& path) {
  return read_container(path).header.at("kind").get<std::string>();
}

}  // namespace skycatch

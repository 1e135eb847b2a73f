#include "stlf/neural.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "stlf/error.hpp"
#include "stlf/rng.hpp"

namespace stlf::neural {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using features::FeatureWindow;

namespace {

MatrixXd sigmoid(const MatrixXd& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

struct LayerCache {
  std::vector<MatrixXd> h;      // n + 1 states, h[0] = 0
  std::vector<MatrixXd> c;      // LSTM cell states, c[0] = 0
  std::vector<MatrixXd> gates;  // activated gate blocks per step
};

struct Cache {
  std::vector<MatrixXd> inputs;
  std::vector<LayerCache> layers;
  std::vector<MatrixXd> dense_act;  // dense_act[k] feeds dense layer k; back() is the output

  /// Input of recurrent layer l at step t.
  [[nodiscard]] const MatrixXd& layer_input(std::size_t l, std::size_t t) const {
    return l == 0 ? inputs[t] : layers[l - 1].h[t + 1];
  }
};

void check_input(std::span<const FeatureWindow* const> windows, const Model& model) {
  if (windows.empty()) throw DataError("empty batch");
  const Index cols = windows.front()->matrix.cols();
  for (const auto* w : windows) {
    if (w->matrix.rows() != model.config.input_dim) {
      throw DataError("window has " + std::to_string(w->matrix.rows()) + " feature rows, model expects " +
                      std::to_string(model.config.input_dim));
    }
    if (w->matrix.cols() != cols) throw DataError("batch windows differ in length");
  }
  if (cols < 1) throw DataError("window has no columns");
}

void gru_step(const RecurrentLayer& p, const MatrixXd& x, const MatrixXd& hp, MatrixXd& gates, MatrixXd& h) {
  const Index H = p.hidden();
  MatrixXd wx = p.W * x;
  wx.colwise() += p.b;
  const MatrixXd uzr = p.U.topRows(2 * H) * hp;
  gates.resize(3 * H, x.cols());
  gates.topRows(2 * H) = sigmoid(wx.topRows(2 * H) + uzr);
  const MatrixXd rh = (gates.middleRows(H, H).array() * hp.array()).matrix();
  gates.bottomRows(H) = (wx.bottomRows(H) + p.U.bottomRows(H) * rh).array().tanh().matrix();
  const auto z = gates.topRows(H).array();
  h = ((1.0 - z) * hp.array() + z * gates.bottomRows(H).array()).matrix();
}

void lstm_step(const RecurrentLayer& p, const MatrixXd& x, const MatrixXd& hp, const MatrixXd& cp, MatrixXd& gates,
               MatrixXd& h, MatrixXd& c) {
  const Index H = p.hidden();
  MatrixXd a = p.W * x + p.U * hp;
  a.colwise() += p.b;
  gates.resize(4 * H, x.cols());
  gates.topRows(3 * H) = sigmoid(a.topRows(3 * H));
  gates.bottomRows(H) = a.bottomRows(H).array().tanh().matrix();
  c = (gates.middleRows(H, H).array() * cp.array() + gates.topRows(H).array() * gates.bottomRows(H).array()).matrix();
  h = (gates.middleRows(2 * H, H).array() * c.array().tanh()).matrix();
}

Cache run_forward(std::span<const FeatureWindow* const> windows, const Model& model) {
  check_input(windows, model);
  const Index B = static_cast<Index>(windows.size());
  const auto n = static_cast<std::size_t>(windows.front()->matrix.cols());
  Cache cache;
  cache.inputs.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    MatrixXd& x = cache.inputs[t];
    x.resize(model.config.input_dim, B);
    for (Index b = 0; b < B; ++b) x.col(b) = windows[static_cast<std::size_t>(b)]->matrix.col(static_cast<Index>(t));
  }
  const bool lstm = model.config.cell == CellKind::LSTM;
  cache.layers.resize(model.params.recurrent.size());
  for (std::size_t l = 0; l < model.params.recurrent.size(); ++l) {
    const auto& p = model.params.recurrent[l];
    auto& lc = cache.layers[l];
    lc.h.assign(n + 1, MatrixXd::Zero(p.hidden(), B));
    lc.gates.resize(n);
    if (lstm) lc.c.assign(n + 1, MatrixXd::Zero(p.hidden(), B));
    for (std::size_t t = 0; t < n; ++t) {
      const MatrixXd& x = cache.layer_input(l, t);
      if (lstm) {
        lstm_step(p, x, lc.h[t], lc.c[t], lc.gates[t], lc.h[t + 1], lc.c[t + 1]);
      } else {
        gru_step(p, x, lc.h[t], lc.gates[t], lc.h[t + 1]);
      }
    }
  }
  cache.dense_act.push_back(cache.layers.back().h.back());
  for (std::size_t k = 0; k < model.params.dense.size(); ++k) {
    const auto& d = model.params.dense[k];
    MatrixXd z = d.W * cache.dense_act.back();
    z.colwise() += d.b;
    if (k + 1 < model.params.dense.size()) z = z.array().tanh().matrix();
    cache.dense_act.push_back(std::move(z));
  }
  return cache;
}

/// Backpropagates dL/d(output) (1 x B) through the dense head and the recurrent stack.
void run_backward(const Cache& cache, const Model& model, const MatrixXd& d_out, Parameters& g) {
  // dense head
  MatrixXd delta = d_out;
  for (std::size_t k = model.params.dense.size(); k-- > 0;) {
    const auto& d = model.params.dense[k];
    const MatrixXd& in = cache.dense_act[k];
    g.dense[k].W.noalias() += delta * in.transpose();
    g.dense[k].b += delta.rowwise().sum();
    MatrixXd d_in = d.W.transpose() * delta;
    if (k > 0) d_in = (d_in.array() * (1.0 - in.array().square())).matrix();
    delta = std::move(d_in);
  }

  const bool lstm = model.config.cell == CellKind::LSTM;
  const std::size_t n = cache.inputs.size();
  const Index B = d_out.cols();
  // gradient flowing into each step's hidden state from the layer above
  std::vector<MatrixXd> from_above;
  for (std::size_t l = model.params.recurrent.size(); l-- > 0;) {
    const auto& p = model.params.recurrent[l];
    const auto& lc = cache.layers[l];
    auto& gl = g.recurrent[l];
    const Index H = p.hidden();
    std::vector<MatrixXd> to_below(l > 0 ? n : 0);
    MatrixXd dh = MatrixXd::Zero(H, B);
    MatrixXd dc = MatrixXd::Zero(H, B);
    for (std::size_t t = n; t-- > 0;) {
      if (l + 1 == model.params.recurrent.size()) {
        if (t + 1 == n) dh += delta;
      } else {
        dh += from_above[t];
      }
      const MatrixXd& x = cache.layer_input(l, t);
      const MatrixXd& hp = lc.h[t];
      const MatrixXd& gates = lc.gates[t];
      MatrixXd da(gates.rows(), B);
      MatrixXd dhp;
      if (lstm) {
        const auto i = gates.topRows(H).array();
        const auto f = gates.middleRows(H, H).array();
        const auto o = gates.middleRows(2 * H, H).array();
        const auto gg = gates.bottomRows(H).array();
        const Eigen::ArrayXXd tc = lc.c[t + 1].array().tanh();
        const Eigen::ArrayXXd dct = dc.array() + dh.array() * o * (1.0 - tc.square());
        da.topRows(H) = (dct * gg * i * (1.0 - i)).matrix();
        da.middleRows(H, H) = (dct * lc.c[t].array() * f * (1.0 - f)).matrix();
        da.middleRows(2 * H, H) = (dh.array() * tc * o * (1.0 - o)).matrix();
        da.bottomRows(H) = (dct * i * (1.0 - gg.square())).matrix();
        dc = (dct * f).matrix();
        gl.U.noalias() += da * hp.transpose();
        dhp = p.U.transpose() * da;
      } else {
        const auto z = gates.topRows(H).array();
        const auto r = gates.middleRows(H, H).array();
        const auto cand = gates.bottomRows(H).array();
        const Eigen::ArrayXXd dz = dh.array() * (cand - hp.array());
        const Eigen::ArrayXXd dac = dh.array() * z * (1.0 - cand.square());
        dhp = (dh.array() * (1.0 - z)).matrix();
        const MatrixXd rh = (r * hp.array()).matrix();
        gl.U.bottomRows(H).noalias() += dac.matrix() * rh.transpose();
        const Eigen::ArrayXXd drh = (p.U.bottomRows(H).transpose() * dac.matrix()).array();
        dhp += (drh * r).matrix();
        da.topRows(H) = (dz * z * (1.0 - z)).matrix();
        da.middleRows(H, H) = (drh * hp.array() * r * (1.0 - r)).matrix();
        da.bottomRows(H) = dac.matrix();
        gl.U.topRows(2 * H).noalias() += da.topRows(2 * H) * hp.transpose();
        dhp.noalias() += p.U.topRows(2 * H).transpose() * da.topRows(2 * H);
      }
      gl.W.noalias() += da * x.transpose();
      gl.b += da.rowwise().sum();
      if (l > 0) to_below[t] = p.W.transpose() * da;
      dh = std::move(dhp);
    }
    from_above = std::move(to_below);
  }
}

std::vector<const FeatureWindow*> pointers(std::span<const FeatureWindow> windows) {
  std::vector<const FeatureWindow*> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(&w);
  return out;
}

}  // namespace

std::string to_string(CellKind kind) { return kind == CellKind::GRU ? "gru" : "lstm"; }

CellKind parse_cell_kind(const std::string& text) {
  if (text == "gru") return CellKind::GRU;
  if (text == "lstm") return CellKind::LSTM;
  throw ConfigError("unknown cell kind '" + text + "' (expected gru|lstm)");
}

int gate_count(CellKind kind) { return kind == CellKind::GRU ? 3 : 4; }

void ModelConfig::validate() const {
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  if (layer_sizes.empty()) throw ConfigError("layer_sizes must not be empty");
  for (int s : layer_sizes) {
    if (s < 1) throw ConfigError("layer_sizes entries must be >= 1");
  }
  if (dense_sizes.empty() || dense_sizes.back() != 1) throw ConfigError("dense_sizes must end with 1");
  for (int s : dense_sizes) {
    if (s < 1) throw ConfigError("dense_sizes entries must be >= 1");
  }
}

std::size_t Parameters::size() const {
  std::size_t n = 0;
  for (const auto& r : recurrent) n += static_cast<std::size_t>(r.W.size() + r.U.size() + r.b.size());
  for (const auto& d : dense) n += static_cast<std::size_t>(d.W.size() + d.b.size());
  return n;
}

VectorXd Parameters::flatten() const {
  VectorXd flat(static_cast<Index>(size()));
  Index off = 0;
  auto put = [&](const auto& m) {
    flat.segment(off, m.size()) = Eigen::Map<const VectorXd>(m.data(), m.size());
    off += m.size();
  };
  for (const auto& r : recurrent) {
    put(r.W);
    put(r.U);
    put(r.b);
  }
  for (const auto& d : dense) {
    put(d.W);
    put(d.b);
  }
  return flat;
}

void Parameters::assign(const VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != size()) throw DataError("parameter vector size mismatch");
  Index off = 0;
  auto get = [&](auto& m) {
    Eigen::Map<VectorXd>(m.data(), m.size()) = flat.segment(off, m.size());
    off += m.size();
  };
  for (auto& r : recurrent) {
    get(r.W);
    get(r.U);
    get(r.b);
  }
  for (auto& d : dense) {
    get(d.W);
    get(d.b);
  }
}

Parameters Parameters::zeros_like() const {
  Parameters z;
  for (const auto& r : recurrent) {
    z.recurrent.push_back({MatrixXd::Zero(r.W.rows(), r.W.cols()), MatrixXd::Zero(r.U.rows(), r.U.cols()),
                           VectorXd::Zero(r.b.size())});
  }
  for (const auto& d : dense) z.dense.push_back({MatrixXd::Zero(d.W.rows(), d.W.cols()), VectorXd::Zero(d.b.size())});
  return z;
}

bool Parameters::all_finite() const { return flatten().allFinite(); }

VectorXd gru_cell_forward(const VectorXd& x, const VectorXd& h_prev, const GruCellParams& p) {
  const Index H = h_prev.size();
  if (p.U.rows() != 3 * H || p.U.cols() != H || p.W.rows() != 3 * H || p.W.cols() != x.size() || p.b.size() != 3 * H) {
    throw DataError("gru_cell_forward: shape mismatch");
  }
  MatrixXd gates, h;
  gru_step(p, x, h_prev, gates, h);
  return h.col(0);
}

std::pair<VectorXd, VectorXd> lstm_cell_forward(const VectorXd& x, const VectorXd& h_prev, const VectorXd& c_prev,
                                                const LstmCellParams& p) {
  const Index H = h_prev.size();
  if (c_prev.size() != H || p.U.rows() != 4 * H || p.U.cols() != H || p.W.rows() != 4 * H || p.W.cols() != x.size() ||
      p.b.size() != 4 * H) {
    throw DataError("lstm_cell_forward: shape mismatch");
  }
  MatrixXd gates, h, c;
  lstm_step(p, x, h_prev, c_prev, gates, h, c);
  return {h.col(0), c.col(0)};
}

Model init_model(const ModelConfig& config) {
  config.validate();
  Rng rng(config.seed);
  auto uniform = [&](Index rows, Index cols, Index fan_in) {
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    MatrixXd m(rows, cols);
    // column-major fill order is part of the reproducibility contract
    for (Index j = 0; j < cols; ++j) {
      for (Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-a, a);
    }
    return m;
  };
  Model model;
  model.config = config;
  const Index gates = gate_count(config.cell);
  Index in = config.input_dim;
  for (int hs : config.layer_sizes) {
    const Index H = hs;
    RecurrentLayer layer;
    layer.W = uniform(gates * H, in, in);
    layer.U = uniform(gates * H, H, H);
    layer.b = VectorXd::Zero(gates * H);
    if (config.cell == CellKind::LSTM) layer.b.segment(H, H).setOnes();
    model.params.recurrent.push_back(std::move(layer));
    in = H;
  }
  for (int ds : config.dense_sizes) {
    DenseLayer d;
    d.W = uniform(ds, in, in);
    d.b = VectorXd::Zero(ds);
    model.params.dense.push_back(std::move(d));
    in = ds;
  }
  return model;
}

VectorXd forward_batch(std::span<const FeatureWindow* const> windows, const Model& model) {
  const Cache cache = run_forward(windows, model);
  return cache.dense_act.back().row(0).transpose();
}

double model_forward(const FeatureWindow& window, const Model& model) {
  const FeatureWindow* p = &window;
  return forward_batch(std::span<const FeatureWindow* const>(&p, 1), model)(0);
}

GradientResult compute_gradients(std::span<const FeatureWindow* const> batch, const Model& model) {
  const Cache cache = run_forward(batch, model);
  const auto& out = cache.dense_act.back();
  const Index B = out.cols();
  MatrixXd resid(1, B);
  for (Index b = 0; b < B; ++b) resid(0, b) = out(0, b) - batch[static_cast<std::size_t>(b)]->target;
  GradientResult result;
  result.loss = resid.squaredNorm() / static_cast<double>(B);
  if (!std::isfinite(result.loss)) {
    Index bad = 0;
    while (bad < B && std::isfinite(resid(0, bad))) ++bad;
    throw DivergenceError("non-finite loss at batch window " + std::to_string(bad));
  }
  result.grads = model.params.zeros_like();
  run_backward(cache, model, resid * (2.0 / static_cast<double>(B)), result.grads);
  return result;
}

GradientResult compute_gradients(std::span<const FeatureWindow> batch, const Model& model) {
  const auto ptrs = pointers(batch);
  return compute_gradients(std::span<const FeatureWindow* const>(ptrs), model);
}

double clip_global_norm(VectorXd& g, double max_norm) {
  const double norm = g.norm();
  if (norm > max_norm && norm > 0.0) g *= max_norm / norm;
  return norm;
}

void adam_step(Parameters& params, const Parameters& grads, AdamState& state, const AdamConfig& config) {
  VectorXd g = grads.flatten();
  VectorXd theta = params.flatten();
  if (state.m.size() == 0 && state.v.size() == 0) {
    state.m = VectorXd::Zero(theta.size());
    state.v = VectorXd::Zero(theta.size());
  }
  if (state.m.size() != theta.size() || state.v.size() != theta.size() || g.size() != theta.size()) {
    throw DataError("adam state does not match parameter shapes");
  }
  if (config.clip_norm > 0.0) clip_global_norm(g, config.clip_norm);
  ++state.step;
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * g;
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * g.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  const Eigen::ArrayXd mhat = state.m.array() / bc1;
  const Eigen::ArrayXd vhat = state.v.array() / bc2;
  theta.array() -= config.learning_rate * mhat / (vhat.sqrt() + config.epsilon);
  params.assign(theta);
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (!(adam.clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
}

TrainedModel train(const features::Dataset& data, const TrainConfig& config, const ModelConfig& model_config) {
  config.validate();
  if (data.windows.empty()) throw DataError("training set is empty");
  if (model_config.input_dim != data.windows.front().matrix.rows()) {
    throw ConfigError("model.input_dim (" + std::to_string(model_config.input_dim) + ") does not match window rows (" +
                      std::to_string(data.windows.front().matrix.rows()) + ")");
  }
  TrainedModel trained;
  trained.model = init_model(model_config);
  trained.scaler = data.scaler;
  trained.window = data.spec;
  Rng rng(config.shuffle_seed);
  AdamState state;
  std::vector<std::size_t> order(data.windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto bs = static_cast<std::size_t>(config.batch_size);
  std::vector<const FeatureWindow*> batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += bs, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + bs);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&data.windows[order[i]]);
      GradientResult gr;
      try {
        gr = compute_gradients(std::span<const FeatureWindow* const>(batch), trained.model);
      } catch (const DivergenceError& e) {
        throw DivergenceError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index) + ": " +
                              e.what());
      }
      adam_step(trained.model.params, gr.grads, state, config.adam);
      if (!trained.model.params.all_finite()) {
        throw DivergenceError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index) +
                              ": non-finite parameters after update");
      }
      total += gr.loss * static_cast<double>(end - start);
    }
    trained.loss_trace.push_back(total / static_cast<double>(order.size()));
  }
  return trained;
}

std::vector<double> predict(const TrainedModel& model, std::span<const FeatureWindow> windows) {
  std::vector<double> out;
  out.reserve(windows.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < windows.size(); start += kChunk) {
    const auto chunk = windows.subspan(start, std::min(kChunk, windows.size() - start));
    const auto ptrs = pointers(chunk);
    const VectorXd s = forward_batch(std::span<const FeatureWindow* const>(ptrs), model.model);
    for (Index i = 0; i < s.size(); ++i) out.push_back(model.scaler.unscale_target(s(i)));
  }
  return out;
}

std::vector<double> predict(const TrainedModel& model, const features::Dataset& data) {
  if (!(data.scaler == model.scaler)) throw DataError("dataset was scaled with a different scaler than the model");
  return predict(model, std::span<const FeatureWindow>(data.windows));
}

}  // namespace stlf::neural

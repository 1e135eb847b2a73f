#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stlf/features.hpp"

namespace stlf::neural {

enum class CellKind { GRU, LSTM };

[[nodiscard]] std::string to_string(CellKind kind);
[[nodiscard]] CellKind parse_cell_kind(const std::string& text);
/// Gate blocks per cell: 3 for GRU (z, r, candidate), 4 for LSTM (i, f, o, g).
[[nodiscard]] int gate_count(CellKind kind);

struct ModelConfig {
  CellKind cell{CellKind::GRU};
  std::vector<int> layer_sizes{64, 64, 64};
  /// Hidden dense layers use tanh; the last entry must be 1 and is linear.
  std::vector<int> dense_sizes{16, 1};
  int input_dim{1};
  std::uint64_t seed{1};

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Weights of one recurrent layer with gate blocks stacked along rows.
/// GRU rows: [z; r; candidate], LSTM rows: [i; f; o; g]. W is (gates*H x in),
/// U is (gates*H x H), b has gates*H entries.
struct RecurrentLayer {
  Eigen::MatrixXd W;
  Eigen::MatrixXd U;
  Eigen::VectorXd b;

  [[nodiscard]] Eigen::Index hidden() const { return U.cols(); }
};

using GruCellParams = RecurrentLayer;
using LstmCellParams = RecurrentLayer;

struct DenseLayer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

struct Parameters {
  std::vector<RecurrentLayer> recurrent;
  std::vector<DenseLayer> dense;

  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] Eigen::VectorXd flatten() const;
  /// Overwrites every block from `flat`, which must have size() entries.
  void assign(const Eigen::VectorXd& flat);
  /// Zero-valued parameters with the same shapes.
  [[nodiscard]] Parameters zeros_like() const;
  [[nodiscard]] bool all_finite() const;
};

/// One GRU step: z = s(Wz x + Uz h + bz), r = s(Wr x + Ur h + br),
/// c = tanh(Wc x + Uc (r * h) + bc), h' = (1 - z) * h + z * c.
[[nodiscard]] Eigen::VectorXd gru_cell_forward(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                                               const GruCellParams& p);

/// One LSTM step without peepholes: c' = f * c + i * g, h' = o * tanh(c').
[[nodiscard]] std::pair<Eigen::VectorXd, Eigen::VectorXd> lstm_cell_forward(const Eigen::VectorXd& x,
                                                                            const Eigen::VectorXd& h_prev,
                                                                            const Eigen::VectorXd& c_prev,
                                                                            const LstmCellParams& p);

struct Model {
  ModelConfig config;
  Parameters params;
};

/// Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, LSTM forget bias 1.
[[nodiscard]] Model init_model(const ModelConfig& config);

/// Scaled prediction for one window; columns are fed to the stack oldest first.
[[nodiscard]] double model_forward(const features::FeatureWindow& window, const Model& model);
/// Scaled predictions for a batch, in input order.
[[nodiscard]] Eigen::VectorXd forward_batch(std::span<const features::FeatureWindow* const> windows,
                                            const Model& model);

struct GradientResult {
  Parameters grads;
  /// Mean squared error over the batch on scaled targets.
  double loss{0.0};
};

/// Backpropagation through time for the batch-mean squared error.
/// Throws DivergenceError naming the first window with a non-finite prediction.
[[nodiscard]] GradientResult compute_gradients(std::span<const features::FeatureWindow* const> batch,
                                               const Model& model);
[[nodiscard]] GradientResult compute_gradients(std::span<const features::FeatureWindow> batch, const Model& model);

struct AdamConfig {
  double learning_rate{1e-3};
  double beta1{0.9};
  double beta2{0.999};
  double epsilon{1e-8};
  double clip_norm{5.0};
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step{0};
};

/// Scales `g` in place so its L2 norm is at most `max_norm`; returns the original norm.
double clip_global_norm(Eigen::VectorXd& g, double max_norm);

/// One bias-corrected Adam update after global-norm clipping. A default-constructed
/// state is sized on first use.
void adam_step(Parameters& params, const Parameters& grads, AdamState& state, const AdamConfig& config);

struct TrainConfig {
  int epochs{100};
  int batch_size{64};
  AdamConfig adam;
  std::uint64_t shuffle_seed{7};

  void validate() const;
};

struct TrainedModel {
  Model model;
  features::Scaler scaler;
  /// Mean training loss per epoch, measured before each batch's update.
  std::vector<double> loss_trace;
  std::optional<features::WindowSpec> window;
};

/// Trains on `train` only. Throws DivergenceError on a non-finite loss with the
/// epoch and batch index.
[[nodiscard]] TrainedModel train(const features::Dataset& train, const TrainConfig& config,
                                 const ModelConfig& model_config);

/// Unscaled (MW) predictions, one per window in order. Throws DataError when the
/// dataset was scaled with a different scaler.
[[nodiscard]] std::vector<double> predict(const TrainedModel& model, const features::Dataset& data);
[[nodiscard]] std::vector<double> predict(const TrainedModel& model, std::span<const features::FeatureWindow> windows);

void save_checkpoint(std::ostream& out, const TrainedModel& model);
void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model);
[[nodiscard]] TrainedModel load_checkpoint(std::istream& in);
[[nodiscard]] TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace stlf::neural

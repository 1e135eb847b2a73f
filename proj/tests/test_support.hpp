#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "stlf/features.hpp"
#include "stlf/ingest.hpp"
#include "stlf/neural.hpp"
#include "stlf/rng.hpp"

namespace stlf::test {

inline ingest::LoadSeries load_from(Instant start, const std::vector<double>& v, const std::string& id = "s") {
  ingest::LoadSeries s;
  s.station_id = id;
  for (std::size_t i = 0; i < v.size(); ++i) s.points.push_back({start.plus_steps(static_cast<std::int64_t>(i)), v[i]});
  return s;
}

inline ingest::TempSeries temp_from(Instant start, const std::vector<double>& v) {
  ingest::TempSeries s;
  for (std::size_t i = 0; i < v.size(); ++i) s.points.push_back({start.plus_steps(static_cast<std::int64_t>(i)), v[i]});
  return s;
}

inline std::vector<features::FeatureWindow> random_windows(Rng& rng, int count, int rows, int cols) {
  std::vector<features::FeatureWindow> out;
  for (int i = 0; i < count; ++i) {
    features::FeatureWindow w;
    w.matrix.resize(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) w.matrix(r, c) = rng.uniform(-1.0, 1.0);
    }
    w.target = rng.uniform(-0.5, 0.5);
    out.push_back(std::move(w));
  }
  return out;
}

/// Randomises every parameter (biases included) in [-scale, scale].
inline void randomize(neural::Parameters& p, Rng& rng, double scale) {
  Eigen::VectorXd flat = p.flatten();
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) = rng.uniform(-scale, scale);
  p.assign(flat);
}

struct GradCheck {
  double max_violation{0.0};  // max of |a - n| / tolerance(a, n); <= 1 passes
  std::size_t checked{0};
};

/// Central finite differences against the analytic BPTT gradient of the batch MSE.
inline GradCheck finite_difference_check(const neural::Model& model, std::span<const features::FeatureWindow> batch,
                                         double step = 1e-5, double rel = 1e-4, double abs_floor = 1e-6) {
  const auto analytic = neural::compute_gradients(batch, model).grads.flatten();
  auto loss_at = [&](const Eigen::VectorXd& theta) {
    neural::Model m = model;
    m.params.assign(theta);
    double s = 0.0;
    for (const auto& w : batch) {
      const double e = neural::model_forward(w, m) - w.target;
      s += e * e;
    }
    return s / static_cast<double>(batch.size());
  };
  const Eigen::VectorXd theta = model.params.flatten();
  GradCheck out;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd plus = theta, minus = theta;
    plus(i) += step;
    minus(i) -= step;
    const double numeric = (loss_at(plus) - loss_at(minus)) / (2.0 * step);
    const double a = analytic(i);
    const double tol = std::max(abs_floor, rel * std::max(std::abs(a), std::abs(numeric)));
    out.max_violation = std::max(out.max_violation, std::abs(a - numeric) / tol);
    ++out.checked;
  }
  return out;
}

}  // namespace stlf::test

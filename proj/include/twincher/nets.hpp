#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "twincher/rng.hpp"
#include "twincher/types.hpp"

namespace twincher {

/// Dense tanh network with a scaled tanh output: out = out_scale * tanh(W_L h + b_L).
class Mlp {
 public:
  /// Weights and biases ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)), drawn layer by
  /// layer (weights row-major, then biases) from the kMlpInit stream of `seed`.
  Mlp(std::uint64_t seed, std::vector<int> widths, double out_scale);

  const std::vector<int>& widths() const { return widths_; }
  int n_in() const { return widths_.front(); }
  int n_out() const { return widths_.back(); }
  double out_scale() const { return out_scale_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(theta_.size()); }
  const Vec& theta() const { return theta_; }
  void set_theta(const Vec& theta);

  Vec forward(const Vec& x) const;
  /// Samples as rows: (N x n_in) -> (N x n_out).
  Mat forward_batch(const Mat& inputs) const;

  struct Gradients {
    Vec theta;
    Vec x;
  };
  /// Gradients of <upstream, forward(x)>.
  Gradients backprop(const Vec& x, const Vec& upstream) const;

  /// Mean over samples and outputs of squared error; gradient added to *grad when given.
  double mse(const Mat& inputs, const Mat& targets, Vec* grad = nullptr) const;

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& doc);

 private:
  struct Layer {
    int in, out;
    int w, b;  // theta offsets
  };
  std::vector<int> widths_;
  double out_scale_;
  std::vector<Layer> layers_;
  Vec theta_;
};

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Vec m;
  Vec v;
  std::int64_t t = 0;
};

/// One bias-corrected Adam update. Moments are allocated on first use.
Vec adam_step(AdamState& state, const Vec& theta, const Vec& grad);

struct SupervisedOptions {
  int max_epochs = 1000;
  int patience = 10;
  double val_fraction = 0.1;
  int min_samples_for_split = 20;
  double lr = 1e-3;
  // Shuffled minibatches per epoch; 0 = full batch.
  int batch_size = 32;
};

struct SupervisedResult {
  std::vector<double> train_loss;
  std::vector<double> val_loss;  // empty without a validation split
  int epochs_run = 0;
  int best_epoch = -1;
  bool early_stopped = false;
};

/// MSE regression with Adam. With N >= min_samples_for_split a seeded
/// validation split is held out and the best-validation parameters are kept.
SupervisedResult train_supervised(Mlp& net, const Mat& inputs, const Mat& targets, const SupervisedOptions& opts,
                                  CounterRng& rng);

}  // namespace twincher

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "twincher/types.hpp"

namespace twincher {

/// Latent split of a transformed observation.
struct LatentPair {
  Vec u;  // distilled coordinates, length n_p
  Vec h;  // residual coordinates, length n_y - n_p
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class MalformedDocumentError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class VersionMismatchError : public CheckpointError {
 public:
  VersionMismatchError(int found, int expected)
      : CheckpointError("checkpoint format_version " + std::to_string(found) + " does not match supported version " +
                        std::to_string(expected)),
        found_(found),
        expected_(expected) {}
  int found() const { return found_; }
  int expected() const { return expected_; }

 private:
  int found_;
  int expected_;
};
class DimensionMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// Forward pass that carries tangent vectors alongside the state, so that
/// Jacobian-vector products (and their parameter gradients) are available.
struct TangentPass {
  struct LayerCache {
    Vec a, b;        // active / passive halves after mixing
    Vec th;          // tanh of the log-scale pre-activation
    Vec e;           // exp(log-scale)
    Vec g;           // tanh(a)
    Mat a_dot, b_dot;
    Mat pre_s_dot;   // W_s * a_dot
    Mat s_dot;       // tangent of the log-scale
  };
  Vec z;
  Mat z_dot;  // dz/dy * directions
  std::vector<LayerCache> layers;
};

/// Invertible map y -> z = (u, h): a stack of fixed orthogonal mixings each
/// followed by an affine coupling whose log-scale is tanh-bounded.
///
/// Per layer with active half a and passive half b:
///     s  = scale_bound * tanh(W_s a + c_s)
///     t  = W_t a + c_t + U_t tanh(F a + phi)
///     b' = b * exp(s) + t
/// With shift_features = 0, F is the identity and phi = 0. With k > 0 features,
/// F (k x |a|) and phi are drawn per layer from the architecture seed.
/// scale_bound = s_max * n_y / (sum of passive sizes over layers), so that
/// log|det dz/dy| >= -s_max * n_y for every parameter value.
class TwincherModel {
 public:
  static constexpr int kFormatVersion = 1;

  TwincherModel(std::uint64_t arch_seed, int n_y, int n_p, int n_layers, double s_max = 1.0,
                double init_scale = 0.01, int shift_features = 0);

  int n_y() const { return n_y_; }
  int n_p() const { return n_p_; }
  int n_h() const { return n_y_ - n_p_; }
  int n_layers() const { return static_cast<int>(layers_.size()); }
  double s_max() const { return s_max_; }
  int shift_features() const { return shift_features_; }
  double scale_bound() const { return scale_bound_; }
  std::uint64_t arch_seed() const { return arch_seed_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(theta_.size()); }

  const Vec& theta() const { return theta_; }
  void set_theta(const Vec& theta);
  const Mat& mixing(int layer) const { return layers_.at(layer).rotation; }

  Vec forward(const Vec& y) const;
  LatentPair transform(const Vec& y) const;
  Vec latent(const Vec& y) const { return forward(y).head(n_p_); }

  Vec inverse(const Vec& z) const;
  Vec inverse_transform(const Vec& u, const Vec& h) const;

  /// dz/dy, n_y x n_y.
  Mat jacobian(const Vec& y) const;
  /// log|det dz/dy|, exact (sum of log-scales).
  double log_abs_det(const Vec& y) const;

  struct Gradients {
    Vec theta;
    Vec y;
  };
  /// Gradients of <upstream, z(y)> with respect to theta and y.
  Gradients backprop(const Vec& y, const Vec& upstream) const;

  /// Forward pass propagating the columns of `directions` (n_y x m).
  TangentPass forward_tangent(const Vec& y, const Mat& directions) const;

  /// Reverse pass of forward_tangent for the scalar <gz, z> + <g_zdot, z_dot>.
  /// Adds into grad_theta; grad_y / grad_directions are optional outputs.
  void backprop_tangent(const TangentPass& pass, const Vec& gz, const Mat& g_zdot, Vec& grad_theta,
                        Vec* grad_y = nullptr, Mat* grad_directions = nullptr) const;

  nlohmann::json to_json() const;
  static TwincherModel from_json(const nlohmann::json& doc);

 private:
  struct Layer {
    Mat rotation;
    int a_off = 0, na = 0;
    int b_off = 0, nb = 0;
    // Offsets into theta.
    int ws = 0, cs = 0, wt = 0, ct = 0, ut = 0;
    int nk = 0;
    // Fixed shift features g = tanh(F a + phi).
    Mat feat_w;
    Vec feat_b;

    Vec features(const Vec& a) const { return (feat_w * a + feat_b).array().tanh(); }
  };

  void check_input(const Vec& v, const char* who) const;

  std::uint64_t arch_seed_;
  int n_y_;
  int n_p_;
  double s_max_;
  int shift_features_;
  double scale_bound_ = 0.0;
  std::vector<Layer> layers_;
  Vec theta_;
};

void checkpoint_save(const TwincherModel& model, const std::filesystem::path& path);
TwincherModel checkpoint_load(const std::filesystem::path& path);

}  // namespace twincher

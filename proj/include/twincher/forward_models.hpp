#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "twincher/rng.hpp"
#include "twincher/types.hpp"

namespace twincher {

/// Inputs may overshoot the unit box by this much. Forward-difference probes
/// step past the boundary by the finite-difference step.
inline constexpr double kBoxSlack = 1e-6;

double squash(double z);
double unsquash(double t);

/// out_j = (2 / n_s) * sum_k sin(W_jk x_k + B_jk), with n_s = 2 * x.size().
Vec harmonic_operator(const Mat& W, const Mat& B, const Vec& x);

/// Black-box map p -> y.
class ForwardProcess {
 public:
  virtual ~ForwardProcess() = default;
  virtual int n_p() const = 0;
  virtual int n_y() const = 0;
  virtual Vec evaluate(const Vec& p) const = 0;
};

/// Wraps a callable as a forward process.
class FunctionForward final : public ForwardProcess {
 public:
  FunctionForward(int n_p, int n_y, std::function<Vec(const Vec&)> fn)
      : n_p_(n_p), n_y_(n_y), fn_(std::move(fn)) {}
  int n_p() const override { return n_p_; }
  int n_y() const override { return n_y_; }
  Vec evaluate(const Vec& p) const override { return fn_(p); }

 private:
  int n_p_;
  int n_y_;
  std::function<Vec(const Vec&)> fn_;
};

/// Coefficients of the four harmonic operators of one entangler layer.
struct EntanglerLayer {
  // Order: sigma_y, tau_y, sigma_z, tau_z.
  std::array<Mat, 4> w;
  std::array<Mat, 4> b;
  // s_next[i] = z[perm[i]].
  std::vector<int> perm;
};

/// Seeded invertible synthetic forward process built from sinusoidal coupling
/// layers followed by a componentwise squash and a fixed permutation.
class HarmonicEntangler final : public ForwardProcess {
 public:
  static constexpr int kFormatVersion = 1;

  /// Coefficients derived from `seed` through the documented tag streams.
  HarmonicEntangler(std::uint64_t seed, int n_p, int n_s, int e_n, double w_amp);

  /// Explicit coefficients; used by tests and by the squash-only oracle.
  static HarmonicEntangler from_coefficients(int n_p, std::vector<EntanglerLayer> layers, Vec s_pad,
                                             double w_amp = 1.0);

  int n_p() const override { return n_p_; }
  int n_y() const override { return n_s_; }
  int n_s() const { return n_s_; }
  int e_n() const { return static_cast<int>(layers_.size()); }
  double w_amp() const { return w_amp_; }
  std::uint64_t seed() const { return seed_; }
  const Vec& s_pad() const { return s_pad_; }
  const std::vector<EntanglerLayer>& layers() const { return layers_; }

  /// p must lie in [-1, 1]^n_p (up to kBoxSlack).
  Vec evaluate(const Vec& p) const override;

  /// Exact inverse; throws DomainError if any |y_i| >= 1 and
  /// ImageMembershipError if the recovered padding differs from s_pad.
  Vec inverse(const Vec& y) const;

  /// Full state inverse without the padding check.
  Vec inverse_state(const Vec& y) const;

  nlohmann::json to_json() const;
  static HarmonicEntangler from_json(const nlohmann::json& doc);

 private:
  HarmonicEntangler() = default;

  std::uint64_t seed_ = 0;
  int n_p_ = 0;
  int n_s_ = 0;
  double w_amp_ = 0.0;
  Vec s_pad_;
  std::vector<EntanglerLayer> layers_;
};

/// One-dimensional parameter wound along a planar spiral.
class SpiralProcess final : public ForwardProcess {
 public:
  explicit SpiralProcess(double turns = 1.75 * std::numbers::pi, double r0 = 0.4, double r1 = 0.35);

  int n_p() const override { return 1; }
  int n_y() const override { return 2; }
  Vec evaluate(const Vec& p) const override;

  double turns() const { return turns_; }
  double r0() const { return r0_; }
  double r1() const { return r1_; }

 private:
  double turns_;
  double r0_;
  double r1_;
};

/// Additive uniform noise plus neighbor-displacement of coordinates.
class NoiseChannel {
 public:
  NoiseChannel(double amplitude, double swap_prob, std::uint64_t rng_seed);

  /// Each component is, with probability swap_prob, replaced by the value at
  /// index i-1 or i+1 (clamped) of the clean input, then receives
  /// U(-amplitude, amplitude). `swaps` counts displacement events.
  Vec apply(const Vec& y, std::size_t* swaps = nullptr);

  double amplitude() const { return amplitude_; }
  double swap_prob() const { return swap_prob_; }

 private:
  double amplitude_;
  double swap_prob_;
  CounterRng rng_;
};

inline Vec apply_noise(NoiseChannel& channel, const Vec& y) { return channel.apply(y); }

/// Counts forward evaluations against a fixed budget.
class QueryLedger {
 public:
  explicit QueryLedger(std::uint64_t budget) : budget_(budget) {}

  Vec query(const ForwardProcess& forward, const Vec& p);

  std::uint64_t budget() const { return budget_; }
  std::uint64_t used() const { return used_; }
  std::uint64_t remaining() const { return budget_ - used_; }
  bool exhausted() const { return used_ >= budget_; }

 private:
  std::uint64_t budget_;
  std::uint64_t used_ = 0;
};

inline Vec ledger_query(QueryLedger& ledger, const ForwardProcess& forward, const Vec& p) {
  return ledger.query(forward, p);
}

/// Throws ContractViolation unless every |p_i| <= 1 + kBoxSlack.
void require_in_box(const Vec& p, const char* who);

}  // namespace twincher

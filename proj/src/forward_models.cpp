#include "twincher/forward_models.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace twincher {

namespace {

constexpr int kOpSigmaY = 0;
constexpr int kOpTauY = 1;
constexpr int kOpSigmaZ = 2;
constexpr int kOpTauZ = 3;

void validate_dims(int n_p, int n_s, int e_n) {
  if (n_s <= 0 || n_s % 2 != 0) {
    throw ContractViolation("entangler: n_s must be positive and even, got " + std::to_string(n_s));
  }
  if (n_p < 1 || n_p > n_s) {
    throw ContractViolation("entangler: need 1 <= n_p <= n_s, got n_p = " + std::to_string(n_p));
  }
  if (e_n < 1) throw ContractViolation("entangler: e_n must be >= 1");
}

}  // namespace

double squash(double z) { return z / std::sqrt(1.0 + z * z); }

double unsquash(double t) {
  if (!(std::abs(t) < 1.0)) {
    throw DomainError("unsquash: |t| must be < 1, got " + std::to_string(t));
  }
  return t / std::sqrt(1.0 - t * t);
}

Vec harmonic_operator(const Mat& W, const Mat& B, const Vec& x) {
  const auto h = x.size();
  if (W.rows() != h || W.cols() != h || B.rows() != h || B.cols() != h) {
    throw ContractViolation("harmonic_operator: coefficient shape mismatch");
  }
  const double scale = 1.0 / static_cast<double>(h);  // 2 / n_s
  Vec out(h);
  for (Eigen::Index j = 0; j < h; ++j) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < h; ++k) acc += std::sin(W(j, k) * x(k) + B(j, k));
    out(j) = scale * acc;
  }
  return out;
}

void require_in_box(const Vec& p, const char* who) {
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p(i)) || std::abs(p(i)) > 1.0 + kBoxSlack) {
      std::ostringstream msg;
      msg << who << ": parameter component " << i << " = " << p(i) << " outside [-1, 1]";
      throw ContractViolation(msg.str());
    }
  }
}

// ---------------------------------------------------------------------------
// HarmonicEntangler

HarmonicEntangler::HarmonicEntangler(std::uint64_t seed, int n_p, int n_s, int e_n, double w_amp)
    : seed_(seed), n_p_(n_p), n_s_(n_s), w_amp_(w_amp) {
  validate_dims(n_p, n_s, e_n);
  if (!(w_amp > 0.0)) throw ContractViolation("entangler: w_amp must be > 0");

  const int h = n_s / 2;
  const double w_lim = std::numbers::pi * w_amp;
  const double b_lim = std::numbers::pi;

  auto pad_rng = CounterRng::from(seed, tags::kEntanglerPad);
  s_pad_.resize(n_s - n_p);
  for (Eigen::Index i = 0; i < s_pad_.size(); ++i) s_pad_(i) = pad_rng.uniform_open(-1.0, 1.0);

  layers_.resize(e_n);
  for (int l = 0; l < e_n; ++l) {
    auto& layer = layers_[l];
    for (int op = 0; op < 4; ++op) {
      const auto stream = static_cast<std::uint64_t>(l) * 4 + op;
      auto w_rng = CounterRng::from(seed, tags::kEntanglerW, stream);
      auto b_rng = CounterRng::from(seed, tags::kEntanglerB, stream);
      layer.w[op].resize(h, h);
      layer.b[op].resize(h, h);
      // Row-major draw order.
      for (int j = 0; j < h; ++j) {
        for (int k = 0; k < h; ++k) {
          layer.w[op](j, k) = w_rng.uniform_open(-w_lim, w_lim);
          layer.b[op](j, k) = b_rng.uniform_open(-b_lim, b_lim);
        }
      }
    }
    layer.perm.resize(n_s);
    std::iota(layer.perm.begin(), layer.perm.end(), 0);
    auto perm_rng = CounterRng::from(seed, tags::kEntanglerPerm, static_cast<std::uint64_t>(l));
    for (int i = n_s - 1; i > 0; --i) {
      const auto j = static_cast<int>(perm_rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(layer.perm[i], layer.perm[j]);
    }
  }
}

HarmonicEntangler HarmonicEntangler::from_coefficients(int n_p, std::vector<EntanglerLayer> layers,
                                                       Vec s_pad, double w_amp) {
  if (layers.empty()) throw ContractViolation("entangler: need at least one layer");
  const int n_s = static_cast<int>(layers.front().perm.size());
  validate_dims(n_p, n_s, static_cast<int>(layers.size()));
  if (s_pad.size() != n_s - n_p) throw ContractViolation("entangler: padding length mismatch");
  for (Eigen::Index i = 0; i < s_pad.size(); ++i) {
    if (!(std::abs(s_pad(i)) < 1.0)) throw ContractViolation("entangler: |s_pad| must be < 1");
  }
  const int h = n_s / 2;
  for (const auto& layer : layers) {
    if (static_cast<int>(layer.perm.size()) != n_s) throw ContractViolation("entangler: permutation size");
    std::vector<int> seen(n_s, 0);
    for (int v : layer.perm) {
      if (v < 0 || v >= n_s || seen[v]++) throw ContractViolation("entangler: not a permutation");
    }
    for (int op = 0; op < 4; ++op) {
      if (layer.w[op].rows() != h || layer.w[op].cols() != h || layer.b[op].rows() != h ||
          layer.b[op].cols() != h) {
        throw ContractViolation("entangler: coefficient shape mismatch");
      }
    }
  }
  HarmonicEntangler e;
  e.n_p_ = n_p;
  e.n_s_ = n_s;
  e.w_amp_ = w_amp;
  e.s_pad_ = std::move(s_pad);
  e.layers_ = std::move(layers);
  return e;
}

Vec HarmonicEntangler::evaluate(const Vec& p) const {
  if (p.size() != n_p_) throw ContractViolation("entangler_forward: dimension mismatch");
  require_in_box(p, "entangler_forward");

  const int h = n_s_ / 2;
  Vec s(n_s_);
  s << p, s_pad_;
  Vec z(n_s_);
  for (const auto& layer : layers_) {
    const Vec x1 = s.head(h);
    const Vec x2 = s.tail(h);
    const Vec y2 = x2.array() * harmonic_operator(layer.w[kOpSigmaY], layer.b[kOpSigmaY], x1).array().exp() +
                   harmonic_operator(layer.w[kOpTauY], layer.b[kOpTauY], x1).array();
    const Vec z1 = x1.array() * harmonic_operator(layer.w[kOpSigmaZ], layer.b[kOpSigmaZ], y2).array().exp() +
                   harmonic_operator(layer.w[kOpTauZ], layer.b[kOpTauZ], y2).array();
    z << z1, y2;
    for (int i = 0; i < n_s_; ++i) s(i) = squash(z(layer.perm[i]));
  }
  return s;
}

Vec HarmonicEntangler::inverse_state(const Vec& y) const {
  if (y.size() != n_s_) throw ContractViolation("entangler_inverse: dimension mismatch");
  const int h = n_s_ / 2;
  Vec s = y;
  Vec z(n_s_);
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    const auto& layer = *it;
    for (int i = 0; i < n_s_; ++i) z(layer.perm[i]) = unsquash(s(i));
    const Vec z1 = z.head(h);
    const Vec y2 = z.tail(h);
    const Vec x1 = (z1 - harmonic_operator(layer.w[kOpTauZ], layer.b[kOpTauZ], y2)).array() *
                   (-harmonic_operator(layer.w[kOpSigmaZ], layer.b[kOpSigmaZ], y2).array()).exp();
    const Vec x2 = (y2 - harmonic_operator(layer.w[kOpTauY], layer.b[kOpTauY], x1)).array() *
                   (-harmonic_operator(layer.w[kOpSigmaY], layer.b[kOpSigmaY], x1).array()).exp();
    s << x1, x2;
  }
  return s;
}

Vec HarmonicEntangler::inverse(const Vec& y) const {
  const Vec s0 = inverse_state(y);
  const double dev = (s0.tail(n_s_ - n_p_) - s_pad_).cwiseAbs().maxCoeff();
  if (s_pad_.size() > 0 && dev > 1e-6) {
    throw ImageMembershipError("entangler_inverse: recovered padding deviates from s_pad by " +
                               std::to_string(dev));
  }
  return s0.head(n_p_);
}

nlohmann::json HarmonicEntangler::to_json() const {
  return {{"format_version", kFormatVersion}, {"seed", seed_},   {"n_p", n_p_},
          {"n_s", n_s_},                      {"e_n", e_n()},    {"w_amp", w_amp_}};
}

HarmonicEntangler HarmonicEntangler::from_json(const nlohmann::json& doc) {
  const int version = doc.at("format_version").get<int>();
  if (version != kFormatVersion) {
    throw ContractViolation("entangler document format_version " + std::to_string(version) +
                            " unsupported (expected " + std::to_string(kFormatVersion) + ")");
  }
  return HarmonicEntangler(doc.at("seed").get<std::uint64_t>(), doc.at("n_p").get<int>(),
                           doc.at("n_s").get<int>(), doc.at("e_n").get<int>(),
                           doc.at("w_amp").get<double>());
}

// ---------------------------------------------------------------------------
// SpiralProcess

SpiralProcess::SpiralProcess(double turns, double r0, double r1) : turns_(turns), r0_(r0), r1_(r1) {
  if (!(r0 - std::abs(r1) > 0.0) || !(r0 + std::abs(r1) < 1.0)) {
    throw ContractViolation("spiral: radius must stay inside (0, 1) on [-1, 1]");
  }
}

Vec SpiralProcess::evaluate(const Vec& p) const {
  if (p.size() != 1) throw ContractViolation("spiral_forward: expected scalar parameter");
  require_in_box(p, "spiral_forward");
  const double theta = turns_ * p(0);
  const double r = r0_ + r1_ * p(0);
  Vec y(2);
  y << r * std::cos(theta), r * std::sin(theta);
  return y;
}

// ---------------------------------------------------------------------------
// NoiseChannel

NoiseChannel::NoiseChannel(double amplitude, double swap_prob, std::uint64_t rng_seed)
    : amplitude_(amplitude), swap_prob_(swap_prob), rng_(CounterRng::from(rng_seed, tags::kNoise)) {
  if (!(amplitude >= 0.0)) throw ContractViolation("noise: amplitude must be >= 0");
  if (!(swap_prob >= 0.0 && swap_prob <= 1.0)) throw ContractViolation("noise: swap_prob outside [0, 1]");
}

Vec NoiseChannel::apply(const Vec& y, std::size_t* swaps) {
  const Eigen::Index n = y.size();
  Vec out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double value = y(i);
    if (rng_.uniform() < swap_prob_) {
      const Eigen::Index j = rng_.uniform() < 0.5 ? std::max<Eigen::Index>(i - 1, 0)
                                                   : std::min<Eigen::Index>(i + 1, n - 1);
      value = y(j);
      if (swaps) ++*swaps;
    }
    const double u = rng_.uniform();
    out(i) = value + amplitude_ * (2.0 * u - 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// QueryLedger

Vec QueryLedger::query(const ForwardProcess& forward, const Vec& p) {
  if (used_ >= budget_) throw BudgetError(used_, budget_);
  ++used_;
  return forward.evaluate(p);
}

}  // namespace twincher

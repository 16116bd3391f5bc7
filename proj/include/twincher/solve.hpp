#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "twincher/types.hpp"

namespace twincher {

using VecFn = std::function<Vec(const Vec&)>;

struct GnConfig {
  double lambda = 1e-3;
  double delta_max = 0.1;
  double fd_step = 1e-7;
  double lower = -1.0;
  double upper = 1.0;
  int max_steps = 5;

  void validate() const;
};

struct RefinementTrace {
  std::vector<Vec> iterates;
  // Norm of the residual in the space the refinement runs in.
  std::vector<double> residual_norms;
  // ||f(p_t) - observation target||, when an observation target is supplied.
  std::vector<double> observation_residuals;
  // Evaluations spent by refinement steps: steps * (n_p + 1).
  std::uint64_t forward_evals = 0;
  // Evaluation of the final iterate used only for scoring.
  std::uint64_t scoring_evals = 0;
};

/// A forward evaluation failed part-way through a refinement.
class RefinementAborted : public std::runtime_error {
 public:
  RefinementAborted(const std::string& what, RefinementTrace partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const RefinementTrace& partial() const { return partial_; }

 private:
  RefinementTrace partial_;
};

struct JacobianEstimate {
  Mat J;    // m x n_p
  Vec f0;   // f(p)
};

/// Forward differences J_ij = (f(p + d e_j)_i - f(p)_i) / d; exactly n_p + 1
/// evaluations of f.
JacobianEstimate numerical_jacobian(const VecFn& f, const Vec& p, double fd_step);

/// Solve (J^T J + lambda I) dp = J^T r, clip ||dp|| to delta_max, then clip
/// p + dp into the box.
Vec gn_step(const Vec& p, const Mat& J, const Vec& residual, const GnConfig& cfg);

/// Clipped Gauss-Newton on residual(p) = target - latent(f(p)). `latent`
/// defaults to the identity. With `observation_target` the observation-space
/// residual ||f(p_t) - observation_target|| is recorded too.
RefinementTrace refine(const VecFn& f, const Vec& target, const Vec& p0, const GnConfig& cfg, int n_steps,
                       const VecFn& latent = {}, const std::optional<Vec>& observation_target = std::nullopt);

}  // namespace twincher

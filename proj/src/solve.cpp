#include "twincher/solve.hpp"

#include <Eigen/Cholesky>

namespace twincher {

void GnConfig::validate() const {
  if (!(lambda > 0.0)) throw ContractViolation("gn: lambda must be > 0");
  if (!(delta_max > 0.0)) throw ContractViolation("gn: delta_max must be > 0");
  if (!(fd_step > 0.0)) throw ContractViolation("gn: fd_step must be > 0");
  if (!(lower < upper)) throw ContractViolation("gn: empty box");
  if (max_steps < 0) throw ContractViolation("gn: max_steps must be >= 0");
}

JacobianEstimate numerical_jacobian(const VecFn& f, const Vec& p, double fd_step) {
  JacobianEstimate est;
  est.f0 = f(p);
  if (!est.f0.allFinite()) throw NonFiniteError("numerical_jacobian: non-finite forward output");
  est.J.resize(est.f0.size(), p.size());
  Vec probe = p;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    probe(j) = p(j) + fd_step;
    const Vec fj = f(probe);
    if (!fj.allFinite()) throw NonFiniteError("numerical_jacobian: non-finite forward output");
    est.J.col(j) = (fj - est.f0) / fd_step;
    probe(j) = p(j);
  }
  return est;
}

Vec gn_step(const Vec& p, const Mat& J, const Vec& residual, const GnConfig& cfg) {
  if (J.cols() != p.size() || J.rows() != residual.size()) throw ContractViolation("gn_step: shape mismatch");
  if (!p.allFinite() || !J.allFinite() || !residual.allFinite()) {
    throw ContractViolation("gn_step: non-finite input");
  }
  const auto n = p.size();
  const Mat normal = J.transpose() * J + cfg.lambda * Mat::Identity(n, n);
  Vec dp = normal.ldlt().solve(J.transpose() * residual);
  const double norm = dp.norm();
  if (norm > cfg.delta_max) dp *= cfg.delta_max / norm;
  return (p + dp).cwiseMax(cfg.lower).cwiseMin(cfg.upper);
}

RefinementTrace refine(const VecFn& f, const Vec& target, const Vec& p0, const GnConfig& cfg, int n_steps,
                       const VecFn& latent, const std::optional<Vec>& observation_target) {
  cfg.validate();
  if (n_steps < 0) throw ContractViolation("refine: n_steps must be >= 0");
  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    if (!(p0(i) >= cfg.lower && p0(i) <= cfg.upper)) throw ContractViolation("refine: p0 outside bounds");
  }
  RefinementTrace trace;
  auto record = [&](const Vec& p, const Vec& y) {
    const Vec mapped = latent ? latent(y) : y;
    trace.iterates.push_back(p);
    trace.residual_norms.push_back((target - mapped).norm());
    if (observation_target) trace.observation_residuals.push_back((y - *observation_target).norm());
    return Vec(target - mapped);
  };

  Vec p = p0;
  try {
    for (int step = 0; step < n_steps; ++step) {
      // Base evaluation plus n_p probes; latent(f(.)) composed on raw outputs.
      Vec y0;
      const VecFn counted = [&](const Vec& q) {
        Vec y = f(q);
        ++trace.forward_evals;
        if (!y0.size()) y0 = y;
        return latent ? Vec(latent(y)) : y;
      };
      const JacobianEstimate est = numerical_jacobian(counted, p, cfg.fd_step);
      const Vec residual = record(p, y0);
      p = gn_step(p, est.J, residual, cfg);
    }
    const Vec y_final = f(p);
    ++trace.scoring_evals;
    record(p, y_final);
  } catch (const BudgetError& e) {
    throw RefinementAborted(e.what(), std::move(trace));
  }
  return trace;
}

}  // namespace twincher

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "twincher/flow.hpp"
#include "twincher/forward_models.hpp"
#include "twincher/nets.hpp"
#include "twincher/rng.hpp"
#include "twincher/solve.hpp"

namespace twincher {

struct Sample {
  Vec p;
  Vec y;
  std::optional<Mat> J;  // dy/dp, n_y x n_p, forward differences
};

struct Dataset {
  int n_p = 0;
  int n_y = 0;
  std::vector<Sample> points;
  std::uint64_t source_budget = 0;  // queries consumed

  std::size_t size() const { return points.size(); }
  bool has_jacobians() const;
};

/// Passive uniform exploration under a query ledger. With Jacobians each
/// point costs n_p + 1 queries; a point interrupted by exhaustion is dropped.
Dataset explore_static(const ForwardProcess& forward, std::uint64_t budget, CounterRng& rng, bool with_jacobians,
                       double fd_step = 1e-7);

/// Baseline recipe for the inverse / proposal networks.
SupervisedOptions default_proposal_options();
std::vector<int> proposal_widths(int n_in, int n_out);
inline constexpr double kProposalOutScale = 1.5;

struct BaselineLearner {
  Mlp inverse_net;
  GnConfig gn;
  SupervisedResult fit;
};

BaselineLearner train_baseline(const Dataset& data, CounterRng& rng,
                               const SupervisedOptions& opts = default_proposal_options());

struct TrainConfig {
  double margin = 0.25;        // co-Lipschitz constant M
  double sigma_margin = 0.1;   // floor on sigma_min(du/dp)
  double bij_weight = 1.0;
  double jac_weight = 1.0;
  double rob_weight = 0.0;
  int epochs = 1000;
  double lr = 3e-3;
  int pairs_per_epoch = 256;
  int adversarial_refine_steps = 0;
  // Points per epoch for the Jacobian-based terms; 0 = all points.
  int jacobian_batch = 256;
  // Measure the pair hinge on u divided by its RMS spread over the dataset.
  bool normalize_latent = false;
  int n_layers = 64;
  double s_max = 1.0;
  double init_scale = 0.01;
  // Fixed tanh features per coupling shift; 0 = size of the active half.
  int shift_features = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& doc);
};

struct LossRecord {
  double total = 0.0;
  double bijection = 0.0;
  double local_invertibility = 0.0;
  double robustness = 0.0;
};

struct TwincherLearner {
  TwincherModel model;
  Mlp proposal_net;
  TrainConfig cfg;
  GnConfig gn;
  std::vector<LossRecord> loss_history;
  SupervisedResult proposal_fit;
};

struct LossValue {
  double value = 0.0;
  Vec grad_theta;
};

struct SamplePair {
  Vec p_a, y_a, p_b, y_b;
};

/// Mean over pairs of max(0, M ||p_a - p_b|| - ||u(y_a) - u(y_b)||)^2.
LossValue loss_bijection(const TwincherModel& model, const std::vector<SamplePair>& pairs, double margin);

/// Bijection term used in training: the k most violating dataset pairs, with
/// latents optionally divided by their RMS spread over the dataset.
LossValue loss_bijection_mined(const TwincherModel& model, const Dataset& data, std::size_t k, double margin,
                               bool normalize);

/// max(0, sigma_margin - sigma_min(du/dy * J))^2.
LossValue loss_local_invertibility(const TwincherModel& model, const Sample& sample, double sigma_margin);

/// ||du/dy * P_perp||_F^2 with P_perp the projector onto span(J)^perp.
LossValue loss_robustness(const TwincherModel& model, const Sample& sample);

/// Orthonormal basis of span(J)^perp (n_y x (n_y - n_p)); DegeneracyError if
/// J has rank < n_p.
Mat nuisance_basis(const Mat& J);

/// Unit y-space direction orthogonal to span(J) that maximizes ||du/dy v||,
/// by power iteration (20 steps, tolerance 1e-8).
Vec worst_case_nuisance_direction(const TwincherModel& model, const Sample& sample);

/// Dataset index pairs ranked by M ||dp|| - ||du|| (descending), top k.
std::vector<std::pair<int, int>> mine_pairs(const TwincherModel& model, const Dataset& data, std::size_t k,
                                            int adversarial_refine_steps, double margin);

TwincherLearner train_twincher(const Dataset& data, const TrainConfig& cfg, CounterRng& rng,
                               const SupervisedOptions& proposal_opts = default_proposal_options());

Vec propose(const BaselineLearner& learner, const Vec& y_star);
Vec propose(const TwincherLearner& learner, const Vec& y_star);

/// Baseline: Y-space refinement. Both record observation-space residuals.
RefinementTrace solve_inverse(const BaselineLearner& learner, const ForwardProcess& forward, const Vec& y_star,
                              int n_steps);
/// Twincher: refinement of u(E(p)) toward u(y_star).
RefinementTrace solve_inverse(const TwincherLearner& learner, const ForwardProcess& forward, const Vec& y_star,
                              int n_steps);

/// The n least invertible points of a seeded uniform pool of 64 n candidates,
/// scored by sigma_min(du/dy * J) at the nearest stored sample.
std::vector<Vec> acquire_candidates(const TwincherModel& model, const Dataset& data, std::size_t n,
                                    CounterRng& rng);

nlohmann::json learner_to_json(const BaselineLearner& learner);
nlohmann::json learner_to_json(const TwincherLearner& learner);
BaselineLearner baseline_from_json(const nlohmann::json& doc);
TwincherLearner twincher_from_json(const nlohmann::json& doc);

}  // namespace twincher

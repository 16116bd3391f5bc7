#include "twincher/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

namespace twincher {

namespace {

constexpr int kLearnerFormatVersion = 1;

Vec clip_box(const Vec& p) { return p.cwiseMax(-1.0).cwiseMin(1.0); }

Vec uniform_point(CounterRng& rng, int n) {
  Vec p(n);
  for (int i = 0; i < n; ++i) p(i) = rng.uniform(-1.0, 1.0);
  return p;
}

// Gradient of max(0, margin - sigma_min(A))^2 with respect to A.
double invertibility_penalty(const Mat& A, double sigma_margin, Mat* grad) {
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec& sv = svd.singularValues();
  const Eigen::Index n = sv.size();
  const double smin = sv(n - 1);
  const double gap = sigma_margin - smin;
  if (grad) grad->setZero(A.rows(), A.cols());
  if (gap <= 0.0) return 0.0;
  if (grad) {
    Eigen::Index idx = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (sv(i) == smin) {
        idx = i;
        break;
      }
    }
    *grad = -2.0 * gap * svd.matrixU().col(idx) * svd.matrixV().col(idx).transpose();
  }
  return gap * gap;
}

struct PairCandidate {
  double score;
  int i, j;
};

// Orders the best candidate first: higher score, then lexicographically smaller (i, j).
bool ranks_before(const PairCandidate& a, const PairCandidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.i != b.i) return a.i < b.i;
  return a.j < b.j;
}

std::vector<std::pair<int, int>> top_pairs(const Mat& P, const Mat& U, std::size_t k, double margin) {
  const int n = static_cast<int>(P.cols());
  auto worse = [](const PairCandidate& a, const PairCandidate& b) { return ranks_before(a, b); };
  // Heap top = the weakest kept candidate.
  std::priority_queue<PairCandidate, std::vector<PairCandidate>, decltype(worse)> heap(worse);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const PairCandidate c{margin * (P.col(i) - P.col(j)).norm() - (U.col(i) - U.col(j)).norm(), i, j};
      if (heap.size() < k) {
        heap.push(c);
      } else if (k > 0 && ranks_before(c, heap.top())) {
        heap.pop();
        heap.push(c);
      }
    }
  }
  std::vector<PairCandidate> kept;
  kept.reserve(heap.size());
  while (!heap.empty()) {
    kept.push_back(heap.top());
    heap.pop();
  }
  std::sort(kept.begin(), kept.end(), ranks_before);
  std::vector<std::pair<int, int>> out;
  out.reserve(kept.size());
  for (const auto& c : kept) out.emplace_back(c.i, c.j);
  return out;
}

Mat sample_directions(const Sample& s) {
  if (!s.J) throw ContractViolation("sample has no Jacobian");
  const Mat& J = *s.J;
  Mat D(J.rows(), J.rows());
  D << J, nuisance_basis(J);
  return D;
}

}  // namespace

bool Dataset::has_jacobians() const {
  return !points.empty() && std::all_of(points.begin(), points.end(), [](const Sample& s) { return s.J.has_value(); });
}

Dataset explore_static(const ForwardProcess& forward, std::uint64_t budget, CounterRng& rng, bool with_jacobians,
                       double fd_step) {
  const int n_p = forward.n_p();
  if (with_jacobians && budget < static_cast<std::uint64_t>(n_p) + 1) {
    throw ContractViolation("explore_static: budget below n_p + 1 with Jacobians");
  }
  QueryLedger ledger(budget);
  Dataset data;
  data.n_p = n_p;
  data.n_y = forward.n_y();
  while (!ledger.exhausted()) {
    Sample s;
    s.p = uniform_point(rng, n_p);
    try {
      s.y = ledger.query(forward, s.p);
      if (with_jacobians) {
        Mat J(forward.n_y(), n_p);
        Vec probe = s.p;
        for (int j = 0; j < n_p; ++j) {
          probe(j) += fd_step;
          J.col(j) = (ledger.query(forward, probe) - s.y) / fd_step;
          probe(j) = s.p(j);
        }
        s.J = std::move(J);
      }
    } catch (const BudgetError&) {
      break;
    }
    data.points.push_back(std::move(s));
  }
  data.source_budget = ledger.used();
  return data;
}

SupervisedOptions default_proposal_options() { return SupervisedOptions{}; }

std::vector<int> proposal_widths(int n_in, int n_out) { return {n_in, 16, 16, 16, 16, n_out}; }

BaselineLearner train_baseline(const Dataset& data, CounterRng& rng, const SupervisedOptions& opts) {
  if (data.points.empty()) throw ContractViolation("train_baseline: empty dataset");
  const auto n = static_cast<Eigen::Index>(data.size());
  Mat inputs(n, data.n_y);
  Mat targets(n, data.n_p);
  for (Eigen::Index i = 0; i < n; ++i) {
    inputs.row(i) = data.points[i].y.transpose();
    targets.row(i) = data.points[i].p.transpose();
  }
  auto net_rng = rng.split(tags::kProposalInit);
  Mlp net(net_rng.next_u64(), proposal_widths(data.n_y, data.n_p), kProposalOutScale);
  auto fit_rng = rng.split(tags::kTrainSplit);
  SupervisedResult fit = train_supervised(net, inputs, targets, opts, fit_rng);
  return BaselineLearner{std::move(net), GnConfig{}, std::move(fit)};
}

// ---------------------------------------------------------------------------
// Losses

Mat nuisance_basis(const Mat& J) {
  const auto n_y = J.rows();
  const auto n_p = J.cols();
  Eigen::JacobiSVD<Mat> svd(J);
  const Vec& sv = svd.singularValues();
  const double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
  const double smax = sv.size() ? sv(0) : 0.0;
  if (!(smin > 1e-10 * smax) || smax == 0.0) {
    throw DegeneracyError("robustness: Jacobian of the forward process is rank deficient", smin);
  }
  Eigen::HouseholderQR<Mat> qr(J);
  const Mat Q = qr.householderQ() * Mat::Identity(n_y, n_y);
  return Q.rightCols(n_y - n_p);
}

LossValue loss_bijection(const TwincherModel& model, const std::vector<SamplePair>& pairs, double margin) {
  if (pairs.empty()) throw ContractViolation("loss_bijection: no pairs");
  const int n_p = model.n_p();
  LossValue out{0.0, Vec::Zero(static_cast<Eigen::Index>(model.parameter_count()))};
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  for (const auto& pr : pairs) {
    const Vec za = model.forward(pr.y_a);
    const Vec zb = model.forward(pr.y_b);
    const Vec du = za.head(n_p) - zb.head(n_p);
    const double dist = du.norm();
    const double hinge = margin * (pr.p_a - pr.p_b).norm() - dist;
    if (hinge <= 0.0) continue;
    out.value += inv_n * hinge * hinge;
    if (dist == 0.0) continue;
    Vec up = Vec::Zero(model.n_y());
    up.head(n_p) = (-2.0 * inv_n * hinge / dist) * du;
    out.grad_theta += model.backprop(pr.y_a, up).theta;
    out.grad_theta -= model.backprop(pr.y_b, up).theta;
  }
  return out;
}

LossValue loss_local_invertibility(const TwincherModel& model, const Sample& sample, double sigma_margin) {
  if (!sample.J) throw ContractViolation("loss_local_invertibility: sample has no Jacobian");
  const int n_p = model.n_p();
  const TangentPass pass = model.forward_tangent(sample.y, *sample.J);
  const Mat Ju = pass.z_dot.topRows(n_p);
  Mat g;
  LossValue out{invertibility_penalty(Ju, sigma_margin, &g), Vec::Zero(static_cast<Eigen::Index>(model.parameter_count()))};
  if (out.value > 0.0) {
    Mat g_zdot = Mat::Zero(model.n_y(), Ju.cols());
    g_zdot.topRows(n_p) = g;
    model.backprop_tangent(pass, Vec::Zero(model.n_y()), g_zdot, out.grad_theta);
  }
  return out;
}

LossValue loss_robustness(const TwincherModel& model, const Sample& sample) {
  if (!sample.J) throw ContractViolation("loss_robustness: sample has no Jacobian");
  const int n_p = model.n_p();
  const Mat N = nuisance_basis(*sample.J);
  LossValue out{0.0, Vec::Zero(static_cast<Eigen::Index>(model.parameter_count()))};
  if (N.cols() == 0) return out;
  const TangentPass pass = model.forward_tangent(sample.y, N);
  const Mat A = pass.z_dot.topRows(n_p);
  out.value = A.squaredNorm();
  Mat g_zdot = Mat::Zero(model.n_y(), N.cols());
  g_zdot.topRows(n_p) = 2.0 * A;
  model.backprop_tangent(pass, Vec::Zero(model.n_y()), g_zdot, out.grad_theta);
  return out;
}

Vec worst_case_nuisance_direction(const TwincherModel& model, const Sample& sample) {
  if (!sample.J) throw ContractViolation("worst_case_nuisance_direction: sample has no Jacobian");
  const Mat N = nuisance_basis(*sample.J);
  if (N.cols() == 0) return Vec::Zero(model.n_y());
  const Mat Du = model.jacobian(sample.y).topRows(model.n_p());
  const Mat A = Du * (N * N.transpose());
  const Mat AtA = A.transpose() * A;
  // Start from the complement direction with the largest response.
  Eigen::Index best = 0;
  (Du * N).colwise().norm().maxCoeff(&best);
  Vec v = N.col(best);
  for (int it = 0; it < 20; ++it) {
    Vec next = AtA * v;
    const double norm = next.norm();
    if (norm == 0.0) break;
    next /= norm;
    const double change = (next - v).norm();
    v = next;
    if (change < 1e-8) break;
  }
  return v;
}

std::vector<std::pair<int, int>> mine_pairs(const TwincherModel& model, const Dataset& data, std::size_t k,
                                            int adversarial_refine_steps, double margin) {
  if (adversarial_refine_steps > 0) {
    // Refining pairs over the continuous parameter box needs fresh forward
    // queries; the static exploration ledger is closed at this point.
    throw BudgetError(data.source_budget, data.source_budget);
  }
  if (data.size() < 2) throw ContractViolation("mine_pairs: need at least two samples");
  const auto n = static_cast<Eigen::Index>(data.size());
  Mat P(data.n_p, n);
  Mat U(model.n_p(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    P.col(i) = data.points[i].p;
    U.col(i) = model.latent(data.points[i].y);
  }
  return top_pairs(P, U, k, margin);
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (!(margin > 0.0)) throw ContractViolation("train: margin M must be > 0");
  if (!(sigma_margin >= 0.0)) throw ContractViolation("train: sigma_margin must be >= 0");
  if (!(bij_weight >= 0.0 && jac_weight >= 0.0 && rob_weight >= 0.0)) {
    throw ContractViolation("train: loss weights must be >= 0");
  }
  if (epochs < 0 || pairs_per_epoch < 0 || jacobian_batch < 0 || shift_features < 0) {
    throw ContractViolation("train: negative count");
  }
  if (!(lr > 0.0)) throw ContractViolation("train: lr must be > 0");
  if (adversarial_refine_steps < 0) throw ContractViolation("train: adversarial_refine_steps must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"margin", margin},
          {"sigma_margin", sigma_margin},
          {"bij_weight", bij_weight},
          {"jac_weight", jac_weight},
          {"rob_weight", rob_weight},
          {"epochs", epochs},
          {"lr", lr},
          {"pairs_per_epoch", pairs_per_epoch},
          {"adversarial_refine_steps", adversarial_refine_steps},
          {"jacobian_batch", jacobian_batch},
          {"normalize_latent", normalize_latent},
          {"shift_features", shift_features},
          {"n_layers", n_layers},
          {"s_max", s_max},
          {"init_scale", init_scale}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& doc) {
  TrainConfig c;
  c.margin = doc.value("margin", c.margin);
  c.sigma_margin = doc.value("sigma_margin", c.sigma_margin);
  c.bij_weight = doc.value("bij_weight", c.bij_weight);
  c.jac_weight = doc.value("jac_weight", c.jac_weight);
  c.rob_weight = doc.value("rob_weight", c.rob_weight);
  c.epochs = doc.value("epochs", c.epochs);
  c.lr = doc.value("lr", c.lr);
  c.pairs_per_epoch = doc.value("pairs_per_epoch", c.pairs_per_epoch);
  c.adversarial_refine_steps = doc.value("adversarial_refine_steps", c.adversarial_refine_steps);
  c.jacobian_batch = doc.value("jacobian_batch", c.jacobian_batch);
  c.normalize_latent = doc.value("normalize_latent", c.normalize_latent);
  c.shift_features = doc.value("shift_features", c.shift_features);
  c.n_layers = doc.value("n_layers", c.n_layers);
  c.s_max = doc.value("s_max", c.s_max);
  c.init_scale = doc.value("init_scale", c.init_scale);
  return c;
}

LossValue loss_bijection_mined(const TwincherModel& model, const Dataset& data, std::size_t k, double margin,
                               bool normalize) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const int n_p = model.n_p();
  LossValue out{0.0, Vec::Zero(static_cast<Eigen::Index>(model.parameter_count()))};
  if (n < 2 || k == 0) return out;
  Mat P(data.n_p, n);
  Mat U(n_p, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    P.col(i) = data.points[i].p;
    U.col(i) = model.latent(data.points[i].y);
  }
  const Mat centered = U.colwise() - U.rowwise().mean();
  const double spread = normalize ? std::sqrt(centered.squaredNorm() / static_cast<double>(n)) : 1.0;
  if (!(spread > 0.0) || !std::isfinite(spread)) throw NonFiniteError("loss_bijection_mined: latent spread is zero");
  const Mat Un = U / spread;
  const auto pairs = top_pairs(P, Un, k, margin);
  Mat upstream = Mat::Zero(n_p, n);
  std::vector<char> touched(static_cast<std::size_t>(n), 0);
  const double inv = 1.0 / static_cast<double>(pairs.size());
  for (const auto& [a, b] : pairs) {
    const Vec du = Un.col(a) - Un.col(b);
    const double dist = du.norm();
    const double hinge = margin * (P.col(a) - P.col(b)).norm() - dist;
    if (hinge <= 0.0) continue;
    out.value += inv * hinge * hinge;
    if (dist == 0.0) continue;
    const Vec g = (-2.0 * inv * hinge / dist) * du;
    upstream.col(a) += g;
    upstream.col(b) -= g;
    touched[a] = touched[b] = 1;
  }
  if (normalize) {
    // Un = U / spread with spread^2 = mean ||U_i - mean||^2; upstream columns sum to zero.
    const double c = upstream.cwiseProduct(centered).sum();
    upstream = upstream / spread - (c / (static_cast<double>(n) * spread * spread * spread)) * centered;
    if (c != 0.0) std::fill(touched.begin(), touched.end(), 1);
  }
  Vec up = Vec::Zero(model.n_y());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!touched[i]) continue;
    up.head(n_p) = upstream.col(i);
    out.grad_theta += model.backprop(data.points[i].y, up).theta;
  }
  return out;
}

TwincherLearner train_twincher(const Dataset& data, const TrainConfig& cfg, CounterRng& rng,
                               const SupervisedOptions& proposal_opts) {
  cfg.validate();
  if (!data.has_jacobians()) throw ContractViolation("train_twincher: dataset needs Jacobians");
  if (data.n_p >= data.n_y) throw ContractViolation("train_twincher: need n_p < n_y");
  if (cfg.adversarial_refine_steps > 0) throw BudgetError(data.source_budget, data.source_budget);

  const int n_p = data.n_p;
  const int n_y = data.n_y;
  const auto n = static_cast<Eigen::Index>(data.size());

  TwincherModel model(rng.next_u64(), n_y, n_p, cfg.n_layers, cfg.s_max, cfg.init_scale, cfg.shift_features);
  const auto n_theta = static_cast<Eigen::Index>(model.parameter_count());

  std::vector<Mat> directions(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) directions[i] = sample_directions(data.points[i]);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = (cfg.jacobian_batch == 0 || cfg.jacobian_batch >= n) ? n : Eigen::Index{cfg.jacobian_batch};
  auto batch_rng = rng.split(tags::kJacobianBatch);

  AdamState adam;
  adam.lr = cfg.lr;
  std::vector<LossRecord> history;
  history.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    LossRecord rec;
    Vec grad = Vec::Zero(n_theta);

    if (cfg.bij_weight > 0.0 && n >= 2 && cfg.pairs_per_epoch > 0) {
      const LossValue bij = loss_bijection_mined(model, data, static_cast<std::size_t>(cfg.pairs_per_epoch),
                                                 cfg.margin, cfg.normalize_latent);
      rec.bijection = bij.value;
      grad += cfg.bij_weight * bij.grad_theta;
    }

    // Local invertibility and nuisance insensitivity on a batch of samples.
    if ((cfg.jac_weight > 0.0 || cfg.rob_weight > 0.0) && batch > 0) {
      for (Eigen::Index i = 0; i < batch; ++i) {
        const auto j = i + static_cast<Eigen::Index>(batch_rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(order[i], order[j]);
      }
      const double inv = 1.0 / static_cast<double>(batch);
      Mat g_inv;
      for (Eigen::Index bi = 0; bi < batch; ++bi) {
        const auto idx = order[bi];
        const TangentPass pass = model.forward_tangent(data.points[idx].y, directions[idx]);
        const Mat Ju = pass.z_dot.topLeftCorner(n_p, n_p);
        const Mat A = pass.z_dot.topRightCorner(n_p, n_y - n_p);
        const double pen = invertibility_penalty(Ju, cfg.sigma_margin, &g_inv);
        const double rob = A.squaredNorm();
        rec.local_invertibility += inv * pen;
        rec.robustness += inv * rob;
        Mat g_zdot = Mat::Zero(n_y, n_y);
        g_zdot.topLeftCorner(n_p, n_p) = (cfg.jac_weight * inv) * g_inv;
        g_zdot.topRightCorner(n_p, n_y - n_p) = (cfg.rob_weight * inv * 2.0) * A;
        model.backprop_tangent(pass, Vec::Zero(n_y), g_zdot, grad);
      }
    }

    rec.total = cfg.bij_weight * rec.bijection + cfg.jac_weight * rec.local_invertibility +
                cfg.rob_weight * rec.robustness;
    history.push_back(rec);
    model.set_theta(adam_step(adam, model.theta(), grad));
  }

  // Proposal network u -> p.
  Mat inputs(n, n_p);
  Mat targets(n, n_p);
  for (Eigen::Index i = 0; i < n; ++i) {
    inputs.row(i) = model.latent(data.points[i].y).transpose();
    targets.row(i) = data.points[i].p.transpose();
  }
  auto net_rng = rng.split(tags::kProposalInit);
  Mlp proposal(net_rng.next_u64(), proposal_widths(n_p, n_p), kProposalOutScale);
  auto fit_rng = rng.split(tags::kTrainSplit);
  SupervisedResult fit = train_supervised(proposal, inputs, targets, proposal_opts, fit_rng);

  return TwincherLearner{std::move(model), std::move(proposal), cfg, GnConfig{}, std::move(history), std::move(fit)};
}

// ---------------------------------------------------------------------------
// Inference

Vec propose(const BaselineLearner& learner, const Vec& y_star) {
  return clip_box(learner.inverse_net.forward(y_star));
}

Vec propose(const TwincherLearner& learner, const Vec& y_star) {
  return clip_box(learner.proposal_net.forward(learner.model.latent(y_star)));
}

RefinementTrace solve_inverse(const BaselineLearner& learner, const ForwardProcess& forward, const Vec& y_star,
                              int n_steps) {
  if (y_star.size() != forward.n_y()) throw ContractViolation("solve_inverse: y_star dimension mismatch");
  const VecFn f = [&](const Vec& p) { return forward.evaluate(p); };
  return refine(f, y_star, propose(learner, y_star), learner.gn, n_steps, {}, y_star);
}

RefinementTrace solve_inverse(const TwincherLearner& learner, const ForwardProcess& forward, const Vec& y_star,
                              int n_steps) {
  if (y_star.size() != forward.n_y()) throw ContractViolation("solve_inverse: y_star dimension mismatch");
  const VecFn f = [&](const Vec& p) { return forward.evaluate(p); };
  const VecFn latent = [&](const Vec& y) { return learner.model.latent(y); };
  const Vec u_star = learner.model.latent(y_star);
  return refine(f, u_star, propose(learner, y_star), learner.gn, n_steps, latent, y_star);
}

std::vector<Vec> acquire_candidates(const TwincherModel& model, const Dataset& data, std::size_t n,
                                    CounterRng& rng) {
  if (data.points.empty()) throw ContractViolation("acquire_candidates: empty dataset");
  if (n < 1) throw ContractViolation("acquire_candidates: n must be >= 1");
  if (!data.has_jacobians()) throw ContractViolation("acquire_candidates: dataset needs Jacobians");

  // sigma_min of du/dp at each stored sample.
  std::vector<double> stored(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Mat Ju = model.forward_tangent(data.points[i].y, *data.points[i].J).z_dot.topRows(model.n_p());
    Eigen::JacobiSVD<Mat> svd(Ju);
    stored[i] = svd.singularValues()(svd.singularValues().size() - 1);
  }

  auto pool_rng = rng.split(tags::kAcquirePool);
  const std::size_t pool_size = 64 * n;
  std::vector<Vec> pool(pool_size);
  std::vector<double> score(pool_size);
  for (std::size_t c = 0; c < pool_size; ++c) {
    pool[c] = uniform_point(pool_rng, data.n_p);
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double d = (data.points[i].p - pool[c]).squaredNorm();
      if (d < best) {
        best = d;
        nearest = i;
      }
    }
    score[c] = stored[nearest];
  }
  std::vector<std::size_t> idx(pool_size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
  std::vector<Vec> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[idx[i]]);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

nlohmann::json gn_to_json(const GnConfig& gn) {
  return {{"lambda", gn.lambda}, {"delta_max", gn.delta_max}, {"fd_step", gn.fd_step}, {"max_steps", gn.max_steps}};
}

GnConfig gn_from_json(const nlohmann::json& doc) {
  GnConfig gn;
  gn.lambda = doc.value("lambda", gn.lambda);
  gn.delta_max = doc.value("delta_max", gn.delta_max);
  gn.fd_step = doc.value("fd_step", gn.fd_step);
  gn.max_steps = doc.value("max_steps", gn.max_steps);
  return gn;
}

void check_learner_doc(const nlohmann::json& doc, const char* kind) {
  const int version = doc.at("format_version").get<int>();
  if (version != kLearnerFormatVersion) throw VersionMismatchError(version, kLearnerFormatVersion);
  if (doc.at("kind").get<std::string>() != kind) {
    throw MalformedDocumentError(std::string("learner checkpoint is not of kind ") + kind);
  }
}

}  // namespace

nlohmann::json learner_to_json(const BaselineLearner& learner) {
  return {{"format_version", kLearnerFormatVersion},
          {"kind", "baseline"},
          {"inverse_net", learner.inverse_net.to_json()},
          {"gn_config", gn_to_json(learner.gn)}};
}

nlohmann::json learner_to_json(const TwincherLearner& learner) {
  return {{"format_version", kLearnerFormatVersion},
          {"kind", "twincher"},
          {"flow", learner.model.to_json()},
          {"proposal_net", learner.proposal_net.to_json()},
          {"train_config", learner.cfg.to_json()},
          {"gn_config", gn_to_json(learner.gn)}};
}

BaselineLearner baseline_from_json(const nlohmann::json& doc) {
  check_learner_doc(doc, "baseline");
  return BaselineLearner{Mlp::from_json(doc.at("inverse_net")), gn_from_json(doc.at("gn_config")), {}};
}

TwincherLearner twincher_from_json(const nlohmann::json& doc) {
  check_learner_doc(doc, "twincher");
  return TwincherLearner{TwincherModel::from_json(doc.at("flow")), Mlp::from_json(doc.at("proposal_net")),
                         TrainConfig::from_json(doc.at("train_config")), gn_from_json(doc.at("gn_config")),
                         {}, {}};
}

}  // namespace twincher

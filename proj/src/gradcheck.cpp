#include "twincher/gradcheck.hpp"

#include <algorithm>

#include <Eigen/SVD>

#include "twincher/flow.hpp"
#include "twincher/learners.hpp"
#include "twincher/nets.hpp"
#include "twincher/rng.hpp"

namespace twincher {

bool GradientReport::all_passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

double relative_error(const Vec& analytic, const Vec& numeric, double floor) {
  if (analytic.size() != numeric.size()) throw ContractViolation("relative_error: size mismatch");
  if (analytic.size() == 0) return 0.0;
  const double scale = std::max({numeric.lpNorm<Eigen::Infinity>(), analytic.lpNorm<Eigen::Infinity>(), floor});
  return (analytic - numeric).lpNorm<Eigen::Infinity>() / scale;
}

Vec central_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

namespace {

Vec random_vec(CounterRng& rng, Eigen::Index n, double lo, double hi) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

Mat random_mat(CounterRng& rng, Eigen::Index r, Eigen::Index c) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
  }
  return m;
}

// Loss as a function of theta for a model copy.
template <class Eval>
std::function<double(const Vec&)> theta_fn(const TwincherModel& model, Eval eval) {
  return [m = TwincherModel(model), eval](const Vec& theta) mutable {
    m.set_theta(theta);
    return eval(m);
  };
}

}  // namespace

GradientReport run_gradient_checks(std::uint64_t seed, int n_configs) {
  if (n_configs < 1) throw ContractViolation("run_gradient_checks: n_configs must be >= 1");
  GradientReport report;
  report.tolerance = kGradientTolerance;
  const double h = kGradientStep;
  auto record = [&](const std::string& name, int config, const Vec& analytic, const Vec& numeric) {
    const double err = relative_error(analytic, numeric);
    report.checks.push_back({name, config, err, err < kGradientTolerance});
  };

  for (int c = 0; c < n_configs; ++c) {
    auto rng = CounterRng::from(seed, tags::kGradientCheck, static_cast<std::uint64_t>(c));
    const int n_y = 2 + static_cast<int>(rng.below(4));
    const int n_p = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_y - 1)));
    const int n_layers = 1 + static_cast<int>(rng.below(6));
    const int features = rng.below(2) == 0 ? 0 : 1 + static_cast<int>(rng.below(4));
    TwincherModel model(rng.next_u64(), n_y, n_p, n_layers, 1.0, 0.5, features);
    const Vec theta = model.theta();
    const Vec y = random_vec(rng, n_y, -0.9, 0.9);

    // Flow value backprop.
    {
      const Vec v = random_vec(rng, n_y, -1.0, 1.0);
      const auto g = model.backprop(y, v);
      record("flow_backprop_theta", c, g.theta,
             central_gradient(theta_fn(model, [&](const TwincherModel& m) { return v.dot(m.forward(y)); }), theta, h));
      record("flow_backprop_input", c, g.y,
             central_gradient([&](const Vec& yy) { return v.dot(model.forward(yy)); }, y, h));
    }

    // Flow tangent backprop.
    {
      const int m = 1 + static_cast<int>(rng.below(3));
      const Mat D = random_mat(rng, n_y, m);
      const Vec gz = random_vec(rng, n_y, -1.0, 1.0);
      const Mat gzd = random_mat(rng, n_y, m);
      auto scalar = [&](const TwincherModel& mm, const Vec& yy, const Mat& dd) {
        const TangentPass pass = mm.forward_tangent(yy, dd);
        return gz.dot(pass.z) + gzd.cwiseProduct(pass.z_dot).sum();
      };
      Vec g_theta = Vec::Zero(theta.size());
      Vec g_y;
      Mat g_d;
      model.backprop_tangent(model.forward_tangent(y, D), gz, gzd, g_theta, &g_y, &g_d);
      record("flow_tangent_theta", c, g_theta,
             central_gradient(theta_fn(model, [&](const TwincherModel& mm) { return scalar(mm, y, D); }), theta, h));
      record("flow_tangent_input", c, g_y,
             central_gradient([&](const Vec& yy) { return scalar(model, yy, D); }, y, h));
      const Vec d_flat = D.reshaped();
      record("flow_tangent_directions", c, g_d.reshaped(), central_gradient([&](const Vec& dv) {
               return scalar(model, y, dv.reshaped(n_y, m));
             }, d_flat, h));
    }

    // MLP backprop and MSE.
    {
      std::vector<int> widths{1 + static_cast<int>(rng.below(4))};
      const int hidden = 1 + static_cast<int>(rng.below(3));
      for (int l = 0; l < hidden; ++l) widths.push_back(2 + static_cast<int>(rng.below(6)));
      widths.push_back(1 + static_cast<int>(rng.below(3)));
      Mlp net(rng.next_u64(), widths, 1.5);
      const Vec w = net.theta();
      const Vec x = random_vec(rng, widths.front(), -1.0, 1.0);
      const Vec v = random_vec(rng, widths.back(), -1.0, 1.0);
      auto net_fn = [net](auto eval) {
        return [n = Mlp(net), eval](const Vec& th) mutable {
          n.set_theta(th);
          return eval(n);
        };
      };
      const auto g = net.backprop(x, v);
      record("mlp_backprop_theta", c, g.theta,
             central_gradient(net_fn([&](const Mlp& n) { return v.dot(n.forward(x)); }), w, h));
      record("mlp_backprop_input", c, g.x, central_gradient([&](const Vec& xx) { return v.dot(net.forward(xx)); }, x, h));

      const Eigen::Index n_samples = 3 + static_cast<Eigen::Index>(rng.below(5));
      const Mat inputs = random_mat(rng, n_samples, widths.front());
      const Mat targets = random_mat(rng, n_samples, widths.back());
      Vec g_mse = Vec::Zero(w.size());
      net.mse(inputs, targets, &g_mse);
      record("mlp_mse", c, g_mse,
             central_gradient(net_fn([&](const Mlp& n) { return n.mse(inputs, targets); }), w, h));
    }

    // Twincher losses.
    {
      std::vector<SamplePair> pairs;
      for (int k = 0; k < 3; ++k) {
        pairs.push_back({random_vec(rng, n_p, -1.0, 1.0), random_vec(rng, n_y, -0.9, 0.9),
                         random_vec(rng, n_p, -1.0, 1.0), random_vec(rng, n_y, -0.9, 0.9)});
      }
      // A margin large enough to keep every hinge active.
      const double margin = 5.0;
      record("loss_bijection", c, loss_bijection(model, pairs, margin).grad_theta,
             central_gradient(theta_fn(model, [&](const TwincherModel& m) {
               return loss_bijection(m, pairs, margin).value;
             }), theta, h));

      Dataset data;
      data.n_p = n_p;
      data.n_y = n_y;
      for (int k = 0; k < 6; ++k) data.points.push_back({random_vec(rng, n_p, -1.0, 1.0), random_vec(rng, n_y, -0.9, 0.9), {}});
      record("loss_bijection_normalized", c, loss_bijection_mined(model, data, 8, 3.0, true).grad_theta,
             central_gradient(theta_fn(model, [&](const TwincherModel& m) {
               return loss_bijection_mined(m, data, 8, 3.0, true).value;
             }), theta, h));

      Sample sample{random_vec(rng, n_p, -1.0, 1.0), y, random_mat(rng, n_y, n_p)};
      const Mat Ju = model.jacobian(y).topRows(n_p) * (*sample.J);
      const double sigma_min = Eigen::JacobiSVD<Mat>(Ju).singularValues().minCoeff();
      const double sigma_margin = sigma_min + 0.5;
      record("loss_local_invertibility", c, loss_local_invertibility(model, sample, sigma_margin).grad_theta,
             central_gradient(theta_fn(model, [&](const TwincherModel& m) {
               return loss_local_invertibility(m, sample, sigma_margin).value;
             }), theta, h));
      record("loss_robustness", c, loss_robustness(model, sample).grad_theta,
             central_gradient(theta_fn(model, [&](const TwincherModel& m) {
               return loss_robustness(m, sample).value;
             }), theta, h));
    }
  }
  return report;
}

}  // namespace twincher

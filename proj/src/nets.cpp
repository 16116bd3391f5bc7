#include "twincher/nets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

namespace twincher {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Mat gather_rows(const Mat& m, const std::vector<Eigen::Index>& idx, std::size_t begin, std::size_t end) {
  Mat out(static_cast<Eigen::Index>(end - begin), m.cols());
  for (std::size_t i = begin; i < end; ++i) out.row(static_cast<Eigen::Index>(i - begin)) = m.row(idx[i]);
  return out;
}

}  // namespace

Mlp::Mlp(std::uint64_t seed, std::vector<int> widths, double out_scale)
    : widths_(std::move(widths)), out_scale_(out_scale) {
  if (widths_.size() < 2) throw ContractViolation("mlp: need at least input and output widths");
  for (int w : widths_) {
    if (w < 1) throw ContractViolation("mlp: widths must be positive");
  }
  if (!(out_scale > 0.0)) throw ContractViolation("mlp: out_scale must be > 0");
  int offset = 0;
  for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
    Layer l{widths_[i], widths_[i + 1], offset, 0};
    l.b = l.w + l.in * l.out;
    offset = l.b + l.out;
    layers_.push_back(l);
  }
  theta_.resize(offset);
  auto rng = CounterRng::from(seed, tags::kMlpInit);
  for (const auto& l : layers_) {
    const double lim = std::sqrt(1.0 / l.in);
    for (int i = 0; i < l.in * l.out + l.out; ++i) theta_(l.w + i) = rng.uniform_open(-lim, lim);
  }
}

void Mlp::set_theta(const Vec& theta) {
  if (theta.size() != theta_.size()) throw ContractViolation("mlp: theta length mismatch");
  theta_ = theta;
}

Vec Mlp::forward(const Vec& x) const {
  if (x.size() != n_in()) throw ContractViolation("mlp_forward: input dimension mismatch");
  Vec h = x;
  for (const auto& l : layers_) {
    const Eigen::Map<const RowMat> w(theta_.data() + l.w, l.out, l.in);
    h = (w * h + theta_.segment(l.b, l.out)).array().tanh();
  }
  return out_scale_ * h;
}

Mat Mlp::forward_batch(const Mat& inputs) const {
  if (inputs.cols() != n_in()) throw ContractViolation("mlp_forward: input dimension mismatch");
  Mat h = inputs.transpose();
  for (const auto& l : layers_) {
    const Eigen::Map<const RowMat> w(theta_.data() + l.w, l.out, l.in);
    h = ((w * h).colwise() + theta_.segment(l.b, l.out)).array().tanh();
  }
  return out_scale_ * h.transpose();
}

Mlp::Gradients Mlp::backprop(const Vec& x, const Vec& upstream) const {
  if (x.size() != n_in() || upstream.size() != n_out()) {
    throw ContractViolation("mlp_backprop: dimension mismatch");
  }
  std::vector<Vec> acts{x};
  for (const auto& l : layers_) {
    const Eigen::Map<const RowMat> w(theta_.data() + l.w, l.out, l.in);
    acts.push_back((w * acts.back() + theta_.segment(l.b, l.out)).array().tanh());
  }
  Gradients g{Vec::Zero(theta_.size()), Vec()};
  Vec delta = out_scale_ * upstream;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const auto& l = layers_[i];
    const Eigen::Map<const RowMat> w(theta_.data() + l.w, l.out, l.in);
    const Vec& out = acts[i + 1];
    const Vec dpre = delta.cwiseProduct((1.0 - out.array().square()).matrix());
    Eigen::Map<RowMat>(g.theta.data() + l.w, l.out, l.in) += dpre * acts[i].transpose();
    g.theta.segment(l.b, l.out) += dpre;
    delta = w.transpose() * dpre;
  }
  g.x = std::move(delta);
  return g;
}

double Mlp::mse(const Mat& inputs, const Mat& targets, Vec* grad) const {
  if (inputs.cols() != n_in() || targets.cols() != n_out() || inputs.rows() != targets.rows()) {
    throw ContractViolation("mlp_mse: shape mismatch");
  }
  const auto n = inputs.rows();
  if (n == 0) throw ContractViolation("mlp_mse: empty batch");
  std::vector<Mat> acts{inputs.transpose()};
  for (const auto& l : layers_) {
    const Eigen::Map<const RowMat> w(theta_.data() + l.w, l.out, l.in);
    acts.push_back(((w * acts.back()).colwise() + theta_.segment(l.b, l.out)).array().tanh());
  }
  const Mat diff = out_scale_ * acts.back() - targets.transpose();
  const double denom = static_cast<double>(n) * n_out();
  const double loss = diff.squaredNorm() / denom;
  if (grad) {
    if (grad->size() != theta_.size()) *grad = Vec::Zero(theta_.size());
    Mat delta = (2.0 / denom) * out_scale_ * diff;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const auto& l = layers_[i];
      const Eigen::Map<const RowMat> w(theta_.data() + l.w, l.out, l.in);
      const Mat dpre = delta.cwiseProduct((1.0 - acts[i + 1].array().square()).matrix());
      Eigen::Map<RowMat>(grad->data() + l.w, l.out, l.in) += dpre * acts[i].transpose();
      grad->segment(l.b, l.out) += dpre.rowwise().sum();
      if (i > 0) delta = w.transpose() * dpre;
    }
  }
  return loss;
}

nlohmann::json Mlp::to_json() const {
  return {{"widths", widths_},
          {"out_scale", out_scale_},
          {"theta", std::vector<double>(theta_.data(), theta_.data() + theta_.size())}};
}

Mlp Mlp::from_json(const nlohmann::json& doc) {
  Mlp net(0, doc.at("widths").get<std::vector<int>>(), doc.at("out_scale").get<double>());
  const auto theta = doc.at("theta").get<std::vector<double>>();
  if (theta.size() != net.parameter_count()) throw ContractViolation("mlp: theta length mismatch");
  net.theta_ = Eigen::Map<const Vec>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  return net;
}

Vec adam_step(AdamState& state, const Vec& theta, const Vec& grad) {
  if (theta.size() != grad.size()) throw ContractViolation("adam_step: shape mismatch");
  if (state.m.size() == 0) {
    state.m = Vec::Zero(theta.size());
    state.v = Vec::Zero(theta.size());
  }
  if (state.m.size() != theta.size()) throw ContractViolation("adam_step: moment shape mismatch");
  ++state.t;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  const Vec m_hat = state.m / c1;
  const Vec v_hat = state.v / c2;
  return theta - state.lr * (m_hat.array() / (v_hat.array().sqrt() + state.eps)).matrix();
}

SupervisedResult train_supervised(Mlp& net, const Mat& inputs, const Mat& targets, const SupervisedOptions& opts,
                                  CounterRng& rng) {
  const auto n = inputs.rows();
  if (n == 0) throw ContractViolation("train_supervised: empty dataset");
  if (targets.rows() != n) throw ContractViolation("train_supervised: input/target count mismatch");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::Index n_val = 0;
  if (n >= opts.min_samples_for_split) {
    auto split_rng = rng.split(tags::kTrainSplit);
    for (auto i = static_cast<std::size_t>(n) - 1; i > 0; --i) {
      std::swap(order[i], order[split_rng.below(i + 1)]);
    }
    n_val = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(opts.val_fraction * n)));
  }
  const auto n_train = static_cast<std::size_t>(n - n_val);
  std::vector<Eigen::Index> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  const Mat x_val = gather_rows(inputs, order, n_train, order.size());
  const Mat y_val = gather_rows(targets, order, n_train, order.size());
  const Mat x_train_full = gather_rows(inputs, order, 0, n_train);
  const Mat y_train_full = gather_rows(targets, order, 0, n_train);

  const std::size_t batch = (opts.batch_size <= 0 || static_cast<std::size_t>(opts.batch_size) >= n_train)
                                ? n_train
                                : static_cast<std::size_t>(opts.batch_size);
  auto batch_rng = rng.split(tags::kTrainSplit, 1);

  AdamState adam;
  adam.lr = opts.lr;
  SupervisedResult result;
  Vec best_theta = net.theta();
  double best_val = std::numeric_limits<double>::infinity();
  int stall = 0;
  Vec grad;
  for (int epoch = 0; epoch < opts.max_epochs; ++epoch) {
    if (batch == n_train) {
      grad = Vec::Zero(static_cast<Eigen::Index>(net.parameter_count()));
      net.mse(x_train_full, y_train_full, &grad);
      net.set_theta(adam_step(adam, net.theta(), grad));
    } else {
      for (auto i = n_train - 1; i > 0; --i) std::swap(train_idx[i], train_idx[batch_rng.below(i + 1)]);
      for (std::size_t start = 0; start < n_train; start += batch) {
        const auto end = std::min(n_train, start + batch);
        const Mat xb = gather_rows(inputs, train_idx, start, end);
        const Mat yb = gather_rows(targets, train_idx, start, end);
        grad = Vec::Zero(static_cast<Eigen::Index>(net.parameter_count()));
        net.mse(xb, yb, &grad);
        net.set_theta(adam_step(adam, net.theta(), grad));
      }
    }
    result.train_loss.push_back(net.mse(x_train_full, y_train_full));
    result.epochs_run = epoch + 1;
    if (n_val > 0) {
      const double val = net.mse(x_val, y_val);
      result.val_loss.push_back(val);
      if (val < best_val) {
        best_val = val;
        best_theta = net.theta();
        result.best_epoch = epoch;
        stall = 0;
      } else if (++stall >= opts.patience) {
        result.early_stopped = true;
        break;
      }
    }
  }
  if (n_val > 0) net.set_theta(best_theta);
  else result.best_epoch = result.epochs_run - 1;
  return result;
}

}  // namespace twincher

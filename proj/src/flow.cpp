#include "twincher/flow.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "twincher/rng.hpp"

namespace twincher {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstBlock = Eigen::Map<const RowMat>;
using MutBlock = Eigen::Map<RowMat>;

Mat random_rotation(CounterRng& rng, int n) {
  Mat g(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(n, n);
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  if (q.determinant() < 0.0) q.col(0) *= -1.0;
  return q;
}

constexpr double kFeatureFreqMin = 0.5;
constexpr double kFeatureFreqMax = 5.0;
constexpr double kFeaturePhase = 2.0;

}  // namespace

TwincherModel::TwincherModel(std::uint64_t arch_seed, int n_y, int n_p, int n_layers, double s_max,
                             double init_scale, int shift_features)
    : arch_seed_(arch_seed), n_y_(n_y), n_p_(n_p), s_max_(s_max), shift_features_(shift_features) {
  if (n_y < 2 || n_p < 1 || n_p >= n_y) {
    throw ContractViolation("twincher: need 1 <= n_p < n_y, got n_p = " + std::to_string(n_p) +
                            ", n_y = " + std::to_string(n_y));
  }
  if (n_layers < 1) throw ContractViolation("twincher: n_layers must be >= 1");
  if (!(s_max > 0.0)) throw ContractViolation("twincher: s_max must be > 0");
  if (!(init_scale >= 0.0)) throw ContractViolation("twincher: init_scale must be >= 0");
  if (shift_features < 0) throw ContractViolation("twincher: shift_features must be >= 0");

  const int lo = n_y / 2;
  int offset = 0;
  int passive_total = 0;
  layers_.resize(n_layers);
  for (int l = 0; l < n_layers; ++l) {
    auto& layer = layers_[l];
    auto rng = CounterRng::from(arch_seed, tags::kFlowMixing, static_cast<std::uint64_t>(l));
    layer.rotation = random_rotation(rng, n_y);
    if (l % 2 == 0) {
      layer.a_off = 0, layer.na = lo;
      layer.b_off = lo, layer.nb = n_y - lo;
    } else {
      layer.b_off = 0, layer.nb = lo;
      layer.a_off = lo, layer.na = n_y - lo;
    }
    if (shift_features == 0) {
      layer.nk = layer.na;
      layer.feat_w = Mat::Identity(layer.na, layer.na);
      layer.feat_b = Vec::Zero(layer.na);
    } else {
      layer.nk = shift_features;
      layer.feat_w.resize(layer.nk, layer.na);
      layer.feat_b.resize(layer.nk);
      for (int k = 0; k < layer.nk; ++k) {
        // Feature k: direction e_(k mod na) for the first na features, random
        // unit directions after that; magnitude sets the frequency.
        Vec dir = Vec::Zero(layer.na);
        if (k < layer.na) {
          dir(k) = 1.0;
        } else {
          for (int j = 0; j < layer.na; ++j) dir(j) = rng.normal();
          dir.normalize();
        }
        layer.feat_w.row(k) = rng.uniform(kFeatureFreqMin, kFeatureFreqMax) * dir.transpose();
        layer.feat_b(k) = rng.uniform(-kFeaturePhase, kFeaturePhase);
      }
    }
    const int mat = layer.na * layer.nb;
    layer.ws = offset;
    layer.cs = layer.ws + mat;
    layer.wt = layer.cs + layer.nb;
    layer.ct = layer.wt + mat;
    layer.ut = layer.ct + layer.nb;
    offset = layer.ut + layer.nb * layer.nk;
    passive_total += layer.nb;
  }
  scale_bound_ = s_max * n_y / passive_total;

  theta_.resize(offset);
  auto rng = CounterRng::from(arch_seed, tags::kFlowInit);
  for (Eigen::Index i = 0; i < theta_.size(); ++i) {
    theta_(i) = init_scale > 0.0 ? rng.uniform_open(-init_scale, init_scale) : 0.0;
  }
}

void TwincherModel::set_theta(const Vec& theta) {
  if (theta.size() != theta_.size()) throw ContractViolation("twincher: theta length mismatch");
  theta_ = theta;
}

void TwincherModel::check_input(const Vec& v, const char* who) const {
  if (v.size() != n_y_) throw ContractViolation(std::string(who) + ": dimension mismatch");
  if (!v.allFinite()) throw ContractViolation(std::string(who) + ": non-finite input");
}

Vec TwincherModel::forward(const Vec& y) const {
  check_input(y, "transform");
  Vec x = y;
  for (const auto& L : layers_) {
    x = L.rotation * x;
    const Vec a = x.segment(L.a_off, L.na);
    const ConstBlock ws(theta_.data() + L.ws, L.nb, L.na);
    const ConstBlock wt(theta_.data() + L.wt, L.nb, L.na);
    const ConstBlock ut(theta_.data() + L.ut, L.nb, L.nk);
    const auto cs = theta_.segment(L.cs, L.nb);
    const auto ct = theta_.segment(L.ct, L.nb);
    const Vec s = scale_bound_ * (ws * a + cs).array().tanh();
    const Vec t = wt * a + ct + ut * L.features(a);
    x.segment(L.b_off, L.nb) = x.segment(L.b_off, L.nb).cwiseProduct(s.array().exp().matrix()) + t;
  }
  return x;
}

LatentPair TwincherModel::transform(const Vec& y) const {
  const Vec z = forward(y);
  return {z.head(n_p_), z.tail(n_y_ - n_p_)};
}

Vec TwincherModel::inverse(const Vec& z) const {
  check_input(z, "inverse_transform");
  Vec x = z;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    const auto& L = *it;
    const Vec a = x.segment(L.a_off, L.na);
    const ConstBlock ws(theta_.data() + L.ws, L.nb, L.na);
    const ConstBlock wt(theta_.data() + L.wt, L.nb, L.na);
    const ConstBlock ut(theta_.data() + L.ut, L.nb, L.nk);
    const Vec s = scale_bound_ * (ws * a + theta_.segment(L.cs, L.nb)).array().tanh();
    const Vec t = wt * a + theta_.segment(L.ct, L.nb) + ut * L.features(a);
    x.segment(L.b_off, L.nb) = (x.segment(L.b_off, L.nb) - t).cwiseProduct((-s).array().exp().matrix());
    x = L.rotation.transpose() * x;
  }
  return x;
}

Vec TwincherModel::inverse_transform(const Vec& u, const Vec& h) const {
  if (u.size() != n_p_ || h.size() != n_y_ - n_p_) {
    throw ContractViolation("inverse_transform: latent dimension mismatch");
  }
  Vec z(n_y_);
  z << u, h;
  return inverse(z);
}

TangentPass TwincherModel::forward_tangent(const Vec& y, const Mat& directions) const {
  check_input(y, "transform");
  if (directions.rows() != n_y_) throw ContractViolation("forward_tangent: direction rows mismatch");
  const auto m = directions.cols();
  TangentPass pass;
  pass.layers.resize(layers_.size());
  Vec x = y;
  Mat xd = directions;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    auto& c = pass.layers[l];
    x = L.rotation * x;
    xd = L.rotation * xd;
    c.a = x.segment(L.a_off, L.na);
    c.b = x.segment(L.b_off, L.nb);
    c.a_dot = xd.middleRows(L.a_off, L.na);
    c.b_dot = xd.middleRows(L.b_off, L.nb);

    const ConstBlock ws(theta_.data() + L.ws, L.nb, L.na);
    const ConstBlock wt(theta_.data() + L.wt, L.nb, L.na);
    const ConstBlock ut(theta_.data() + L.ut, L.nb, L.nk);
    c.th = (ws * c.a + theta_.segment(L.cs, L.nb)).array().tanh();
    c.e = (scale_bound_ * c.th).array().exp();
    c.g = L.features(c.a);
    const Vec t = wt * c.a + theta_.segment(L.ct, L.nb) + ut * c.g;
    x.segment(L.b_off, L.nb) = c.b.cwiseProduct(c.e) + t;

    if (m > 0) {
      const Vec dth = scale_bound_ * (1.0 - c.th.array().square());
      const Vec q = 1.0 - c.g.array().square();
      c.pre_s_dot = ws * c.a_dot;
      c.s_dot = dth.asDiagonal() * c.pre_s_dot;
      const Mat t_dot = wt * c.a_dot + ut * (q.asDiagonal() * (L.feat_w * c.a_dot));
      const Vec be = c.b.cwiseProduct(c.e);
      xd.middleRows(L.b_off, L.nb) = c.e.asDiagonal() * c.b_dot + be.asDiagonal() * c.s_dot + t_dot;
    }
  }
  pass.z = std::move(x);
  pass.z_dot = std::move(xd);
  return pass;
}

void TwincherModel::backprop_tangent(const TangentPass& pass, const Vec& gz, const Mat& g_zdot, Vec& grad_theta,
                                     Vec* grad_y, Mat* grad_directions) const {
  if (grad_theta.size() != theta_.size()) throw ContractViolation("backprop: grad_theta length mismatch");
  const auto m = pass.z_dot.cols();
  if (gz.size() != n_y_ || g_zdot.rows() != n_y_ || g_zdot.cols() != m) {
    throw ContractViolation("backprop: upstream shape mismatch");
  }
  Vec gx = gz;
  Mat gxd = g_zdot;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& L = layers_[li];
    const auto& c = pass.layers[li];
    const ConstBlock ws(theta_.data() + L.ws, L.nb, L.na);
    const ConstBlock wt(theta_.data() + L.wt, L.nb, L.na);
    const ConstBlock ut(theta_.data() + L.ut, L.nb, L.nk);
    MutBlock g_ws(grad_theta.data() + L.ws, L.nb, L.na);
    MutBlock g_wt(grad_theta.data() + L.wt, L.nb, L.na);
    MutBlock g_ut(grad_theta.data() + L.ut, L.nb, L.nk);

    const Vec gb_out = gx.segment(L.b_off, L.nb);
    Vec ga = gx.segment(L.a_off, L.na);
    Vec gb = gb_out.cwiseProduct(c.e);
    Vec ge = gb_out.cwiseProduct(c.b);
    const Vec& gt = gb_out;
    Vec gg = ut.transpose() * gt;
    Vec gth = Vec::Zero(L.nb);

    Mat ga_dot;
    Mat gb_dot;
    if (m > 0) {
      const Mat gbd_out = gxd.middleRows(L.b_off, L.nb);
      ga_dot = gxd.middleRows(L.a_off, L.na);
      const Vec dth = scale_bound_ * (1.0 - c.th.array().square());
      const Vec q = 1.0 - c.g.array().square();
      const Vec be = c.b.cwiseProduct(c.e);

      // b_dot' = e * b_dot + (b e) * s_dot + t_dot
      gb_dot = c.e.asDiagonal() * gbd_out;
      const Vec row_bd = gbd_out.cwiseProduct(c.b_dot).rowwise().sum();
      const Vec row_sd = gbd_out.cwiseProduct(c.s_dot).rowwise().sum();
      ge += row_bd + c.b.cwiseProduct(row_sd);
      gb += c.e.cwiseProduct(row_sd);
      const Mat g_sdot = be.asDiagonal() * gbd_out;
      const Mat& g_tdot = gbd_out;

      // t_dot = W_t a_dot + U_t (q * (F a_dot)), q = 1 - g^2
      const Mat fa_dot = L.feat_w * c.a_dot;
      g_wt.noalias() += g_tdot * c.a_dot.transpose();
      g_ut.noalias() += g_tdot * (q.asDiagonal() * fa_dot).transpose();
      ga_dot.noalias() += wt.transpose() * g_tdot;
      const Mat g_feat = ut.transpose() * g_tdot;
      ga_dot.noalias() += L.feat_w.transpose() * (q.asDiagonal() * g_feat);
      gg += (-2.0 * c.g).cwiseProduct(g_feat.cwiseProduct(fa_dot).rowwise().sum());

      // s_dot = dth * pre_s_dot, dth = scale_bound (1 - th^2)
      const Mat g_pre = dth.asDiagonal() * g_sdot;
      gth += (-2.0 * scale_bound_ * c.th).cwiseProduct(g_sdot.cwiseProduct(c.pre_s_dot).rowwise().sum());
      g_ws.noalias() += g_pre * c.a_dot.transpose();
      ga_dot.noalias() += ws.transpose() * g_pre;
    }

    // s = scale_bound * th, e = exp(s)
    gth += scale_bound_ * ge.cwiseProduct(c.e);
    const Vec g_pre_s = gth.cwiseProduct((1.0 - c.th.array().square()).matrix());
    g_ws.noalias() += g_pre_s * c.a.transpose();
    grad_theta.segment(L.cs, L.nb) += g_pre_s;
    ga.noalias() += ws.transpose() * g_pre_s;

    // t = W_t a + c_t + U_t g
    g_wt.noalias() += gt * c.a.transpose();
    grad_theta.segment(L.ct, L.nb) += gt;
    g_ut.noalias() += gt * c.g.transpose();
    ga.noalias() += wt.transpose() * gt;
    ga.noalias() += L.feat_w.transpose() * gg.cwiseProduct((1.0 - c.g.array().square()).matrix());

    gx.segment(L.a_off, L.na) = ga;
    gx.segment(L.b_off, L.nb) = gb;
    gx = L.rotation.transpose() * gx;
    if (m > 0) {
      gxd.middleRows(L.a_off, L.na) = ga_dot;
      gxd.middleRows(L.b_off, L.nb) = gb_dot;
      gxd = L.rotation.transpose() * gxd;
    }
  }
  if (grad_y) *grad_y = std::move(gx);
  if (grad_directions) *grad_directions = std::move(gxd);
}

Mat TwincherModel::jacobian(const Vec& y) const {
  return forward_tangent(y, Mat::Identity(n_y_, n_y_)).z_dot;
}

double TwincherModel::log_abs_det(const Vec& y) const {
  check_input(y, "log_abs_det");
  Vec x = y;
  double total = 0.0;
  for (const auto& L : layers_) {
    x = L.rotation * x;
    const Vec a = x.segment(L.a_off, L.na);
    const ConstBlock ws(theta_.data() + L.ws, L.nb, L.na);
    const ConstBlock wt(theta_.data() + L.wt, L.nb, L.na);
    const ConstBlock ut(theta_.data() + L.ut, L.nb, L.nk);
    const Vec s = scale_bound_ * (ws * a + theta_.segment(L.cs, L.nb)).array().tanh();
    const Vec t = wt * a + theta_.segment(L.ct, L.nb) + ut * L.features(a);
    x.segment(L.b_off, L.nb) = x.segment(L.b_off, L.nb).cwiseProduct(s.array().exp().matrix()) + t;
    total += s.sum();
  }
  return total;
}

TwincherModel::Gradients TwincherModel::backprop(const Vec& y, const Vec& upstream) const {
  if (upstream.size() != n_y_ || !upstream.allFinite()) {
    throw ContractViolation("backprop: upstream must be finite with length n_y");
  }
  const TangentPass pass = forward_tangent(y, Mat(n_y_, 0));
  Gradients out{Vec::Zero(theta_.size()), Vec()};
  backprop_tangent(pass, upstream, Mat(n_y_, 0), out.theta, &out.y);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

nlohmann::json TwincherModel::to_json() const {
  return {{"format_version", kFormatVersion},
          {"arch_seed", arch_seed_},
          {"n_y", n_y_},
          {"n_p", n_p_},
          {"n_layers", n_layers()},
          {"s_max", s_max_},
          {"shift_features", shift_features_},
          {"theta", std::vector<double>(theta_.data(), theta_.data() + theta_.size())}};
}

TwincherModel TwincherModel::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("format_version")) {
    throw MalformedDocumentError("checkpoint: missing format_version");
  }
  int version = 0;
  std::uint64_t arch_seed = 0;
  int n_y = 0, n_p = 0, n_layers = 0;
  double s_max = 0.0;
  int shift_features = 0;
  std::vector<double> theta;
  try {
    version = doc.at("format_version").get<int>();
    if (version != kFormatVersion) throw VersionMismatchError(version, kFormatVersion);
    arch_seed = doc.at("arch_seed").get<std::uint64_t>();
    n_y = doc.at("n_y").get<int>();
    n_p = doc.at("n_p").get<int>();
    n_layers = doc.at("n_layers").get<int>();
    s_max = doc.at("s_max").get<double>();
    shift_features = doc.value("shift_features", 0);
    theta = doc.at("theta").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedDocumentError(std::string("checkpoint: ") + e.what());
  }
  std::optional<TwincherModel> model;
  try {
    model.emplace(arch_seed, n_y, n_p, n_layers, s_max, 0.0, shift_features);
  } catch (const ContractViolation& e) {
    throw DimensionMismatchError(std::string("checkpoint: ") + e.what());
  }
  if (theta.size() != model->parameter_count()) {
    throw DimensionMismatchError("checkpoint: theta has " + std::to_string(theta.size()) + " entries, expected " +
                                 std::to_string(model->parameter_count()));
  }
  model->theta_ = Eigen::Map<const Vec>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  return std::move(*model);
}

void checkpoint_save(const TwincherModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint_save: cannot open " + path.string());
  out << model.to_json().dump(1) << '\n';
}

TwincherModel checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint_load: cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedDocumentError(std::string("checkpoint: ") + e.what());
  }
  return TwincherModel::from_json(doc);
}

}  // namespace twincher

#include "mlp.hpp"

#include "rng.hpp"

#include <cmath>

namespace uqxai {

namespace {

struct AdamState {
  std::vector<Matrix> mw, vw;
  std::vector<Vector> mb, vb;
  long t = 0;

  explicit AdamState(const std::vector<Matrix>& w, const std::vector<Vector>& b) {
    for (const auto& m : w) {
      mw.push_back(Matrix::Zero(m.rows(), m.cols()));
      vw.push_back(Matrix::Zero(m.rows(), m.cols()));
    }
    for (const auto& v : b) {
      mb.push_back(Vector::Zero(v.size()));
      vb.push_back(Vector::Zero(v.size()));
    }
  }

  void step(std::vector<Matrix>& w, std::vector<Vector>& b, const std::vector<Matrix>& gw,
            const std::vector<Vector>& gb, double lr) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t l = 0; l < w.size(); ++l) {
      mw[l] = beta1 * mw[l] + (1.0 - beta1) * gw[l];
      vw[l] = beta2 * vw[l] + (1.0 - beta2) * gw[l].array().square().matrix();
      w[l].array() -= lr * (mw[l].array() / c1) / ((vw[l].array() / c2).sqrt() + eps);
      mb[l] = beta1 * mb[l] + (1.0 - beta1) * gb[l];
      vb[l] = beta2 * vb[l] + (1.0 - beta2) * gb[l].array().square().matrix();
      b[l].array() -= lr * (mb[l].array() / c1) / ((vb[l].array() / c2).sqrt() + eps);
    }
  }
};

double mean_cross_entropy(const Matrix& proba, const std::vector<int>& y) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < proba.rows(); ++i) {
    loss -= std::log(std::max(proba(i, y[static_cast<std::size_t>(i)]), 1e-300));
  }
  return loss / static_cast<double>(proba.rows());
}

}  // namespace

Matrix MlpClassifier::predict_logits(const Matrix& x) const {
  require(x.cols() == n_features(), "mlp: feature count mismatch");
  Matrix h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = h * weights_[l].transpose();
    z.rowwise() += biases_[l].transpose();
    if (l + 1 < weights_.size()) {
      h = z.cwiseMax(0.0);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

Vector MlpClassifier::logits_row_dropout(const Vector& x, Rng& rng) const {
  Vector h = x;
  const double keep = 1.0 - config_.dropout;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Vector z = weights_[l] * h + biases_[l];
    if (l + 1 < weights_.size()) {
      h = z.cwiseMax(0.0);
      if (config_.dropout > 0.0) {
        for (Eigen::Index i = 0; i < h.size(); ++i) {
          h(i) = rng.uniform() < keep ? h(i) / keep : 0.0;
        }
      }
    } else {
      h = std::move(z);
    }
  }
  return h;
}

std::vector<Matrix> MlpClassifier::per_member_proba(const Matrix& x, std::uint64_t seed) const {
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(config_.mc_members));
  for (int m = 0; m < config_.mc_members; ++m) {
    Matrix logits(x.rows(), n_classes());
    const std::uint64_t member_seed = Rng::derive(seed, static_cast<std::uint64_t>(m));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      Rng row_rng(Rng::derive(member_seed, static_cast<std::uint64_t>(i)));
      logits.row(i) = logits_row_dropout(x.row(i).transpose(), row_rng).transpose();
    }
    out.push_back(softmax_rows(logits));
  }
  return out;
}

Vector MlpClassifier::input_gradient_impl(const Vector& x, const Vector& dlogits) const {
  const std::size_t n_layers = weights_.size();
  std::vector<Vector> pre(n_layers);  // pre-activation per layer
  Vector h = x;
  for (std::size_t l = 0; l < n_layers; ++l) {
    pre[l] = weights_[l] * h + biases_[l];
    if (l + 1 < n_layers) h = pre[l].cwiseMax(0.0);
  }
  Vector delta = dlogits;
  for (std::size_t l = n_layers; l-- > 0;) {
    Vector dh = weights_[l].transpose() * delta;
    if (l == 0) return dh;
    for (Eigen::Index i = 0; i < dh.size(); ++i) {
      if (pre[l - 1](i) <= 0.0) dh(i) = 0.0;
    }
    delta = std::move(dh);
  }
  return delta;  // unreachable
}

Vector MlpClassifier::input_gradient(const Vector& x, int target_class) const {
  require(target_class >= 0 && target_class < n_classes(), "mlp: target class out of range");
  Vector d = Vector::Zero(n_classes());
  d(target_class) = 1.0;
  return input_gradient_impl(x, d);
}

Vector MlpClassifier::cross_entropy_input_gradient(const Vector& x, int label) const {
  require(label >= 0 && label < n_classes(), "mlp: label out of range");
  const Matrix p = predict_proba(x.transpose());
  Vector d = p.row(0).transpose();
  d(label) -= 1.0;
  return input_gradient_impl(x, d);
}

double MlpClassifier::batch_loss(const Matrix& x, const std::vector<int>& y) const {
  return mean_cross_entropy(predict_proba(x), y);
}

void MlpClassifier::param_gradients(const Matrix& x, const std::vector<int>& y, std::vector<Matrix>* grad_w,
                                    std::vector<Vector>* grad_b) const {
  require(static_cast<std::size_t>(x.rows()) == y.size(), "param_gradients: label count mismatch");
  const std::size_t n_layers = weights_.size();
  std::vector<Matrix> pre(n_layers), act(n_layers + 1);
  act[0] = x;
  for (std::size_t l = 0; l < n_layers; ++l) {
    pre[l] = act[l] * weights_[l].transpose();
    pre[l].rowwise() += biases_[l].transpose();
    act[l + 1] = l + 1 < n_layers ? pre[l].cwiseMax(0.0) : pre[l];
  }
  Matrix delta = softmax_rows(act[n_layers]);
  for (Eigen::Index i = 0; i < x.rows(); ++i) delta(i, y[static_cast<std::size_t>(i)]) -= 1.0;
  delta /= static_cast<double>(x.rows());

  grad_w->resize(n_layers);
  grad_b->resize(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    (*grad_w)[l] = delta.transpose() * act[l];
    (*grad_b)[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = (delta * weights_[l]).cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
}

std::shared_ptr<MlpClassifier> train_mlp(const TabularDataset& train, const TabularDataset& val,
                                         const MlpConfig& config) {
  require(train.n_rows() > 0, "train_mlp: empty training data");
  require(val.n_rows() > 0, "train_mlp: empty validation data");
  const int d = static_cast<int>(train.n_features());
  const int k = train.n_classes();

  std::vector<int> dims = {d};
  for (int h : config.hidden) dims.push_back(h);
  dims.push_back(k);

  Rng rng(config.seed);
  std::vector<Matrix> w;
  std::vector<Vector> b;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    Matrix wl(dims[l + 1], dims[l]);
    for (Eigen::Index r = 0; r < wl.rows(); ++r) {
      for (Eigen::Index c = 0; c < wl.cols(); ++c) wl(r, c) = rng.uniform(-bound, bound);
    }
    Vector bl(dims[l + 1]);
    for (Eigen::Index r = 0; r < bl.size(); ++r) bl(r) = rng.uniform(-bound, bound);
    w.push_back(std::move(wl));
    b.push_back(std::move(bl));
  }

  const std::size_t n_layers = w.size();
  MlpClassifier net(w, b, config);  // scratch copy for eval passes
  AdamState adam(w, b);
  const std::size_t n = static_cast<std::size_t>(train.n_rows());
  const double keep = 1.0 - config.dropout;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_w = w;
  std::vector<Vector> best_b = b;
  int stale_epochs = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    Rng epoch_rng = rng.substream(static_cast<std::uint64_t>(epoch) + 1000);
    epoch_rng.shuffle(order);

    for (std::size_t at = 0; at < n; at += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t bs = std::min(static_cast<std::size_t>(config.batch_size), n - at);
      Matrix xb(static_cast<Eigen::Index>(bs), d);
      std::vector<int> yb(bs);
      for (std::size_t i = 0; i < bs; ++i) {
        xb.row(static_cast<Eigen::Index>(i)) = train.features.row(static_cast<Eigen::Index>(order[at + i]));
        yb[i] = train.labels[order[at + i]];
      }

      // forward with dropout masks
      std::vector<Matrix> pre(n_layers), act(n_layers + 1), mask(n_layers);
      act[0] = xb;
      for (std::size_t l = 0; l < n_layers; ++l) {
        pre[l] = act[l] * w[l].transpose();
        pre[l].rowwise() += b[l].transpose();
        if (l + 1 < n_layers) {
          Matrix h = pre[l].cwiseMax(0.0);
          if (config.dropout > 0.0) {
            mask[l].resize(h.rows(), h.cols());
            for (Eigen::Index r = 0; r < h.rows(); ++r) {
              for (Eigen::Index c = 0; c < h.cols(); ++c) {
                mask[l](r, c) = epoch_rng.uniform() < keep ? 1.0 / keep : 0.0;
              }
            }
            h = h.cwiseProduct(mask[l]);
          }
          act[l + 1] = std::move(h);
        } else {
          act[l + 1] = pre[l];
        }
      }

      Matrix delta = softmax_rows(act[n_layers]);
      for (std::size_t i = 0; i < bs; ++i) delta(static_cast<Eigen::Index>(i), yb[i]) -= 1.0;
      delta /= static_cast<double>(bs);

      std::vector<Matrix> gw(n_layers);
      std::vector<Vector> gb(n_layers);
      for (std::size_t l = n_layers; l-- > 0;) {
        gw[l] = delta.transpose() * act[l];
        gb[l] = delta.colwise().sum().transpose();
        if (l > 0) {
          Matrix dh = delta * w[l];
          if (config.dropout > 0.0) dh = dh.cwiseProduct(mask[l - 1]);
          delta = dh.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
      }
      adam.step(w, b, gw, gb, config.learning_rate);
    }

    net = MlpClassifier(w, b, config);
    const double val_loss = mean_cross_entropy(net.predict_proba(val.features), val.labels);
    require(std::isfinite(val_loss), "train_mlp: divergence, validation loss is not finite");
    if (val_loss < best_val) {
      best_val = val_loss;
      best_w = w;
      best_b = b;
      stale_epochs = 0;
    } else {
      ++stale_epochs;
      if (stale_epochs >= config.patience) break;
    }
  }

  return std::make_shared<MlpClassifier>(std::move(best_w), std::move(best_b), config);
}

}  // namespace uqxai

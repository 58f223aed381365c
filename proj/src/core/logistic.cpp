#include "logistic.hpp"

#include "rng.hpp"

#include <cmath>
#include <set>

namespace uqxai {

namespace {

struct Objective {
  const Matrix& x;       // n x d
  const std::vector<int>& y;
  int n_classes;
  double l2;

  bool binary() const { return n_classes == 2; }

  // value and gradient of mean cross-entropy + l2/(2n) * ||W||^2
  double eval(const Matrix& w, const Vector& b, Matrix* gw, Vector* gb) const {
    const Eigen::Index n = x.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    double loss = 0.0;
    if (binary()) {
      Vector z = x * w.row(0).transpose();
      z.array() += b(0);
      Vector p(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double zi = z(i);
        // log(1 + e^z) without overflow
        const double softplus = zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
        loss += softplus - (y[static_cast<std::size_t>(i)] == 1 ? zi : 0.0);
        p(i) = 1.0 / (1.0 + std::exp(-zi));
      }
      loss *= inv_n;
      if (gw) {
        Vector r = p;
        for (Eigen::Index i = 0; i < n; ++i) r(i) -= y[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0;
        gw->row(0) = (x.transpose() * r).transpose() * inv_n;
        (*gb)(0) = r.sum() * inv_n;
      }
    } else {
      Matrix z = x * w.transpose();
      z.rowwise() += b.transpose();
      Matrix p = softmax_rows(z);
      for (Eigen::Index i = 0; i < n; ++i) {
        loss -= std::log(std::max(p(i, y[static_cast<std::size_t>(i)]), 1e-300));
      }
      loss *= inv_n;
      if (gw) {
        for (Eigen::Index i = 0; i < n; ++i) p(i, y[static_cast<std::size_t>(i)]) -= 1.0;
        *gw = p.transpose() * x * inv_n;
        *gb = p.colwise().sum().transpose() * inv_n;
      }
    }
    const double reg = 0.5 * l2 * inv_n * w.squaredNorm();
    if (gw) *gw += (l2 * inv_n) * w;
    return loss + reg;
  }
};

}  // namespace

std::shared_ptr<LogisticClassifier> train_logistic(const TabularDataset& train, const LogisticConfig& config) {
  require(train.n_rows() > 0, "train_logistic: empty training data");
  std::set<int> present(train.labels.begin(), train.labels.end());
  require(present.size() >= 2, "train_logistic: training labels contain a single class");

  const int k = train.n_classes();
  const int d = static_cast<int>(train.n_features());
  const int rows = k == 2 ? 1 : k;
  Matrix w = Matrix::Zero(rows, d);
  Vector b = Vector::Zero(rows);
  Objective obj{train.features, train.labels, k, config.l2_strength};

  Matrix gw(rows, d);
  Vector gb(rows);
  double value = obj.eval(w, b, &gw, &gb);
  double step = 1.0;
  int iter = 0;
  double grad_norm = std::sqrt(gw.squaredNorm() + gb.squaredNorm());
  while (grad_norm > config.grad_tol) {
    require(iter < config.max_iters,
            "train_logistic: no convergence after " + std::to_string(config.max_iters) +
                " iterations, gradient norm " + std::to_string(grad_norm));
    // Armijo backtracking, warm-started step
    const double slope = gw.squaredNorm() + gb.squaredNorm();
    step *= 2.0;
    Matrix w_next;
    Vector b_next;
    double value_next;
    for (;;) {
      w_next = w - step * gw;
      b_next = b - step * gb;
      value_next = obj.eval(w_next, b_next, nullptr, nullptr);
      if (value_next <= value - 1e-4 * step * slope) break;
      step *= 0.5;
      require(step > 1e-18, "train_logistic: line search failed");
    }
    w = std::move(w_next);
    b = std::move(b_next);
    value = obj.eval(w, b, &gw, &gb);
    grad_norm = std::sqrt(gw.squaredNorm() + gb.squaredNorm());
    ++iter;
  }

  return std::make_shared<LogisticClassifier>(std::move(w), std::move(b), k, config);
}

Matrix LogisticClassifier::predict_logits(const Matrix& x) const {
  require(x.cols() == weights_.cols(), "logistic: feature count mismatch");
  if (n_classes_ == 2) {
    Matrix z(x.rows(), 2);
    z.col(0).setZero();
    z.col(1) = x * weights_.row(0).transpose();
    z.col(1).array() += bias_(0);
    return z;
  }
  Matrix z = x * weights_.transpose();
  z.rowwise() += bias_.transpose();
  return z;
}

Matrix LogisticClassifier::predict_proba(const Matrix& x) const { return softmax_rows(predict_logits(x)); }

Vector LogisticClassifier::input_gradient(const Vector& x, int target_class) const {
  (void)x;
  require(target_class >= 0 && target_class < n_classes_, "logistic: target class out of range");
  if (n_classes_ == 2) {
    if (target_class == 0) return Vector::Zero(weights_.cols());
    return weights_.row(0).transpose();
  }
  return weights_.row(target_class).transpose();
}

Vector LogisticClassifier::cross_entropy_input_gradient(const Vector& x, int label) const {
  require(label >= 0 && label < n_classes_, "logistic: label out of range");
  const Matrix p = predict_proba(x.transpose());
  if (n_classes_ == 2) {
    const double r = p(0, 1) - (label == 1 ? 1.0 : 0.0);
    return r * weights_.row(0).transpose();
  }
  Vector g = Vector::Zero(x.size());
  for (int c = 0; c < n_classes_; ++c) {
    g += (p(0, c) - (c == label ? 1.0 : 0.0)) * weights_.row(c).transpose();
  }
  return g;
}

Matrix BootstrapLogistic::predict_proba(const Matrix& x) const {
  Matrix acc = members_.front()->predict_proba(x);
  for (std::size_t m = 1; m < members_.size(); ++m) acc += members_[m]->predict_proba(x);
  return acc / static_cast<double>(members_.size());
}

std::vector<Matrix> BootstrapLogistic::per_member_proba(const Matrix& x, std::uint64_t) const {
  std::vector<Matrix> out;
  out.reserve(members_.size());
  for (const auto& m : members_) out.push_back(m->predict_proba(x));
  return out;
}

std::shared_ptr<BootstrapLogistic> train_logistic_bootstrap(const TabularDataset& train, int n_members,
                                                            std::uint64_t seed, const LogisticConfig& config) {
  require(n_members >= 2, "train_logistic_bootstrap: need at least 2 members");
  const std::size_t n = static_cast<std::size_t>(train.n_rows());
  std::vector<std::shared_ptr<LogisticClassifier>> members;
  members.reserve(static_cast<std::size_t>(n_members));
  Rng rng(seed);
  for (int m = 0; m < n_members; ++m) {
    Rng sub = rng.substream(static_cast<std::uint64_t>(m));
    std::vector<std::size_t> idx(n);
    TabularDataset resampled;
    // resample until at least two classes are present (tiny inputs can
    // produce single-class draws)
    for (int attempt = 0;; ++attempt) {
      for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::size_t>(sub.uniform_int(n));
      resampled = take_rows(train, idx);
      std::set<int> present(resampled.labels.begin(), resampled.labels.end());
      if (present.size() >= 2) break;
      require(attempt < 64, "train_logistic_bootstrap: could not draw a multi-class resample");
    }
    members.push_back(train_logistic(resampled, config));
  }
  return std::make_shared<BootstrapLogistic>(std::move(members));
}

}  // namespace uqxai

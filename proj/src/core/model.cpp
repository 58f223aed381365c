#include "model.hpp"

namespace uqxai {

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

std::vector<int> ProbabilisticClassifier::predict(const Matrix& x) const {
  const Matrix p = predict_proba(x);
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index arg;
    p.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

Vector ProbabilisticClassifier::cross_entropy_input_gradient(const Vector& x, int label) const {
  require(capabilities().has_gradients, kind() + ": gradient capability absent");
  const int k = n_classes();
  require(label >= 0 && label < k, "cross_entropy_input_gradient: label out of range");
  Matrix xm = x.transpose();
  const Matrix p = predict_proba(xm);
  Vector g = Vector::Zero(x.size());
  for (int c = 0; c < k; ++c) {
    const double coeff = p(0, c) - (c == label ? 1.0 : 0.0);
    if (coeff != 0.0) g += coeff * input_gradient(x, c);
  }
  return g;
}

}  // namespace uqxai

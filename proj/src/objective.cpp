#include "cfx/objective.hpp"

#include <cmath>
#include <limits>

namespace cfx {
namespace {

void check_dims(const Vec& z, const Vec& x) {
  if (z.size() != x.size()) {
    throw std::invalid_argument("objective: candidate/reference mismatch");
  }
}

// squared error (y' - a z - b)^T l (y' - a z - b) and gradient
LossEval linear_fidelity(const Vec& z, const Vec& y_prime,
                         const LinearLikelihood& lik) {
  const Vec r = y_prime - lik.a * z - lik.b;
  LossEval ev;
  ev.value = r.dot(lik.l * r);
  ev.grad = -2.0 * lik.a.transpose() * (lik.l * r);
  return ev;
}

// quadratic part of the "ours" objective around c = (1-alpha) mu + alpha x
LossEval ours_quadratic(const Vec& z, const Vec& x, const DataPrior& prior,
                        double alpha) {
  const Mat& lam = prior.precision();
  const Vec c = (1.0 - alpha) * prior.mu() + alpha * x;
  const Vec lz = lam * z;
  LossEval ev;
  ev.value = z.dot(lz) - 2.0 * z.dot(lam * c);
  ev.grad = 2.0 * (lz - lam * c);
  return ev;
}

// (z - mu)^T (gamma2 * diag(diag(lam))) (z - mu)
LossEval anchor_penalty(const Vec& z, const DataPrior& prior, double gamma2) {
  const Vec d = gamma2 * prior.precision().diagonal();
  const Vec dev = z - prior.mu();
  LossEval ev;
  ev.value = dev.dot(d.asDiagonal() * dev);
  ev.grad = 2.0 * d.asDiagonal() * dev;
  return ev;
}

}  // namespace

LinearLikelihood::LinearLikelihood(Mat a_, Vec b_, Mat l_)
    : a(std::move(a_)), b(std::move(b_)), l(std::move(l_)) {
  if (a.rows() != b.size() || l.rows() != l.cols() || l.rows() != a.rows()) {
    throw std::invalid_argument("LinearLikelihood: shape mismatch");
  }
  if ((l - l.transpose()).cwiseAbs().maxCoeff() >
      1e-9 * std::max(1.0, l.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("LinearLikelihood: precision not symmetric");
  }
}

LossEval wachter_loss(const Vec& z, const Vec& x, int target,
                      const SplitClassifier& clf, const ObjectiveConfig& cfg) {
  check_dims(z, x);
  LossEval ev;
  ev.value = clf.nll(z, target) + cfg.gamma * (z - x).squaredNorm();
  ev.grad = clf.grad_input(z, target) + 2.0 * cfg.gamma * (z - x);
  return ev;
}

LossEval ours_loss(const Vec& z, const Vec& x, int target,
                   const SplitClassifier& clf, const DataPrior& prior,
                   const ObjectiveConfig& cfg) {
  check_dims(z, x);
  LossEval ev = ours_quadratic(z, x, prior, cfg.alpha);
  ev.value += cfg.gamma * clf.nll(z, target);
  ev.grad += cfg.gamma * clf.grad_input(z, target);
  return ev;
}

LossEval regularized_loss(const Vec& z, const Vec& x, int target,
                          const SplitClassifier& clf, const DataPrior& prior,
                          const ObjectiveConfig& cfg) {
  check_dims(z, x);
  LossEval ev;
  ev.value = clf.nll(z, target) + cfg.gamma * (z - x).squaredNorm();
  ev.grad = clf.grad_input(z, target) + 2.0 * cfg.gamma * (z - x);
  LossEval anchor = anchor_penalty(z, prior, cfg.gamma2);
  ev.value += anchor.value;
  ev.grad += anchor.grad;
  return ev;
}

LossEval wachter_loss_linear(const Vec& z, const Vec& x, const Vec& y_prime,
                             const LinearLikelihood& lik,
                             const ObjectiveConfig& cfg) {
  check_dims(z, x);
  LossEval ev = linear_fidelity(z, y_prime, lik);
  ev.value += cfg.gamma * (z - x).squaredNorm();
  ev.grad += 2.0 * cfg.gamma * (z - x);
  return ev;
}

LossEval ours_loss_linear(const Vec& z, const Vec& x, const Vec& y_prime,
                          const LinearLikelihood& lik, const DataPrior& prior,
                          const ObjectiveConfig& cfg) {
  check_dims(z, x);
  LossEval ev = ours_quadratic(z, x, prior, cfg.alpha);
  LossEval fid = linear_fidelity(z, y_prime, lik);
  ev.value += cfg.gamma * fid.value;
  ev.grad += cfg.gamma * fid.grad;
  return ev;
}

LossEval regularized_loss_linear(const Vec& z, const Vec& x,
                                 const Vec& y_prime,
                                 const LinearLikelihood& lik,
                                 const DataPrior& prior,
                                 const ObjectiveConfig& cfg) {
  check_dims(z, x);
  LossEval ev = linear_fidelity(z, y_prime, lik);
  ev.value += cfg.gamma * (z - x).squaredNorm();
  ev.grad += 2.0 * cfg.gamma * (z - x);
  LossEval anchor = anchor_penalty(z, prior, cfg.gamma2);
  ev.value += anchor.value;
  ev.grad += anchor.grad;
  return ev;
}

AdamResult adam_minimize(const LossFn& loss, const Vec& init, int steps,
                         double lr, std::uint64_t /*seed*/) {
  if (steps < 0) throw std::invalid_argument("adam_minimize: steps < 0");
  if (lr <= 0) throw std::invalid_argument("adam_minimize: lr <= 0");
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;

  Vec z = init;
  Vec m = Vec::Zero(init.size());
  Vec v = Vec::Zero(init.size());
  AdamResult res;
  res.solution = init;
  res.value = std::numeric_limits<double>::infinity();
  res.trace.reserve(static_cast<size_t>(steps) + 1);

  for (int t = 0; t <= steps; ++t) {
    LossEval ev = loss(z);
    if (!std::isfinite(ev.value) || !ev.grad.allFinite()) {
      throw OptimDiverged(std::move(res.trace));
    }
    res.trace.push_back(ev.value);
    if (ev.value < res.value) {
      res.value = ev.value;
      res.solution = z;
    }
    if (t == steps) break;
    m = beta1 * m + (1.0 - beta1) * ev.grad;
    v = beta2 * v.array() + (1.0 - beta2) * ev.grad.array().square();
    const double bc1 = 1.0 - std::pow(beta1, t + 1);
    const double bc2 = 1.0 - std::pow(beta2, t + 1);
    z -= (lr * (m / bc1).array() / ((v / bc2).array().sqrt() + eps)).matrix();
  }
  return res;
}

}  // namespace cfx

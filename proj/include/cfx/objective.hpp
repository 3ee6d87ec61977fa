/*
 * Counterfactual search objectives and the shared Adam minimizer.
 *
 * Three families over a candidate z with reference x and desired class t:
 *
 *   wachter:     nll(z, t)                    + gamma * ||z - x||^2
 *   ours:        z^T L z - 2 z^T L c + gamma * nll(z, t),
 *                c = (1 - alpha) mu + alpha x, L = prior precision
 *   regularized: nll(z, t) + gamma * ||z - x||^2
 *                + (z - mu)^T (gamma2 * diag(diag(L))) (z - mu)
 *
 * "ours" is the negative log joint of the coupled prior up to constants:
 * the quadratic pulls z toward the point a fraction alpha along the line
 * from the prior mean to the reference, shaped by the data covariance.
 * Each family also has a linear-likelihood variant (squared error under a
 * regression model y = A z + b with precision L_y replacing the nll) whose
 * minimizers have closed forms; those are the parity oracles for the
 * optimizer tests.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "cfx/gaussian.hpp"
#include "cfx/models.hpp"
#include "cfx/prior.hpp"

namespace cfx {

enum class Variant { kWachter, kOurs, kRegularized };

struct ObjectiveConfig {
  Variant variant = Variant::kWachter;
  double gamma = 1.0;       // fidelity/distance trade-off (gamma_1 in the
                            // regularized family)
  double alpha = 0.0;       // line position for the "ours" quadratic
  double gamma2 = 0.0;      // prior-anchoring weight (regularized family)
  double lambda_div = 0.0;  // pairwise diversity bonus for multi-point search
};

struct LossEval {
  double value = 0.0;
  Vec grad;
};

using LossFn = std::function<LossEval(const Vec&)>;

// Linear regression observation model y = a z + b with precision l.
struct LinearLikelihood {
  Mat a;
  Vec b;
  Mat l;
  LinearLikelihood(Mat a_, Vec b_, Mat l_);
  int out_dim() const { return static_cast<int>(a.rows()); }
  int in_dim() const { return static_cast<int>(a.cols()); }
};

// classifier-fidelity versions
LossEval wachter_loss(const Vec& z, const Vec& x, int target,
                      const SplitClassifier& clf, const ObjectiveConfig& cfg);
LossEval ours_loss(const Vec& z, const Vec& x, int target,
                   const SplitClassifier& clf, const DataPrior& prior,
                   const ObjectiveConfig& cfg);
LossEval regularized_loss(const Vec& z, const Vec& x, int target,
                          const SplitClassifier& clf, const DataPrior& prior,
                          const ObjectiveConfig& cfg);

// squared-error versions under a linear model; same shapes, closed-form
// minimizers
LossEval wachter_loss_linear(const Vec& z, const Vec& x, const Vec& y_prime,
                             const LinearLikelihood& lik,
                             const ObjectiveConfig& cfg);
LossEval ours_loss_linear(const Vec& z, const Vec& x, const Vec& y_prime,
                          const LinearLikelihood& lik, const DataPrior& prior,
                          const ObjectiveConfig& cfg);
LossEval regularized_loss_linear(const Vec& z, const Vec& x,
                                 const Vec& y_prime,
                                 const LinearLikelihood& lik,
                                 const DataPrior& prior,
                                 const ObjectiveConfig& cfg);

struct AdamResult {
  Vec solution;               // best-seen iterate, not necessarily the last
  double value = 0.0;         // loss at solution
  std::vector<double> trace;  // loss at every evaluated iterate
};

struct OptimDiverged : std::runtime_error {
  std::vector<double> trace;
  explicit OptimDiverged(std::vector<double> t)
      : std::runtime_error("optimizer diverged: loss became non-finite"),
        trace(std::move(t)) {}
};

// Plain Adam (beta1 0.9, beta2 0.999, eps 1e-8). The seed is part of the
// signature for stream bookkeeping; the trajectory itself is deterministic.
AdamResult adam_minimize(const LossFn& loss, const Vec& init, int steps,
                         double lr, std::uint64_t seed);

}  // namespace cfx

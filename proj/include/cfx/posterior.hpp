/*
 * Closed-form counterfactual posteriors p(x' | x, y') and the Laplace
 * machinery for nonlinear classifiers.
 *
 * Three graphical-model variants under a linear observation model
 * y' = A x' + b + N(0, L^{-1}):
 *
 *   pgm1: no data prior, x' tied to the reference by precision W:
 *         prec = W + A^T L A,        mean = prec^{-1}(A^T L (y'-b) + W x)
 *   pgm2: the coupled joint prior p(x, x'); with K = (S - W Lam W)^{-1}
 *         where S is the prior covariance and Lam = S^{-1}:
 *         prec = A^T L A + Lam W K W Lam + Lam
 *         mean = prec^{-1}[A^T L (y'-b) + Lam W K (x - mu)
 *                          + (Lam W K W Lam + Lam) mu]
 *   pgm3: independence between x' and x given the prior:
 *         prec = A^T L A + W + Lam,  mean = prec^{-1}(A^T L (y'-b) + W x
 *                                                     + Lam mu)
 *
 * pgm2's mean is a re-derivation: completing the square in x' from
 * log p(y'|x') + log p(x|x') + log p(x') keeps a (x - mu) term AND a mu
 * term that do not merge; the naive form that drops the distinction is
 * wrong whenever mu != 0 (checked against the generic-conditioning oracle,
 * which this routine also asserts against at 1e-6 on full-rank inputs).
 */
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cfx/gaussian.hpp"
#include "cfx/models.hpp"
#include "cfx/objective.hpp"
#include "cfx/prior.hpp"

namespace cfx {

// reference tied directly to the counterfactual with precision w_prec
Gaussian posterior_pgm1(const LinearLikelihood& lik, const Vec& x,
                        const Vec& y_prime, const Mat& w_prec);

// coupled-joint posterior; full-rank joints return the closed form after
// asserting 1e-6 agreement with the conditioning oracle, rank-deficient
// joints (immutable coordinates) fall back to the oracle
Gaussian posterior_pgm2(const JointCfPrior& joint, const LinearLikelihood& lik,
                        const Vec& x, const Vec& y_prime);

Gaussian posterior_pgm3(const DataPrior& prior, const LinearLikelihood& lik,
                        const Vec& x, const Vec& y_prime, const Mat& w_prec);

// Oracle route: assemble the (x, x', y') joint Gaussian and condition on
// (x, y') with the generic machinery. L must be invertible; pass
// L + jitter I when a singular L is being probed.
Gaussian posterior_via_joint(const JointCfPrior& joint,
                             const LinearLikelihood& lik, const Vec& x,
                             const Vec& y_prime);

// Class-conditional prior g(x' | y' = target) for a nonlinear classifier,
// via a Laplace approximation at the x'-mode of p(target | x') p(x').
struct LaplaceConfig {
  int restarts = 8;
  int adam_steps = 1000;
  double adam_lr = 0.05;
  int map_steps = 2000;        // stage-1 head fit
  double map_lr = 0.05;
  double min_target_prob = 0.5;
  double fd_step = 1e-4;       // scaled by (1 + |coord|) per coordinate
  std::uint64_t seed = 0;
};

struct LaplaceClassPrior {
  int target = 0;
  Gaussian g;             // N(mode, inverse curvature)
  Mat map_head;           // stage-1 MAP head over representations
  bool map_plugin = true; // MAP weights plugged in, no predictive averaging
  bool gauss_newton = false;  // curvature fell back to Gauss-Newton
  double mode_objective = 0.0;
  double mode_grad_norm = 0.0;
  int chosen_restart = 0;
};

// Two stages: (1) MAP multinomial head on representations with targets =
// the classifier's own hard predictions under an N(0, I) weight prior;
// (2) multi-start ascent of log p_hat(target | x') + log prior(x'),
// curvature from a central-difference Hessian at the winning mode.
// Throws if no restart attains min_target_prob at its local mode.
LaplaceClassPrior laplace_class_prior(const SplitClassifier& clf,
                                      const Mat& rows, const DataPrior& prior,
                                      int target, const LaplaceConfig& cfg);

// p(x' | x, y' = target) for the nonlinear route: the class prior g plays
// the x' marginal, the coupled prior supplies p(x | x'), and the joint is
// assembled in covariance form and conditioned on x.
Gaussian posterior_laplace(const LaplaceClassPrior& class_prior,
                           const JointCfPrior& joint, const Vec& x);

// Same posterior through the precision-block route (the appendix form);
// kept as an independent cross-check of posterior_laplace.
Gaussian posterior_laplace_precision_route(
    const LaplaceClassPrior& class_prior, const JointCfPrior& joint,
    const Vec& x);

}  // namespace cfx

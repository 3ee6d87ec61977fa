/*
 * Mutable-but-nonactionable features.
 *
 * Some coordinates cannot be intervened on directly but still move when
 * their causal ancestors do (savings when income changes). The posterior
 * over all coordinates is split: the actionable block keeps its Gaussian,
 * the nonactionable block is re-expressed as a fitted linear-Gaussian
 * conditional on its ancestors and recomposed after sampling/optimizing,
 * so downstream consumers always see full-dimensional results.
 */
#pragma once

#include <string>
#include <vector>

#include "cfx/gaussian.hpp"

namespace cfx {

enum class FeatureClass { kMutable, kImmutable, kNonactionable };

struct FeaturePolicy {
  std::vector<FeatureClass> classes;  // per latent coordinate
  // ancestors[i] lists the latent coordinates feeding nonactionable i;
  // ignored for other classes
  std::vector<std::vector<int>> ancestors;

  int dim() const { return static_cast<int>(classes.size()); }
  std::vector<int> actionable_coords() const;
  std::vector<int> nonactionable_coords() const;
};

struct SplitPosterior {
  Gaussian actionable;          // marginal over actionable coordinates
  std::vector<int> act_coords;  // positions in the original space
  std::vector<int> non_coords;
};

SplitPosterior split_posterior(const Gaussian& posterior,
                               const FeaturePolicy& policy);

// e = a c + b + N(0, resid_cov) fitted by OLS with intercept on training
// rows (latent space). cond_coords are the regressors actually used,
// in original-space positions.
struct FittedConditional {
  Mat a;
  Vec b;
  Mat resid_cov;
  std::vector<int> cond_coords;
  std::vector<int> out_coords;
};

// Throws on a rank-deficient design, naming the offending columns.
FittedConditional fit_conditional(const Mat& rows,
                                  const std::vector<int>& cond_coords,
                                  const std::vector<int>& out_coords,
                                  double jitter = 1e-9);

// Joint Gaussian over actionable + reconstructed nonactionable blocks,
// re-interleaved to the original coordinate order. The conditional's
// regressors must all be actionable coordinates of the split.
Gaussian recompose(const SplitPosterior& split,
                   const FittedConditional& conditional);

}  // namespace cfx

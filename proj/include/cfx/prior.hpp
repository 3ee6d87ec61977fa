/*
 * Priors over the latent feature space.
 *
 * DataPrior is a plain Gaussian N(mu, sigma) fitted from data (or derived
 * from a linear SCM). JointCfPrior couples a reference x and counterfactual
 * x' through a single symmetric 2n-dimensional Gaussian
 *
 *   (x, x') ~ N([mu; mu], [[sigma, w], [w^T, sigma]]),   w = alpha * sigma,
 *
 * so both marginals equal the data prior and alpha controls how strongly
 * the counterfactual is tied to the reference. Immutable coordinates are
 * tied perfectly: with the 0/1 mutability vector s, the cross block becomes
 * w = s s^T .* (alpha - 1) sigma + sigma, which leaves rows/columns of
 * immutable coordinates at full covariance (correlation 1 with themselves).
 */
#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cfx/gaussian.hpp"

namespace cfx {

enum class PriorSource { kFitted, kScm, kManual };

class DataPrior {
 public:
  DataPrior(Vec mu, Mat sigma, PriorSource source);

  int dim() const { return static_cast<int>(mu_.size()); }
  const Vec& mu() const { return mu_; }
  const Mat& sigma() const { return sigma_; }
  PriorSource source() const { return source_; }
  Gaussian gaussian() const { return Gaussian(mu_, sigma_); }

  // sigma^{-1}; requires a strictly PD sigma. Computed once, shared
  // between copies.
  const Mat& precision() const;

 private:
  Vec mu_;
  Mat sigma_;
  PriorSource source_;
  struct PrecCache {
    std::once_flag once;
    Mat prec;
  };
  std::shared_ptr<PrecCache> cache_;
};

// Sample mean and covariance (m - 1 denominator) plus jitter * I on the
// diagonal. Needs at least two rows; rejects non-finite input.
DataPrior fit_data_prior(const Mat& rows, double jitter = 1e-9);

struct JointCfPrior {
  DataPrior data;
  double alpha;
  Mat w;                             // cross-covariance block cov(x, x')
  std::vector<bool> immutable_mask;  // per latent coordinate
  Gaussian joint;                    // 2n layout: [x (0..n), x' (n..2n)]

  int dim() const { return data.dim(); }
};

// Assembles and PSD-validates the joint. alpha must lie in [0, 1); the
// mask may be empty (all mutable) or one flag per coordinate.
JointCfPrior build_joint(const DataPrior& prior, double alpha,
                         const std::vector<bool>& immutable_mask = {});

// p(x | x') = N(mu + w lambda (x' - mu), sigma - w lambda w^T) with
// lambda = sigma^+. Fast path for the generic condition() on the joint.
Gaussian conditional_reference_given_cf(const JointCfPrior& joint,
                                        const Vec& x_prime);

// Linear-Gaussian structural causal model. Every node is
//   value = sum_k weight_k * parent_k + intercept + N(0, noise_variance);
// a root node's intercept/noise_variance are its mean/variance.
struct ScmNode {
  std::string name;
  std::vector<std::pair<int, double>> parents;  // (node index, edge weight)
  double intercept = 0.0;
  double noise_variance = 0.0;
};

struct LinearScm {
  std::vector<ScmNode> nodes;
};

// Exact ancestral moments by topological traversal. Coordinates of the
// result follow node-declaration order. Throws on cycles and bad parent
// indices.
DataPrior scm_to_gaussian(const LinearScm& scm);

}  // namespace cfx

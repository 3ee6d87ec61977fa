/*
 * Dense multivariate Gaussians with degenerate (rank-deficient) support.
 *
 * A Gaussian is immutable after construction. Covariances are symmetrized
 * on construction and eigenvalues down to -1e-9 are treated as zero, so
 * point masses and conditioned distributions with exactly-zero directions
 * are legal values, not errors. Conditioning goes through a pseudo-inverse
 * so observations along zero-variance directions are honored exactly (and
 * checked for consistency instead of silently dividing by zero).
 */
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

namespace cfx {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Eigenvalues of a covariance may sit this far below zero before the matrix
// is rejected as indefinite; anything in [-kPsdClampTol, 0) is clamped to 0.
inline constexpr double kPsdClampTol = 1e-9;

// Relative eigenvalue cutoff for pseudo-inverses: directions with variance
// below cutoff * trace are treated as deterministic.
inline constexpr double kPinvCutoff = 1e-10;

// Max |v - mean| allowed along a zero-variance direction when conditioning.
inline constexpr double kDegenerateObsTol = 1e-6;

struct CholeskyResult {
  Mat lower;     // lower * lower^T == input + shift * I
  double shift;  // diagonal jitter that was actually needed
};

// Strict Cholesky with escalating jitter: tries shifts
// {0, jitter, 10*jitter, ...} up to 1e6 * jitter and reports the first that
// factors. Fails on asymmetric input, on indefinite input, and on singular
// input when jitter == 0.
CholeskyResult cholesky_psd(const Mat& m, double jitter);

// Strictly increasing, duplicate-free coordinate subset.
class IndexSet {
 public:
  IndexSet() = default;
  explicit IndexSet(std::vector<int> indices);
  static IndexSet range(int begin, int end);

  int size() const { return static_cast<int>(idx_.size()); }
  int operator[](int i) const { return idx_[static_cast<size_t>(i)]; }
  const std::vector<int>& indices() const { return idx_; }
  bool contains(int i) const;
  // all coordinates of [0, dim) not in this set, in increasing order
  IndexSet complement(int dim) const;

 private:
  std::vector<int> idx_;
};

class Gaussian {
 public:
  // Symmetrizes cov and validates positive semidefiniteness (clamping
  // eigenvalues in [-kPsdClampTol, 0)). Throws std::invalid_argument on
  // dimension mismatch, asymmetry beyond tolerance, or indefiniteness.
  Gaussian(Vec mean, Mat cov);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vec& mean() const { return mean_; }
  const Mat& cov() const { return cov_; }

  // Lower-triangular L with ||L L^T - cov||_inf <= 1e-7 * max(1, ||cov||_inf).
  // Rank-deficient covariances get zero columns. Computed once, shared
  // between copies.
  const Mat& factor() const;

  // p(free | observed = values). cov of the result does not depend on
  // values. Throws if values are inconsistent with a zero-variance
  // direction of the observed block.
  Gaussian condition(const IndexSet& observed, const Vec& values) const;

  Gaussian marginalize(const IndexSet& keep) const;

  // n draws, one per row; pure function of (seed, n, *this).
  Mat sample(int n, std::uint64_t seed) const;

  // Throws std::runtime_error on singular covariance.
  double log_pdf(const Vec& x) const;

  // Squared Mahalanobis distance through the pseudo-inverse; well defined
  // for rank-deficient covariances (zero-variance directions contribute 0).
  double mahalanobis_sq(const Vec& x) const;

 private:
  Vec mean_;
  Mat cov_;
  struct FactorCache {
    std::once_flag once;
    Mat lower;
  };
  std::shared_ptr<FactorCache> cache_;
};

}  // namespace cfx

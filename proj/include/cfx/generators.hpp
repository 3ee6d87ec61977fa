/*
 * Counterfactual generators. All four routes share GenRequest/GenResult and
 * are deterministic given the request seed (counter-based streams, no
 * global state).
 *
 *   gen_posterior_sample  draw from the closed-form (or Laplace) posterior,
 *                         with optional actionability recomposition
 *   gen_optimize          Adam on one of the objective variants; supports
 *                         multi-point search with a pairwise diversity bonus
 *   gen_growing_spheres   expanding shells around the reference until the
 *                         classifier flips
 *   gen_face              shortest path to a target-classified training
 *                         point over the mutual-kNN graph
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfx/actionability.hpp"
#include "cfx/gaussian.hpp"
#include "cfx/models.hpp"
#include "cfx/objective.hpp"
#include "cfx/posterior.hpp"
#include "cfx/prior.hpp"

namespace cfx {

// Distance used by the geometric generators and the diversity bonus.
// mahalanobis uses the metric matrix [(1 - alpha^2) sigma]^{-1}; with a
// whitened prior (sigma = I) and alpha = 0 it reproduces euclidean
// draw-for-draw.
class Metric {
 public:
  static Metric euclidean(int dim);
  static Metric mahalanobis(const DataPrior& prior, double alpha);

  double operator()(const Vec& a, const Vec& b) const;
  const Mat& matrix() const { return m_; }
  // B with B^T M_sub B = I on the given coordinates; unit directions map
  // through B onto the metric's unit shell restricted to that subspace
  Mat ball_factor(const std::vector<int>& coords) const;

 private:
  Mat m_;
};

struct GenRequest {
  Vec reference;
  int target = 1;
  int count = 1;
  std::uint64_t seed = 0;
  double validity_threshold = 0.5;
  std::vector<bool> immutable_mask;  // per latent coordinate; may be empty
  ObjectiveConfig objective;         // gen_optimize only
  int adam_steps = 1000;             // gen_optimize only
  double adam_lr = 0.05;             // gen_optimize only
};

struct GenResult {
  Mat points;  // count x n, one counterfactual per row
  std::vector<double> achieved_prob;  // NaN when no classifier is in play
  std::vector<bool> valid;
  double success_rate = 0.0;
  std::string note;
};

// Posterior split/refit/recompose plan for nonactionable coordinates.
struct ActionabilityPlan {
  FeaturePolicy policy;
  FittedConditional conditional;
};

// Linear-likelihood route; clf (optional) scores validity.
GenResult gen_posterior_sample(const GenRequest& req,
                               const JointCfPrior& joint,
                               const LinearLikelihood& lik, const Vec& y_prime,
                               const SplitClassifier* clf = nullptr,
                               const ActionabilityPlan* plan = nullptr);

// Laplace route for classifiers; the class prior fixes the target.
GenResult gen_posterior_sample(const GenRequest& req,
                               const JointCfPrior& joint,
                               const LaplaceClassPrior& class_prior,
                               const SplitClassifier& clf,
                               const ActionabilityPlan* plan = nullptr);

GenResult gen_optimize(const GenRequest& req, const SplitClassifier& clf,
                       const DataPrior& prior);

struct GrowingSpheresParams {
  double r0 = 0.1;
  double growth = 1.3;
  int per_shell = 200;
  int max_shells = 50;
};

GenResult gen_growing_spheres(const GenRequest& req,
                              const SplitClassifier& clf, const Metric& metric,
                              const GrowingSpheresParams& params = {});

// Returns indices into rows alongside the points.
struct FaceResult {
  GenResult gen;
  std::vector<int> row_indices;
  std::vector<double> path_lengths;
};

FaceResult gen_face(const GenRequest& req, const SplitClassifier& clf,
                    const Mat& rows, const Metric& metric, int k = 20);

}  // namespace cfx

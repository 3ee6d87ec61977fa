// Split / fit-conditional / recompose pipeline for mutable-but-nonactionable
// coordinates, checked against OLS theory and ancestral Monte Carlo.

#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "cfx/actionability.hpp"
#include "cfx/gaussian.hpp"
#include "oracles.hpp"

using cfx::FeatureClass;
using cfx::FeaturePolicy;
using cfx::FittedConditional;
using cfx::Gaussian;
using cfx::IndexSet;
using cfx::Mat;
using cfx::SplitPosterior;
using cfx::Vec;

namespace {

FeaturePolicy policy_of(std::vector<FeatureClass> classes,
                        std::vector<std::vector<int>> ancestors) {
  FeaturePolicy p;
  p.classes = std::move(classes);
  p.ancestors = std::move(ancestors);
  return p;
}

}  // namespace

TEST_CASE("split with no nonactionable coordinates is a no-op") {
  std::mt19937_64 gen(3);
  const Gaussian post(oracle::random_vec(3, gen), oracle::random_pd(3, gen));
  const FeaturePolicy policy = policy_of(
      {FeatureClass::kMutable, FeatureClass::kImmutable, FeatureClass::kMutable},
      {{}, {}, {}});
  const SplitPosterior split = cfx::split_posterior(post, policy);
  CHECK(split.non_coords.empty());
  CHECK(split.act_coords == std::vector<int>{0, 1, 2});
  CHECK((split.actionable.mean() - post.mean()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((split.actionable.cov() - post.cov()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("split keeps the principal submatrix of a diagonal posterior") {
  Vec mean(3);
  mean << 1.0, 2.0, 3.0;
  Mat cov = Mat::Zero(3, 3);
  cov.diagonal() << 4.0, 5.0, 6.0;
  const FeaturePolicy policy = policy_of(
      {FeatureClass::kMutable, FeatureClass::kMutable,
       FeatureClass::kNonactionable},
      {{}, {}, {0}});
  const SplitPosterior split = cfx::split_posterior(Gaussian(mean, cov), policy);
  CHECK(split.act_coords == std::vector<int>{0, 1});
  CHECK(split.non_coords == std::vector<int>{2});
  CHECK(split.actionable.mean()(0) == 1.0);
  CHECK(split.actionable.mean()(1) == 2.0);
  CHECK(split.actionable.cov()(0, 0) == 4.0);
  CHECK(split.actionable.cov()(1, 1) == 5.0);
  CHECK(split.actionable.cov()(0, 1) == 0.0);
}

TEST_CASE("split of a correlated posterior matches marginalization") {
  std::mt19937_64 gen(5);
  const Gaussian post(oracle::random_vec(4, gen), oracle::random_pd(4, gen));
  const FeaturePolicy policy = policy_of(
      {FeatureClass::kMutable, FeatureClass::kNonactionable,
       FeatureClass::kMutable, FeatureClass::kMutable},
      {{}, {0, 2}, {}, {}});
  const SplitPosterior split = cfx::split_posterior(post, policy);
  const Gaussian marg = post.marginalize(IndexSet(std::vector<int>{0, 2, 3}));
  CHECK((split.actionable.mean() - marg.mean()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((split.actionable.cov() - marg.cov()).cwiseAbs().maxCoeff() == 0.0);

  const FeaturePolicy all_non = policy_of(
      {FeatureClass::kNonactionable, FeatureClass::kNonactionable,
       FeatureClass::kNonactionable, FeatureClass::kNonactionable},
      {{}, {}, {}, {}});
  CHECK_THROWS_AS(cfx::split_posterior(post, all_non), std::invalid_argument);
}

TEST_CASE("fit_conditional recovers an exact linear relation") {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int m = 50;
  Mat rows(m, 2);
  for (int i = 0; i < m; ++i) {
    rows(i, 0) = normal(gen);
    rows(i, 1) = 2.0 * rows(i, 0) + 1.0;
  }
  const double jitter = 1e-9;
  const FittedConditional fit = cfx::fit_conditional(rows, {0}, {1}, jitter);
  CHECK(fit.a(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(fit.b(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fit.resid_cov(0, 0) <= 2.0 * jitter);
}

TEST_CASE("fit_conditional on independent data stays within OLS error bars") {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int m = 2000;
  Mat rows(m, 2);
  for (int i = 0; i < m; ++i) {
    rows(i, 0) = normal(gen);
    rows(i, 1) = normal(gen);
  }
  const FittedConditional fit = cfx::fit_conditional(rows, {0}, {1});
  // standard error of the slope from OLS theory
  const double cbar = rows.col(0).mean();
  const double sxx = (rows.col(0).array() - cbar).square().sum();
  const double se = std::sqrt(fit.resid_cov(0, 0) / sxx);
  CHECK(std::abs(fit.a(0, 0)) <= 4.0 * se);
}

TEST_CASE("fit_conditional recovers a noisy two-regressor relation") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::normal_distribution<double> eps(0.0, 0.1);
  const int m = 10000;
  Mat rows(m, 3);
  for (int i = 0; i < m; ++i) {
    rows(i, 0) = normal(gen);
    rows(i, 1) = normal(gen);
    rows(i, 2) = rows(i, 0) - rows(i, 1) + eps(gen);
  }
  const FittedConditional fit = cfx::fit_conditional(rows, {0, 1}, {2});
  CHECK(std::abs(fit.a(0, 0) - 1.0) <= 0.05);
  CHECK(std::abs(fit.a(0, 1) + 1.0) <= 0.05);
  CHECK(std::abs(fit.b(0)) <= 0.05);
  CHECK(fit.resid_cov(0, 0) == doctest::Approx(0.01).epsilon(0.1));
}

TEST_CASE("fit_conditional names rank-deficient columns") {
  std::mt19937_64 gen(13);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int m = 40;
  Mat rows(m, 3);
  for (int i = 0; i < m; ++i) {
    rows(i, 0) = normal(gen);
    rows(i, 1) = rows(i, 0);  // duplicated regressor
    rows(i, 2) = normal(gen);
  }
  CHECK_THROWS_WITH_AS(cfx::fit_conditional(rows, {0, 1}, {2}),
                       doctest::Contains("latent["), std::runtime_error);

  // too few rows for the design
  CHECK_THROWS_AS(cfx::fit_conditional(rows.topRows(3), {0, 1}, {2}),
                  std::invalid_argument);
  CHECK_THROWS_AS(cfx::fit_conditional(rows, {}, {2}), std::invalid_argument);
  CHECK_THROWS_AS(cfx::fit_conditional(rows, {5}, {2}), std::invalid_argument);
}

TEST_CASE("recompose with a zero slope keeps the block independent") {
  std::mt19937_64 gen(17);
  SplitPosterior split{
      Gaussian(oracle::random_vec(2, gen), oracle::random_pd(2, gen)),
      {0, 1},
      {2}};
  FittedConditional cond;
  cond.a = Mat::Zero(1, 2);
  cond.b = Vec::Constant(1, 3.0);
  cond.resid_cov = Mat::Constant(1, 1, 0.25);
  cond.cond_coords = {0, 1};
  cond.out_coords = {2};
  const Gaussian full = cfx::recompose(split, cond);
  CHECK(full.dim() == 3);
  CHECK(full.mean()(2) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(full.cov()(2, 2) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(std::abs(full.cov()(0, 2)) <= 1e-12);
  CHECK(std::abs(full.cov()(1, 2)) <= 1e-12);
}

TEST_CASE("recompose with zero residuals enforces the deterministic link") {
  std::mt19937_64 gen(19);
  SplitPosterior split{
      Gaussian(oracle::random_vec(2, gen), oracle::random_pd(2, gen)),
      {0, 1},
      {2}};
  FittedConditional cond;
  cond.a = Mat(1, 2);
  cond.a << 1.5, -0.5;
  cond.b = Vec::Constant(1, 0.75);
  cond.resid_cov = Mat::Zero(1, 1);
  cond.cond_coords = {0, 1};
  cond.out_coords = {2};
  const Gaussian full = cfx::recompose(split, cond);
  const Mat draws = full.sample(1000, 42);
  for (int i = 0; i < draws.rows(); ++i) {
    const double e = draws(i, 2);
    const double pred =
        cond.a(0, 0) * draws(i, 0) + cond.a(0, 1) * draws(i, 1) + cond.b(0);
    CHECK(std::abs(e - pred) <= 1e-9);
  }

  // splitting the deterministic joint and recomposing round-trips exactly
  const FeaturePolicy policy = policy_of(
      {FeatureClass::kMutable, FeatureClass::kMutable,
       FeatureClass::kNonactionable},
      {{}, {}, {0, 1}});
  const SplitPosterior again = cfx::split_posterior(full, policy);
  const Gaussian back = cfx::recompose(again, cond);
  CHECK((back.mean() - full.mean()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((back.cov() - full.cov()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("recomposed moments match ancestral sampling") {
  std::mt19937_64 gen(23);
  const Vec mc = oracle::random_vec(2, gen);
  const Mat sc = oracle::random_pd(2, gen);
  SplitPosterior split{Gaussian(mc, sc), {0, 1}, {2}};
  FittedConditional cond;
  cond.a = Mat(1, 2);
  cond.a << 0.8, -1.1;
  cond.b = Vec::Constant(1, 0.3);
  cond.resid_cov = Mat::Constant(1, 1, 0.2);
  cond.cond_coords = {0, 1};
  cond.out_coords = {2};
  const Gaussian full = cfx::recompose(split, cond);

  // ancestral route: draw c, then e | c, accumulate raw moments
  const Eigen::LLT<Mat> llt(sc);
  const Mat chol = llt.matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = 1000000;
  Vec sum = Vec::Zero(3);
  Mat sq = Mat::Zero(3, 3);
  for (int i = 0; i < n; ++i) {
    Vec u(2);
    u << normal(gen), normal(gen);
    Vec c = mc + chol * u;
    const double e = cond.a(0, 0) * c(0) + cond.a(0, 1) * c(1) + cond.b(0) +
                     std::sqrt(cond.resid_cov(0, 0)) * normal(gen);
    Vec row(3);
    row << c(0), c(1), e;
    sum += row;
    sq += row * row.transpose();
  }
  const Vec mean = sum / double(n);
  const Mat cov = sq / double(n) - mean * mean.transpose();
  CHECK((full.mean() - mean).cwiseAbs().maxCoeff() <= 0.02);
  CHECK((full.cov() - cov).cwiseAbs().maxCoeff() <= 0.02);
}

TEST_CASE("recompose restores interleaved coordinate order") {
  std::mt19937_64 gen(29);
  const Gaussian post(oracle::random_vec(4, gen), oracle::random_pd(4, gen));
  const FeaturePolicy policy = policy_of(
      {FeatureClass::kNonactionable, FeatureClass::kMutable,
       FeatureClass::kNonactionable, FeatureClass::kMutable},
      {{1}, {}, {3}, {}});
  const SplitPosterior split = cfx::split_posterior(post, policy);
  CHECK(split.act_coords == std::vector<int>{1, 3});
  CHECK(split.non_coords == std::vector<int>{0, 2});

  FittedConditional cond;
  cond.a = Mat(2, 2);
  cond.a << 2.0, 0.0, 0.0, -1.0;  // e0 = 2 c1, e2 = -c3 (plus intercepts)
  cond.b = Vec(2);
  cond.b << 0.5, -0.5;
  cond.resid_cov = 0.1 * Mat::Identity(2, 2);
  cond.cond_coords = {1, 3};
  cond.out_coords = {0, 2};
  const Gaussian full = cfx::recompose(split, cond);
  CHECK(full.dim() == 4);
  CHECK(full.mean()(1) == doctest::Approx(post.mean()(1)).epsilon(1e-12));
  CHECK(full.mean()(3) == doctest::Approx(post.mean()(3)).epsilon(1e-12));
  CHECK(full.mean()(0) ==
        doctest::Approx(2.0 * post.mean()(1) + 0.5).epsilon(1e-12));
  CHECK(full.mean()(2) ==
        doctest::Approx(-post.mean()(3) - 0.5).epsilon(1e-12));
  // cross-covariance lands at the interleaved positions
  CHECK(full.cov()(0, 1) ==
        doctest::Approx(2.0 * post.cov()(1, 1)).epsilon(1e-9));
  CHECK(full.cov()(2, 3) ==
        doctest::Approx(-post.cov()(3, 3)).epsilon(1e-9));

  // a regressor outside the actionable set is rejected
  FittedConditional bad = cond;
  bad.cond_coords = {0, 3};
  CHECK_THROWS_AS(cfx::recompose(split, bad), std::invalid_argument);
}

TEST_CASE("sampled nonactionable noise matches the fitted residual variance") {
  std::mt19937_64 gen(31);
  SplitPosterior split{
      Gaussian(oracle::random_vec(2, gen), oracle::random_pd(2, gen)),
      {0, 1},
      {2}};
  FittedConditional cond;
  cond.a = Mat(1, 2);
  cond.a << 1.2, 0.4;
  cond.b = Vec::Constant(1, -0.2);
  cond.resid_cov = Mat::Constant(1, 1, 0.35);
  cond.cond_coords = {0, 1};
  cond.out_coords = {2};
  const Gaussian full = cfx::recompose(split, cond);
  const Mat draws = full.sample(100000, 7);
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < draws.rows(); ++i) {
    const double r = draws(i, 2) - (cond.a(0, 0) * draws(i, 0) +
                                    cond.a(0, 1) * draws(i, 1) + cond.b(0));
    sum += r;
    sq += r * r;
  }
  const double mean = sum / double(draws.rows());
  const double var = sq / double(draws.rows()) - mean * mean;
  CHECK(std::abs(var - cond.resid_cov(0, 0)) <= 0.1 * cond.resid_cov(0, 0));
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "cfx/prior.hpp"
#include "oracles.hpp"

using cfx::build_joint;
using cfx::DataPrior;
using cfx::fit_data_prior;
using cfx::Gaussian;
using cfx::IndexSet;
using cfx::JointCfPrior;
using cfx::LinearScm;
using cfx::Mat;
using cfx::PriorSource;
using cfx::ScmNode;
using cfx::Vec;

TEST_CASE("fit_data_prior on two diagonal points") {
  Mat rows(2, 2);
  rows << 0, 0, 2, 2;
  const DataPrior p = fit_data_prior(rows, 0.01);
  CHECK(p.mu()(0) == 1.0);
  CHECK(p.mu()(1) == 1.0);
  CHECK(p.sigma()(0, 0) == doctest::Approx(2.01).epsilon(1e-14));
  CHECK(p.sigma()(0, 1) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(p.sigma()(1, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(p.sigma()(1, 1) == doctest::Approx(2.01).epsilon(1e-14));
  CHECK(p.source() == PriorSource::kFitted);
}

TEST_CASE("fit_data_prior of a constant dataset is pure jitter") {
  Mat rows(5, 3);
  for (int i = 0; i < 5; ++i) rows.row(i) << 1.0, -2.0, 0.5;
  const DataPrior p = fit_data_prior(rows, 0.05);
  CHECK((p.sigma() - 0.05 * Mat::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fit_data_prior rejects degenerate input and yields PD sigma") {
  Mat one_row(1, 2);
  one_row << 1, 2;
  CHECK_THROWS_AS(fit_data_prior(one_row, 1e-9), std::invalid_argument);

  Mat bad(2, 2);
  bad << 0, 1, std::nan(""), 2;
  CHECK_THROWS_AS(fit_data_prior(bad, 1e-9), std::invalid_argument);

  std::mt19937_64 gen(2);
  Mat rows(20, 4);
  for (int i = 0; i < rows.rows(); ++i) {
    rows.row(i) = oracle::random_vec(4, gen).transpose();
  }
  const DataPrior p = fit_data_prior(rows, 1e-6);
  CHECK_NOTHROW(p.precision());
  CHECK((p.precision() * p.sigma() - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() <
        1e-8);
}

TEST_CASE("build_joint without a mask uses w = alpha sigma") {
  std::mt19937_64 gen(3);
  const Mat sigma = oracle::random_pd(3, gen);
  const DataPrior prior(oracle::random_vec(3, gen), sigma,
                        PriorSource::kManual);
  const JointCfPrior j = build_joint(prior, 0.7);
  CHECK((j.w - 0.7 * sigma).cwiseAbs().maxCoeff() == 0.0);
  // both marginals are the data distribution
  const Gaussian xp = j.joint.marginalize(IndexSet::range(3, 6));
  CHECK((xp.mean() - prior.mu()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((xp.cov() - sigma).cwiseAbs().maxCoeff() < 1e-12);
  const Gaussian x = j.joint.marginalize(IndexSet::range(0, 3));
  CHECK((x.cov() - sigma).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("build_joint immutable mask pins diagonal cross-covariances") {
  const DataPrior prior(Vec::Zero(2), Mat::Identity(2, 2),
                        PriorSource::kManual);
  const JointCfPrior j = build_joint(prior, 0.5, {true, false});
  Mat expected(2, 2);
  expected << 1.0, 0.5, 0.5, 0.5;  // off-diagonals of I are zero anyway
  CHECK(j.w(0, 0) == 1.0);
  CHECK(j.w(1, 1) == 0.5);

  // weak correlations keep the masked joint PSD (strong ones cannot; see
  // the rejection test below)
  std::mt19937_64 gen(4);
  Mat sigma = oracle::random_pd(4, gen);
  const Mat diag_part = sigma.diagonal().asDiagonal();
  sigma = 0.25 * sigma + 0.75 * diag_part;
  const DataPrior p2(Vec::Zero(4), sigma, PriorSource::kManual);
  const JointCfPrior j2 = build_joint(p2, 0.3, {false, true, false, true});
  // elementwise factor s_i s_k (alpha - 1) + 1 with s = 0 on immutable:
  // tied and mixed pairs keep full covariance, mutable pairs get alpha
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 4; ++k) {
      const double si = (i == 1 || i == 3) ? 0.0 : 1.0;
      const double sk = (k == 1 || k == 3) ? 0.0 : 1.0;
      const double factor = si * sk * (0.3 - 1.0) + 1.0;
      CHECK(j2.w(i, k) == doctest::Approx(factor * sigma(i, k)));
    }
  }
}

TEST_CASE("a masked joint with overwhelming cross-correlation is rejected") {
  // immutable coordinate correlated 0.9 with a mutable one at alpha 0.3:
  // the implied 2n-dimensional covariance is indefinite, which the
  // constructor must refuse rather than ship
  Mat sigma(2, 2);
  sigma << 1.0, 0.9, 0.9, 1.0;
  const DataPrior prior(Vec::Zero(2), sigma, PriorSource::kManual);
  CHECK_THROWS_WITH_AS(build_joint(prior, 0.3, {true, false}),
                       doctest::Contains("lower alpha"),
                       std::invalid_argument);
  // the same prior is fine with no mask or with high alpha
  CHECK_NOTHROW(build_joint(prior, 0.3));
  CHECK_NOTHROW(build_joint(prior, 0.9, {true, false}));
}

TEST_CASE("build_joint validates alpha") {
  const DataPrior prior(Vec::Zero(1), Mat::Identity(1, 1),
                        PriorSource::kManual);
  CHECK_THROWS_AS(build_joint(prior, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_joint(prior, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(build_joint(prior, 0.5, {true, false}),
                  std::invalid_argument);  // mask size mismatch
  CHECK_NOTHROW(build_joint(prior, 0.0));
  CHECK_NOTHROW(build_joint(prior, 0.995));
}

TEST_CASE("alpha = 0 decouples the reference from the counterfactual") {
  std::mt19937_64 gen(5);
  const Mat sigma = oracle::random_pd(2, gen);
  const Vec mu = oracle::random_vec(2, gen);
  const DataPrior prior(mu, sigma, PriorSource::kManual);
  const JointCfPrior j = build_joint(prior, 0.0);
  const Vec x = oracle::random_vec(2, gen);
  const Gaussian cond = j.joint.condition(IndexSet::range(0, 2), x);
  CHECK((cond.mean() - mu).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((cond.cov() - sigma).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("conditional_reference_given_cf matches hand value and oracle") {
  const DataPrior prior(Vec::Zero(1), Mat::Identity(1, 1),
                        PriorSource::kManual);
  const JointCfPrior j = build_joint(prior, 0.5);
  Vec xp(1);
  xp << 1.0;
  const Gaussian c = cfx::conditional_reference_given_cf(j, xp);
  CHECK(c.mean()(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c.cov()(0, 0) == doctest::Approx(0.75).epsilon(1e-12));

  // alpha = 0: conditional is the data prior for any x'
  const JointCfPrior j0 = build_joint(prior, 0.0);
  Vec far(1);
  far << 40.0;
  const Gaussian c0 = cfx::conditional_reference_given_cf(j0, far);
  CHECK(c0.mean()(0) == doctest::Approx(0.0));
  CHECK(c0.cov()(0, 0) == doctest::Approx(1.0));

  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + int(gen() % 4);
    const DataPrior p(oracle::random_vec(n, gen), oracle::random_pd(n, gen),
                      PriorSource::kManual);
    const JointCfPrior joint = build_joint(p, 0.1 + 0.8 * (gen() % 9) / 9.0);
    const Vec xprime = oracle::random_vec(n, gen);
    const Gaussian got = cfx::conditional_reference_given_cf(joint, xprime);
    std::vector<int> obs;
    for (int i = n; i < 2 * n; ++i) obs.push_back(i);
    const auto ref = oracle::condition(joint.joint.mean(), joint.joint.cov(),
                                       obs, xprime);
    CHECK((got.mean() - ref.mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((got.cov() - ref.cov).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("immutable coordinates condition to the observed value") {
  std::mt19937_64 gen(7);
  const Mat sigma = oracle::random_pd(3, gen);
  const DataPrior prior(oracle::random_vec(3, gen), sigma,
                        PriorSource::kManual);
  const JointCfPrior j = build_joint(prior, 0.4, {false, true, false});
  const Vec xp = oracle::random_vec(3, gen);
  const Gaussian c = cfx::conditional_reference_given_cf(j, xp);
  CHECK(std::abs(c.mean()(1) - xp(1)) < 1e-9);
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(c.cov()(1, k)) < 1e-9);
    CHECK(std::abs(c.cov()(k, 1)) < 1e-9);
  }
}

TEST_CASE("scm_to_gaussian worked pair") {
  LinearScm scm;
  scm.nodes.push_back(ScmNode{"C", {}, 0.0, 1.0});
  scm.nodes.push_back(ScmNode{"E", {{0, 2.0}}, 1.0, 0.5});
  const DataPrior p = cfx::scm_to_gaussian(scm);
  CHECK(p.source() == PriorSource::kScm);
  CHECK(p.mu()(0) == doctest::Approx(0.0));
  CHECK(p.mu()(1) == doctest::Approx(1.0));
  CHECK(p.sigma()(0, 0) == doctest::Approx(1.0));
  CHECK(p.sigma()(0, 1) == doctest::Approx(2.0));
  CHECK(p.sigma()(1, 1) == doctest::Approx(4.5));

  const auto mc = oracle::scm_mc(scm, 1000000, 99);
  CHECK((p.mu() - mc.mean).cwiseAbs().maxCoeff() < 0.02);
  CHECK((p.sigma() - mc.cov).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("scm_to_gaussian roots give a diagonal prior") {
  LinearScm scm;
  scm.nodes.push_back(ScmNode{"a", {}, 2.0, 0.25});
  scm.nodes.push_back(ScmNode{"b", {}, -1.0, 4.0});
  const DataPrior p = cfx::scm_to_gaussian(scm);
  CHECK(p.mu()(0) == 2.0);
  CHECK(p.mu()(1) == -1.0);
  CHECK(p.sigma()(0, 0) == 0.25);
  CHECK(p.sigma()(1, 1) == 4.0);
  CHECK(p.sigma()(0, 1) == 0.0);
}

TEST_CASE("scm_to_gaussian chain accumulates variance") {
  LinearScm scm;
  scm.nodes.push_back(ScmNode{"C", {}, 0.0, 1.0});
  scm.nodes.push_back(ScmNode{"E1", {{0, 1.0}}, 0.0, 1.0});
  scm.nodes.push_back(ScmNode{"E2", {{1, 1.0}}, 0.0, 1.0});
  const DataPrior p = cfx::scm_to_gaussian(scm);
  CHECK(p.sigma()(2, 2) == doctest::Approx(3.0));
  CHECK(p.sigma()(0, 2) == doctest::Approx(1.0));
}

TEST_CASE("scm_to_gaussian keeps declaration order with forward parents") {
  LinearScm scm;
  scm.nodes.push_back(ScmNode{"E", {{1, 2.0}}, 1.0, 0.5});
  scm.nodes.push_back(ScmNode{"C", {}, 0.0, 1.0});
  const DataPrior p = cfx::scm_to_gaussian(scm);
  CHECK(p.mu()(0) == doctest::Approx(1.0));  // E first, as declared
  CHECK(p.mu()(1) == doctest::Approx(0.0));
  CHECK(p.sigma()(0, 0) == doctest::Approx(4.5));
  CHECK(p.sigma()(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("scm_to_gaussian rejects cycles and bad indices") {
  LinearScm cyclic;
  cyclic.nodes.push_back(ScmNode{"a", {{1, 1.0}}, 0.0, 1.0});
  cyclic.nodes.push_back(ScmNode{"b", {{0, 1.0}}, 0.0, 1.0});
  CHECK_THROWS_AS(cfx::scm_to_gaussian(cyclic), std::invalid_argument);

  LinearScm bad;
  bad.nodes.push_back(ScmNode{"a", {{5, 1.0}}, 0.0, 1.0});
  CHECK_THROWS_AS(cfx::scm_to_gaussian(bad), std::invalid_argument);

  LinearScm neg;
  neg.nodes.push_back(ScmNode{"a", {}, 0.0, -1.0});
  CHECK_THROWS(cfx::scm_to_gaussian(neg));
}

#include "cfx/prior.hpp"

#include <cmath>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace cfx {

DataPrior::DataPrior(Vec mu, Mat sigma, PriorSource source)
    : mu_(std::move(mu)),
      sigma_(std::move(sigma)),
      source_(source),
      cache_(std::make_shared<PrecCache>()) {
  // Gaussian's constructor owns the symmetry/PSD checks.
  Gaussian probe(mu_, sigma_);
  sigma_ = probe.cov();
}

const Mat& DataPrior::precision() const {
  std::call_once(cache_->once, [&] {
    Eigen::LLT<Mat> llt(sigma_);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error(
          "DataPrior::precision: sigma is not strictly positive definite");
    }
    Mat prec = llt.solve(Mat::Identity(dim(), dim()));
    cache_->prec = 0.5 * (prec + prec.transpose());
  });
  return cache_->prec;
}

DataPrior fit_data_prior(const Mat& rows, double jitter) {
  const int m = static_cast<int>(rows.rows());
  const int n = static_cast<int>(rows.cols());
  if (m < 2) {
    throw std::invalid_argument(
        "fit_data_prior: need at least two rows for a sample covariance");
  }
  if (!rows.allFinite()) {
    throw std::invalid_argument("fit_data_prior: non-finite value in data");
  }
  if (jitter < 0) throw std::invalid_argument("fit_data_prior: jitter < 0");
  Vec mu = rows.colwise().mean();
  Mat centered = rows.rowwise() - mu.transpose();
  Mat sigma = (centered.transpose() * centered) / double(m - 1);
  sigma.diagonal().array() += jitter;
  return DataPrior(std::move(mu), std::move(sigma), PriorSource::kFitted);
}

JointCfPrior build_joint(const DataPrior& prior, double alpha,
                         const std::vector<bool>& immutable_mask) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("build_joint: alpha must lie in [0, 1)");
  }
  const int n = prior.dim();
  if (!immutable_mask.empty() &&
      static_cast<int>(immutable_mask.size()) != n) {
    throw std::invalid_argument("build_joint: mask size != dimension");
  }

  // w_ij = [s_i s_j (alpha - 1) + 1] sigma_ij with s = 1 - immutable flag;
  // all-mutable collapses to w = alpha * sigma.
  Vec s = Vec::Ones(n);
  for (int i = 0; i < n; ++i) {
    if (!immutable_mask.empty() && immutable_mask[i]) s(i) = 0.0;
  }
  Mat w = ((s * s.transpose()).array() * (alpha - 1.0) + 1.0).matrix()
              .cwiseProduct(prior.sigma());

  Vec mean(2 * n);
  mean << prior.mu(), prior.mu();
  Mat cov(2 * n, 2 * n);
  cov.topLeftCorner(n, n) = prior.sigma();
  cov.topRightCorner(n, n) = w;
  cov.bottomLeftCorner(n, n) = w.transpose();
  cov.bottomRightCorner(n, n) = prior.sigma();

  try {
    Gaussian joint(std::move(mean), std::move(cov));
    std::vector<bool> mask = immutable_mask.empty()
                                 ? std::vector<bool>(n, false)
                                 : immutable_mask;
    return JointCfPrior{prior, alpha, std::move(w), std::move(mask),
                        std::move(joint)};
  } catch (const std::invalid_argument& e) {
    std::ostringstream msg;
    msg << "build_joint: assembled joint is not PSD (" << e.what()
        << "); lower alpha or add diagonal jitter to the prior";
    throw std::invalid_argument(msg.str());
  }
}

Gaussian conditional_reference_given_cf(const JointCfPrior& joint,
                                        const Vec& x_prime) {
  const int n = joint.dim();
  if (x_prime.size() != n) {
    throw std::invalid_argument(
        "conditional_reference_given_cf: bad dimension");
  }
  const Mat& sigma = joint.data.sigma();
  // pseudo-inverse keeps this defined for SCM priors with zero noise
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
  const double cutoff = kPinvCutoff * std::max(sigma.trace(), 0.0);
  Vec inv = es.eigenvalues();
  for (int i = 0; i < n; ++i) inv(i) = inv(i) > cutoff ? 1.0 / inv(i) : 0.0;
  const Mat lambda =
      es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();

  const Mat wl = joint.w * lambda;
  Vec mean = joint.data.mu() + wl * (x_prime - joint.data.mu());
  Mat cov = sigma - wl * joint.w.transpose();
  return Gaussian(std::move(mean), std::move(cov));
}

DataPrior scm_to_gaussian(const LinearScm& scm) {
  const int n = static_cast<int>(scm.nodes.size());
  if (n == 0) throw std::invalid_argument("scm_to_gaussian: empty model");

  // Kahn topological order over declared edges.
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> children(n);
  for (int i = 0; i < n; ++i) {
    if (scm.nodes[i].noise_variance < 0) {
      throw std::invalid_argument("scm_to_gaussian: negative noise variance");
    }
    for (const auto& [p, wt] : scm.nodes[i].parents) {
      if (p < 0 || p >= n || p == i) {
        throw std::invalid_argument("scm_to_gaussian: bad parent index for " +
                                    scm.nodes[i].name);
      }
      children[p].push_back(i);
      ++indeg[i];
    }
  }
  std::queue<int> ready;
  for (int i = 0; i < n; ++i) {
    if (indeg[i] == 0) ready.push(i);
  }
  std::vector<int> order;
  while (!ready.empty()) {
    const int u = ready.front();
    ready.pop();
    order.push_back(u);
    for (int c : children[u]) {
      if (--indeg[c] == 0) ready.push(c);
    }
  }
  if (static_cast<int>(order.size()) != n) {
    throw std::invalid_argument("scm_to_gaussian: graph has a cycle");
  }

  // value_i = a_i^T value_parents + b_i + eps_i propagates moments exactly:
  // mean_i = a^T mean_par + b, cov(i, j) = a^T cov(par, j),
  // var_i = a^T cov(par, par) a + noise.
  Vec mu = Vec::Zero(n);
  Mat sigma = Mat::Zero(n, n);
  std::vector<bool> done(n, false);
  for (int u : order) {
    const ScmNode& node = scm.nodes[u];
    double m = node.intercept;
    for (const auto& [p, wt] : node.parents) {
      if (!done[p]) {
        throw std::invalid_argument(
            "scm_to_gaussian: parent out of topological order");
      }
      m += wt * mu(p);
    }
    mu(u) = m;
    for (int j = 0; j < n; ++j) {
      if (!done[j]) continue;
      double c = 0.0;
      for (const auto& [p, wt] : node.parents) c += wt * sigma(p, j);
      sigma(u, j) = c;
      sigma(j, u) = c;
    }
    double v = node.noise_variance;
    for (const auto& [p, wt] : node.parents) {
      for (const auto& [q, wq] : node.parents) v += wt * wq * sigma(p, q);
    }
    sigma(u, u) = v;
    done[u] = true;
  }
  return DataPrior(std::move(mu), std::move(sigma), PriorSource::kScm);
}

}  // namespace cfx

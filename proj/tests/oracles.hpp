/*
 * Brute-force reference implementations for the test suite.
 *
 * Everything here is deliberately independent of the library's numerics:
 * pseudo-inverses go through eigendecompositions, randomness comes from
 * std::mt19937_64, conditioning is a literal Schur complement, and
 * integrals are Simpson sums. Slow and obvious beats fast and clever when
 * the job is checking the fast and clever code.
 */
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "cfx/prior.hpp"

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Mat pinv(const Mat& m, double rel_cutoff = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
  const Vec& ev = es.eigenvalues();
  const double big = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Mat d = Mat::Zero(m.rows(), m.cols());
  for (int i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) > rel_cutoff * big) d(i, i) = 1.0 / ev(i);
  }
  return es.eigenvectors() * d * es.eigenvectors().transpose();
}

struct Moments {
  Vec mean;
  Mat cov;
};

// p(free | obs = values) of N(mu, cov) by explicit partitioning.
inline Moments condition(const Vec& mu, const Mat& cov,
                         const std::vector<int>& obs, const Vec& values) {
  const int n = static_cast<int>(mu.size());
  std::vector<bool> is_obs(static_cast<size_t>(n), false);
  for (int i : obs) is_obs[static_cast<size_t>(i)] = true;
  std::vector<int> free;
  for (int i = 0; i < n; ++i) {
    if (!is_obs[static_cast<size_t>(i)]) free.push_back(i);
  }
  const int nf = static_cast<int>(free.size());
  const int no = static_cast<int>(obs.size());
  Mat sff(nf, nf), sfo(nf, no), soo(no, no);
  Vec mf(nf), mo(no), vo(no);
  for (int i = 0; i < nf; ++i) {
    mf(i) = mu(free[static_cast<size_t>(i)]);
    for (int j = 0; j < nf; ++j) {
      sff(i, j) = cov(free[static_cast<size_t>(i)], free[static_cast<size_t>(j)]);
    }
    for (int j = 0; j < no; ++j) {
      sfo(i, j) = cov(free[static_cast<size_t>(i)], obs[static_cast<size_t>(j)]);
    }
  }
  for (int i = 0; i < no; ++i) {
    mo(i) = mu(obs[static_cast<size_t>(i)]);
    vo(i) = values(i);
    for (int j = 0; j < no; ++j) {
      soo(i, j) = cov(obs[static_cast<size_t>(i)], obs[static_cast<size_t>(j)]);
    }
  }
  const Mat gain = sfo * pinv(soo);
  Moments out;
  out.mean = mf + gain * (vo - mo);
  out.cov = sff - gain * sfo.transpose();
  return out;
}

inline double log_pdf(const Vec& x, const Vec& mu, const Mat& cov) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (cov + cov.transpose()));
  const Vec& ev = es.eigenvalues();
  double logdet = 0.0;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) <= 0.0) throw std::runtime_error("oracle log_pdf: singular");
    logdet += std::log(ev(i));
  }
  const Vec d = es.eigenvectors().transpose() * (x - mu);
  double quad = 0.0;
  for (int i = 0; i < ev.size(); ++i) quad += d(i) * d(i) / ev(i);
  constexpr double kLog2Pi = 1.8378770664093454836;
  return -0.5 * (mu.size() * kLog2Pi + logdet + quad);
}

template <typename F>
Vec fd_grad(const F& f, const Vec& x, double h = 1e-5) {
  Vec g(x.size());
  Vec xp = x;
  for (int i = 0; i < x.size(); ++i) {
    const double step = h * (1.0 + std::abs(x(i)));
    xp(i) = x(i) + step;
    const double up = f(xp);
    xp(i) = x(i) - step;
    const double dn = f(xp);
    xp(i) = x(i);
    g(i) = (up - dn) / (2.0 * step);
  }
  return g;
}

// Simpson's rule; n must be odd (made odd if not).
template <typename F>
double integrate(const F& f, double lo, double hi, int n = 20001) {
  if (n % 2 == 0) ++n;
  const double h = (hi - lo) / (n - 1);
  double acc = f(lo) + f(hi);
  for (int i = 1; i < n - 1; ++i) {
    acc += f(lo + i * h) * ((i % 2 == 1) ? 4.0 : 2.0);
  }
  return acc * h / 3.0;
}

// Self-normalized importance sampling of the density exp(log_target)
// with proposal N(mu_p, cov_p).
template <typename LogF>
Moments snis(const LogF& log_target, const Vec& mu_p, const Mat& cov_p, int n,
             unsigned seed) {
  const int d = static_cast<int>(mu_p.size());
  const Mat l = Eigen::LLT<Mat>(cov_p).matrixL();
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::vector<Vec> xs(static_cast<size_t>(n));
  std::vector<double> logw(static_cast<size_t>(n));
  double logw_max = -std::numeric_limits<double>::infinity();
  Vec z(d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) z(j) = norm(gen);
    const Vec x = mu_p + l * z;
    const double lw = log_target(x) - log_pdf(x, mu_p, cov_p);
    xs[static_cast<size_t>(i)] = x;
    logw[static_cast<size_t>(i)] = lw;
    logw_max = std::max(logw_max, lw);
  }
  double wsum = 0.0;
  Vec mean = Vec::Zero(d);
  for (int i = 0; i < n; ++i) {
    const double w = std::exp(logw[static_cast<size_t>(i)] - logw_max);
    wsum += w;
    mean += w * xs[static_cast<size_t>(i)];
  }
  mean /= wsum;
  Mat cov = Mat::Zero(d, d);
  for (int i = 0; i < n; ++i) {
    const double w = std::exp(logw[static_cast<size_t>(i)] - logw_max);
    const Vec dd = xs[static_cast<size_t>(i)] - mean;
    cov += w * dd * dd.transpose();
  }
  cov /= wsum;
  return Moments{mean, cov};
}

// Monte-Carlo ancestral sampling of a linear-Gaussian SCM; declaration
// order may reference parents declared later, so runs in dependency order.
inline Moments scm_mc(const cfx::LinearScm& scm, int n, unsigned seed) {
  const int d = static_cast<int>(scm.nodes.size());
  // resolve an evaluation order by repeated sweeps (quadratic, fine here)
  std::vector<int> order;
  std::vector<bool> done(static_cast<size_t>(d), false);
  for (int pass = 0; pass < d; ++pass) {
    for (int i = 0; i < d; ++i) {
      if (done[static_cast<size_t>(i)]) continue;
      bool ready = true;
      for (const auto& [p, w] : scm.nodes[static_cast<size_t>(i)].parents) {
        ready = ready && done[static_cast<size_t>(p)];
      }
      if (ready) {
        order.push_back(i);
        done[static_cast<size_t>(i)] = true;
      }
    }
  }
  if (static_cast<int>(order.size()) != d) {
    throw std::runtime_error("oracle scm_mc: cyclic input");
  }
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> norm(0.0, 1.0);
  Vec sum = Vec::Zero(d);
  Mat outer = Mat::Zero(d, d);
  Vec x(d);
  for (int s = 0; s < n; ++s) {
    for (int i : order) {
      const cfx::ScmNode& node = scm.nodes[static_cast<size_t>(i)];
      double v = node.intercept;
      for (const auto& [p, w] : node.parents) v += w * x(p);
      v += std::sqrt(node.noise_variance) * norm(gen);
      x(i) = v;
    }
    sum += x;
    outer += x * x.transpose();
  }
  Moments out;
  out.mean = sum / n;
  out.cov = outer / n - out.mean * out.mean.transpose();
  return out;
}

// All-pairs shortest paths; w(i, j) = +inf where there is no edge.
inline Mat floyd_warshall(Mat w) {
  const int n = static_cast<int>(w.rows());
  for (int i = 0; i < n; ++i) w(i, i) = 0.0;
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        w(i, j) = std::min(w(i, j), w(i, k) + w(k, j));
      }
    }
  }
  return w;
}

// Random PD covariance B B^T + ridge I.
inline Mat random_pd(int n, std::mt19937_64& gen, double ridge = 0.1) {
  std::normal_distribution<double> norm(0.0, 1.0);
  Mat b(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) b(i, j) = norm(gen);
  }
  return b * b.transpose() + ridge * Mat::Identity(n, n);
}

inline Vec random_vec(int n, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> norm(0.0, scale);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = norm(gen);
  return v;
}

}  // namespace oracle

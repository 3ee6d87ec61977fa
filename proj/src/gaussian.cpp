#include "cfx/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "cfx/rng.hpp"

namespace cfx {
namespace {

// Cholesky that tolerates exact rank deficiency: a pivot within noise of
// zero zeroes its whole column (legal for a PSD matrix, where a zero
// diagonal forces a zero row in the Schur complement). Returns false if a
// pivot is negative beyond neg_tol, i.e. the matrix looks indefinite.
bool psd_lower(const Mat& m, double neg_tol, Mat* out,
               bool* clamped_negative = nullptr) {
  const int n = static_cast<int>(m.rows());
  const double scale = std::max(1.0, m.diagonal().maxCoeff());
  // pivots below this are rank-deficiency noise, not small real variances
  const double zero_tol = 1e-13 * scale;
  Mat l = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    double d = m(j, j) - l.row(j).head(j).squaredNorm();
    if (d < -neg_tol) return false;
    if (d <= zero_tol) {  // column stays zero
      if (clamped_negative && d < 0.0) *clamped_negative = true;
      continue;
    }
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  *out = std::move(l);
  return true;
}

void check_symmetric(const Mat& m, const char* who) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(who) + ": matrix is not square");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw std::invalid_argument(std::string(who) +
                                ": matrix is not symmetric within 1e-9");
  }
}

}  // namespace

CholeskyResult cholesky_psd(const Mat& m, double jitter) {
  check_symmetric(m, "cholesky_psd");
  if (jitter < 0) throw std::invalid_argument("cholesky_psd: jitter < 0");
  const int n = static_cast<int>(m.rows());
  Mat sym = 0.5 * (m + m.transpose());

  double shift = 0.0;
  while (true) {
    Mat shifted = sym;
    shifted.diagonal().array() += shift;
    Eigen::LLT<Mat> llt(shifted);
    // LLT alone can accept a barely-indefinite matrix; verify the residual.
    if (llt.info() == Eigen::Success) {
      Mat l = llt.matrixL();
      const double scale = std::max(1.0, shifted.cwiseAbs().maxCoeff());
      if (((l * l.transpose()) - shifted).cwiseAbs().maxCoeff() <=
          1e-7 * scale) {
        return {std::move(l), shift};
      }
    }
    if (jitter == 0.0) break;
    shift = (shift == 0.0) ? jitter : shift * 10.0;
    if (shift > 1e6 * jitter) break;
  }
  std::ostringstream msg;
  msg << "cholesky_psd: factorization failed for " << n << "x" << n
      << " matrix";
  if (jitter > 0) {
    msg << " even with jitter escalated to " << 1e6 * jitter;
  } else {
    msg << " (singular or indefinite; jitter = 0 disables shifting)";
  }
  throw std::runtime_error(msg.str());
}

IndexSet::IndexSet(std::vector<int> indices) : idx_(std::move(indices)) {
  for (size_t i = 0; i < idx_.size(); ++i) {
    if (idx_[i] < 0) throw std::invalid_argument("IndexSet: negative index");
    if (i > 0 && idx_[i] <= idx_[i - 1]) {
      throw std::invalid_argument("IndexSet: indices must strictly increase");
    }
  }
}

IndexSet IndexSet::range(int begin, int end) {
  std::vector<int> v;
  for (int i = begin; i < end; ++i) v.push_back(i);
  return IndexSet(std::move(v));
}

bool IndexSet::contains(int i) const {
  return std::binary_search(idx_.begin(), idx_.end(), i);
}

IndexSet IndexSet::complement(int dim) const {
  std::vector<int> v;
  size_t k = 0;
  for (int i = 0; i < dim; ++i) {
    if (k < idx_.size() && idx_[k] == i) {
      ++k;
    } else {
      v.push_back(i);
    }
  }
  if (k != idx_.size()) {
    throw std::invalid_argument("IndexSet::complement: index out of range");
  }
  return IndexSet(std::move(v));
}

Gaussian::Gaussian(Vec mean, Mat cov)
    : mean_(std::move(mean)),
      cov_(std::move(cov)),
      cache_(std::make_shared<FactorCache>()) {
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
    throw std::invalid_argument("Gaussian: mean/cov dimension mismatch");
  }
  if (!mean_.allFinite() || !cov_.allFinite()) {
    throw std::invalid_argument("Gaussian: non-finite mean or cov");
  }
  check_symmetric(cov_, "Gaussian");
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();

  // 1e-9 at unit scale; proportionally looser for large covariances so
  // conditioning roundoff on unnormalized data is not rejected.
  const double clamp_tol =
      kPsdClampTol * std::max(1.0, cov_.cwiseAbs().maxCoeff());
  Mat l;
  bool clamped = false;
  if (psd_lower(cov_, clamp_tol, &l, &clamped)) {
    // a negative pivot was treated as zero: fold the clamp back into the
    // stored covariance so its eigenvalues really are >= 0
    if (clamped) cov_ = l * l.transpose();
    std::call_once(cache_->once, [&] { cache_->lower = std::move(l); });
    return;
  }
  // Pivoting failed outright: decide clamp-vs-reject on true eigenvalues.
  Eigen::SelfAdjointEigenSolver<Mat> es(cov_);
  if (es.eigenvalues().minCoeff() < -clamp_tol) {
    std::ostringstream msg;
    msg << "Gaussian: covariance is not PSD (min eigenvalue "
        << es.eigenvalues().minCoeff() << ")";
    throw std::invalid_argument(msg.str());
  }
  const Vec nonneg = es.eigenvalues().cwiseMax(0.0);
  cov_ = es.eigenvectors() * nonneg.asDiagonal() *
         es.eigenvectors().transpose();
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
  if (!psd_lower(cov_, 1.0, &l)) {
    throw std::runtime_error("Gaussian: factorization failed after clamp");
  }
  std::call_once(cache_->once, [&] { cache_->lower = std::move(l); });
}

const Mat& Gaussian::factor() const {
  std::call_once(cache_->once, [&] {
    const double tol = kPsdClampTol * std::max(1.0, cov_.cwiseAbs().maxCoeff());
    Mat l;
    if (!psd_lower(cov_, tol, &l)) {
      throw std::runtime_error("Gaussian::factor: covariance not PSD");
    }
    cache_->lower = std::move(l);
  });
  return cache_->lower;
}

Gaussian Gaussian::marginalize(const IndexSet& keep) const {
  const int k = keep.size();
  if (k == 0) throw std::invalid_argument("marginalize: empty index set");
  if (keep[k - 1] >= dim()) {
    throw std::invalid_argument("marginalize: index out of range");
  }
  Vec m(k);
  Mat c(k, k);
  for (int i = 0; i < k; ++i) {
    m(i) = mean_(keep[i]);
    for (int j = 0; j < k; ++j) c(i, j) = cov_(keep[i], keep[j]);
  }
  return Gaussian(std::move(m), std::move(c));
}

Gaussian Gaussian::condition(const IndexSet& observed,
                             const Vec& values) const {
  const int no = observed.size();
  if (no == 0) throw std::invalid_argument("condition: nothing observed");
  if (values.size() != no) {
    throw std::invalid_argument("condition: values/index size mismatch");
  }
  if (observed[no - 1] >= dim()) {
    throw std::invalid_argument("condition: index out of range");
  }
  const IndexSet free = observed.complement(dim());
  const int nf = free.size();
  if (nf == 0) throw std::invalid_argument("condition: nothing left free");

  Mat soo(no, no), sfo(nf, no), sff(nf, nf);
  Vec mo(no), mf(nf);
  for (int i = 0; i < no; ++i) {
    mo(i) = mean_(observed[i]);
    for (int j = 0; j < no; ++j) soo(i, j) = cov_(observed[i], observed[j]);
  }
  for (int i = 0; i < nf; ++i) {
    mf(i) = mean_(free[i]);
    for (int j = 0; j < no; ++j) sfo(i, j) = cov_(free[i], observed[j]);
    for (int j = 0; j < nf; ++j) sff(i, j) = cov_(free[i], free[j]);
  }

  Eigen::SelfAdjointEigenSolver<Mat> es(soo);
  const double cutoff = kPinvCutoff * std::max(soo.trace(), 0.0);
  const Vec dev = values - mo;
  Vec inv_eigs(no);
  for (int i = 0; i < no; ++i) {
    const double lam = es.eigenvalues()(i);
    if (lam <= cutoff) {
      // deterministic direction: the observation must already agree
      const double off = std::abs(es.eigenvectors().col(i).dot(dev));
      if (off > kDegenerateObsTol) {
        std::ostringstream msg;
        msg << "condition: observed value deviates by " << off
            << " along a zero-variance direction";
        throw std::runtime_error(msg.str());
      }
      inv_eigs(i) = 0.0;
    } else {
      inv_eigs(i) = 1.0 / lam;
    }
  }
  const Mat pinv = es.eigenvectors() * inv_eigs.asDiagonal() *
                   es.eigenvectors().transpose();
  Vec mean_f = mf + sfo * (pinv * dev);
  Mat cov_f = sff - sfo * pinv * sfo.transpose();
  return Gaussian(std::move(mean_f), std::move(cov_f));
}

Mat Gaussian::sample(int n, std::uint64_t seed) const {
  if (n < 0) throw std::invalid_argument("sample: n < 0");
  const int d = dim();
  const Mat& l = factor();
  Mat out(n, d);
  CounterRng rng(seed, 0);
  Vec z(d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) z(j) = rng.normal();
    out.row(i) = (mean_ + l * z).transpose();
  }
  return out;
}

double Gaussian::log_pdf(const Vec& x) const {
  if (x.size() != dim()) throw std::invalid_argument("log_pdf: bad dimension");
  const Mat& l = factor();
  double log_det = 0.0;
  for (int i = 0; i < dim(); ++i) {
    if (l(i, i) <= 0.0) {
      throw std::runtime_error("log_pdf: covariance is singular");
    }
    log_det += 2.0 * std::log(l(i, i));
  }
  const Vec y = l.triangularView<Eigen::Lower>().solve(x - mean_);
  return -0.5 * (dim() * std::log(2.0 * std::numbers::pi) + log_det +
                 y.squaredNorm());
}

double Gaussian::mahalanobis_sq(const Vec& x) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("mahalanobis_sq: bad dimension");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(cov_);
  const double cutoff = kPinvCutoff * std::max(cov_.trace(), 0.0);
  const Vec dev = x - mean_;
  double acc = 0.0;
  for (int i = 0; i < dim(); ++i) {
    const double lam = es.eigenvalues()(i);
    if (lam > cutoff) {
      const double proj = es.eigenvectors().col(i).dot(dev);
      acc += proj * proj / lam;
    }
  }
  return acc;
}

}  // namespace cfx

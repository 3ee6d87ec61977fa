#include "cfx/actionability.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace cfx {

std::vector<int> FeaturePolicy::actionable_coords() const {
  std::vector<int> v;
  for (int i = 0; i < dim(); ++i) {
    if (classes[static_cast<size_t>(i)] != FeatureClass::kNonactionable) {
      v.push_back(i);
    }
  }
  return v;
}

std::vector<int> FeaturePolicy::nonactionable_coords() const {
  std::vector<int> v;
  for (int i = 0; i < dim(); ++i) {
    if (classes[static_cast<size_t>(i)] == FeatureClass::kNonactionable) {
      v.push_back(i);
    }
  }
  return v;
}

SplitPosterior split_posterior(const Gaussian& posterior,
                               const FeaturePolicy& policy) {
  if (policy.dim() != posterior.dim()) {
    throw std::invalid_argument("split_posterior: policy/posterior mismatch");
  }
  std::vector<int> act = policy.actionable_coords();
  std::vector<int> non = policy.nonactionable_coords();
  if (act.empty()) {
    throw std::invalid_argument("split_posterior: no actionable coordinates");
  }
  Gaussian marg = posterior.marginalize(IndexSet(act));
  return SplitPosterior{std::move(marg), std::move(act), std::move(non)};
}

FittedConditional fit_conditional(const Mat& rows,
                                  const std::vector<int>& cond_coords,
                                  const std::vector<int>& out_coords,
                                  double jitter) {
  const int m = static_cast<int>(rows.rows());
  const int nc = static_cast<int>(cond_coords.size());
  const int ne = static_cast<int>(out_coords.size());
  if (nc == 0 || ne == 0) {
    throw std::invalid_argument("fit_conditional: empty coordinate list");
  }
  const int p = nc + 1;  // regressors plus intercept
  if (m <= p) {
    throw std::invalid_argument(
        "fit_conditional: not enough rows for the design");
  }
  for (int c : cond_coords) {
    if (c < 0 || c >= rows.cols()) {
      throw std::invalid_argument("fit_conditional: regressor out of range");
    }
  }
  for (int c : out_coords) {
    if (c < 0 || c >= rows.cols()) {
      throw std::invalid_argument("fit_conditional: output out of range");
    }
  }

  Mat design(m, p);
  for (int j = 0; j < nc; ++j) design.col(j) = rows.col(cond_coords[j]);
  design.col(nc).setOnes();
  Mat targets(m, ne);
  for (int j = 0; j < ne; ++j) targets.col(j) = rows.col(out_coords[j]);

  Eigen::ColPivHouseholderQR<Mat> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    // name the culprit columns so the caller can fix the policy
    std::ostringstream msg;
    msg << "fit_conditional: rank-deficient design (rank " << qr.rank()
        << " of " << p << "); dependent columns:";
    const auto perm = qr.colsPermutation().indices();
    for (int j = qr.rank(); j < p; ++j) {
      const int col = perm(j);
      if (col == nc) {
        msg << " intercept";
      } else {
        msg << " latent[" << cond_coords[col] << "]";
      }
    }
    throw std::runtime_error(msg.str());
  }

  Mat coef = qr.solve(targets);  // p x ne
  Mat resid = targets - design * coef;
  Mat resid_cov = (resid.transpose() * resid) / double(m - p);
  resid_cov.diagonal().array() += jitter;

  FittedConditional out;
  out.a = coef.topRows(nc).transpose();  // ne x nc
  out.b = coef.row(nc).transpose();
  out.resid_cov = std::move(resid_cov);
  out.cond_coords = cond_coords;
  out.out_coords = out_coords;
  return out;
}

Gaussian recompose(const SplitPosterior& split,
                   const FittedConditional& conditional) {
  const int na = static_cast<int>(split.act_coords.size());
  const int ne = static_cast<int>(split.non_coords.size());
  if (conditional.out_coords != split.non_coords) {
    throw std::invalid_argument(
        "recompose: conditional outputs do not match the nonactionable set");
  }
  // map regressors to positions inside the actionable block
  std::vector<int> reg_pos;
  for (int c : conditional.cond_coords) {
    auto it =
        std::find(split.act_coords.begin(), split.act_coords.end(), c);
    if (it == split.act_coords.end()) {
      throw std::invalid_argument(
          "recompose: conditional regressor is not an actionable coordinate");
    }
    reg_pos.push_back(static_cast<int>(it - split.act_coords.begin()));
  }
  const int nc = static_cast<int>(reg_pos.size());
  Mat sel = Mat::Zero(nc, na);
  for (int j = 0; j < nc; ++j) sel(j, reg_pos[static_cast<size_t>(j)]) = 1.0;
  const Mat a_full = conditional.a * sel;  // ne x na over the whole block

  const Vec& mc = split.actionable.mean();
  const Mat& sc = split.actionable.cov();
  Vec mean_block(na + ne);
  mean_block << mc, a_full * mc + conditional.b;
  Mat cov_block(na + ne, na + ne);
  cov_block.topLeftCorner(na, na) = sc;
  cov_block.topRightCorner(na, ne) = sc * a_full.transpose();
  cov_block.bottomLeftCorner(ne, na) = a_full * sc;
  cov_block.bottomRightCorner(ne, ne) =
      a_full * sc * a_full.transpose() + conditional.resid_cov;

  // re-interleave [actionable; nonactionable] into original order
  const int n = na + ne;
  std::vector<int> to_orig(static_cast<size_t>(n));
  for (int i = 0; i < na; ++i) to_orig[static_cast<size_t>(i)] = split.act_coords[static_cast<size_t>(i)];
  for (int i = 0; i < ne; ++i) {
    to_orig[static_cast<size_t>(na + i)] = split.non_coords[static_cast<size_t>(i)];
  }
  Vec mean(n);
  Mat cov(n, n);
  for (int i = 0; i < n; ++i) {
    mean(to_orig[static_cast<size_t>(i)]) = mean_block(i);
    for (int j = 0; j < n; ++j) {
      cov(to_orig[static_cast<size_t>(i)], to_orig[static_cast<size_t>(j)]) =
          cov_block(i, j);
    }
  }
  return Gaussian(std::move(mean), std::move(cov));
}

}  // namespace cfx

#include "cfx/posterior.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "cfx/rng.hpp"

namespace cfx {
namespace {

void check_likelihood(const LinearLikelihood& lik, int n) {
  if (lik.in_dim() != n) {
    throw std::invalid_argument("posterior: likelihood dimension mismatch");
  }
}

// cov = prec^{-1} through a strict Cholesky; posteriors with a proper
// prior or full-rank A^T L A are PD by construction.
Gaussian from_precision(const Mat& prec, const Vec& lin) {
  Eigen::LLT<Mat> llt(prec);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("posterior: precision is not positive definite");
  }
  Vec mean = llt.solve(lin);
  Mat cov = llt.solve(Mat::Identity(prec.rows(), prec.cols()));
  cov = 0.5 * (cov + cov.transpose()).eval();
  return Gaussian(std::move(mean), std::move(cov));
}

Mat pinv_psd(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  const double cutoff = kPinvCutoff * std::max(m.trace(), 0.0);
  Vec inv = es.eigenvalues();
  for (int i = 0; i < inv.size(); ++i) {
    inv(i) = inv(i) > cutoff ? 1.0 / inv(i) : 0.0;
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

bool min_eig_above(const Mat& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  return es.eigenvalues().minCoeff() > floor;
}

}  // namespace

Gaussian posterior_pgm1(const LinearLikelihood& lik, const Vec& x,
                        const Vec& y_prime, const Mat& w_prec) {
  const int n = static_cast<int>(x.size());
  check_likelihood(lik, n);
  if (y_prime.size() != lik.out_dim()) {
    throw std::invalid_argument("posterior_pgm1: y' dimension mismatch");
  }
  if (w_prec.rows() != n || w_prec.cols() != n) {
    throw std::invalid_argument("posterior_pgm1: w_prec shape mismatch");
  }
  const Mat prec = w_prec + lik.a.transpose() * lik.l * lik.a;
  const Vec lin = lik.a.transpose() * (lik.l * (y_prime - lik.b)) + w_prec * x;
  return from_precision(prec, lin);
}

Gaussian posterior_pgm3(const DataPrior& prior, const LinearLikelihood& lik,
                        const Vec& x, const Vec& y_prime, const Mat& w_prec) {
  const int n = prior.dim();
  check_likelihood(lik, n);
  if (x.size() != n || y_prime.size() != lik.out_dim()) {
    throw std::invalid_argument("posterior_pgm3: dimension mismatch");
  }
  const Mat& lam = prior.precision();
  const Mat prec = lik.a.transpose() * lik.l * lik.a + w_prec + lam;
  const Vec lin = lik.a.transpose() * (lik.l * (y_prime - lik.b)) +
                  w_prec * x + lam * prior.mu();
  return from_precision(prec, lin);
}

Gaussian posterior_via_joint(const JointCfPrior& joint,
                             const LinearLikelihood& lik, const Vec& x,
                             const Vec& y_prime) {
  const int n = joint.dim();
  const int k = lik.out_dim();
  check_likelihood(lik, n);
  if (x.size() != n || y_prime.size() != k) {
    throw std::invalid_argument("posterior_via_joint: dimension mismatch");
  }
  Eigen::LLT<Mat> llt(lik.l);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error(
        "posterior_via_joint: L must be strictly PD (add jitter to probe "
        "singular likelihoods)");
  }
  const Mat l_inv = llt.solve(Mat::Identity(k, k));

  // layout [x (0..n), x' (n..2n), y' (2n..2n+k)]; y' = A x' + b + noise
  const Mat& sigma = joint.data.sigma();
  const Mat& w = joint.w;
  const Vec& mu = joint.data.mu();
  Vec mean(2 * n + k);
  mean << mu, mu, lik.a * mu + lik.b;
  Mat cov = Mat::Zero(2 * n + k, 2 * n + k);
  cov.block(0, 0, n, n) = sigma;
  cov.block(0, n, n, n) = w;
  cov.block(n, 0, n, n) = w.transpose();
  cov.block(n, n, n, n) = sigma;
  cov.block(0, 2 * n, n, k) = w * lik.a.transpose();
  cov.block(2 * n, 0, k, n) = lik.a * w.transpose();
  cov.block(n, 2 * n, n, k) = sigma * lik.a.transpose();
  cov.block(2 * n, n, k, n) = lik.a * sigma;
  cov.block(2 * n, 2 * n, k, k) = lik.a * sigma * lik.a.transpose() + l_inv;

  Gaussian assembled(std::move(mean), std::move(cov));
  std::vector<int> obs;
  for (int i = 0; i < n; ++i) obs.push_back(i);
  for (int i = 0; i < k; ++i) obs.push_back(2 * n + i);
  Vec values(n + k);
  values << x, y_prime;
  return assembled.condition(IndexSet(std::move(obs)), values);
}

Gaussian posterior_pgm2(const JointCfPrior& joint, const LinearLikelihood& lik,
                        const Vec& x, const Vec& y_prime) {
  const int n = joint.dim();
  check_likelihood(lik, n);
  if (x.size() != n || y_prime.size() != lik.out_dim()) {
    throw std::invalid_argument("posterior_pgm2: dimension mismatch");
  }
  const Mat& sigma = joint.data.sigma();
  const Mat& w = joint.w;
  const Vec& mu = joint.data.mu();

  // conditional covariance of x | x'; its rank decides the route
  const Mat lam = pinv_psd(sigma);
  const Mat wl = w * lam;
  const Mat cond_cov = sigma - wl * w.transpose();
  const double floor =
      kPinvCutoff * std::max(1.0, std::max(cond_cov.trace(), 0.0));
  const bool full_rank =
      min_eig_above(cond_cov, floor) && min_eig_above(sigma, 0.0);

  if (!full_rank) {
    LinearLikelihood lik_eff = lik;
    if (!min_eig_above(lik.l, 0.0)) {
      lik_eff.l.diagonal().array() +=
          1e-9 * std::max(1.0, lik.l.cwiseAbs().maxCoeff());
    }
    return posterior_via_joint(joint, lik_eff, x, y_prime);
  }

  Eigen::LLT<Mat> kllt(cond_cov);
  if (kllt.info() != Eigen::Success) {
    return posterior_via_joint(joint, lik, x, y_prime);
  }
  const Mat kmat = kllt.solve(Mat::Identity(n, n));
  const Mat lwk = lam * w * kmat;          // Lam W K
  const Mat lwkwl = lwk * w * lam;         // Lam W K W Lam
  const Mat prec = lik.a.transpose() * lik.l * lik.a + lwkwl + lam;
  const Vec lin = lik.a.transpose() * (lik.l * (y_prime - lik.b)) +
                  lwk * (x - mu) + (lwkwl + lam) * mu;
  Gaussian closed = from_precision(prec, lin);

  // the oracle is the source of truth; a disagreement is a hard bug
  if (min_eig_above(lik.l, 0.0)) {
    Gaussian oracle = posterior_via_joint(joint, lik, x, y_prime);
    // 1e-6 at unit scale, loosened proportionally for extreme inputs
    const double tol =
        1e-6 * std::max(1.0, oracle.mean().cwiseAbs().maxCoeff());
    const double mean_gap =
        (closed.mean() - oracle.mean()).cwiseAbs().maxCoeff();
    const double cov_gap = (closed.cov() - oracle.cov()).cwiseAbs().maxCoeff();
    if (mean_gap > tol || cov_gap > tol) {
      std::ostringstream msg;
      msg << "posterior_pgm2: closed form disagrees with conditioning oracle"
          << " (mean gap " << mean_gap << ", cov gap " << cov_gap << ")";
      throw std::runtime_error(msg.str());
    }
  }
  return closed;
}

namespace {

// stage-2 objective: -(log p_hat(target | x') + log prior(x'))
struct ModeObjective {
  const SplitClassifier* scored;  // classifier with the MAP head installed
  const Gaussian* prior_g;
  const Mat* prior_prec;
  int target;

  LossEval operator()(const Vec& z) const {
    LossEval ev;
    ev.value = scored->nll(z, target) - prior_g->log_pdf(z);
    ev.grad = scored->grad_input(z, target) +
              (*prior_prec) * (z - prior_g->mean());
    return ev;
  }
};

Mat fd_hessian(const LossFn& f, const Vec& z, double base_step) {
  const int n = static_cast<int>(z.size());
  Mat h(n, n);
  // central differences of the analytic gradient, column by column
  for (int j = 0; j < n; ++j) {
    const double step = base_step * (1.0 + std::abs(z(j)));
    Vec zp = z, zm = z;
    zp(j) += step;
    zm(j) -= step;
    const Vec gp = f(zp).grad;
    const Vec gm = f(zm).grad;
    h.col(j) = (gp - gm) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

}  // namespace

LaplaceClassPrior laplace_class_prior(const SplitClassifier& clf,
                                      const Mat& rows, const DataPrior& prior,
                                      int target, const LaplaceConfig& cfg) {
  const int n = prior.dim();
  if (rows.cols() != n || clf.input_dim() != n) {
    throw std::invalid_argument("laplace_class_prior: dimension mismatch");
  }
  if (target < 0 || target >= clf.num_classes()) {
    throw std::invalid_argument("laplace_class_prior: target out of range");
  }
  if (rows.rows() < 1) {
    throw std::invalid_argument("laplace_class_prior: empty data");
  }

  // Stage 1: representations and the decision-maker's own hard labels.
  const int m = static_cast<int>(rows.rows());
  const int h = clf.repr_dim();
  const int classes = clf.num_classes();
  Mat reps(m, h);
  std::vector<int> t(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    const Vec xi = rows.row(i).transpose();
    reps.row(i) = clf.representation(xi).transpose();
    t[static_cast<size_t>(i)] = clf.predict(xi);
  }

  // MAP multinomial head under an N(0, I) weight prior (ridge on the nll).
  LossFn map_loss = [&](const Vec& theta) {
    Mat head(classes, h);
    for (int r = 0; r < classes; ++r) {
      for (int c = 0; c < h; ++c) head(r, c) = theta(r * h + c);
    }
    LossEval ev;
    ev.value = 0.0;
    Mat dhead = Mat::Zero(classes, h);
    for (int i = 0; i < m; ++i) {
      const Vec lg = head * reps.row(i).transpose();
      const double mx = lg.maxCoeff();
      const double lse = mx + std::log((lg.array() - mx).exp().sum());
      ev.value += lse - lg(t[static_cast<size_t>(i)]);
      Vec p = (lg.array() - lse).exp();
      p(t[static_cast<size_t>(i)]) -= 1.0;
      dhead += p * reps.row(i);
    }
    ev.value += 0.5 * theta.squaredNorm();
    Vec g(classes * h);
    for (int r = 0; r < classes; ++r) {
      for (int c = 0; c < h; ++c) g(r * h + c) = dhead(r, c) + theta(r * h + c);
    }
    ev.grad = std::move(g);
    return ev;
  };
  AdamResult map_fit = adam_minimize(map_loss, Vec::Zero(classes * h),
                                     cfg.map_steps, cfg.map_lr, cfg.seed);
  Mat map_head(classes, h);
  for (int r = 0; r < classes; ++r) {
    for (int c = 0; c < h; ++c) map_head(r, c) = map_fit.solution(r * h + c);
  }

  // Stage 2: x'-mode of p_hat(target | x') p(x').
  SplitClassifier scored = clf;
  scored.set_head(map_head);
  const Gaussian prior_g = prior.gaussian();
  const Mat prior_prec = prior.precision();
  ModeObjective obj{&scored, &prior_g, &prior_prec, target};
  LossFn obj_fn = [&obj](const Vec& z) { return obj(z); };

  const Mat starts = prior_g.sample(cfg.restarts, mix64(cfg.seed ^ 0x51a9));
  int best = -1;
  double best_val = std::numeric_limits<double>::infinity();
  Vec best_mode;
  bool any_valid = false;
  for (int r = 0; r < cfg.restarts; ++r) {
    AdamResult run = adam_minimize(obj_fn, starts.row(r).transpose(),
                                   cfg.adam_steps, cfg.adam_lr, cfg.seed);
    Vec mode = run.solution;
    double val = run.value;
    // polish: damped Newton on the smooth objective until the gradient
    // norm meets the mode contract
    for (int it = 0; it < 60; ++it) {
      LossEval ev = obj_fn(mode);
      val = ev.value;
      if (ev.grad.norm() <= 1e-6) break;
      Mat hess = fd_hessian(obj_fn, mode, cfg.fd_step);
      double damp = 1e-8 * std::max(1.0, hess.cwiseAbs().maxCoeff());
      Vec step;
      while (true) {
        Mat hd = hess;
        hd.diagonal().array() += damp;
        Eigen::LLT<Mat> llt(hd);
        if (llt.info() == Eigen::Success) {
          step = llt.solve(ev.grad);
          break;
        }
        damp *= 10.0;
        if (damp > 1e12) {
          step = ev.grad;  // steepest descent as a last resort
          break;
        }
      }
      // backtracking keeps the polish monotone
      double scale = 1.0;
      Vec trial = mode - scale * step;
      while (scale > 1e-8 && obj_fn(trial).value > val) {
        scale *= 0.5;
        trial = mode - scale * step;
      }
      if ((trial - mode).norm() == 0.0) break;
      mode = trial;
    }
    LossEval fin = obj_fn(mode);
    const double prob = scored.probs(mode)(target);
    if (prob >= cfg.min_target_prob) any_valid = true;
    if (fin.value < best_val) {
      best_val = fin.value;
      best = r;
      best_mode = mode;
    }
  }
  if (!any_valid) {
    std::ostringstream msg;
    msg << "laplace_class_prior: no restart reached target-class probability "
        << cfg.min_target_prob << " at its local mode (target " << target
        << ")";
    throw std::runtime_error(msg.str());
  }

  LossEval at_mode = obj_fn(best_mode);
  Mat hess = fd_hessian(obj_fn, best_mode, cfg.fd_step);
  bool gauss_newton = false;
  Mat cov;
  // invert the curvature, escalating jitter; Gauss-Newton if it will not go
  double jit = 0.0;
  while (true) {
    Mat hd = hess;
    hd.diagonal().array() += jit;
    Eigen::LLT<Mat> llt(hd);
    if (llt.info() == Eigen::Success) {
      cov = llt.solve(Mat::Identity(n, n));
      break;
    }
    jit = (jit == 0.0) ? 1e-8 : jit * 10.0;
    if (jit > 1e-6) {
      // Gauss-Newton curvature: J^T J of the class score plus the exact
      // prior precision; PSD by construction, PD after the prior term
      gauss_newton = true;
      const Vec g_cls = scored.grad_input(best_mode, target);
      Mat gn = g_cls * g_cls.transpose() + prior_prec;
      Eigen::LLT<Mat> gl(gn);
      if (gl.info() != Eigen::Success) {
        throw std::runtime_error(
            "laplace_class_prior: curvature not invertible");
      }
      cov = gl.solve(Mat::Identity(n, n));
      break;
    }
  }
  cov = 0.5 * (cov + cov.transpose()).eval();

  LaplaceClassPrior out{target,
                        Gaussian(best_mode, cov),
                        map_head,
                        true,
                        gauss_newton,
                        at_mode.value,
                        at_mode.grad.norm(),
                        best};
  return out;
}

Gaussian posterior_laplace(const LaplaceClassPrior& class_prior,
                           const JointCfPrior& joint, const Vec& x) {
  const int n = joint.dim();
  if (class_prior.g.dim() != n || x.size() != n) {
    throw std::invalid_argument("posterior_laplace: dimension mismatch");
  }
  const Vec& mg = class_prior.g.mean();
  const Mat& sg = class_prior.g.cov();
  const Mat lam = pinv_psd(joint.data.sigma());
  const Mat wl = joint.w * lam;  // maps x' deviation to x deviation
  const Mat cond_cov = joint.data.sigma() - wl * joint.w.transpose();

  // joint over [x' (0..n), x (n..2n)] with x' ~ g and x | x' from the
  // coupled prior: x = mu + wl (x' - mu) + noise(cond_cov)
  Vec mean(2 * n);
  mean << mg, joint.data.mu() + wl * (mg - joint.data.mu());
  Mat cov(2 * n, 2 * n);
  cov.topLeftCorner(n, n) = sg;
  cov.topRightCorner(n, n) = sg * wl.transpose();
  cov.bottomLeftCorner(n, n) = wl * sg;
  cov.bottomRightCorner(n, n) = wl * sg * wl.transpose() + cond_cov;

  Gaussian assembled(std::move(mean), std::move(cov));
  return assembled.condition(IndexSet::range(n, 2 * n), x);
}

Gaussian posterior_laplace_precision_route(
    const LaplaceClassPrior& class_prior, const JointCfPrior& joint,
    const Vec& x) {
  const int n = joint.dim();
  if (class_prior.g.dim() != n || x.size() != n) {
    throw std::invalid_argument(
        "posterior_laplace_precision_route: dimension mismatch");
  }
  const Mat lam = pinv_psd(joint.data.sigma());
  const Mat wl = joint.w * lam;
  const Mat cond_cov = joint.data.sigma() - wl * joint.w.transpose();
  Eigen::LLT<Mat> cllt(cond_cov);
  if (cllt.info() != Eigen::Success) {
    throw std::runtime_error(
        "posterior_laplace_precision_route: conditional covariance is "
        "singular; use posterior_laplace");
  }
  const Mat cprec = cllt.solve(Mat::Identity(n, n));
  Eigen::LLT<Mat> gllt(class_prior.g.cov());
  if (gllt.info() != Eigen::Success) {
    throw std::runtime_error(
        "posterior_laplace_precision_route: class prior covariance singular");
  }
  const Mat gprec = gllt.solve(Mat::Identity(n, n));

  // posterior precision = prec(g) + M^T prec(x|x') M with M = w lam;
  // mean = m_g + prec^{-1} M^T prec(x|x') (x - m_x) conditioned around the
  // joint mean
  const Mat prec = gprec + wl.transpose() * cprec * wl;
  const Vec mx =
      joint.data.mu() + wl * (class_prior.g.mean() - joint.data.mu());
  Eigen::LLT<Mat> pllt(prec);
  if (pllt.info() != Eigen::Success) {
    throw std::runtime_error(
        "posterior_laplace_precision_route: posterior precision singular");
  }
  Vec mean =
      class_prior.g.mean() + pllt.solve(wl.transpose() * (cprec * (x - mx)));
  Mat cov = pllt.solve(Mat::Identity(n, n));
  cov = 0.5 * (cov + cov.transpose()).eval();
  return Gaussian(std::move(mean), std::move(cov));
}

}  // namespace cfx

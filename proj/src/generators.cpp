#include "cfx/generators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "cfx/rng.hpp"

namespace cfx {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void score_validity(GenResult* res, const SplitClassifier* clf, int target,
                    double threshold) {
  const int count = static_cast<int>(res->points.rows());
  res->achieved_prob.assign(static_cast<size_t>(count), kNan);
  res->valid.assign(static_cast<size_t>(count), true);
  if (!clf) {
    res->success_rate = 1.0;
    return;
  }
  int ok = 0;
  for (int i = 0; i < count; ++i) {
    const double p = clf->probs(res->points.row(i).transpose())(target);
    res->achieved_prob[static_cast<size_t>(i)] = p;
    const bool valid = p >= threshold;
    res->valid[static_cast<size_t>(i)] = valid;
    ok += valid;
  }
  res->success_rate = count > 0 ? double(ok) / count : 0.0;
}

Gaussian apply_plan(const Gaussian& posterior, const ActionabilityPlan* plan) {
  if (!plan) return posterior;
  SplitPosterior split = split_posterior(posterior, plan->policy);
  return recompose(split, plan->conditional);
}

GenResult sample_posterior(const GenRequest& req, const Gaussian& posterior,
                           const SplitClassifier* clf, int target,
                           const ActionabilityPlan* plan) {
  if (req.count < 1) {
    throw std::invalid_argument("gen_posterior_sample: count < 1");
  }
  const Gaussian final_post = apply_plan(posterior, plan);
  GenResult res;
  res.points = final_post.sample(req.count, req.seed);
  score_validity(&res, clf, target, req.validity_threshold);
  return res;
}

}  // namespace

Metric Metric::euclidean(int dim) {
  Metric m;
  m.m_ = Mat::Identity(dim, dim);
  return m;
}

Metric Metric::mahalanobis(const DataPrior& prior, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("Metric::mahalanobis: alpha outside [0, 1)");
  }
  Mat cov = (1.0 - alpha * alpha) * prior.sigma();
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("Metric::mahalanobis: prior covariance not PD");
  }
  Metric m;
  m.m_ = llt.solve(Mat::Identity(prior.dim(), prior.dim()));
  m.m_ = 0.5 * (m.m_ + m.m_.transpose()).eval();
  return m;
}

double Metric::operator()(const Vec& a, const Vec& b) const {
  const Vec d = a - b;
  return std::sqrt(std::max(0.0, d.dot(m_ * d)));
}

Mat Metric::ball_factor(const std::vector<int>& coords) const {
  const int k = static_cast<int>(coords.size());
  Mat sub(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) sub(i, j) = m_(coords[static_cast<size_t>(i)], coords[static_cast<size_t>(j)]);
  }
  Eigen::LLT<Mat> llt(sub);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("Metric::ball_factor: submatrix not PD");
  }
  Mat inv = llt.solve(Mat::Identity(k, k));
  inv = 0.5 * (inv + inv.transpose()).eval();
  Eigen::LLT<Mat> illt(inv);
  if (illt.info() != Eigen::Success) {
    throw std::runtime_error("Metric::ball_factor: inverse not PD");
  }
  return illt.matrixL();
}

GenResult gen_posterior_sample(const GenRequest& req,
                               const JointCfPrior& joint,
                               const LinearLikelihood& lik, const Vec& y_prime,
                               const SplitClassifier* clf,
                               const ActionabilityPlan* plan) {
  Gaussian post = posterior_pgm2(joint, lik, req.reference, y_prime);
  return sample_posterior(req, post, clf, req.target, plan);
}

GenResult gen_posterior_sample(const GenRequest& req,
                               const JointCfPrior& joint,
                               const LaplaceClassPrior& class_prior,
                               const SplitClassifier& clf,
                               const ActionabilityPlan* plan) {
  Gaussian post = posterior_laplace(class_prior, joint, req.reference);
  return sample_posterior(req, post, &clf, class_prior.target, plan);
}

GenResult gen_optimize(const GenRequest& req, const SplitClassifier& clf,
                       const DataPrior& prior) {
  const int n = static_cast<int>(req.reference.size());
  const int count = req.count;
  if (count < 1) throw std::invalid_argument("gen_optimize: count < 1");
  if (req.target < 0 || req.target >= clf.num_classes()) {
    throw std::invalid_argument("gen_optimize: target out of range");
  }
  const ObjectiveConfig& cfg = req.objective;

  // active metric for the diversity bonus
  Mat div_m = Mat::Identity(n, n);
  if (cfg.variant == Variant::kOurs) {
    div_m = Metric::mahalanobis(prior, cfg.alpha).matrix();
  }

  auto single = [&](const Vec& z) -> LossEval {
    switch (cfg.variant) {
      case Variant::kWachter:
        return wachter_loss(z, req.reference, req.target, clf, cfg);
      case Variant::kOurs:
        return ours_loss(z, req.reference, req.target, clf, prior, cfg);
      case Variant::kRegularized:
        return regularized_loss(z, req.reference, req.target, clf, prior,
                                cfg);
    }
    throw std::logic_error("gen_optimize: bad variant");
  };

  LossFn joint_loss = [&](const Vec& stacked) -> LossEval {
    LossEval total;
    total.value = 0.0;
    total.grad = Vec::Zero(count * n);
    for (int i = 0; i < count; ++i) {
      LossEval ev = single(stacked.segment(i * n, n));
      total.value += ev.value;
      total.grad.segment(i * n, n) = ev.grad;
    }
    if (count > 1 && cfg.lambda_div != 0.0) {
      // subtract the mean pairwise distance: larger spread, smaller loss
      const double pairs = count * (count - 1) / 2.0;
      for (int i = 0; i < count; ++i) {
        for (int j = i + 1; j < count; ++j) {
          const Vec d =
              stacked.segment(i * n, n) - stacked.segment(j * n, n);
          const double dist = std::sqrt(std::max(0.0, d.dot(div_m * d)));
          total.value -= cfg.lambda_div * dist / pairs;
          if (dist > 1e-12) {
            const Vec g = (div_m * d) / dist * (cfg.lambda_div / pairs);
            total.grad.segment(i * n, n) -= g;
            total.grad.segment(j * n, n) += g;
          }
        }
      }
    }
    return total;
  };

  // coincident starts never separate under the pairwise bonus (zero
  // subgradient), so each point gets a small seeded offset
  Vec init(count * n);
  CounterRng rng(req.seed, 1);
  for (int i = 0; i < count; ++i) {
    Vec z = req.reference;
    if (count > 1) {
      for (int j = 0; j < n; ++j) z(j) += 0.01 * rng.normal();
    }
    init.segment(i * n, n) = z;
  }

  AdamResult run =
      adam_minimize(joint_loss, init, req.adam_steps, req.adam_lr, req.seed);
  GenResult res;
  res.points = Mat(count, n);
  for (int i = 0; i < count; ++i) {
    res.points.row(i) = run.solution.segment(i * n, n).transpose();
  }
  score_validity(&res, &clf, req.target, req.validity_threshold);
  return res;
}

GenResult gen_growing_spheres(const GenRequest& req,
                              const SplitClassifier& clf, const Metric& metric,
                              const GrowingSpheresParams& params) {
  const int n = static_cast<int>(req.reference.size());
  if (req.count < 1) {
    throw std::invalid_argument("gen_growing_spheres: count < 1");
  }
  if (!req.immutable_mask.empty() &&
      static_cast<int>(req.immutable_mask.size()) != n) {
    throw std::invalid_argument("gen_growing_spheres: mask size mismatch");
  }
  GenResult res;
  if (clf.predict(req.reference) == req.target) {
    res.points = req.reference.transpose();
    res.note = "reference already in target class; radius 0";
    score_validity(&res, &clf, req.target, req.validity_threshold);
    return res;
  }

  std::vector<int> mut;
  for (int i = 0; i < n; ++i) {
    if (req.immutable_mask.empty() || !req.immutable_mask[static_cast<size_t>(i)]) {
      mut.push_back(i);
    }
  }
  if (mut.empty()) {
    throw std::invalid_argument(
        "gen_growing_spheres: every coordinate is immutable");
  }
  const Mat ball = metric.ball_factor(mut);
  const int nm = static_cast<int>(mut.size());

  CounterRng rng(req.seed, 2);
  std::vector<std::pair<double, Vec>> found;  // (metric distance, point)
  double radius = params.r0;
  for (int shell = 0; shell < params.max_shells; ++shell) {
    for (int s = 0; s < params.per_shell; ++s) {
      Vec u(nm);
      double norm2 = 0.0;
      do {
        for (int j = 0; j < nm; ++j) u(j) = rng.normal();
        norm2 = u.squaredNorm();
      } while (norm2 == 0.0);
      u /= std::sqrt(norm2);
      const Vec step = ball * u * radius;
      Vec cand = req.reference;
      for (int j = 0; j < nm; ++j) cand(mut[static_cast<size_t>(j)]) += step(j);
      if (clf.predict(cand) == req.target) {
        found.emplace_back(metric(cand, req.reference), std::move(cand));
      }
    }
    if (static_cast<int>(found.size()) >= req.count) break;
    radius *= params.growth;
  }
  if (found.empty()) {
    std::ostringstream msg;
    msg << "gen_growing_spheres: no class crossing within " << params.max_shells
        << " shells (final radius " << radius << ")";
    throw std::runtime_error(msg.str());
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  const int take = std::min<int>(req.count, static_cast<int>(found.size()));
  res.points = Mat(take, n);
  for (int i = 0; i < take; ++i) res.points.row(i) = found[static_cast<size_t>(i)].second.transpose();
  if (take < req.count) {
    res.note = "fewer crossings than requested";
  }
  score_validity(&res, &clf, req.target, req.validity_threshold);
  return res;
}

FaceResult gen_face(const GenRequest& req, const SplitClassifier& clf,
                    const Mat& rows, const Metric& metric, int k) {
  const int m = static_cast<int>(rows.rows());
  const int n = static_cast<int>(rows.cols());
  if (m < 2) throw std::invalid_argument("gen_face: need >= 2 rows");
  if (k < 1 || k >= m) throw std::invalid_argument("gen_face: bad k");
  if (req.reference.size() != n) {
    throw std::invalid_argument("gen_face: reference dimension mismatch");
  }

  // pairwise distances once; desk-scale datasets
  Mat dist(m, m);
  for (int i = 0; i < m; ++i) {
    dist(i, i) = 0.0;
    for (int j = i + 1; j < m; ++j) {
      const double d = metric(rows.row(i).transpose(), rows.row(j).transpose());
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }

  // k nearest per node (ties by lower index), then mutual filtering
  std::vector<std::vector<int>> knn(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    std::vector<int> order;
    order.reserve(static_cast<size_t>(m) - 1);
    for (int j = 0; j < m; ++j) {
      if (j != i) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (dist(i, a) != dist(i, b)) return dist(i, a) < dist(i, b);
      return a < b;
    });
    order.resize(static_cast<size_t>(k));
    std::sort(order.begin(), order.end());
    knn[static_cast<size_t>(i)] = std::move(order);
  }
  auto has = [](const std::vector<int>& v, int x) {
    return std::binary_search(v.begin(), v.end(), x);
  };
  std::vector<std::vector<std::pair<int, double>>> adj(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    for (int j : knn[static_cast<size_t>(i)]) {
      if (j > i && has(knn[static_cast<size_t>(j)], i)) {
        adj[static_cast<size_t>(i)].emplace_back(j, dist(i, j));
        adj[static_cast<size_t>(j)].emplace_back(i, dist(i, j));
      }
    }
  }

  // start at the training point nearest the reference
  int start = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    const double d = metric(rows.row(i).transpose(), req.reference);
    if (d < best_d) {
      best_d = d;
      start = i;
    }
  }

  // Dijkstra over the mutual graph
  std::vector<double> pathlen(static_cast<size_t>(m),
                              std::numeric_limits<double>::infinity());
  pathlen[static_cast<size_t>(start)] = 0.0;
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  heap.emplace(0.0, start);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > pathlen[static_cast<size_t>(u)]) continue;
    for (const auto& [v, w] : adj[static_cast<size_t>(u)]) {
      if (d + w < pathlen[static_cast<size_t>(v)]) {
        pathlen[static_cast<size_t>(v)] = d + w;
        heap.emplace(d + w, v);
      }
    }
  }

  std::vector<int> targets;
  for (int i = 0; i < m; ++i) {
    if (std::isfinite(pathlen[static_cast<size_t>(i)]) &&
        clf.predict(rows.row(i).transpose()) == req.target) {
      targets.push_back(i);
    }
  }
  if (targets.empty()) {
    throw std::runtime_error(
        "gen_face: no target-class training point reachable from the "
        "reference's component");
  }
  std::stable_sort(targets.begin(), targets.end(), [&](int a, int b) {
    return pathlen[static_cast<size_t>(a)] < pathlen[static_cast<size_t>(b)];
  });
  const int take = std::min<int>(req.count, static_cast<int>(targets.size()));

  FaceResult out;
  out.gen.points = Mat(take, n);
  for (int i = 0; i < take; ++i) {
    out.gen.points.row(i) = rows.row(targets[static_cast<size_t>(i)]);
    out.row_indices.push_back(targets[static_cast<size_t>(i)]);
    out.path_lengths.push_back(pathlen[static_cast<size_t>(targets[static_cast<size_t>(i)])]);
  }
  if (take < req.count) out.gen.note = "fewer reachable targets than requested";
  score_validity(&out.gen, &clf, req.target, req.validity_threshold);
  return out;
}

}  // namespace cfx

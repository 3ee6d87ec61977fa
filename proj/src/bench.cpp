#include "cfx/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "cfx/rng.hpp"

namespace cfx {
namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt3(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

double metric_ynn(const Vec& cf, const Mat& rows,
                  const std::vector<int>& predicted, int target, int k) {
  const int m = static_cast<int>(rows.rows());
  if (static_cast<int>(predicted.size()) != m) {
    throw std::invalid_argument("metric_ynn: predictions/rows mismatch");
  }
  if (k < 1 || k > m) throw std::invalid_argument("metric_ynn: bad k");
  std::vector<int> order(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) order[static_cast<size_t>(i)] = i;
  std::vector<double> d(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    d[static_cast<size_t>(i)] = (rows.row(i).transpose() - cf).norm();
  }
  // ties at the k-th slot go to the lowest row index
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (d[static_cast<size_t>(a)] != d[static_cast<size_t>(b)]) {
      return d[static_cast<size_t>(a)] < d[static_cast<size_t>(b)];
    }
    return a < b;
  });
  int hits = 0;
  for (int i = 0; i < k; ++i) {
    hits += predicted[static_cast<size_t>(order[static_cast<size_t>(i)])] == target;
  }
  return double(hits) / k;
}

int metric_redundancy(const Vec& cf, const Vec& ref,
                      const SplitClassifier& clf, int target) {
  if (cf.size() != ref.size()) {
    throw std::invalid_argument("metric_redundancy: dimension mismatch");
  }
  int redundant = 0;
  for (int i = 0; i < cf.size(); ++i) {
    if (std::abs(cf(i) - ref(i)) <= 1e-9) continue;
    Vec reverted = cf;
    reverted(i) = ref(i);
    if (clf.predict(reverted) == target) ++redundant;
  }
  return redundant;
}

std::optional<double> metric_diversity(const Mat& cfs) {
  const int c = static_cast<int>(cfs.rows());
  if (c < 2) return std::nullopt;
  double acc = 0.0;
  int pairs = 0;
  for (int i = 0; i < c; ++i) {
    for (int j = i + 1; j < c; ++j) {
      acc += (cfs.row(i) - cfs.row(j)).norm();
      ++pairs;
    }
  }
  return acc / pairs;
}

double sign_test_one_sided(int wins, int n) {
  if (n < 0 || wins < 0 || wins > n) {
    throw std::invalid_argument("sign_test_one_sided: bad arguments");
  }
  if (n == 0 || wins == 0) return 1.0;  // the full tail is certain
  // sum C(n, j) / 2^n for j >= wins, in log space for stability
  double p = 0.0;
  for (int j = wins; j <= n; ++j) {
    double log_c = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) -
                   std::lgamma(n - j + 1.0);
    p += std::exp(log_c - n * std::log(2.0));
  }
  return std::min(1.0, p);
}

MethodKind method_kind_from_name(const std::string& name) {
  if (name == "ours") return MethodKind::kPosterior;
  if (name == "wachter") return MethodKind::kWachter;
  if (name == "ours_opt") return MethodKind::kOursOpt;
  if (name == "regularized") return MethodKind::kRegularized;
  if (name == "growing_spheres") return MethodKind::kGrowingSpheres;
  if (name == "face") return MethodKind::kFace;
  throw std::invalid_argument("unknown method: " + name);
}

std::string method_kind_name(MethodKind kind) {
  switch (kind) {
    case MethodKind::kPosterior:
      return "ours";
    case MethodKind::kWachter:
      return "wachter";
    case MethodKind::kOursOpt:
      return "ours_opt";
    case MethodKind::kRegularized:
      return "regularized";
    case MethodKind::kGrowingSpheres:
      return "growing_spheres";
    case MethodKind::kFace:
      return "face";
  }
  return "?";
}

namespace {

// per-method state shared by every task (built once, read-only afterwards)
struct MethodState {
  MethodSpec spec;
  std::string label;
  std::optional<JointCfPrior> joint;
  std::optional<LaplaceClassPrior> class_prior;
  std::optional<Metric> metric;
};

GenResult dispatch(const MethodState& ms, const BenchContext& ctx,
                   const BenchConfig& cfg, GenRequest req) {
  switch (ms.spec.kind) {
    case MethodKind::kPosterior:
      return gen_posterior_sample(req, *ms.joint, *ms.class_prior, *ctx.clf,
                                  ctx.plan ? &*ctx.plan : nullptr);
    case MethodKind::kWachter:
    case MethodKind::kOursOpt:
    case MethodKind::kRegularized:
      return gen_optimize(req, *ctx.clf, ctx.prior);
    case MethodKind::kGrowingSpheres:
      return gen_growing_spheres(req, *ctx.clf, *ms.metric, ms.spec.gs);
    case MethodKind::kFace: {
      FaceResult fr = gen_face(req, *ctx.clf, ctx.rows, *ms.metric,
                               ms.spec.face_k);
      return fr.gen;
    }
  }
  throw std::logic_error("dispatch: bad method kind");
}

}  // namespace

BenchReport run_benchmark(const BenchContext& ctx, const BenchConfig& cfg) {
  if (!ctx.clf) throw std::invalid_argument("run_benchmark: no classifier");
  if (cfg.methods.empty()) {
    throw std::invalid_argument("run_benchmark: no methods configured");
  }
  if (cfg.n_references < 0 || cfg.count < 1) {
    throw std::invalid_argument("run_benchmark: bad counts");
  }
  if (cfg.n_references == 0) {
    BenchReport empty;
    empty.note = "no references requested; empty report";
    return empty;
  }
  const int m = static_cast<int>(ctx.rows.rows());
  const int n = static_cast<int>(ctx.rows.cols());
  if (ctx.clf->input_dim() != n) {
    throw std::invalid_argument("run_benchmark: classifier/rows mismatch");
  }

  // hard predictions once; reused by reference choice and yNN
  std::vector<int> predicted(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    predicted[static_cast<size_t>(i)] = ctx.clf->predict(ctx.rows.row(i).transpose());
  }

  // references needing a class change, seeded shuffle, first n_references
  std::vector<int> candidates;
  for (int i = 0; i < m; ++i) {
    if (predicted[static_cast<size_t>(i)] != cfg.target) candidates.push_back(i);
  }
  if (candidates.empty()) {
    throw std::runtime_error(
        "run_benchmark: every row is already classified as the target");
  }
  CounterRng shuffle_rng(cfg.seed, 0xfe);
  for (size_t i = candidates.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(shuffle_rng.below(i));
    std::swap(candidates[i - 1], candidates[j]);
  }
  const int n_refs = std::min<int>(cfg.n_references,
                                   static_cast<int>(candidates.size()));
  std::vector<int> refs(candidates.begin(), candidates.begin() + n_refs);

  // per-method setup (class priors and metrics are reference-independent)
  std::vector<MethodState> states;
  for (const MethodSpec& spec : cfg.methods) {
    MethodState ms;
    ms.spec = spec;
    ms.label = spec.label.empty() ? method_kind_name(spec.kind) : spec.label;
    if (spec.kind == MethodKind::kPosterior) {
      ms.joint = build_joint(ctx.prior, spec.alpha, ctx.immutable_mask);
      LaplaceConfig lap = spec.laplace;
      lap.seed = stream_key(cfg.seed, 0xc1a55);
      ms.class_prior =
          laplace_class_prior(*ctx.clf, ctx.rows, ctx.prior, cfg.target, lap);
    }
    if (spec.kind == MethodKind::kGrowingSpheres ||
        spec.kind == MethodKind::kFace) {
      ms.metric = spec.mahalanobis
                      ? Metric::mahalanobis(ctx.prior, spec.alpha)
                      : Metric::euclidean(n);
    }
    states.push_back(std::move(ms));
  }

  const int n_methods = static_cast<int>(states.size());
  const int n_tasks = n_methods * n_refs;
  std::vector<InstanceRecord> records(static_cast<size_t>(n_tasks));

  auto run_task = [&](int task_id) {
    const int mi = task_id / n_refs;
    const int ri = task_id % n_refs;
    const MethodState& ms = states[static_cast<size_t>(mi)];
    InstanceRecord rec;
    rec.task_id = task_id;
    rec.method = ms.label;
    rec.ref_row = refs[static_cast<size_t>(ri)];
    rec.total_points = cfg.count;

    GenRequest req;
    req.reference = ctx.rows.row(rec.ref_row).transpose();
    req.target = cfg.target;
    req.count = cfg.count;
    req.seed = stream_key(cfg.seed, static_cast<std::uint64_t>(task_id) + 1);
    req.validity_threshold = cfg.validity_threshold;
    req.immutable_mask = ctx.immutable_mask;
    req.objective.gamma = ms.spec.gamma;
    req.objective.alpha = ms.spec.alpha;
    req.objective.gamma2 = ms.spec.gamma2;
    req.objective.lambda_div = ms.spec.lambda_div;
    req.adam_steps = ms.spec.adam_steps;
    req.adam_lr = ms.spec.adam_lr;
    switch (ms.spec.kind) {
      case MethodKind::kWachter:
        req.objective.variant = Variant::kWachter;
        break;
      case MethodKind::kOursOpt:
        req.objective.variant = Variant::kOurs;
        break;
      case MethodKind::kRegularized:
        req.objective.variant = Variant::kRegularized;
        break;
      default:
        break;
    }

    const auto t0 = std::chrono::steady_clock::now();
    try {
      GenResult res = dispatch(ms, ctx, cfg, std::move(req));
      // validity is recomputed here rather than trusted from the generator
      const int count = static_cast<int>(res.points.rows());
      double l2 = 0, linf = 0, ynn = 0, redun = 0;
      std::vector<int> valid_rows;
      for (int i = 0; i < count; ++i) {
        const Vec point = res.points.row(i).transpose();
        const double p = ctx.clf->probs(point)(cfg.target);
        if (p >= cfg.validity_threshold) valid_rows.push_back(i);
      }
      rec.valid_points = static_cast<int>(valid_rows.size());
      if (!valid_rows.empty()) {
        Mat valid_points(static_cast<int>(valid_rows.size()), n);
        const Vec ref = ctx.rows.row(rec.ref_row).transpose();
        for (size_t vi = 0; vi < valid_rows.size(); ++vi) {
          const Vec point = res.points.row(valid_rows[vi]).transpose();
          valid_points.row(static_cast<int>(vi)) = point.transpose();
          l2 += (point - ref).norm();
          linf += (point - ref).cwiseAbs().maxCoeff();
          ynn += metric_ynn(point, ctx.rows, predicted, cfg.target, cfg.k_ynn);
          redun += metric_redundancy(point, ref, *ctx.clf, cfg.target);
        }
        const double nv = double(valid_rows.size());
        rec.l2 = l2 / nv;
        rec.linf = linf / nv;
        rec.ynn = ynn / nv;
        rec.redundancy = redun / nv;
        rec.diversity = metric_diversity(valid_points);
      }
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.failure = e.what();
    }
    if (cfg.timing) {
      rec.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    }
    records[static_cast<size_t>(task_id)] = std::move(rec);
  };

  const int workers = std::max(1, cfg.threads);
  if (workers == 1) {
    for (int t = 0; t < n_tasks; ++t) run_task(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          const int t = next.fetch_add(1);
          if (t >= n_tasks) break;
          run_task(t);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  // aggregation in task-id order: independent of completion order
  BenchReport report;
  report.records = std::move(records);
  report.reference_rows = refs;
  for (int mi = 0; mi < n_methods; ++mi) {
    MethodReport mr;
    mr.method = states[static_cast<size_t>(mi)].label;
    double l2 = 0, linf = 0, ynn = 0, redun = 0, secs = 0, div = 0;
    int successes = 0, div_n = 0;
    for (int ri = 0; ri < n_refs; ++ri) {
      const InstanceRecord& rec =
          report.records[static_cast<size_t>(mi * n_refs + ri)];
      ++mr.n;
      secs += rec.seconds;
      if (rec.failed) {
        ++mr.failures;
        continue;
      }
      if (rec.valid_points > 0) {
        ++successes;
        l2 += rec.l2;
        linf += rec.linf;
        ynn += rec.ynn;
        redun += rec.redundancy;
        if (rec.diversity) {
          div += *rec.diversity;
          ++div_n;
        }
      }
    }
    mr.success_rate = mr.n > 0 ? double(successes) / mr.n : 0.0;
    if (successes > 0) {
      mr.mean_l2 = l2 / successes;
      mr.mean_linf = linf / successes;
      mr.mean_ynn = ynn / successes;
      mr.mean_redundancy = redun / successes;
    }
    if (div_n > 0) mr.mean_diversity = div / div_n;
    mr.mean_seconds = mr.n > 0 ? secs / mr.n : 0.0;
    report.methods.push_back(std::move(mr));
  }
  return report;
}

std::string report_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "method,metric,value,n,failures\n";
  for (const MethodReport& mr : report.methods) {
    auto row = [&](const char* metric, double v) {
      out << mr.method << "," << metric << "," << fmt17(v) << "," << mr.n
          << "," << mr.failures << "\n";
    };
    row("l2", mr.mean_l2);
    row("linf", mr.mean_linf);
    row("ynn", mr.mean_ynn);
    row("redundancy", mr.mean_redundancy);
    out << mr.method << ",diversity,"
        << (mr.mean_diversity ? fmt17(*mr.mean_diversity) : std::string())
        << "," << mr.n << "," << mr.failures << "\n";
    row("seconds", mr.mean_seconds);
    row("success_rate", mr.success_rate);
  }
  return out.str();
}

std::string report_table(const BenchReport& report) {
  std::ostringstream out;
  if (!report.note.empty()) out << report.note << "\n";
  size_t name_w = 6;
  for (const MethodReport& mr : report.methods) {
    name_w = std::max(name_w, mr.method.size());
  }
  auto pad = [&](const std::string& s, size_t w) {
    std::string p = s;
    while (p.size() < w) p += ' ';
    return p;
  };
  auto lead = [&](const std::string& s, size_t w) {
    std::string p = s;
    while (p.size() < w) p.insert(p.begin(), ' ');
    return p;
  };
  out << pad("Method", name_w) << "  " << lead("l2", 9) << "  "
      << lead("linf", 9) << "  " << lead("yNN", 7) << "  " << lead("Redun.", 7)
      << "  " << lead("Div.", 7) << "  " << lead("t(s)", 9) << "  "
      << lead("succ", 6) << "  " << lead("n", 5) << "\n";
  for (const MethodReport& mr : report.methods) {
    out << pad(mr.method, name_w) << "  " << lead(fmt3(mr.mean_l2), 9) << "  "
        << lead(fmt3(mr.mean_linf), 9) << "  " << lead(fmt3(mr.mean_ynn), 7)
        << "  " << lead(fmt3(mr.mean_redundancy), 7) << "  "
        << lead(mr.mean_diversity ? fmt3(*mr.mean_diversity) : "-", 7) << "  "
        << lead(fmt3(mr.mean_seconds), 9) << "  "
        << lead(fmt3(mr.success_rate), 6) << "  "
        << lead(std::to_string(mr.n), 5) << "\n";
  }
  return out.str();
}

std::string records_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "task_id,method,ref_row,failed,valid_points,total_points,l2,linf,"
         "ynn,redundancy,diversity,seconds,failure\n";
  for (const InstanceRecord& rec : report.records) {
    std::string failure = rec.failure;
    for (char& c : failure) {
      if (c == ',' || c == '\n') c = ';';
    }
    out << rec.task_id << "," << rec.method << "," << rec.ref_row << ","
        << (rec.failed ? 1 : 0) << "," << rec.valid_points << ","
        << rec.total_points << "," << fmt17(rec.l2) << "," << fmt17(rec.linf)
        << "," << fmt17(rec.ynn) << "," << fmt17(rec.redundancy) << ","
        << (rec.diversity ? fmt17(*rec.diversity) : std::string()) << ","
        << fmt17(rec.seconds) << "," << failure << "\n";
  }
  return out.str();
}

GridChoice grid_search(const BenchContext& ctx, const BenchConfig& base,
                       const std::vector<MethodSpec>& candidates) {
  if (candidates.empty()) {
    throw std::invalid_argument("grid_search: no candidates");
  }
  constexpr double kSuccessFloor = 0.99;
  GridChoice best;        // among candidates meeting the floor
  GridChoice fallback;    // highest success otherwise
  for (size_t i = 0; i < candidates.size(); ++i) {
    BenchConfig cfg = base;
    cfg.methods = {candidates[i]};
    BenchReport rep = run_benchmark(ctx, cfg);
    const MethodReport& mr = rep.methods.front();
    const double success = mr.success_rate;
    if (success >= kSuccessFloor) {
      if (best.index < 0 || mr.mean_l2 < best.mean_l2) {
        best = GridChoice{static_cast<int>(i), success, mr.mean_l2, true};
      }
    }
    if (fallback.index < 0 || success > fallback.success) {
      fallback = GridChoice{static_cast<int>(i), success, mr.mean_l2, false};
    }
  }
  return best.index >= 0 ? best : fallback;
}

}  // namespace cfx

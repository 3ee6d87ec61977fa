#include "cfx/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfx/actionability.hpp"
#include "cfx/bench.hpp"
#include "cfx/codec.hpp"
#include "cfx/generators.hpp"
#include "cfx/io.hpp"
#include "cfx/models.hpp"
#include "cfx/posterior.hpp"
#include "cfx/prior.hpp"
#include "cfx/rng.hpp"

namespace cfx {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Vec parse_vec(const std::string& s, const char* what) {
  std::vector<double> vals;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      size_t used = 0;
      vals.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw std::runtime_error(std::string(what) + ": cannot parse '" + tok +
                               "' as a number");
    }
  }
  if (vals.empty()) {
    throw std::runtime_error(std::string(what) + ": empty vector");
  }
  Vec v(static_cast<int>(vals.size()));
  for (size_t i = 0; i < vals.size(); ++i) v(static_cast<int>(i)) = vals[i];
  return v;
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << body;
  if (!out.good()) throw std::runtime_error("write failed: " + path);
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

// Everything cmd_generate and cmd_bench share: artifacts plus the encoded
// training table.
struct Workspace {
  ProjectConfig config;
  Dataset dataset;
  FeatureSchema schema;
  std::vector<std::string> label_levels;
  DataPrior prior;
  SplitClassifier clf;
  Mat latent_rows;
  std::vector<bool> immutable_mask;
  std::optional<ActionabilityPlan> plan;
};

std::vector<FeatureHint> hints_of(const ProjectConfig& config) {
  std::vector<FeatureHint> hints;
  for (const FeatureConfig& fc : config.features) hints.push_back(fc.hint);
  return hints;
}

DataPrior build_prior(const ProjectConfig& config, const FeatureSchema& schema,
                      const Mat& latent_rows) {
  if (config.prior_source == "scm") {
    for (const FeatureSpec& spec : schema.features) {
      if (spec.latent_width != 1) {
        throw std::runtime_error(
            "scm prior requires width-1 features; '" + spec.name +
            "' expands to " + std::to_string(spec.latent_width) +
            " coordinates");
      }
    }
    if (config.scm->nodes.size() != config.features.size()) {
      throw std::runtime_error(
          "scm prior must declare one node per feature, in feature order");
    }
    for (size_t i = 0; i < config.features.size(); ++i) {
      if (config.scm->nodes[i].name != config.features[i].hint.name) {
        throw std::runtime_error("scm node " + std::to_string(i) +
                                 " is '" + config.scm->nodes[i].name +
                                 "', expected feature '" +
                                 config.features[i].hint.name + "'");
      }
    }
    return scm_to_gaussian(*config.scm);
  }
  return fit_data_prior(latent_rows, config.prior_jitter);
}

std::optional<ActionabilityPlan> build_plan(const ProjectConfig& config,
                                            const FeatureSchema& schema,
                                            const Mat& latent_rows) {
  bool any = false;
  for (const FeatureConfig& fc : config.features) {
    any = any || fc.feature_class == FeatureClass::kNonactionable;
  }
  if (!any) return std::nullopt;
  ActionabilityPlan plan;
  plan.policy = latent_policy(schema, config.features);
  plan.conditional =
      fit_conditional(latent_rows, plan.policy.actionable_coords(),
                      plan.policy.nonactionable_coords(), config.prior_jitter);
  return plan;
}

Workspace load_workspace(const std::string& config_path,
                         const std::string& data_path,
                         const std::string& artifacts) {
  ProjectConfig config = load_project_config(config_path);
  Dataset dataset = load_dataset(data_path, config);
  std::vector<std::string> label_levels;
  FeatureSchema schema =
      load_schema((fs::path(artifacts) / "schema.json").string(),
                  &label_levels);
  DataPrior prior = load_prior((fs::path(artifacts) / "prior.txt").string());
  SplitClassifier clf =
      load_classifier_file((fs::path(artifacts) / "model.txt").string());
  Mat latent_rows = encode_table(schema, dataset.rows);
  if (clf.input_dim() != schema.latent_dim) {
    throw std::runtime_error("model expects " +
                             std::to_string(clf.input_dim()) +
                             " inputs, schema encodes " +
                             std::to_string(schema.latent_dim));
  }
  std::vector<bool> mask = latent_immutable_mask(schema, config.features);
  bool any_immutable = false;
  for (bool b : mask) any_immutable = any_immutable || b;
  std::optional<ActionabilityPlan> plan =
      build_plan(config, schema, latent_rows);
  return Workspace{std::move(config),      std::move(dataset),
                   std::move(schema),      std::move(label_levels),
                   std::move(prior),       std::move(clf),
                   std::move(latent_rows), any_immutable
                                               ? std::move(mask)
                                               : std::vector<bool>{},
                   std::move(plan)};
}

int resolve_target(const std::string& target,
                   const std::vector<std::string>& levels, int num_classes) {
  for (size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == target) return static_cast<int>(i);
  }
  try {
    size_t used = 0;
    const int idx = std::stoi(target, &used);
    if (used == target.size() && idx >= 0 && idx < num_classes) return idx;
  } catch (const std::exception&) {
  }
  throw std::runtime_error("target '" + target +
                           "' is neither a label level nor a class index");
}

// ---------------------------------------------------------------- fit ----

struct FitArgs {
  std::string config_path;
  std::string data_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

int cmd_fit(const FitArgs& args) {
  const ProjectConfig config = load_project_config(args.config_path);
  const Dataset dataset = load_dataset(args.data_path, config);
  if (dataset.labels.empty()) {
    throw std::runtime_error("fit needs a label column; set 'label' in " +
                             args.config_path);
  }
  if (dataset.label_levels.size() < 2) {
    throw std::runtime_error("fit needs at least two label levels, found " +
                             std::to_string(dataset.label_levels.size()));
  }
  const FeatureSchema schema = fit_schema(dataset.rows, hints_of(config));
  const Mat latent_rows = encode_table(schema, dataset.rows);
  const DataPrior prior = build_prior(config, schema, latent_rows);
  if (prior.dim() != schema.latent_dim) {
    throw std::runtime_error("prior dimension mismatch");
  }

  const std::uint64_t seed = args.seed ? *args.seed : config.model.seed;
  SplitClassifier clf = make_classifier(
      schema.latent_dim, config.model.hidden,
      static_cast<int>(dataset.label_levels.size()), config.model.act, seed);
  TrainConfig tc;
  tc.steps = config.model.steps;
  tc.lr = config.model.lr;
  const std::vector<double> trace =
      train(clf, latent_rows, dataset.labels, tc);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  save_schema(schema, dataset.label_levels, (out / "schema.json").string());
  save_prior(prior, (out / "prior.txt").string());
  save_classifier_file(clf, (out / "model.txt").string());

  int correct = 0;
  for (int i = 0; i < latent_rows.rows(); ++i) {
    if (clf.predict(latent_rows.row(i).transpose()) ==
        dataset.labels[static_cast<size_t>(i)]) {
      ++correct;
    }
  }
  std::cout << "rows: " << dataset.rows.size() << ", features: "
            << schema.features.size() << " -> " << schema.latent_dim
            << " latent coordinates\n";
  std::cout << "prior: " << config.prior_source << "\n";
  std::cout << "train nll: " << fmt17(trace.front()) << " -> "
            << fmt17(trace.back()) << ", accuracy "
            << fmt17(static_cast<double>(correct) / latent_rows.rows())
            << "\n";
  std::cout << "wrote " << (out / "schema.json").string() << ", "
            << (out / "prior.txt").string() << ", "
            << (out / "model.txt").string() << "\n";
  return 0;
}

// ----------------------------------------------------------- generate ----

struct GenerateArgs {
  std::string config_path;
  std::string data_path;
  std::string artifacts;
  std::string method = "ours";
  std::string target;
  int reference_index = 0;
  std::string reference;  // raw comma-separated row, overrides the index
  int count = 1;
  double alpha = 0.5;
  double gamma = 1.0;
  double gamma2 = 0.0;
  double lambda_div = 0.0;
  double threshold = 0.5;
  bool mahalanobis = false;
  std::uint64_t seed = 0;
  std::string out_path;
};

RawRow parse_reference_row(const std::string& spec,
                           const ProjectConfig& config) {
  std::vector<std::string> cells;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) cells.push_back(tok);
  if (cells.size() != config.features.size()) {
    throw std::runtime_error("--reference has " +
                             std::to_string(cells.size()) + " cells, config " +
                             "declares " +
                             std::to_string(config.features.size()) +
                             " features");
  }
  RawRow row;
  for (size_t f = 0; f < cells.size(); ++f) {
    if (config.features[f].hint.kind == FeatureKind::kCategorical) {
      row.emplace_back(cells[f]);
    } else {
      try {
        size_t used = 0;
        const double v = std::stod(cells[f], &used);
        if (used != cells[f].size()) throw std::invalid_argument("trailing");
        row.emplace_back(v);
      } catch (const std::exception&) {
        throw std::runtime_error("--reference: cannot parse '" + cells[f] +
                                 "' for feature '" +
                                 config.features[f].hint.name + "'");
      }
    }
  }
  return row;
}

int cmd_generate(const GenerateArgs& args) {
  const Workspace ws =
      load_workspace(args.config_path, args.data_path, args.artifacts);
  const int target = resolve_target(args.target.empty()
                                        ? std::string("1")
                                        : args.target,
                                    ws.label_levels, ws.clf.num_classes());

  RawRow raw_ref;
  if (!args.reference.empty()) {
    raw_ref = parse_reference_row(args.reference, ws.config);
  } else {
    if (args.reference_index < 0 ||
        args.reference_index >= static_cast<int>(ws.dataset.rows.size())) {
      throw std::runtime_error("--reference-index " +
                               std::to_string(args.reference_index) +
                               " out of range (dataset has " +
                               std::to_string(ws.dataset.rows.size()) +
                               " rows)");
    }
    raw_ref = ws.dataset.rows[static_cast<size_t>(args.reference_index)];
  }
  const Vec reference = encode_row(ws.schema, raw_ref);

  GenRequest req;
  req.reference = reference;
  req.target = target;
  req.count = args.count;
  req.seed = args.seed;
  req.validity_threshold = args.threshold;
  req.immutable_mask = ws.immutable_mask;
  req.objective.gamma = args.gamma;
  req.objective.alpha = args.alpha;
  req.objective.gamma2 = args.gamma2;
  req.objective.lambda_div = args.lambda_div;

  const ActionabilityPlan* plan = ws.plan ? &*ws.plan : nullptr;
  const MethodKind kind = method_kind_from_name(args.method);
  GenResult result;
  switch (kind) {
    case MethodKind::kPosterior: {
      const JointCfPrior joint =
          build_joint(ws.prior, args.alpha, ws.immutable_mask);
      LaplaceConfig lap;
      lap.seed = stream_key(args.seed, 0xc1a55);
      const LaplaceClassPrior class_prior =
          laplace_class_prior(ws.clf, ws.latent_rows, ws.prior, target, lap);
      result = gen_posterior_sample(req, joint, class_prior, ws.clf, plan);
      break;
    }
    case MethodKind::kWachter:
      req.objective.variant = Variant::kWachter;
      result = gen_optimize(req, ws.clf, ws.prior);
      break;
    case MethodKind::kOursOpt:
      req.objective.variant = Variant::kOurs;
      result = gen_optimize(req, ws.clf, ws.prior);
      break;
    case MethodKind::kRegularized:
      req.objective.variant = Variant::kRegularized;
      result = gen_optimize(req, ws.clf, ws.prior);
      break;
    case MethodKind::kGrowingSpheres: {
      const Metric metric =
          args.mahalanobis ? Metric::mahalanobis(ws.prior, args.alpha)
                           : Metric::euclidean(ws.schema.latent_dim);
      result = gen_growing_spheres(req, ws.clf, metric);
      break;
    }
    case MethodKind::kFace: {
      const Metric metric =
          args.mahalanobis ? Metric::mahalanobis(ws.prior, args.alpha)
                           : Metric::euclidean(ws.schema.latent_dim);
      result = gen_face(req, ws.clf, ws.latent_rows, metric).gen;
      break;
    }
  }

  // Change listing: every feature, reference -> counterfactual.
  std::ostringstream csv;
  for (size_t f = 0; f < ws.schema.features.size(); ++f) {
    csv << (f ? "," : "") << csv_cell(ws.schema.features[f].name);
  }
  csv << ",target_prob,valid\n";
  for (int i = 0; i < result.points.rows(); ++i) {
    const RawRow decoded =
        decode_row(ws.schema, result.points.row(i).transpose());
    std::cout << "counterfactual " << (i + 1) << " of "
              << result.points.rows();
    const double prob = result.achieved_prob[static_cast<size_t>(i)];
    if (prob == prob) {
      std::cout << " (target prob " << fmt17(prob) << ", "
                << (result.valid[static_cast<size_t>(i)] ? "valid"
                                                         : "invalid")
                << ")";
    }
    std::cout << "\n";
    for (size_t f = 0; f < decoded.size(); ++f) {
      const std::string before = raw_value_to_string(raw_ref[f]);
      const std::string after = raw_value_to_string(decoded[f]);
      std::cout << "  " << ws.schema.features[f].name << ": " << before;
      if (before == after) {
        std::cout << " (unchanged)\n";
      } else {
        std::cout << " -> " << after << "\n";
      }
      csv << (f ? "," : "") << csv_cell(after);
    }
    csv << "," << fmt17(prob) << ","
        << (result.valid[static_cast<size_t>(i)] ? 1 : 0) << "\n";
  }
  if (!result.note.empty()) std::cout << "note: " << result.note << "\n";
  std::cout << "success rate: " << fmt17(result.success_rate) << "\n";
  if (!args.out_path.empty()) {
    write_text_file(args.out_path, csv.str());
    std::cout << "wrote " << args.out_path << "\n";
  }
  return 0;
}

// -------------------------------------------------------------- bench ----

struct BenchArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> k_ynn;
};

MethodSpec parse_method_spec(const json& jm) {
  MethodSpec spec;
  spec.kind = method_kind_from_name(jm.at("kind").get<std::string>());
  spec.label = jm.value("label", method_kind_name(spec.kind));
  spec.alpha = jm.value("alpha", spec.alpha);
  spec.gamma = jm.value("gamma", spec.gamma);
  spec.gamma2 = jm.value("gamma2", spec.gamma2);
  spec.lambda_div = jm.value("lambda_div", spec.lambda_div);
  spec.adam_steps = jm.value("adam_steps", spec.adam_steps);
  spec.adam_lr = jm.value("adam_lr", spec.adam_lr);
  spec.mahalanobis = jm.value("mahalanobis", spec.mahalanobis);
  spec.face_k = jm.value("face_k", spec.face_k);
  spec.gs.r0 = jm.value("gs_r0", spec.gs.r0);
  spec.gs.growth = jm.value("gs_growth", spec.gs.growth);
  spec.gs.per_shell = jm.value("gs_per_shell", spec.gs.per_shell);
  spec.gs.max_shells = jm.value("gs_max_shells", spec.gs.max_shells);
  spec.laplace.restarts = jm.value("laplace_restarts", spec.laplace.restarts);
  spec.laplace.min_target_prob =
      jm.value("laplace_min_target_prob", spec.laplace.min_target_prob);
  return spec;
}

int cmd_bench(const BenchArgs& args) {
  std::ifstream in(args.config_path);
  if (!in) {
    throw std::runtime_error("cannot open bench config: " + args.config_path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("bench config parse error: " +
                             std::string(e.what()));
  }
  const fs::path base = fs::path(args.config_path).parent_path();
  auto resolve = [&](const std::string& p) {
    return fs::path(p).is_absolute() ? p : (base / p).string();
  };
  const std::string project = resolve(j.at("project").get<std::string>());
  const std::string data = resolve(j.at("data").get<std::string>());
  const std::string artifacts = resolve(j.at("artifacts").get<std::string>());
  const Workspace ws = load_workspace(project, data, artifacts);

  BenchConfig cfg;
  cfg.target = resolve_target(j.value("target", std::string("1")),
                              ws.label_levels, ws.clf.num_classes());
  cfg.n_references = j.value("n_references", cfg.n_references);
  cfg.count = j.value("count", cfg.count);
  cfg.k_ynn = args.k_ynn ? *args.k_ynn : j.value("k_ynn", cfg.k_ynn);
  cfg.validity_threshold =
      j.value("validity_threshold", cfg.validity_threshold);
  cfg.seed = args.seed ? *args.seed : j.value("seed", cfg.seed);
  cfg.threads = args.threads ? *args.threads : j.value("threads", cfg.threads);
  cfg.timing = j.value("timing", cfg.timing);
  if (!j.contains("methods") || !j["methods"].is_array() ||
      j["methods"].empty()) {
    throw std::runtime_error("bench config: missing 'methods' array");
  }
  for (const json& jm : j["methods"]) cfg.methods.push_back(parse_method_spec(jm));

  BenchContext ctx{&ws.clf, ws.latent_rows, ws.prior, ws.immutable_mask,
                   ws.plan};
  const BenchReport report = run_benchmark(ctx, cfg);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  write_text_file((out / "report.csv").string(), report_csv(report));
  write_text_file((out / "report.txt").string(), report_table(report));
  write_text_file((out / "records.csv").string(), records_csv(report));
  std::cout << report_table(report);
  std::cout << "wrote " << (out / "report.csv").string() << ", "
            << (out / "report.txt").string() << ", "
            << (out / "records.csv").string() << "\n";
  return 0;
}

// ------------------------------------------------------- density-grid ----

struct GridArgs {
  std::string dist = "pgm2";
  std::string out_path;
  int res = 201;
  double xmin = -10, xmax = 10, ymin = -10, ymax = 10;
  double alpha = 0.5;
  double gamma = 1.0;
  double lik = 1.0;  // likelihood precision scale: L = lik * I
  double y_prime = 10.0;
  std::string mu = "0,0";
  std::string cov = "4.04,-7.80,-7.80,17.00";
  std::string a = "2,-3";
  double b = 5.0;
  std::string ref = "2,-4";
};

int cmd_density_grid(const GridArgs& args) {
  const Vec mu = parse_vec(args.mu, "--mu");
  if (mu.size() != 2) throw std::runtime_error("--mu must be 2-D");
  const Vec cov_flat = parse_vec(args.cov, "--cov");
  if (cov_flat.size() != 4) {
    throw std::runtime_error("--cov needs 4 row-major entries");
  }
  Mat sigma(2, 2);
  sigma << cov_flat(0), cov_flat(1), cov_flat(2), cov_flat(3);
  const Vec a_row = parse_vec(args.a, "--a");
  if (a_row.size() != 2) throw std::runtime_error("--a must be 2-D");
  const Vec x = parse_vec(args.ref, "--ref");
  if (x.size() != 2) throw std::runtime_error("--ref must be 2-D");
  if (args.res < 2) throw std::runtime_error("--grid-res must be >= 2");

  Mat a(1, 2);
  a << a_row(0), a_row(1);
  Vec b(1);
  b << args.b;
  Mat l = args.lik * Mat::Identity(1, 1);
  Vec y_prime(1);
  y_prime << args.y_prime;
  const Mat w_prec = args.gamma * Mat::Identity(2, 2);

  const DataPrior prior(mu, sigma, PriorSource::kManual);
  std::optional<Gaussian> dist;
  if (args.dist == "prior") {
    dist.emplace(mu, sigma);
  } else if (args.dist == "pgm1") {
    dist = posterior_pgm1(LinearLikelihood(a, b, l), x, y_prime, w_prec);
  } else if (args.dist == "pgm2") {
    const JointCfPrior joint = build_joint(prior, args.alpha);
    dist = posterior_pgm2(joint, LinearLikelihood(a, b, l), x, y_prime);
  } else if (args.dist == "pgm3") {
    dist =
        posterior_pgm3(prior, LinearLikelihood(a, b, l), x, y_prime, w_prec);
  } else {
    throw std::runtime_error("--dist must be prior, pgm1, pgm2, or pgm3");
  }

  std::ostringstream body;
  body << "x,y,log_density\n";
  Vec p(2);
  for (int iy = 0; iy < args.res; ++iy) {
    const double py =
        args.ymin + (args.ymax - args.ymin) * iy / (args.res - 1);
    for (int ix = 0; ix < args.res; ++ix) {
      const double px =
          args.xmin + (args.xmax - args.xmin) * ix / (args.res - 1);
      p << px, py;
      body << fmt17(px) << "," << fmt17(py) << "," << fmt17(dist->log_pdf(p))
           << "\n";
    }
  }
  write_text_file(args.out_path, body.str());
  std::cout << "wrote " << args.out_path << " (" << args.res << "x"
            << args.res << " cells, dist " << args.dist << ")\n";
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"counterfactual explanation toolkit"};
  app.require_subcommand(1);

  FitArgs fit_args;
  std::uint64_t fit_seed = 0;
  CLI::App* fit = app.add_subcommand(
      "fit", "fit codec schema and data prior, train the classifier");
  fit->add_option("--config", fit_args.config_path, "project config (json)")
      ->required();
  fit->add_option("--data", fit_args.data_path, "training table (csv)")
      ->required();
  fit->add_option("--out", fit_args.out_dir, "artifact directory")
      ->required();
  CLI::Option* fit_seed_opt =
      fit->add_option("--seed", fit_seed, "overrides the config model seed");

  GenerateArgs gen_args;
  CLI::App* gen = app.add_subcommand(
      "generate", "emit counterfactual rows for one reference");
  gen->add_option("--config", gen_args.config_path, "project config (json)")
      ->required();
  gen->add_option("--data", gen_args.data_path, "training table (csv)")
      ->required();
  gen->add_option("--artifacts", gen_args.artifacts,
                  "directory written by fit")
      ->required();
  gen->add_option("--method", gen_args.method,
                  "ours | wachter | ours_opt | regularized | growing_spheres"
                  " | face");
  gen->add_option("--target", gen_args.target,
                  "desired label level or class index");
  gen->add_option("--reference-index", gen_args.reference_index,
                  "dataset row to explain");
  gen->add_option("--reference", gen_args.reference,
                  "raw comma-separated row (overrides --reference-index)");
  gen->add_option("--count", gen_args.count, "counterfactuals to emit");
  gen->add_option("--alpha", gen_args.alpha, "reference coupling in [0, 1)");
  gen->add_option("--gamma", gen_args.gamma, "fidelity weight");
  gen->add_option("--gamma2", gen_args.gamma2,
                  "prior anchor weight (regularized)");
  gen->add_option("--lambda-div", gen_args.lambda_div, "diversity bonus");
  gen->add_option("--threshold", gen_args.threshold, "validity threshold");
  gen->add_flag("--mahalanobis", gen_args.mahalanobis,
                "prior-shaped metric for growing_spheres / face");
  gen->add_option("--seed", gen_args.seed, "rng seed");
  gen->add_option("--out", gen_args.out_path, "counterfactual rows (csv)");

  BenchArgs bench_args;
  std::uint64_t bench_seed = 0;
  int bench_threads = 1;
  int bench_k = 5;
  CLI::App* bench =
      app.add_subcommand("bench", "run the method comparison benchmark");
  bench->add_option("--config", bench_args.config_path, "bench config (json)")
      ->required();
  bench->add_option("--out", bench_args.out_dir, "report directory")
      ->required();
  CLI::Option* bench_seed_opt =
      bench->add_option("--seed", bench_seed, "overrides the config seed");
  CLI::Option* bench_threads_opt = bench->add_option(
      "--threads", bench_threads, "overrides the config worker count");
  CLI::Option* bench_k_opt =
      bench->add_option("--k-ynn", bench_k, "overrides the config yNN k");

  GridArgs grid_args;
  CLI::App* grid = app.add_subcommand(
      "density-grid", "tabulate a 2-D prior or posterior log-density");
  grid->add_option("--dist", grid_args.dist, "prior | pgm1 | pgm2 | pgm3");
  grid->add_option("--out", grid_args.out_path, "output table (csv)")
      ->required();
  grid->add_option("--grid-res", grid_args.res, "cells per axis");
  grid->add_option("--xmin", grid_args.xmin);
  grid->add_option("--xmax", grid_args.xmax);
  grid->add_option("--ymin", grid_args.ymin);
  grid->add_option("--ymax", grid_args.ymax);
  grid->add_option("--alpha", grid_args.alpha, "reference coupling (pgm2)");
  grid->add_option("--gamma", grid_args.gamma,
                   "reference precision scale (pgm1, pgm3)");
  grid->add_option("--lik", grid_args.lik, "likelihood precision scale");
  grid->add_option("--target", grid_args.y_prime, "desired model output");
  grid->add_option("--mu", grid_args.mu, "prior mean, comma-separated");
  grid->add_option("--cov", grid_args.cov, "prior covariance, row-major");
  grid->add_option("--a", grid_args.a, "regression weights");
  grid->add_option("--b", grid_args.b, "regression intercept");
  grid->add_option("--ref", grid_args.ref, "reference point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (fit->parsed()) {
      if (*fit_seed_opt) fit_args.seed = fit_seed;
      return cmd_fit(fit_args);
    }
    if (gen->parsed()) return cmd_generate(gen_args);
    if (bench->parsed()) {
      if (*bench_seed_opt) bench_args.seed = bench_seed;
      if (*bench_threads_opt) bench_args.threads = bench_threads;
      if (*bench_k_opt) bench_args.k_ynn = bench_k;
      return cmd_bench(bench_args);
    }
    if (grid->parsed()) return cmd_density_grid(grid_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}

}  // namespace cfx

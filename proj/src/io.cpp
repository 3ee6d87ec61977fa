#include "cfx/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cfx {

using nlohmann::json;

namespace {

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config parse error in " + path + ": " +
                             e.what());
  }
  return j;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

double parse_number(const std::string& s, int row, const std::string& col) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    std::ostringstream msg;
    msg << "dataset: row " << row << ", column '" << col
        << "': cannot parse '" << s << "' as a number";
    throw std::runtime_error(msg.str());
  }
}

}  // namespace

ProjectConfig load_project_config(const std::string& path) {
  const json j = load_json(path);
  ProjectConfig cfg;
  if (!j.contains("features") || !j["features"].is_array() ||
      j["features"].empty()) {
    throw std::runtime_error("config: missing or empty 'features' array");
  }
  std::map<std::string, int> name_to_index;
  for (const json& jf : j["features"]) {
    FeatureConfig fc;
    fc.hint.name = jf.at("name").get<std::string>();
    fc.hint.kind =
        feature_kind_from_name(jf.value("kind", std::string("continuous")));
    fc.hint.eps = jf.value("eps", 0.01);
    fc.hint.temperature = jf.value("temperature", 0.01);
    if (jf.contains("levels")) {
      fc.hint.levels = jf["levels"].get<std::vector<std::string>>();
    }
    const std::string cls = jf.value("class", std::string("mutable"));
    if (cls == "mutable") {
      fc.feature_class = FeatureClass::kMutable;
    } else if (cls == "immutable") {
      fc.feature_class = FeatureClass::kImmutable;
    } else if (cls == "nonactionable") {
      fc.feature_class = FeatureClass::kNonactionable;
    } else {
      throw std::runtime_error("config: unknown feature class '" + cls + "'");
    }
    if (jf.contains("ancestors")) {
      fc.ancestors = jf["ancestors"].get<std::vector<std::string>>();
    }
    if (fc.feature_class == FeatureClass::kNonactionable &&
        fc.ancestors.empty()) {
      throw std::runtime_error("config: nonactionable feature '" +
                               fc.hint.name + "' needs ancestors");
    }
    name_to_index[fc.hint.name] = static_cast<int>(cfg.features.size());
    cfg.features.push_back(std::move(fc));
  }
  cfg.label_column = j.value("label", std::string());
  cfg.prior_source = j.value("prior", std::string("data"));
  if (cfg.prior_source != "data" && cfg.prior_source != "scm") {
    throw std::runtime_error("config: prior must be 'data' or 'scm'");
  }
  cfg.prior_jitter = j.value("prior_jitter", 1e-9);

  if (j.contains("scm")) {
    LinearScm scm;
    for (const json& jn : j["scm"].at("nodes")) {
      ScmNode node;
      node.name = jn.at("name").get<std::string>();
      node.intercept = jn.value("intercept", 0.0);
      node.noise_variance = jn.value("noise_variance", 0.0);
      if (jn.contains("parents")) {
        for (const json& jp : jn["parents"]) {
          const std::string pname = jp.at("name").get<std::string>();
          auto it = name_to_index.find(pname);
          if (it == name_to_index.end()) {
            throw std::runtime_error("config: scm parent '" + pname +
                                     "' is not a feature");
          }
          node.parents.emplace_back(it->second, jp.at("weight").get<double>());
        }
      }
      scm.nodes.push_back(std::move(node));
    }
    cfg.scm = std::move(scm);
  }
  if (cfg.prior_source == "scm" && !cfg.scm) {
    throw std::runtime_error("config: prior 'scm' needs an 'scm' block");
  }

  if (j.contains("model")) {
    const json& jm = j["model"];
    if (jm.contains("hidden")) {
      cfg.model.hidden = jm["hidden"].get<std::vector<int>>();
    }
    cfg.model.act = activation_from_name(
        jm.value("activation", std::string("tanh")));
    cfg.model.steps = jm.value("steps", 1000);
    cfg.model.lr = jm.value("lr", 0.05);
    cfg.model.seed = jm.value("seed", std::uint64_t(0));
  }
  return cfg;
}

Dataset load_dataset(const std::string& path, const ProjectConfig& config) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("dataset: empty file: " + path);
  }
  const std::vector<std::string> header = split_csv_line(line);
  std::map<std::string, int> col_of;
  for (size_t i = 0; i < header.size(); ++i) {
    col_of[header[i]] = static_cast<int>(i);
  }
  std::vector<int> feature_cols;
  for (const FeatureConfig& fc : config.features) {
    auto it = col_of.find(fc.hint.name);
    if (it == col_of.end()) {
      throw std::runtime_error("dataset: missing column '" + fc.hint.name +
                               "'");
    }
    feature_cols.push_back(it->second);
  }
  int label_col = -1;
  if (!config.label_column.empty()) {
    auto it = col_of.find(config.label_column);
    if (it == col_of.end()) {
      throw std::runtime_error("dataset: missing label column '" +
                               config.label_column + "'");
    }
    label_col = it->second;
  }

  Dataset ds;
  std::vector<std::string> raw_labels;
  int row_idx = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      std::ostringstream msg;
      msg << "dataset: row " << row_idx << " has " << cells.size()
          << " cells, header has " << header.size();
      throw std::runtime_error(msg.str());
    }
    RawRow row;
    for (size_t f = 0; f < config.features.size(); ++f) {
      const std::string& cell = cells[static_cast<size_t>(feature_cols[f])];
      if (config.features[f].hint.kind == FeatureKind::kCategorical) {
        row.emplace_back(cell);
      } else {
        row.emplace_back(
            parse_number(cell, row_idx, config.features[f].hint.name));
      }
    }
    ds.rows.push_back(std::move(row));
    if (label_col >= 0) {
      raw_labels.push_back(cells[static_cast<size_t>(label_col)]);
    }
    ++row_idx;
  }
  if (ds.rows.empty()) {
    throw std::runtime_error("dataset: no data rows in " + path);
  }
  if (label_col >= 0) {
    std::set<std::string> level_set(raw_labels.begin(), raw_labels.end());
    ds.label_levels.assign(level_set.begin(), level_set.end());
    std::map<std::string, int> index;
    for (size_t i = 0; i < ds.label_levels.size(); ++i) {
      index[ds.label_levels[i]] = static_cast<int>(i);
    }
    for (const std::string& l : raw_labels) ds.labels.push_back(index[l]);
  }
  return ds;
}

void save_prior(const DataPrior& prior, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  const int n = prior.dim();
  out << "cfx-prior 1\n";
  out << "source "
      << (prior.source() == PriorSource::kFitted
              ? "data"
              : (prior.source() == PriorSource::kScm ? "scm" : "manual"))
      << "\n";
  out << "mu " << n << "\n";
  for (int i = 0; i < n; ++i) {
    out << double_to_hex(prior.mu()(i)) << ((i + 1 == n) ? '\n' : ' ');
  }
  out << "sigma " << n << " " << n << "\n";
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      out << double_to_hex(prior.sigma()(r, c)) << ((c + 1 == n) ? '\n' : ' ');
    }
  }
  out << "end\n";
  if (!out.good()) throw std::runtime_error("write failed: " + path);
}

DataPrior load_prior(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prior file: " + path);
  std::string tok;
  auto expect = [&](const std::string& want) {
    if (!(in >> tok) || tok != want) {
      throw std::runtime_error("prior file: expected '" + want + "', got '" +
                               tok + "'");
    }
  };
  expect("cfx-prior");
  expect("1");
  expect("source");
  std::string source;
  in >> source;
  expect("mu");
  int n = 0;
  if (!(in >> n) || n < 1) throw std::runtime_error("prior file: bad size");
  Vec mu(n);
  for (int i = 0; i < n; ++i) {
    if (!(in >> tok)) throw std::runtime_error("prior file: truncated mu");
    mu(i) = hex_to_double(tok);
  }
  expect("sigma");
  int r = 0, c = 0;
  if (!(in >> r >> c) || r != n || c != n) {
    throw std::runtime_error("prior file: bad sigma shape");
  }
  Mat sigma(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!(in >> tok)) throw std::runtime_error("prior file: truncated sigma");
      sigma(i, j) = hex_to_double(tok);
    }
  }
  expect("end");
  PriorSource src = PriorSource::kManual;
  if (source == "data") src = PriorSource::kFitted;
  if (source == "scm") src = PriorSource::kScm;
  return DataPrior(std::move(mu), std::move(sigma), src);
}

void save_schema(const FeatureSchema& schema,
                 const std::vector<std::string>& label_levels,
                 const std::string& path) {
  json j;
  j["version"] = 1;
  j["latent_dim"] = schema.latent_dim;
  j["label_levels"] = label_levels;
  json jf = json::array();
  for (const FeatureSpec& spec : schema.features) {
    json s;
    s["name"] = spec.name;
    s["kind"] = feature_kind_name(spec.kind);
    s["eps"] = spec.eps;
    s["temperature"] = spec.temperature;
    s["levels"] = spec.levels;
    // proportions serialized bit-exactly; they feed encode()
    json props = json::array();
    for (double p : spec.proportions) props.push_back(double_to_hex(p));
    s["proportions_hex"] = props;
    s["latent_offset"] = spec.latent_offset;
    s["latent_width"] = spec.latent_width;
    jf.push_back(std::move(s));
  }
  j["features"] = std::move(jf);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << j.dump(2) << "\n";
  if (!out.good()) throw std::runtime_error("write failed: " + path);
}

FeatureSchema load_schema(const std::string& path,
                          std::vector<std::string>* label_levels) {
  const json j = load_json(path);
  FeatureSchema schema;
  schema.latent_dim = j.at("latent_dim").get<int>();
  if (label_levels && j.contains("label_levels")) {
    *label_levels = j["label_levels"].get<std::vector<std::string>>();
  }
  for (const json& s : j.at("features")) {
    FeatureSpec spec;
    spec.name = s.at("name").get<std::string>();
    spec.kind = feature_kind_from_name(s.at("kind").get<std::string>());
    spec.eps = s.value("eps", 0.01);
    spec.temperature = s.value("temperature", 0.01);
    spec.levels = s.value("levels", std::vector<std::string>{});
    for (const json& p : s.at("proportions_hex")) {
      spec.proportions.push_back(hex_to_double(p.get<std::string>()));
    }
    for (double p : spec.proportions) {
      spec.latent_means.push_back(std::log(p / (1.0 - p)));
    }
    spec.latent_offset = s.at("latent_offset").get<int>();
    spec.latent_width = s.at("latent_width").get<int>();
    schema.features.push_back(std::move(spec));
  }
  return schema;
}

FeaturePolicy latent_policy(const FeatureSchema& schema,
                            const std::vector<FeatureConfig>& features) {
  if (features.size() != schema.features.size()) {
    throw std::invalid_argument("latent_policy: feature count mismatch");
  }
  std::map<std::string, size_t> by_name;
  for (size_t f = 0; f < features.size(); ++f) {
    by_name[features[f].hint.name] = f;
  }
  FeaturePolicy policy;
  policy.classes.resize(static_cast<size_t>(schema.latent_dim));
  policy.ancestors.resize(static_cast<size_t>(schema.latent_dim));
  for (size_t f = 0; f < features.size(); ++f) {
    const FeatureSpec& spec = schema.features[f];
    std::vector<int> anc_coords;
    for (const std::string& aname : features[f].ancestors) {
      auto it = by_name.find(aname);
      if (it == by_name.end()) {
        throw std::invalid_argument("latent_policy: unknown ancestor '" +
                                    aname + "'");
      }
      const FeatureSpec& aspec = schema.features[it->second];
      for (int k = 0; k < aspec.latent_width; ++k) {
        anc_coords.push_back(aspec.latent_offset + k);
      }
    }
    std::sort(anc_coords.begin(), anc_coords.end());
    for (int k = 0; k < spec.latent_width; ++k) {
      const size_t at = static_cast<size_t>(spec.latent_offset + k);
      policy.classes[at] = features[f].feature_class;
      policy.ancestors[at] = anc_coords;
    }
  }
  return policy;
}

std::vector<bool> latent_immutable_mask(
    const FeatureSchema& schema, const std::vector<FeatureConfig>& features) {
  if (features.size() != schema.features.size()) {
    throw std::invalid_argument("latent_immutable_mask: count mismatch");
  }
  std::vector<bool> per_feature;
  per_feature.reserve(features.size());
  for (const FeatureConfig& fc : features) {
    per_feature.push_back(fc.feature_class == FeatureClass::kImmutable);
  }
  return schema.expand(per_feature);
}

std::string raw_value_to_string(const RawValue& v) {
  if (const std::string* s = std::get_if<std::string>(&v)) return *s;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", std::get<double>(v));
  return buf;
}

}  // namespace cfx

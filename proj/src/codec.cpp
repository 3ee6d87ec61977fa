#include "cfx/codec.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace cfx {
namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

[[noreturn]] void row_error(int row, const std::string& feature,
                            const std::string& what) {
  std::ostringstream msg;
  msg << "codec: ";
  if (row >= 0) msg << "row " << row << ", ";
  msg << "feature '" << feature << "': " << what;
  throw std::invalid_argument(msg.str());
}

double want_number(const RawValue& v, int row, const std::string& name) {
  if (const double* d = std::get_if<double>(&v)) return *d;
  row_error(row, name, "expected a number, got a string");
}

std::string want_string(const RawValue& v) {
  if (const std::string* s = std::get_if<std::string>(&v)) return *s;
  // numeric categorical levels are legal in CSVs; normalize via printing
  std::ostringstream os;
  os << std::get<double>(v);
  return os.str();
}

// embedding scale that moment-matches the level prior N(logit(p), 1)
double kappa(double p) { return 1.0 / std::sqrt(p * (1.0 - p)); }

}  // namespace

FeatureKind feature_kind_from_name(const std::string& name) {
  if (name == "continuous") return FeatureKind::kContinuous;
  if (name == "log_continuous") return FeatureKind::kLogContinuous;
  if (name == "pixel_logit") return FeatureKind::kPixelLogit;
  if (name == "categorical") return FeatureKind::kCategorical;
  if (name == "binary") return FeatureKind::kBinary;
  throw std::invalid_argument("unknown feature kind: " + name);
}

std::string feature_kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::kContinuous:
      return "continuous";
    case FeatureKind::kLogContinuous:
      return "log_continuous";
    case FeatureKind::kPixelLogit:
      return "pixel_logit";
    case FeatureKind::kCategorical:
      return "categorical";
    case FeatureKind::kBinary:
      return "binary";
  }
  return "?";
}

FeatureSchema fit_schema(const std::vector<RawRow>& rows,
                         const std::vector<FeatureHint>& hints) {
  if (hints.empty()) throw std::invalid_argument("fit_schema: no hints");
  if (rows.empty()) throw std::invalid_argument("fit_schema: no rows");
  const size_t nf = hints.size();
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != nf) {
      std::ostringstream msg;
      msg << "fit_schema: row " << r << " has " << rows[r].size()
          << " cells, want " << nf;
      throw std::invalid_argument(msg.str());
    }
  }
  const int m = static_cast<int>(rows.size());

  FeatureSchema schema;
  int offset = 0;
  for (size_t f = 0; f < nf; ++f) {
    const FeatureHint& hint = hints[f];
    FeatureSpec spec;
    spec.name = hint.name;
    spec.kind = hint.kind;
    spec.eps = hint.eps;
    spec.temperature = hint.temperature;
    spec.latent_offset = offset;

    switch (hint.kind) {
      case FeatureKind::kContinuous:
        for (int r = 0; r < m; ++r) {
          const double v = want_number(rows[r][f], r, hint.name);
          if (!std::isfinite(v)) row_error(r, hint.name, "non-finite value");
        }
        spec.latent_width = 1;
        break;
      case FeatureKind::kLogContinuous:
        for (int r = 0; r < m; ++r) {
          const double v = want_number(rows[r][f], r, hint.name);
          if (!(v > 0.0)) {
            row_error(r, hint.name, "log kind needs a positive value");
          }
        }
        spec.latent_width = 1;
        break;
      case FeatureKind::kPixelLogit:
        if (!(hint.eps > 0.0 && hint.eps < 0.5)) {
          throw std::invalid_argument("fit_schema: pixel eps out of (0, 0.5)");
        }
        for (int r = 0; r < m; ++r) {
          const double v = want_number(rows[r][f], r, hint.name);
          if (!(v >= 0.0 && v <= 1.0)) {
            row_error(r, hint.name, "pixel outside [0, 1]");
          }
        }
        spec.latent_width = 1;
        break;
      case FeatureKind::kBinary: {
        int ones = 0;
        for (int r = 0; r < m; ++r) {
          const double v = want_number(rows[r][f], r, hint.name);
          if (v != 0.0 && v != 1.0) {
            row_error(r, hint.name, "binary value must be 0 or 1");
          }
          ones += (v == 1.0);
        }
        const double p = (ones + 1.0) / (m + 2.0);  // add-one smoothing
        spec.proportions = {p};
        spec.latent_means = {logit(p)};
        spec.latent_width = 1;
        break;
      }
      case FeatureKind::kCategorical: {
        std::vector<std::string> levels = hint.levels;
        std::map<std::string, int> counts;
        for (const std::string& l : levels) counts[l] = 0;
        for (int r = 0; r < m; ++r) {
          const std::string level = want_string(rows[r][f]);
          auto it = counts.find(level);
          if (it == counts.end()) {
            if (!levels.empty()) {
              row_error(r, hint.name, "level '" + level + "' not declared");
            }
            counts[level] = 1;
          } else {
            ++it->second;
          }
        }
        if (levels.empty()) {
          for (const auto& [level, cnt] : counts) levels.push_back(level);
        }
        if (levels.size() < 2) {
          throw std::invalid_argument("fit_schema: categorical '" +
                                      hint.name + "' needs >= 2 levels");
        }
        const int k = static_cast<int>(levels.size());
        for (const std::string& level : levels) {
          const double p = (counts[level] + 1.0) / (m + double(k));
          spec.proportions.push_back(p);
          spec.latent_means.push_back(logit(p));
        }
        spec.levels = std::move(levels);
        spec.latent_width = k;
        break;
      }
    }
    offset += spec.latent_width;
    schema.features.push_back(std::move(spec));
  }
  schema.latent_dim = offset;
  return schema;
}

Vec encode_row(const FeatureSchema& schema, const RawRow& row) {
  if (row.size() != schema.features.size()) {
    throw std::invalid_argument("encode_row: cell count mismatch");
  }
  Vec latent(schema.latent_dim);
  for (size_t f = 0; f < schema.features.size(); ++f) {
    const FeatureSpec& spec = schema.features[f];
    const int at = spec.latent_offset;
    switch (spec.kind) {
      case FeatureKind::kContinuous: {
        const double v = want_number(row[f], -1, spec.name);
        if (!std::isfinite(v)) row_error(-1, spec.name, "non-finite value");
        latent(at) = v;
        break;
      }
      case FeatureKind::kLogContinuous: {
        const double v = want_number(row[f], -1, spec.name);
        if (!(v > 0.0)) {
          row_error(-1, spec.name, "log kind needs a positive value");
        }
        latent(at) = std::log(v);
        break;
      }
      case FeatureKind::kPixelLogit: {
        const double v = want_number(row[f], -1, spec.name);
        if (!(v >= 0.0 && v <= 1.0)) {
          row_error(-1, spec.name, "pixel outside [0, 1]");
        }
        const double u = std::abs(v - spec.eps);
        latent(at) = std::log(u / (1.0 - u));
        break;
      }
      case FeatureKind::kBinary: {
        const double v = want_number(row[f], -1, spec.name);
        if (v != 0.0 && v != 1.0) {
          row_error(-1, spec.name, "binary value must be 0 or 1");
        }
        const double p = spec.proportions[0];
        latent(at) = spec.latent_means[0] +
                     kappa(p) * ((v == 1.0 ? 1.0 : 0.0) - p);
        break;
      }
      case FeatureKind::kCategorical: {
        const std::string level = want_string(row[f]);
        auto it =
            std::find(spec.levels.begin(), spec.levels.end(), level);
        if (it == spec.levels.end()) {
          row_error(-1, spec.name, "unknown level '" + level + "'");
        }
        const size_t j = static_cast<size_t>(it - spec.levels.begin());
        for (size_t l = 0; l < spec.levels.size(); ++l) {
          const double p = spec.proportions[l];
          latent(at + static_cast<int>(l)) =
              spec.latent_means[l] + kappa(p) * ((l == j ? 1.0 : 0.0) - p);
        }
        break;
      }
    }
  }
  return latent;
}

RawRow decode_row(const FeatureSchema& schema, const Vec& latent) {
  if (latent.size() != schema.latent_dim) {
    throw std::invalid_argument("decode_row: latent dimension mismatch");
  }
  RawRow row;
  row.reserve(schema.features.size());
  for (size_t f = 0; f < schema.features.size(); ++f) {
    const FeatureSpec& spec = schema.features[f];
    const int at = spec.latent_offset;
    switch (spec.kind) {
      case FeatureKind::kContinuous:
        row.emplace_back(latent(at));
        break;
      case FeatureKind::kLogContinuous:
        row.emplace_back(std::exp(latent(at)));
        break;
      case FeatureKind::kPixelLogit: {
        const double u = 1.0 / (1.0 + std::exp(-latent(at)));
        row.emplace_back(spec.eps + u);  // principal branch
        break;
      }
      case FeatureKind::kBinary:
        row.emplace_back(latent(at) > 0.0 ? 1.0 : 0.0);
        break;
      case FeatureKind::kCategorical: {
        const Vec wts =
            categorical_weights(schema, static_cast<int>(f), latent);
        int best = 0;
        for (int l = 1; l < wts.size(); ++l) {
          if (wts(l) > wts(best)) best = l;
        }
        row.emplace_back(spec.levels[static_cast<size_t>(best)]);
        break;
      }
    }
  }
  return row;
}

Mat encode_table(const FeatureSchema& schema,
                 const std::vector<RawRow>& rows) {
  Mat out(static_cast<int>(rows.size()), schema.latent_dim);
  for (size_t r = 0; r < rows.size(); ++r) {
    try {
      out.row(static_cast<int>(r)) = encode_row(schema, rows[r]).transpose();
    } catch (const std::invalid_argument& e) {
      std::ostringstream msg;
      msg << "encode_table: row " << r << ": " << e.what();
      throw std::invalid_argument(msg.str());
    }
  }
  return out;
}

Vec categorical_weights(const FeatureSchema& schema, int feature,
                        const Vec& latent) {
  const FeatureSpec& spec = schema.features[static_cast<size_t>(feature)];
  if (spec.kind != FeatureKind::kCategorical) {
    throw std::invalid_argument("categorical_weights: not categorical");
  }
  Vec block = latent.segment(spec.latent_offset, spec.latent_width) /
              spec.temperature;
  const double mx = block.maxCoeff();
  Vec w = (block.array() - mx).exp();
  return w / w.sum();
}

}  // namespace cfx

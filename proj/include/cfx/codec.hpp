/*
 * Raw-feature <-> latent-space codec.
 *
 * The engine reasons in a continuous latent space. Kinds:
 *   continuous      identity
 *   log_continuous  log(x), positive inputs only
 *   pixel_logit     log(|x - eps| / (1 - |x - eps|)); decode takes the
 *                   principal branch eps + sigmoid(z), so round trip is
 *                   exact on [eps, 1]
 *   categorical     one latent coordinate per level; level j embeds as
 *                   logit(p_l) + kappa_l (1[l=j] - p_l),
 *                   kappa_l = 1/sqrt(p_l (1 - p_l)), which reproduces the
 *                   level prior N(logit(p_l), 1) in dataset moments and
 *                   always argmax-decodes back to j
 *   binary          the same embedding on a single coordinate; decodes by
 *                   sign
 *
 * Level proportions use add-one smoothing so declared-but-unseen levels
 * stay representable.
 */
#pragma once

#include <string>
#include <variant>
#include <vector>

#include "cfx/gaussian.hpp"

namespace cfx {

enum class FeatureKind {
  kContinuous,
  kLogContinuous,
  kPixelLogit,
  kCategorical,
  kBinary
};

FeatureKind feature_kind_from_name(const std::string& name);
std::string feature_kind_name(FeatureKind k);

using RawValue = std::variant<double, std::string>;
using RawRow = std::vector<RawValue>;

struct FeatureHint {
  std::string name;
  FeatureKind kind = FeatureKind::kContinuous;
  double eps = 0.01;              // pixel-logit offset
  double temperature = 0.01;      // categorical decode temperature
  std::vector<std::string> levels;  // optional declared level set
};

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::kContinuous;
  double eps = 0.01;
  double temperature = 0.01;
  std::vector<std::string> levels;      // categorical only
  std::vector<double> proportions;      // smoothed; binary stores p(level 1)
  std::vector<double> latent_means;     // logit of proportions
  int latent_offset = 0;
  int latent_width = 1;
};

struct FeatureSchema {
  std::vector<FeatureSpec> features;
  int latent_dim = 0;

  int feature_count() const { return static_cast<int>(features.size()); }
  // expands one flag per feature into one per latent coordinate
  template <typename T>
  std::vector<T> expand(const std::vector<T>& per_feature) const {
    if (per_feature.size() != features.size()) {
      throw std::invalid_argument("FeatureSchema::expand: size mismatch");
    }
    std::vector<T> out(static_cast<size_t>(latent_dim));
    for (size_t f = 0; f < features.size(); ++f) {
      for (int j = 0; j < features[f].latent_width; ++j) {
        out[static_cast<size_t>(features[f].latent_offset + j)] =
            per_feature[f];
      }
    }
    return out;
  }
};

// Validates domains row by row (errors name the offending row/feature) and
// records level statistics.
FeatureSchema fit_schema(const std::vector<RawRow>& rows,
                         const std::vector<FeatureHint>& hints);

Vec encode_row(const FeatureSchema& schema, const RawRow& row);
RawRow decode_row(const FeatureSchema& schema, const Vec& latent);
Mat encode_table(const FeatureSchema& schema, const std::vector<RawRow>& rows);

// softmax(latent_block / temperature) for a categorical feature; exposed
// so gradient consumers can stay soft while decode_row stays hard-argmax
Vec categorical_weights(const FeatureSchema& schema, int feature,
                        const Vec& latent);

}  // namespace cfx

/*
 * File formats: CSV datasets, JSON project/bench configs, and the text
 * artifact formats for fitted priors and schemas. Numeric artifacts use the
 * same base-16 little-endian doubles as the model format so round trips
 * are bit-exact.
 */
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cfx/actionability.hpp"
#include "cfx/codec.hpp"
#include "cfx/models.hpp"
#include "cfx/prior.hpp"

namespace cfx {

struct FeatureConfig {
  FeatureHint hint;
  FeatureClass feature_class = FeatureClass::kMutable;
  std::vector<std::string> ancestors;  // names; nonactionable features only
};

struct ModelConfig {
  std::vector<int> hidden = {50, 20};
  Activation act = Activation::kTanh;
  int steps = 1000;
  double lr = 0.05;
  std::uint64_t seed = 0;
};

struct ProjectConfig {
  std::vector<FeatureConfig> features;
  std::string label_column;
  std::string prior_source = "data";  // "data" or "scm"
  std::optional<LinearScm> scm;       // node names = feature names
  ModelConfig model;
  double prior_jitter = 1e-9;
};

ProjectConfig load_project_config(const std::string& path);

struct Dataset {
  std::vector<RawRow> rows;     // feature cells in config feature order
  std::vector<int> labels;      // class indices per row
  std::vector<std::string> label_levels;
};

// Parses the CSV against the config: categorical cells stay strings,
// everything else must parse as a number (errors name row and column).
Dataset load_dataset(const std::string& path, const ProjectConfig& config);

void save_prior(const DataPrior& prior, const std::string& path);
DataPrior load_prior(const std::string& path);

void save_schema(const FeatureSchema& schema,
                 const std::vector<std::string>& label_levels,
                 const std::string& path);
FeatureSchema load_schema(const std::string& path,
                          std::vector<std::string>* label_levels = nullptr);

// latent-space policy expanded from the per-feature declarations
FeaturePolicy latent_policy(const FeatureSchema& schema,
                            const std::vector<FeatureConfig>& features);
std::vector<bool> latent_immutable_mask(
    const FeatureSchema& schema, const std::vector<FeatureConfig>& features);

std::string raw_value_to_string(const RawValue& v);

}  // namespace cfx

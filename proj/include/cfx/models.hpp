/*
 * Split classifier: f(x) = softmax(head * r(x)) where r is a small MLP.
 *
 * The split matters downstream: the representation r feeds the
 * class-conditional Laplace machinery, which re-fits only the final linear
 * head. Gradients (with respect to inputs and parameters) are hand-written
 * reverse mode; no autodiff dependency.
 */
#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfx/gaussian.hpp"

namespace cfx {

enum class Activation { kTanh, kRelu, kIdentity };

Activation activation_from_name(const std::string& name);
std::string activation_name(Activation a);

struct Layer {
  Mat w;
  Vec b;
  Activation act = Activation::kTanh;
};

class SplitClassifier {
 public:
  SplitClassifier(std::vector<Layer> layers, Mat head);

  int input_dim() const;
  int repr_dim() const { return static_cast<int>(head_.cols()); }
  int num_classes() const { return static_cast<int>(head_.rows()); }
  const std::vector<Layer>& layers() const { return layers_; }
  const Mat& head() const { return head_; }
  void set_head(Mat head);

  Vec representation(const Vec& x) const;
  Vec logits(const Vec& x) const;
  // log-sum-exp stabilized; sums to 1 within 1e-9 for |logits| <= 500
  Vec probs(const Vec& x) const;
  int predict(const Vec& x) const;
  double nll(const Vec& x, int target) const;
  // d/dx of nll(x, target)
  Vec grad_input(const Vec& x, int target) const;

  // Parameters flattened in serialization order (layer w row-major, layer
  // b, ..., head row-major). Used by training and by gradient checks.
  Vec pack_params() const;
  void unpack_params(const Vec& theta);
  int num_params() const;
  // mean nll over the batch and its gradient in pack_params() order
  double nll_batch(const Mat& x, const std::vector<int>& y, Vec* grad) const;

 private:
  std::vector<Layer> layers_;
  Mat head_;
};

// Seeded N(0, 1/sqrt(fan_in)) weights, zero biases.
SplitClassifier make_classifier(int input_dim,
                                const std::vector<int>& hidden_widths,
                                int num_classes, Activation act,
                                std::uint64_t seed);

struct TrainConfig {
  int steps = 1000;
  double lr = 0.05;
};

// Full-batch Adam on mean nll. Deterministic given (clf, x, y, config);
// zero steps leaves parameters untouched. Throws OptimDiverged (with the
// partial trace) if the loss goes non-finite.
std::vector<double> train(SplitClassifier& clf, const Mat& x,
                          const std::vector<int>& y, const TrainConfig& cfg);

// Structured text format: shape-tagged arrays of base-16 little-endian
// doubles. Round-trips bit-exactly on any host.
void save_classifier(const SplitClassifier& clf, std::ostream& out);
SplitClassifier load_classifier(std::istream& in);
void save_classifier_file(const SplitClassifier& clf, const std::string& path);
SplitClassifier load_classifier_file(const std::string& path);

// Shared hex-double helpers (also used by the prior artifact format).
std::string double_to_hex(double v);
double hex_to_double(const std::string& s);

}  // namespace cfx

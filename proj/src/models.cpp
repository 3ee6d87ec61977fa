#include "cfx/models.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "cfx/objective.hpp"
#include "cfx/rng.hpp"

namespace cfx {
namespace {

double apply_act(Activation a, double z) {
  switch (a) {
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kRelu:
      return z > 0 ? z : 0.0;
    case Activation::kIdentity:
      return z;
  }
  return z;
}

// derivative expressed through the post-activation value
double act_deriv(Activation a, double out) {
  switch (a) {
    case Activation::kTanh:
      return 1.0 - out * out;
    case Activation::kRelu:
      return out > 0 ? 1.0 : 0.0;
    case Activation::kIdentity:
      return 1.0;
  }
  return 1.0;
}

Vec softmax_from_logits(const Vec& logits) {
  const double m = logits.maxCoeff();
  Vec p = (logits.array() - m).exp();
  return p / p.sum();
}

}  // namespace

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation: " + name);
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kTanh:
      return "tanh";
    case Activation::kRelu:
      return "relu";
    case Activation::kIdentity:
      return "identity";
  }
  return "?";
}

SplitClassifier::SplitClassifier(std::vector<Layer> layers, Mat head)
    : layers_(std::move(layers)), head_(std::move(head)) {
  if (layers_.empty()) {
    throw std::invalid_argument("SplitClassifier: need at least one layer");
  }
  for (size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    if (l.w.rows() != l.b.size()) {
      throw std::invalid_argument("SplitClassifier: layer w/b mismatch");
    }
    if (i > 0 && l.w.cols() != layers_[i - 1].w.rows()) {
      throw std::invalid_argument("SplitClassifier: layer width mismatch");
    }
  }
  if (head_.cols() != layers_.back().w.rows()) {
    throw std::invalid_argument("SplitClassifier: head width mismatch");
  }
  if (head_.rows() < 2) {
    throw std::invalid_argument("SplitClassifier: need >= 2 classes");
  }
}

int SplitClassifier::input_dim() const {
  return static_cast<int>(layers_.front().w.cols());
}

void SplitClassifier::set_head(Mat head) {
  if (head.cols() != head_.cols() || head.rows() != head_.rows()) {
    throw std::invalid_argument("set_head: shape mismatch");
  }
  head_ = std::move(head);
}

Vec SplitClassifier::representation(const Vec& x) const {
  if (x.size() != input_dim()) {
    throw std::invalid_argument("representation: bad input dimension");
  }
  Vec a = x;
  for (const Layer& l : layers_) {
    Vec z = l.w * a + l.b;
    for (int i = 0; i < z.size(); ++i) z(i) = apply_act(l.act, z(i));
    a = std::move(z);
  }
  return a;
}

Vec SplitClassifier::logits(const Vec& x) const {
  return head_ * representation(x);
}

Vec SplitClassifier::probs(const Vec& x) const {
  return softmax_from_logits(logits(x));
}

int SplitClassifier::predict(const Vec& x) const {
  int best = 0;
  const Vec lg = logits(x);
  for (int i = 1; i < lg.size(); ++i) {
    if (lg(i) > lg(best)) best = i;
  }
  return best;
}

double SplitClassifier::nll(const Vec& x, int target) const {
  if (target < 0 || target >= num_classes()) {
    throw std::invalid_argument("nll: target out of range");
  }
  const Vec lg = logits(x);
  const double m = lg.maxCoeff();
  const double lse = m + std::log((lg.array() - m).exp().sum());
  return lse - lg(target);
}

Vec SplitClassifier::grad_input(const Vec& x, int target) const {
  if (target < 0 || target >= num_classes()) {
    throw std::invalid_argument("grad_input: target out of range");
  }
  // forward pass keeping every activation
  std::vector<Vec> acts;
  acts.reserve(layers_.size() + 1);
  acts.push_back(x);
  for (const Layer& l : layers_) {
    Vec z = l.w * acts.back() + l.b;
    for (int i = 0; i < z.size(); ++i) z(i) = apply_act(l.act, z(i));
    acts.push_back(std::move(z));
  }
  Vec p = softmax_from_logits(head_ * acts.back());
  p(target) -= 1.0;  // d nll / d logits
  Vec da = head_.transpose() * p;
  for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
    const Layer& l = layers_[li];
    const Vec& out = acts[static_cast<size_t>(li) + 1];
    Vec dz(out.size());
    for (int i = 0; i < out.size(); ++i) {
      dz(i) = da(i) * act_deriv(l.act, out(i));
    }
    da = l.w.transpose() * dz;
  }
  return da;
}

int SplitClassifier::num_params() const {
  int n = 0;
  for (const Layer& l : layers_) {
    n += static_cast<int>(l.w.size() + l.b.size());
  }
  return n + static_cast<int>(head_.size());
}

Vec SplitClassifier::pack_params() const {
  Vec theta(num_params());
  int at = 0;
  auto put = [&](const Mat& m) {
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) theta(at++) = m(r, c);
    }
  };
  for (const Layer& l : layers_) {
    put(l.w);
    put(l.b);
  }
  put(head_);
  return theta;
}

void SplitClassifier::unpack_params(const Vec& theta) {
  if (theta.size() != num_params()) {
    throw std::invalid_argument("unpack_params: bad length");
  }
  int at = 0;
  auto take = [&](Mat& m) {
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) m(r, c) = theta(at++);
    }
  };
  for (Layer& l : layers_) {
    take(l.w);
    Mat b = l.b;
    take(b);
    l.b = b;
  }
  take(head_);
}

double SplitClassifier::nll_batch(const Mat& x, const std::vector<int>& y,
                                  Vec* grad) const {
  const int m = static_cast<int>(x.rows());
  if (m == 0) throw std::invalid_argument("nll_batch: empty batch");
  if (static_cast<int>(y.size()) != m) {
    throw std::invalid_argument("nll_batch: labels/rows mismatch");
  }
  const size_t nl = layers_.size();
  std::vector<Mat> dw(nl);
  std::vector<Vec> db(nl);
  Mat dhead;
  if (grad) {
    for (size_t i = 0; i < nl; ++i) {
      dw[i] = Mat::Zero(layers_[i].w.rows(), layers_[i].w.cols());
      db[i] = Vec::Zero(layers_[i].b.size());
    }
    dhead = Mat::Zero(head_.rows(), head_.cols());
  }

  double loss = 0.0;
  std::vector<Vec> acts(nl + 1);
  for (int s = 0; s < m; ++s) {
    if (y[s] < 0 || y[s] >= num_classes()) {
      throw std::invalid_argument("nll_batch: label out of range");
    }
    acts[0] = x.row(s).transpose();
    for (size_t li = 0; li < nl; ++li) {
      const Layer& l = layers_[li];
      Vec z = l.w * acts[li] + l.b;
      for (int i = 0; i < z.size(); ++i) z(i) = apply_act(l.act, z(i));
      acts[li + 1] = std::move(z);
    }
    const Vec lg = head_ * acts[nl];
    const double mx = lg.maxCoeff();
    const double lse = mx + std::log((lg.array() - mx).exp().sum());
    loss += lse - lg(y[s]);
    if (!grad) continue;

    Vec dlg = (lg.array() - lse).exp();
    dlg(y[s]) -= 1.0;
    dhead += dlg * acts[nl].transpose();
    Vec da = head_.transpose() * dlg;
    for (int li = static_cast<int>(nl) - 1; li >= 0; --li) {
      const Layer& l = layers_[static_cast<size_t>(li)];
      const Vec& out = acts[static_cast<size_t>(li) + 1];
      Vec dz(out.size());
      for (int i = 0; i < out.size(); ++i) {
        dz(i) = da(i) * act_deriv(l.act, out(i));
      }
      dw[static_cast<size_t>(li)] += dz * acts[static_cast<size_t>(li)].transpose();
      db[static_cast<size_t>(li)] += dz;
      da = l.w.transpose() * dz;
    }
  }
  loss /= m;
  if (grad) {
    SplitClassifier shadow = *this;  // reuse packing order
    for (size_t i = 0; i < nl; ++i) {
      shadow.layers_[i].w = dw[i] / double(m);
      shadow.layers_[i].b = db[i] / double(m);
    }
    shadow.head_ = dhead / double(m);
    *grad = shadow.pack_params();
  }
  return loss;
}

SplitClassifier make_classifier(int input_dim,
                                const std::vector<int>& hidden_widths,
                                int num_classes, Activation act,
                                std::uint64_t seed) {
  if (input_dim < 1) throw std::invalid_argument("make_classifier: bad dim");
  CounterRng rng(seed, 0);
  std::vector<Layer> layers;
  int fan_in = input_dim;
  for (int width : hidden_widths) {
    Layer l;
    l.w = Mat(width, fan_in);
    const double scale = 1.0 / std::sqrt(double(fan_in));
    for (int r = 0; r < width; ++r) {
      for (int c = 0; c < fan_in; ++c) l.w(r, c) = scale * rng.normal();
    }
    l.b = Vec::Zero(width);
    l.act = act;
    layers.push_back(std::move(l));
    fan_in = width;
  }
  if (layers.empty()) {
    // degenerate but legal: identity feature map, the head does the work
    Layer l;
    l.w = Mat::Identity(input_dim, input_dim);
    l.b = Vec::Zero(input_dim);
    l.act = Activation::kIdentity;
    layers.push_back(std::move(l));
    fan_in = input_dim;
  }
  Mat head(num_classes, fan_in);
  const double scale = 1.0 / std::sqrt(double(fan_in));
  for (int r = 0; r < num_classes; ++r) {
    for (int c = 0; c < fan_in; ++c) head(r, c) = scale * rng.normal();
  }
  return SplitClassifier(std::move(layers), std::move(head));
}

std::vector<double> train(SplitClassifier& clf, const Mat& x,
                          const std::vector<int>& y, const TrainConfig& cfg) {
  if (x.cols() != clf.input_dim()) {
    throw std::invalid_argument("train: data dimension mismatch");
  }
  if (cfg.steps < 0) throw std::invalid_argument("train: negative steps");
  if (cfg.steps == 0) return {};
  LossFn loss_fn = [&](const Vec& theta) {
    SplitClassifier probe = clf;
    probe.unpack_params(theta);
    LossEval ev;
    ev.value = probe.nll_batch(x, y, &ev.grad);
    return ev;
  };
  AdamResult res =
      adam_minimize(loss_fn, clf.pack_params(), cfg.steps, cfg.lr, 0);
  clf.unpack_params(res.solution);
  return res.trace;
}

std::string double_to_hex(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  // bytes low-to-high: layout independent of host endianness
  for (int byte = 0; byte < 8; ++byte) {
    const unsigned b = (bits >> (8 * byte)) & 0xffu;
    s[2 * byte] = digits[b >> 4];
    s[2 * byte + 1] = digits[b & 0xf];
  }
  return s;
}

double hex_to_double(const std::string& s) {
  if (s.size() != 16) {
    throw std::invalid_argument("hex_to_double: want 16 hex chars, got '" +
                                s + "'");
  }
  auto nib = [](char c) -> std::uint64_t {
    if (c >= '0' && c <= '9') return std::uint64_t(c - '0');
    if (c >= 'a' && c <= 'f') return std::uint64_t(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return std::uint64_t(c - 'A' + 10);
    throw std::invalid_argument("hex_to_double: bad hex digit");
  };
  std::uint64_t bits = 0;
  for (int byte = 0; byte < 8; ++byte) {
    const std::uint64_t b =
        (nib(s[2 * byte]) << 4) | nib(s[2 * byte + 1]);
    bits |= b << (8 * byte);
  }
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

namespace {

void write_mat(std::ostream& out, const Mat& m) {
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      out << double_to_hex(m(r, c)) << ((c + 1 == m.cols()) ? '\n' : ' ');
    }
  }
}

Mat read_mat(std::istream& in, int rows, int cols) {
  Mat m(rows, cols);
  std::string tok;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!(in >> tok)) {
        throw std::runtime_error("model file: truncated array");
      }
      m(r, c) = hex_to_double(tok);
    }
  }
  return m;
}

void expect(std::istream& in, const std::string& want) {
  std::string tok;
  if (!(in >> tok) || tok != want) {
    throw std::runtime_error("model file: expected '" + want + "', got '" +
                             tok + "'");
  }
}

}  // namespace

void save_classifier(const SplitClassifier& clf, std::ostream& out) {
  out << "cfx-model 1\n";
  out << "layers " << clf.layers().size() << "\n";
  for (const Layer& l : clf.layers()) {
    out << "layer " << activation_name(l.act) << " " << l.w.rows() << " "
        << l.w.cols() << "\n";
    write_mat(out, l.w);
    write_mat(out, Mat(l.b.transpose()));
  }
  out << "head " << clf.head().rows() << " " << clf.head().cols() << "\n";
  write_mat(out, clf.head());
  out << "end\n";
}

SplitClassifier load_classifier(std::istream& in) {
  expect(in, "cfx-model");
  expect(in, "1");
  expect(in, "layers");
  int nl = 0;
  if (!(in >> nl) || nl < 1) {
    throw std::runtime_error("model file: bad layer count");
  }
  std::vector<Layer> layers;
  for (int i = 0; i < nl; ++i) {
    expect(in, "layer");
    std::string act;
    int rows = 0, cols = 0;
    if (!(in >> act >> rows >> cols) || rows < 1 || cols < 1) {
      throw std::runtime_error("model file: bad layer header");
    }
    Layer l;
    l.act = activation_from_name(act);
    l.w = read_mat(in, rows, cols);
    l.b = read_mat(in, 1, rows).transpose();
    layers.push_back(std::move(l));
  }
  expect(in, "head");
  int rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows < 2 || cols < 1) {
    throw std::runtime_error("model file: bad head header");
  }
  Mat head = read_mat(in, rows, cols);
  expect(in, "end");
  return SplitClassifier(std::move(layers), std::move(head));
}

void save_classifier_file(const SplitClassifier& clf,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  save_classifier(clf, out);
  if (!out.good()) throw std::runtime_error("write failed: " + path);
}

SplitClassifier load_classifier_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  return load_classifier(in);
}

}  // namespace cfx

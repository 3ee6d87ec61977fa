// Split classifier: forward pass, hand-written gradients against finite
// differences, training determinism, and the portable text serialization.

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "cfx/models.hpp"
#include "cfx/objective.hpp"
#include "oracles.hpp"

using cfx::Activation;
using cfx::Layer;
using cfx::Mat;
using cfx::SplitClassifier;
using cfx::Vec;

namespace {

SplitClassifier linear_two_class(const Mat& head) {
  Layer l;
  l.w = Mat::Identity(2, 2);
  l.b = Vec::Zero(2);
  l.act = Activation::kIdentity;
  return SplitClassifier({l}, head);
}

struct Blobs {
  Mat x;
  std::vector<int> y;
};

Blobs make_blobs(double c, double stddev, int per_class, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, stddev);
  Blobs b;
  b.x.resize(2 * per_class, 2);
  b.y.resize(static_cast<size_t>(2 * per_class));
  for (int i = 0; i < 2 * per_class; ++i) {
    const int cls = i % 2;
    b.x(i, 0) = (cls == 0 ? -c : c) + noise(gen);
    b.x(i, 1) = noise(gen);
    b.y[static_cast<size_t>(i)] = cls;
  }
  return b;
}

bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof a) == 0;
}

}  // namespace

TEST_CASE("zero network spreads probability uniformly") {
  Layer l;
  l.w = Mat::Zero(4, 2);
  l.b = Vec::Zero(4);
  l.act = Activation::kTanh;
  SplitClassifier clf({l}, Mat::Zero(3, 4));
  const Vec p = clf.probs(Vec::Random(2));
  for (int i = 0; i < 3; ++i) {
    CHECK(p(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  CHECK(std::abs(p.sum() - 1.0) <= 1e-9);
}

TEST_CASE("identity network splits evenly at the origin") {
  SplitClassifier clf = linear_two_class(Mat::Identity(2, 2));
  const Vec p = clf.probs(Vec::Zero(2));
  CHECK(p(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("softmax stays normalized under extreme logits") {
  Mat head(2, 2);
  head << 200.0, 0.0, -200.0, 0.0;
  SplitClassifier clf = linear_two_class(head);
  Vec x(2);
  x << 1.0, 0.0;  // logits +-200: exp(-400) still representable
  const Vec p = clf.probs(x);
  CHECK(std::abs(p.sum() - 1.0) <= 1e-9);
  CHECK(p.minCoeff() > 0.0);
  CHECK(p.maxCoeff() <= 1.0);
  // at a moderate gap both sides stay strictly inside (0, 1)
  x << 0.08, 0.0;  // logits +-16
  const Vec q = clf.probs(x);
  CHECK(q.minCoeff() > 0.0);
  CHECK(q.maxCoeff() < 1.0);
}

TEST_CASE("trained blob classifier is accurate and confident") {
  const Blobs b = make_blobs(2.0, 0.5, 100, 5);
  SplitClassifier clf = cfx::make_classifier(2, {8}, 2, Activation::kTanh, 7);
  const std::vector<double> trace = cfx::train(clf, b.x, b.y, {600, 0.05});
  CHECK(trace.size() >= 600);
  CHECK(trace.back() < trace.front());

  int correct = 0;
  for (int i = 0; i < b.x.rows(); ++i) {
    if (clf.predict(b.x.row(i).transpose()) == b.y[static_cast<size_t>(i)]) {
      ++correct;
    }
  }
  CHECK(double(correct) / double(b.x.rows()) >= 0.98);

  Vec center(2);
  center << 2.0, 0.0;
  CHECK(clf.probs(center)(1) >= 0.95);
  center(0) = -2.0;
  CHECK(clf.probs(center)(0) >= 0.95);
}

TEST_CASE("input gradients match finite differences") {
  std::mt19937_64 gen(11);
  const Activation acts[] = {Activation::kTanh, Activation::kRelu,
                             Activation::kIdentity};
  for (int i = 0; i < 100; ++i) {
    const int dim = 2 + static_cast<int>(gen() % 3);
    const int classes = 2 + static_cast<int>(gen() % 2);
    SplitClassifier clf = cfx::make_classifier(
        dim, {3 + static_cast<int>(gen() % 3)}, classes, acts[i % 3], gen());
    const Vec x = oracle::random_vec(dim, gen);
    const int target = static_cast<int>(gen() % classes);
    const Vec g = clf.grad_input(x, target);
    const Vec fd = oracle::fd_grad(
        [&](const Vec& z) { return clf.nll(z, target); }, x);
    const double rel =
        (g - fd).cwiseAbs().maxCoeff() / std::max(1.0, g.cwiseAbs().maxCoeff());
    CHECK(rel <= 1e-4);
  }
}

TEST_CASE("boundary gradient points along the weight difference") {
  Mat head(2, 2);
  head << 1.0, 2.0, 3.0, -1.0;
  SplitClassifier clf = linear_two_class(head);
  // head row difference (2, -3); x orthogonal to it sits on the boundary
  Vec x(2);
  x << 3.0, 2.0;
  REQUIRE(std::abs(clf.logits(x)(0) - clf.logits(x)(1)) <= 1e-12);
  const Vec g = clf.grad_input(x, 1);
  const Vec expected = -0.5 * (head.row(1) - head.row(0)).transpose();
  CHECK((g - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("saturated inputs have vanishing gradients") {
  Mat head(2, 2);
  head << 1.0, 0.0, -1.0, 0.0;
  SplitClassifier clf = linear_two_class(head);
  Vec x(2);
  x << 30.0, 0.0;  // logit gap 60, p(class 0) ~ 1
  CHECK(clf.grad_input(x, 0).norm() <= 1e-6);
}

TEST_CASE("zero training steps leave parameters untouched") {
  SplitClassifier clf = cfx::make_classifier(2, {4}, 2, Activation::kTanh, 3);
  const Vec before = clf.pack_params();
  const Blobs b = make_blobs(1.0, 0.5, 10, 1);
  const std::vector<double> trace = cfx::train(clf, b.x, b.y, {0, 0.05});
  CHECK(trace.empty());
  const Vec after = clf.pack_params();
  REQUIRE(before.size() == after.size());
  for (int i = 0; i < before.size(); ++i) {
    CHECK(same_bits(before(i), after(i)));
  }
}

TEST_CASE("training is deterministic and robust to duplicated data") {
  const Blobs b = make_blobs(2.0, 0.5, 40, 2);
  SplitClassifier a = cfx::make_classifier(2, {4}, 2, Activation::kTanh, 9);
  SplitClassifier c = cfx::make_classifier(2, {4}, 2, Activation::kTanh, 9);
  cfx::train(a, b.x, b.y, {400, 0.05});
  cfx::train(c, b.x, b.y, {400, 0.05});
  const Vec pa = a.pack_params();
  const Vec pc = c.pack_params();
  for (int i = 0; i < pa.size(); ++i) CHECK(same_bits(pa(i), pc(i)));

  // stacking the dataset twice changes nothing about the full-batch mean
  Mat doubled(2 * b.x.rows(), 2);
  doubled << b.x, b.x;
  std::vector<int> ylong = b.y;
  ylong.insert(ylong.end(), b.y.begin(), b.y.end());
  SplitClassifier d = cfx::make_classifier(2, {4}, 2, Activation::kTanh, 9);
  cfx::train(d, doubled, ylong, {400, 0.05});
  CHECK((d.pack_params() - pa).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("parameter packing round-trips") {
  SplitClassifier clf = cfx::make_classifier(3, {4, 2}, 2, Activation::kRelu, 5);
  const int expected = 4 * 3 + 4 + 2 * 4 + 2 + 2 * 2;
  CHECK(clf.num_params() == expected);
  std::mt19937_64 gen(6);
  const Vec theta = oracle::random_vec(expected, gen);
  clf.unpack_params(theta);
  const Vec back = clf.pack_params();
  for (int i = 0; i < expected; ++i) CHECK(same_bits(theta(i), back(i)));
  CHECK_THROWS_AS(clf.unpack_params(Vec::Zero(expected - 1)),
                  std::invalid_argument);
}

TEST_CASE("serialization round-trips bit-exactly") {
  std::vector<Layer> layers(2);
  std::mt19937_64 gen(8);
  layers[0].w = Mat::Random(3, 2);
  layers[0].b = oracle::random_vec(3, gen);
  layers[0].act = Activation::kRelu;
  layers[1].w = Mat::Random(2, 3);
  layers[1].b = oracle::random_vec(2, gen);
  layers[1].act = Activation::kIdentity;
  const SplitClassifier clf(layers, Mat::Random(3, 2));

  std::stringstream buf;
  cfx::save_classifier(clf, buf);
  const SplitClassifier loaded = cfx::load_classifier(buf);
  const Vec pa = clf.pack_params();
  const Vec pb = loaded.pack_params();
  REQUIRE(pa.size() == pb.size());
  for (int i = 0; i < pa.size(); ++i) CHECK(same_bits(pa(i), pb(i)));
  CHECK(loaded.layers()[0].act == Activation::kRelu);
  CHECK(loaded.layers()[1].act == Activation::kIdentity);

  const auto path = std::filesystem::temp_directory_path() / "cfx_clf.txt";
  cfx::save_classifier_file(clf, path.string());
  const SplitClassifier from_file = cfx::load_classifier_file(path.string());
  const Vec pf = from_file.pack_params();
  for (int i = 0; i < pa.size(); ++i) CHECK(same_bits(pa(i), pf(i)));
  std::filesystem::remove(path);

  const Vec x = oracle::random_vec(2, gen);
  CHECK(same_bits(clf.probs(x)(0), loaded.probs(x)(0)));
}

TEST_CASE("hex doubles round-trip specials") {
  const double values[] = {0.0,
                           -0.0,
                           1.0 / 3.0,
                           -1.7976931348623157e308,
                           5e-324,
                           std::numeric_limits<double>::infinity(),
                           -std::numeric_limits<double>::infinity()};
  for (double v : values) {
    CHECK(same_bits(cfx::hex_to_double(cfx::double_to_hex(v)), v));
  }
  const double nan_back =
      cfx::hex_to_double(cfx::double_to_hex(std::nan("")));
  CHECK(std::isnan(nan_back));
}

TEST_CASE("batch gradient matches finite differences in parameter space") {
  const Blobs b = make_blobs(1.5, 0.6, 10, 4);
  SplitClassifier clf = cfx::make_classifier(2, {3}, 2, Activation::kTanh, 12);
  Vec grad;
  clf.nll_batch(b.x, b.y, &grad);
  const Vec fd = oracle::fd_grad(
      [&](const Vec& theta) {
        SplitClassifier probe = clf;
        probe.unpack_params(theta);
        return probe.nll_batch(b.x, b.y, nullptr);
      },
      clf.pack_params());
  const double rel = (grad - fd).cwiseAbs().maxCoeff() /
                     std::max(1.0, grad.cwiseAbs().maxCoeff());
  CHECK(rel <= 1e-4);

  CHECK_THROWS_AS(clf.nll_batch(b.x, std::vector<int>{0}, nullptr),
                  std::invalid_argument);
  CHECK_THROWS_AS(clf.nll_batch(Mat::Zero(0, 2), {}, nullptr),
                  std::invalid_argument);
}

TEST_CASE("activation names round-trip and reject strangers") {
  for (Activation a :
       {Activation::kTanh, Activation::kRelu, Activation::kIdentity}) {
    CHECK(cfx::activation_from_name(cfx::activation_name(a)) == a);
  }
  CHECK_THROWS_AS(cfx::activation_from_name("softplus"), std::invalid_argument);
}

TEST_CASE("classifier initialization is seed-keyed") {
  const SplitClassifier a = cfx::make_classifier(2, {4}, 2, Activation::kTanh, 1);
  const SplitClassifier b = cfx::make_classifier(2, {4}, 2, Activation::kTanh, 1);
  const SplitClassifier c = cfx::make_classifier(2, {4}, 2, Activation::kTanh, 2);
  CHECK((a.pack_params() - b.pack_params()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.pack_params() - c.pack_params()).cwiseAbs().maxCoeff() > 0.0);
}

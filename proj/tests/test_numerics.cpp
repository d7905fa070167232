#include "ist/adam.hpp"
#include "ist/errors.hpp"
#include "ist/gradcheck.hpp"
#include "ist/nn.hpp"
#include "ist/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace ist;

namespace {

Mat scalar(double v) { return Mat::Constant(1, 1, v); }

// <net(x), g> as a function of the parameters.
double probe(const FeedForwardNet& net, const Mat& x, const Mat& g) {
  return (net.forward(x).array() * g.array()).sum();
}

}  // namespace

TEST_CASE("zero-weight net outputs the output-layer bias") {
  FeedForwardNet net("n", {3, 4, 2});
  net.layers().back().bias().value << 0.5, -1.25;
  const Mat x = Mat::Random(5, 3);
  const Mat y = net.forward(x);
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    CHECK(y(r, 0) == 0.5);
    CHECK(y(r, 1) == -1.25);
  }
}

TEST_CASE("1-1 net with unit weight is the identity") {
  FeedForwardNet net("n", {1, 1});
  net.layers()[0].weight().value(0, 0) = 1.0;
  const Mat x = Mat::Random(4, 1);
  CHECK(net.forward(x) == x);
}

TEST_CASE("1-2-1 net with unit weights maps 0 to 0") {
  FeedForwardNet net("n", {1, 2, 1});
  for (auto& l : net.layers()) l.weight().value.setOnes();
  CHECK(net.forward(scalar(0.0))(0, 0) == 0.0);
}

TEST_CASE("forward rejects the wrong input width") {
  FeedForwardNet net("n", {3, 2});
  CHECK_THROWS_AS(net.forward(Mat::Zero(2, 4)), DimensionError);
}

TEST_CASE("parameter count is the sum of weights and biases") {
  FeedForwardNet net("n", {5, 7, 3, 2});
  ParamRefs ps;
  net.collect(ps);
  std::size_t n = 0;
  for (Parameter* p : ps) n += static_cast<std::size_t>(p->value.size());
  CHECK(net.parameter_count() == n);
  CHECK(n == 5 * 7 + 7 + 7 * 3 + 3 + 3 * 2 + 2);
}

TEST_CASE("zero output gradient gives zero gradients") {
  RngStream rng(3);
  FeedForwardNet net("n", {3, 6, 2});
  net.init(rng);
  FeedForwardNet::Cache cache;
  const Mat x = gaussian_sample(rng, 4, 3);
  net.forward(x, cache);
  const Mat dx = net.backward(cache, Mat::Zero(4, 2));
  CHECK(dx.isZero(0.0));
  ParamRefs ps;
  net.collect(ps);
  for (Parameter* p : ps) CHECK(p->grad.isZero(0.0));
}

TEST_CASE("linear 1-1 gradients at x = 3") {
  FeedForwardNet net("n", {1, 1});
  net.layers()[0].weight().value(0, 0) = 0.7;
  net.layers()[0].bias().value(0, 0) = -0.2;
  FeedForwardNet::Cache cache;
  net.forward(scalar(3.0), cache);
  const Mat dx = net.backward(cache, scalar(1.0));
  CHECK(net.layers()[0].weight().grad(0, 0) == doctest::Approx(3.0));
  CHECK(net.layers()[0].bias().grad(0, 0) == doctest::Approx(1.0));
  CHECK(dx(0, 0) == doctest::Approx(0.7));
}

TEST_CASE("backward shape mismatch is a dimension error") {
  FeedForwardNet net("n", {2, 3});
  FeedForwardNet::Cache cache;
  net.forward(Mat::Zero(4, 2), cache);
  CHECK_THROWS_AS(net.backward(cache, Mat::Zero(4, 2)), DimensionError);
}

TEST_CASE("tanh activation matches std::tanh") {
  Mat x(1, 9);
  x << -800.0, -20.0, -1.5, -1e-3, 0.0, 1e-3, 0.4, 3.0, 800.0;
  const Mat y = tanh_activation(x);
  for (Eigen::Index i = 0; i < x.size(); ++i) CHECK(y(0, i) == doctest::Approx(std::tanh(x(0, i))).epsilon(1e-12));
}

TEST_CASE("network gradients match finite differences across shapes") {
  // Generated configurations: random widths, depths and batch sizes.
  RngStream gen(11);
  for (int trial = 0; trial < 12; ++trial) {
    std::vector<int> widths;
    const int depth = 2 + static_cast<int>(gen.index(3));
    for (int i = 0; i < depth; ++i) widths.push_back(1 + static_cast<int>(gen.index(6)));
    FeedForwardNet net("n", widths);
    net.init(gen);
    for (auto& l : net.layers()) l.bias().value = 0.3 * gaussian_sample(gen, 1, l.out_dim());
    const Mat x = gaussian_sample(gen, 1 + static_cast<int>(gen.index(4)), widths.front());
    const Mat g = gaussian_sample(gen, x.rows(), widths.back());
    ParamRefs ps;
    net.collect(ps);
    zero_grads(ps);
    FeedForwardNet::Cache cache;
    net.forward(x, cache);
    const Mat dx = net.backward(cache, g);
    const auto report = finite_diff_check([&] { return probe(net, x, g); }, ps);
    CAPTURE(trial);
    CHECK(report.passed);
    CHECK(report.max_rel_error <= 1e-4);

    // Input gradient against central differences.
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Mat xp = x, xm = x;
      xp.data()[i] += h;
      xm.data()[i] -= h;
      const double fd = (probe(net, xp, g) - probe(net, xm, g)) / (2 * h);
      CHECK(dx.data()[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  Parameter p("p", Mat::Constant(2, 2, 1.5));
  AdamState st;
  adam_step(st, {&p});
  CHECK(p.value == Mat::Constant(2, 2, 1.5));
  CHECK(st.step == 1);
  CHECK(st.m.at("p").isZero(0.0));
}

TEST_CASE("adam: first step moves by lr against the gradient sign") {
  for (double g : {0.003, -250.0}) {
    Parameter p("p", scalar(0.0));
    p.grad(0, 0) = g;
    AdamState st;
    st.lr = 0.01;
    adam_step(st, {&p});
    CHECK(p.value(0, 0) == doctest::Approx(-0.01 * (g > 0 ? 1 : -1)).epsilon(1e-5));
  }
}

TEST_CASE("adam: two steps of unit gradient against the recurrence") {
  Parameter p("p", scalar(0.0));
  AdamState st;
  st.lr = 0.01;
  double m = 0, v = 0, x = 0;
  for (int t = 1; t <= 2; ++t) {
    p.grad(0, 0) = 1.0;
    adam_step(st, {&p});
    m = 0.9 * m + 0.1;
    v = 0.999 * v + 0.001;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    x -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
  }
  CHECK(p.value(0, 0) == doctest::Approx(x).epsilon(1e-12));
  CHECK(p.value(0, 0) == doctest::Approx(-0.02).epsilon(1e-5));
  CHECK(st.step == 2);
}

TEST_CASE("adam: non-finite gradient names the parameter and changes nothing") {
  Parameter a("alpha", scalar(1.0)), b("beta.w", scalar(2.0));
  a.grad(0, 0) = 0.5;
  b.grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  AdamState st;
  try {
    adam_step(st, {&a, &b});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("beta.w") != std::string::npos);
  }
  CHECK(a.value(0, 0) == 1.0);
  CHECK(st.step == 0);
  CHECK(st.m.empty());
}

TEST_CASE("gaussian_sample moments over 100k draws") {
  RngStream rng(42);
  const Mat s = gaussian_sample(rng, 1000, 100);
  const double mean = s.mean();
  const double var = (s.array() - mean).square().sum() / static_cast<double>(s.size() - 1);
  CHECK(mean >= -0.02);
  CHECK(mean <= 0.02);
  CHECK(var >= 0.98);
  CHECK(var <= 1.02);
}

TEST_CASE("gaussian_sample determinism") {
  RngStream a(5), b(5), c(6);
  const Mat x = gaussian_sample(a, 3, 4);
  CHECK(x == gaussian_sample(b, 3, 4));
  CHECK(x != gaussian_sample(c, 3, 4));
}

TEST_CASE("rng state round-trips through text") {
  RngStream a(9);
  a.normal();
  RngStream b;
  b.deserialize(a.serialize());
  CHECK(a == b);
  CHECK(a.normal() == b.normal());
  CHECK(a.index(1000) == b.index(1000));
}

TEST_CASE("finite_diff_check on x^2 at 3") {
  Parameter p("x", scalar(3.0));
  p.grad(0, 0) = 6.0;
  const auto r = finite_diff_check([&] { return p.value(0, 0) * p.value(0, 0); }, {&p});
  CHECK(r.passed);
  CHECK(r.numeric == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(p.value(0, 0) == 3.0);
}

TEST_CASE("finite_diff_check on a constant") {
  Parameter p("x", Mat::Random(2, 3));
  const auto r = finite_diff_check([] { return 4.0; }, {&p});
  CHECK(r.passed);
  CHECK(r.max_rel_error == 0.0);
}

TEST_CASE("finite_diff_check flags a wrong gradient") {
  Parameter p("x", scalar(2.0));
  p.grad(0, 0) = 5.0;
  const auto r = finite_diff_check([&] { return p.value(0, 0) * p.value(0, 0); }, {&p});
  CHECK_FALSE(r.passed);
  CHECK(r.worst_parameter == "x");
}

TEST_CASE("finite_diff_check rejects a non-finite loss") {
  Parameter p("x", scalar(0.0));
  CHECK_THROWS_AS(finite_diff_check([&] { return std::log(p.value(0, 0) - 1e-5); }, {&p}), NumericError);
}

TEST_CASE("require_finite and round_to_storage") {
  Mat m = Mat::Ones(2, 2);
  CHECK_NOTHROW(require_finite(m, "m"));
  m(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(require_finite(m, "m"), NumericError);
  Mat r = Mat::Constant(1, 1, 0.1);
  round_to_storage(r);
  CHECK(r(0, 0) == static_cast<double>(0.1f));
}

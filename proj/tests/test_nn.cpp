#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "nn.hpp"

using namespace gcrl::nn;

namespace {

// Reference forward pass written independently of Mlp: plain loops over the
// flat parameter vector, no caching, no batching.
std::vector<double> naive_forward(const Mlp& net, const std::vector<double>& x) {
    const auto& sizes = net.layer_sizes();
    const auto& p = net.params();
    std::vector<double> cur = x;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const std::size_t in = sizes[l], out = sizes[l + 1];
        std::vector<double> next(out, 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            double acc = 0.0;
            for (std::size_t i = 0; i < in; ++i) acc += p[off + o * in + i] * cur[i];
            next[o] = acc;
        }
        off += out * in;
        for (std::size_t o = 0; o < out; ++o) next[o] += p[off + o];
        off += out;
        if (l + 2 < sizes.size()) {
            for (auto& v : next) v = std::max(v, 0.0);
        }
        cur = std::move(next);
    }
    return cur;
}

Mlp make_net(std::vector<std::size_t> sizes, OutputHead head, std::uint64_t seed) {
    Mlp net(std::move(sizes), head);
    Rng rng(seed);
    net.init_params(rng);
    return net;
}

Matrix random_batch(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& v : m.data) v = g(rng);
    return m;
}

double scalar_loss(const Mlp& net, const Matrix& input) {
    const Matrix out = net.forward(input);
    double s = 0.0;
    for (const double v : out.data) s += v * v;
    return 0.5 * s;
}

}  // namespace

TEST_CASE("matrix accessors index row-major") {
    Matrix m(2, 3);
    for (std::size_t i = 0; i < 6; ++i) m.data[i] = static_cast<double>(i);
    CHECK(m.at(0, 0) == 0.0);
    CHECK(m.at(0, 2) == 2.0);
    CHECK(m.at(1, 0) == 3.0);
    CHECK(m.at(1, 2) == 5.0);
}

TEST_CASE("matmul variants agree with index-level definitions") {
    Rng rng(3);
    const Matrix a = random_batch(4, 5, rng);
    const Matrix b = random_batch(5, 3, rng);
    const Matrix c = matmul(a, b);
    REQUIRE(c.rows == 4);
    REQUIRE(c.cols == 3);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            double ref = 0.0;
            for (std::size_t k = 0; k < 5; ++k) ref += a.at(i, k) * b.at(k, j);
            CHECK(c.at(i, j) == doctest::Approx(ref).epsilon(1e-12));
        }
    }
    const Matrix bt = random_batch(3, 5, rng);
    const Matrix cbt = matmul_bt(a, bt);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            double ref = 0.0;
            for (std::size_t k = 0; k < 5; ++k) ref += a.at(i, k) * bt.at(j, k);
            CHECK(cbt.at(i, j) == doctest::Approx(ref).epsilon(1e-12));
        }
    }
    const Matrix at = random_batch(5, 4, rng);
    const Matrix cat = matmul_at(at, b);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            double ref = 0.0;
            for (std::size_t k = 0; k < 5; ++k) ref += at.at(k, i) * b.at(k, j);
            CHECK(cat.at(i, j) == doctest::Approx(ref).epsilon(1e-12));
        }
    }
}

TEST_CASE("forward matches an independent naive implementation") {
    Rng rng(11);
    const Mlp net = make_net({5, 16, 8, 3}, OutputHead::Identity, 21);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> x(5);
        for (auto& v : x) v = g(rng);
        const std::vector<double> out = net.forward(x);
        const std::vector<double> ref = naive_forward(net, x);
        REQUIRE(out.size() == ref.size());
        for (std::size_t j = 0; j < ref.size(); ++j) {
            CHECK(out[j] == doctest::Approx(ref[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("batched forward equals per-row forward") {
    Rng rng(12);
    const Mlp net = make_net({4, 12, 2}, OutputHead::Identity, 22);
    const Matrix batch = random_batch(7, 4, rng);
    const Matrix out = net.forward(batch);
    for (std::size_t r = 0; r < 7; ++r) {
        const std::vector<double> row(batch.row(r), batch.row(r) + 4);
        const std::vector<double> single = net.forward(row);
        for (std::size_t c = 0; c < 2; ++c) {
            CHECK(out.at(r, c) == doctest::Approx(single[c]).epsilon(1e-12));
        }
    }
}

TEST_CASE("parameter gradients match central finite differences") {
    Rng rng(13);
    Mlp net = make_net({3, 10, 6, 2}, OutputHead::Identity, 23);
    const Matrix input = random_batch(5, 3, rng);

    ForwardCache cache;
    const Matrix out = net.forward(input, &cache);
    Matrix dout(out.rows, out.cols);
    dout.data = out.data;
    const Vec grad = net.backward(cache, dout);

    const double h = 1e-5;
    Vec& p = net.params();
    for (std::size_t k = 0; k < p.size(); k += 7) {
        const double saved = p[k];
        p[k] = saved + h;
        const double up = scalar_loss(net, input);
        p[k] = saved - h;
        const double dn = scalar_loss(net, input);
        p[k] = saved;
        const double fd = (up - dn) / (2.0 * h);
        const double tol = 1e-4 * std::max(1.0, std::abs(fd)) + 1e-7;
        CHECK(std::abs(grad[k] - fd) < tol);
    }
}

TEST_CASE("input gradients match central finite differences") {
    Rng rng(14);
    const Mlp net = make_net({4, 8, 1}, OutputHead::Identity, 24);
    Matrix input = random_batch(3, 4, rng);

    ForwardCache cache;
    const Matrix out = net.forward(input, &cache);
    Matrix dout(out.rows, out.cols);
    dout.data = out.data;
    Matrix input_grad;
    net.backward(cache, dout, &input_grad);

    const double h = 1e-5;
    for (std::size_t k = 0; k < input.data.size(); ++k) {
        const double saved = input.data[k];
        input.data[k] = saved + h;
        const double up = scalar_loss(net, input);
        input.data[k] = saved - h;
        const double dn = scalar_loss(net, input);
        input.data[k] = saved;
        const double fd = (up - dn) / (2.0 * h);
        const double tol = 1e-4 * std::max(1.0, std::abs(fd)) + 1e-7;
        CHECK(std::abs(input_grad.data[k] - fd) < tol);
    }
}

TEST_CASE("adam first step moves each parameter by about lr") {
    // With zero moments, the bias-corrected first step is
    // lr * g / (|g| + eps), i.e. lr * sign(g) up to eps rounding.
    Mlp net = make_net({2, 3, 1}, OutputHead::Identity, 25);
    const double lr = 0.01;
    AdamState adam(net.param_count(), lr);
    const Vec before = net.params();
    Vec grad(before.size());
    Rng grng(16);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& v : grad) v = g(grng);

    adam.apply(net.params(), grad);
    for (std::size_t k = 0; k < before.size(); ++k) {
        const double step = before[k] - net.params()[k];
        CHECK(step == doctest::Approx(lr * (grad[k] > 0 ? 1.0 : -1.0)).epsilon(1e-3));
    }
}

TEST_CASE("tanh gaussian log-prob matches a change-of-variables oracle") {
    // For 1-D a = tanh(u), u ~ N(mean, std^2):
    //   log p(a) = log N(u; mean, std) - log(1 - a^2).
    const double mean = 0.3, log_std = -0.5;
    for (const double eps : {-2.0, -0.5, 0.0, 0.7, 2.5}) {
        const SampleResult s = gaussian_tanh_sample({mean, log_std}, {eps});
        const double std = std::exp(log_std);
        const double u = mean + std * eps;
        const double a = std::tanh(u);
        const double log_normal =
            -0.5 * eps * eps - log_std - 0.5 * std::log(2.0 * 3.14159265358979323846);
        const double oracle = log_normal - std::log(1.0 - a * a);
        CHECK(s.action[0] == doctest::Approx(a).epsilon(1e-12));
        CHECK(s.log_prob == doctest::Approx(oracle).epsilon(1e-6));
    }
}

TEST_CASE("multi-dimensional log-prob is the sum of per-dimension terms") {
    const SampleResult joint =
        gaussian_tanh_sample({0.1, -0.4, 0.0, 0.3}, {0.5, -1.2});
    const SampleResult d0 = gaussian_tanh_sample({0.1, 0.0}, {0.5});
    const SampleResult d1 = gaussian_tanh_sample({-0.4, 0.3}, {-1.2});
    CHECK(joint.log_prob == doctest::Approx(d0.log_prob + d1.log_prob).epsilon(1e-12));
}

TEST_CASE("log std is clamped to its documented range") {
    const double eps = 1.0;
    const SampleResult lo = gaussian_tanh_sample({0.0, -50.0}, {eps});
    CHECK(lo.action[0] == doctest::Approx(std::tanh(std::exp(kLogStdMin))).epsilon(1e-12));
    const SampleResult hi = gaussian_tanh_sample({0.0, 50.0}, {eps});
    CHECK(hi.action[0] == doctest::Approx(std::tanh(std::exp(kLogStdMax))).epsilon(1e-12));
}

TEST_CASE("checkpoint round-trip restores the exact parameter vector") {
    Rng rng(17);
    const Mlp net = make_net({6, 32, 32, 4}, OutputHead::TanhGaussian, 27);
    std::stringstream ss;
    save_mlp(ss, net);
    const Mlp loaded = load_mlp(ss);
    REQUIRE(loaded.param_count() == net.param_count());
    for (std::size_t k = 0; k < net.param_count(); ++k) {
        CHECK(loaded.params()[k] == net.params()[k]);
    }
    const Matrix in = random_batch(2, 6, rng);
    const Matrix a = net.forward(in);
    const Matrix b = loaded.forward(in);
    for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == b.data[i]);
}

TEST_CASE("adam state round-trip preserves moments and step") {
    AdamState st(4, 0.005);
    Vec params{1.0, 2.0, 3.0, 4.0};
    st.apply(params, {0.1, -0.2, 0.3, -0.4});
    st.apply(params, {0.2, 0.1, -0.3, 0.4});
    std::stringstream ss;
    save_adam(ss, st);
    const AdamState loaded = load_adam(ss);
    CHECK(loaded.step == st.step);
    CHECK(loaded.lr == st.lr);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(loaded.m[i] == st.m[i]);
        CHECK(loaded.v[i] == st.v[i]);
    }
}

TEST_CASE("non-finite output raises") {
    const Mlp net = make_net({2, 4, 1}, OutputHead::Identity, 28);
    Matrix in(1, 2);
    in.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS((void)net.forward(in), gcrl::NumericError);
}

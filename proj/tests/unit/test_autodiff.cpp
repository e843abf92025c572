#include "gradient_suite.hpp"

#include "nps/autodiff/adam.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace nps;
using testing::TensorD;
using testing::TapeD;

namespace {

std::vector<double> values(const TensorD& t) { return {t.data().begin(), t.data().end()}; }
} // namespace

TEST_CASE("tensor construction checks the shape")
{
    CHECK_THROWS_AS(TensorD(ad::Shape{2, 2}, {1.0, 2.0, 3.0}), ad::ShapeError);
    const TensorD t(ad::Shape{2, 3, 4}, std::vector<double>(24, 1.0));
    CHECK(t.rows() == 6);
    CHECK(t.cols() == 4);
    CHECK(TensorD::scalar(3.0).item() == 3.0);
    CHECK_THROWS_AS(t.item(), ad::ShapeError);
}

TEST_CASE("elementwise ops match their definitions")
{
    TapeD tape;
    const auto x = TensorD::matrix(1, 3, {-1.0, 0.0, 2.0});
    CHECK(values(ad::relu(tape, x)) == std::vector<double>{0.0, 0.0, 2.0});
    CHECK(values(ad::max_zero(tape, x)) == std::vector<double>{0.0, 0.0, 2.0});
    CHECK(values(ad::abs(tape, x)) == std::vector<double>{1.0, 0.0, 2.0});
    CHECK(values(ad::square(tape, x)) == std::vector<double>{1.0, 0.0, 4.0});
    CHECK(values(ad::scale(tape, x, 2.5)) == std::vector<double>{-2.5, 0.0, 5.0});
    const auto s = ad::sin(tape, x);
    const auto c = ad::cos(tape, x);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(s[i] == doctest::Approx(std::sin(x[i])));
        CHECK(c[i] == doctest::Approx(std::cos(x[i])));
    }
    CHECK(values(ad::reciprocal(tape, TensorD::matrix(1, 2, {2.0, -4.0}))) == std::vector<double>{0.5, -0.25});
    CHECK_THROWS_AS(ad::reciprocal(tape, TensorD::matrix(1, 1, {0.0})), ad::NumericError);
}

TEST_CASE("l2 normalize of a 3-4-5 triple")
{
    TapeD tape;
    const auto n = ad::l2_normalize(tape, TensorD::matrix(1, 2, {3.0, 4.0}));
    CHECK(n[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(n[1] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("matmul against an explicit triple loop")
{
    std::mt19937_64 rng(7);
    const auto a = testing::random_tensor({2, 3}, rng, -1, 1, false);
    const auto b = testing::random_tensor({3, 2}, rng, -1, 1, false);
    TapeD tape;
    const auto c = ad::matmul(tape, a, b);
    REQUIRE(c.shape() == ad::Shape{2, 2});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            double expect = 0.0;
            for (std::size_t k = 0; k < 3; ++k)
                expect += a.at(i, k) * b.at(k, j);
            CHECK(c.at(i, j) == doctest::Approx(expect).epsilon(1e-14));
        }
}

TEST_CASE("shape mismatches name the op and the shapes")
{
    TapeD tape;
    const auto a = TensorD::zeros({2, 3});
    const auto b = TensorD::zeros({2, 2});
    try {
        ad::matmul(tape, a, b);
        FAIL("expected a shape error");
    } catch (const ad::ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("matmul") != std::string::npos);
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[2,2]") != std::string::npos);
    }
    CHECK_THROWS_AS(ad::add(tape, a, b), ad::ShapeError);
    CHECK_THROWS_AS(ad::dot(tape, a, b), ad::ShapeError);
    CHECK_THROWS_AS(ad::slice_cols(tape, a, 2, 2), ad::ShapeError);
    CHECK_THROWS_AS(ad::gather_rows(tape, a, {0, 2}), ad::ShapeError);
}

TEST_CASE("add broadcasts a row over the batch")
{
    TapeD tape;
    const auto x = TensorD::matrix(2, 2, {1, 2, 3, 4});
    const auto b = TensorD::matrix(1, 2, {10, 20});
    CHECK(values(ad::add(tape, x, b)) == std::vector<double>{11, 22, 13, 24});
    const auto col = TensorD::matrix(2, 1, {2, 3});
    CHECK(values(ad::mul(tape, x, col)) == std::vector<double>{2, 4, 9, 12});
}

TEST_CASE("reductions")
{
    TapeD tape;
    const auto x = TensorD::matrix(2, 2, {4, -1, 3, -1}, true);
    CHECK(ad::sum(tape, x).item() == 5.0);
    CHECK(ad::mean(tape, x).item() == 1.25);
    auto m = ad::min(tape, x);
    CHECK(m.item() == -1.0);
    ad::backward(tape, m);
    // Ties send the gradient to the first minimum only.
    CHECK(values(TensorD(x.shape(), {x.grad().begin(), x.grad().end()})) == std::vector<double>{0, 1, 0, 0});
}

TEST_CASE("backward of sum of squares")
{
    TapeD tape;
    auto x = TensorD::matrix(1, 2, {1.0, 2.0}, true);
    auto loss = ad::sum(tape, ad::square(tape, x));
    ad::backward(tape, loss);
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 4.0);
}

TEST_CASE("backward rejects a non-scalar loss and zeroes unreached inputs")
{
    TapeD tape;
    auto x = TensorD::matrix(1, 2, {1.0, 2.0}, true);
    auto y = TensorD::matrix(1, 2, {3.0, 4.0}, true);
    auto sq = ad::square(tape, x);
    auto unused = ad::square(tape, y);
    CHECK_THROWS_AS(ad::backward(tape, sq), ad::GradError);
    auto loss = ad::sum(tape, sq);
    ad::backward(tape, loss);
    REQUIRE(y.has_grad());
    CHECK(y.grad()[0] == 0.0);
    CHECK(y.grad()[1] == 0.0);
    (void)unused;
}

TEST_CASE("backward visits records in reverse order")
{
    TapeD tape;
    auto x = TensorD::matrix(1, 1, {0.5}, true);
    auto a = ad::sin(tape, x);
    auto b = ad::square(tape, a);
    auto c = ad::sum(tape, b);
    REQUIRE(tape.size() == 3);
    CHECK(tape.records()[0].kind == ad::OpKind::Sin);
    CHECK(tape.records()[2].kind == ad::OpKind::Sum);
    ad::backward(tape, c);
    CHECK(x.grad()[0] == doctest::Approx(2 * std::sin(0.5) * std::cos(0.5)).epsilon(1e-14));
}

TEST_CASE("nothing is recorded without a recording tape or grad inputs")
{
    TapeD off(false);
    auto x = TensorD::matrix(1, 2, {1.0, 2.0}, true);
    ad::square(off, x);
    CHECK(off.size() == 0);
    TapeD on;
    ad::square(on, TensorD::matrix(1, 2, {1.0, 2.0}));
    CHECK(on.size() == 0);
}

TEST_CASE("non-finite outputs raise")
{
    TapeD tape;
    const auto big = TensorD::matrix(1, 1, {1e300});
    CHECK_THROWS_AS(ad::square(tape, big), ad::NumericError);
}

TEST_CASE("encode layout")
{
    TapeD tape;
    const auto e = ad::encode(tape, TensorD::matrix(1, 1, {0.0}), 2);
    CHECK(values(e) == std::vector<double>{0, 0, 1, 0, 1});
    const auto x = TensorD::matrix(1, 2, {0.3, -0.7});
    const auto f = ad::encode(tape, x, 3);
    REQUIRE(f.cols() == 2 + 2 * 3 * 2);
    CHECK(f[0] == 0.3);
    CHECK(f[1] == -0.7);
    for (std::size_t d = 0; d < 2; ++d)
        for (std::size_t j = 0; j < 3; ++j) {
            const double w = std::ldexp(M_PI, int(j)) * x[d];
            CHECK(f[2 + d * 6 + 2 * j] == doctest::Approx(std::sin(w)).epsilon(1e-12));
            CHECK(f[2 + d * 6 + 2 * j + 1] == doctest::Approx(std::cos(w)).epsilon(1e-12));
        }
}

TEST_CASE("gradient check for every op over ten seeds")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CAPTURE(seed);
        const auto checks = testing::op_checks(seed);
        CHECK(checks.size() == 21);
        for (const auto& c : checks) {
            INFO(c.name << " max relative error " << c.result.max_rel_error);
            CHECK(c.result.checked > 0);
            CHECK(c.result.max_rel_error < 1e-4);
        }
    }
}

TEST_CASE("forward_op dispatches every kind")
{
    TapeD tape;
    const auto a = TensorD::matrix(2, 2, {1, -2, 3, 4});
    const auto b = TensorD::matrix(2, 2, {0.5, 1, -1, 2});
    ad::OpParams params;
    CHECK(values(ad::forward_op(tape, ad::OpKind::Mul, {a, b})) == values(ad::mul(tape, a, b)));
    CHECK(values(ad::forward_op(tape, ad::OpKind::Relu, {a})) == values(ad::relu(tape, a)));
    params.factor = 3.0;
    CHECK(values(ad::forward_op(tape, ad::OpKind::Scale, {a}, params)) == values(ad::scale(tape, a, 3.0)));
    params.begin = 1;
    params.count = 1;
    CHECK(values(ad::forward_op(tape, ad::OpKind::SliceCols, {a}, params)) == std::vector<double>{-2, 4});
    CHECK(ad::forward_op(tape, ad::OpKind::Min, {a}).item() == -2.0);
    CHECK_THROWS_AS(ad::forward_op(tape, ad::OpKind::MatMul, {a}), ad::ShapeError);
}

TEST_CASE("a two-layer relu network passes finite differences on ten seeds")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CAPTURE(seed);
        std::mt19937_64 rng(seed);
        auto fn = [seed](TapeD& t, const std::vector<TensorD>& in) {
            auto h = ad::relu(t, ad::add(t, ad::matmul(t, in[0], in[1]), in[2]));
            auto y = ad::add(t, ad::matmul(t, h, in[3]), in[4]);
            return testing::project(t, y, seed);
        };
        const auto r = testing::check_gradients(
            fn, {testing::random_tensor({5, 3}, rng), testing::random_tensor({3, 8}, rng),
                 testing::random_tensor({1, 8}, rng), testing::random_tensor({8, 2}, rng),
                 testing::random_tensor({1, 2}, rng)});
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("first Adam step moves by the learning rate")
{
    auto p = TensorD::matrix(1, 1, {0.0}, true);
    p.set_name("p");
    p.grad_buffer()[0] = 1.0;
    ad::AdamState state;
    state.learning_rate = 0.1;
    std::vector<TensorD> params{p};
    ad::adam_step(params, state);
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(state.step == 1);
    CHECK(p.grad()[0] == 0.0);
}

TEST_CASE("Adam defaults")
{
    ad::AdamState state;
    CHECK(state.learning_rate == 5e-4);
    CHECK(state.beta1 == 0.9);
    CHECK(state.beta2 == 0.999);
    CHECK(state.epsilon == 1e-8);
}

TEST_CASE("Adam errors name the parameter")
{
    auto p = TensorD::matrix(1, 2, {0.0, 0.0}, true);
    p.set_name("layer1.weight");
    ad::AdamState state;
    std::vector<TensorD> params{p};
    try {
        ad::adam_step(params, state);
        FAIL("expected an error");
    } catch (const ad::GradError& e) {
        CHECK(std::string(e.what()).find("layer1.weight") != std::string::npos);
    }
}

TEST_CASE("Adam reaches the minimum of a convex quadratic")
{
    // f(p) = (p0 - 1.5)^2 + 3 (p1 + 0.5)^2
    auto p = TensorD::matrix(1, 2, {0.0, 0.0}, true);
    p.set_name("p");
    const auto target = TensorD::matrix(1, 2, {1.5, -0.5});
    const auto weight = TensorD::matrix(1, 2, {1.0, 3.0});
    ad::AdamState state;
    state.learning_rate = 0.05;
    std::vector<TensorD> params{p};
    for (int i = 0; i < 200; ++i) {
        // Decay the step once close so the iterate settles instead of ringing.
        if (i == 150)
            state.learning_rate = 0.005;
        TapeD tape;
        auto loss = ad::sum(tape, ad::mul(tape, ad::square(tape, ad::sub(tape, p, target)), weight));
        ad::backward(tape, loss);
        ad::adam_step(params, state);
        for (double g : p.grad())
            CHECK(g == 0.0);
    }
    CHECK(std::abs(p[0] - 1.5) < 1e-3);
    CHECK(std::abs(p[1] + 0.5) < 1e-3);
    CHECK(state.step == 200);
}

TEST_CASE("identical inputs give bit-identical values and gradients")
{
    auto run = [] {
        std::mt19937_64 rng(3);
        auto w = testing::random_tensor({4, 4}, rng);
        auto x = testing::random_tensor({6, 4}, rng);
        TapeD tape;
        auto loss = ad::mean(tape, ad::sin(tape, ad::matmul(tape, x, w)));
        ad::backward(tape, loss);
        std::vector<double> out{loss.item()};
        out.insert(out.end(), w.grad().begin(), w.grad().end());
        return out;
    };
    CHECK(run() == run());
}

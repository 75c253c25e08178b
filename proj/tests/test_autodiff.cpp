#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hydranet/tensor.hpp"

using namespace hydranet;

TEST_CASE("backward basics") {
    Tensor x = Tensor::from_data({2, 3}, {1, -2, 3, 0.5, 0, -1}, true);
    {
        Tape tape;
        Tensor loss = sum_all(x);
        tape.backward(loss);
    }
    for (double g : x.grad()) CHECK(g == 1.0);

    Tensor z = Tensor::vec({0.0}, true);
    {
        Tape tape;
        tape.backward(sum_all(exp(z)));
    }
    CHECK(z.grad()[0] == 1.0);

    Tensor y = Tensor::vec({1.0, 2.0}, true);
    {
        Tape tape;
        Tensor loss = sum_all(square(y));
        tape.backward(loss);
    }
    CHECK(y.grad()[0] == Catch::Approx(2.0));
    CHECK(y.grad()[1] == Catch::Approx(4.0));
}

TEST_CASE("backward contract errors") {
    Tensor x = Tensor::vec({1.0, 2.0}, true);
    Tape tape;
    Tensor nonscalar = exp(x);
    CHECK_THROWS_AS(tape.backward(nonscalar), contract_error);
    // drain the tape so the fixture ends clean
    tape.backward(sum_all(x));
}

TEST_CASE("tape is single-writer and cleared by backward") {
    CHECK_FALSE(Tape::recording());
    Tape tape;
    CHECK(Tape::recording());
    CHECK_THROWS_AS([] { Tape nested; }(), contract_error);
    Tensor x = Tensor::vec({2.0}, true);
    Tensor loss = sum_all(mul(x, x));
    CHECK(tape.op_count() > 0);
    tape.backward(loss);
    CHECK(tape.op_count() == 0);
}

TEST_CASE("grad_check closed-form example") {
    auto f = [](const Tensor& t) { return sum_all(square(t)); };
    CHECK(grad_check(f, Tensor::vec({1.0, 2.0})) < 1e-6);

    auto konst = [](const Tensor& t) { return scale(sum_all(scale(t, 0.0)), 1.0); };
    CHECK(grad_check(konst, Tensor::vec({3.0, -4.0})) == 0.0);
}

namespace {

// Keeps random multipliers away from zero so analytic gradients are not
// drowned by finite-difference cancellation noise.
hydranet::Tensor away_from_zero(const hydranet::Tensor& t, double floor) {
    std::vector<double> v = t.values();
    for (double& x : v) {
        if (std::abs(x) < floor) x = x < 0.0 ? -floor : floor;
    }
    return hydranet::Tensor::from_data(t.shape(), std::move(v));
}

}  // namespace

TEST_CASE("grad_check every operation over random inputs") {
    auto rng = make_rng(7741);
    const int reps = 20;

    for (int rep = 0; rep < reps; ++rep) {
        Tensor x = randn({3, 4}, rng, 0.8);
        Tensor pos = add_scalar(square(randn({3, 4}, rng, 0.7)), 0.5);
        Tensor v4 = away_from_zero(randn({4}, rng), 0.25);
        Tensor v3 = away_from_zero(randn({3}, rng), 0.25);
        Tensor other = away_from_zero(randn({3, 4}, rng), 0.25);
        Tensor mat = randn({4, 2}, rng);

        CHECK(grad_check([](const Tensor& t) { return sum_all(exp(t)); }, x) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(log(t)); }, pos) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(sigmoid(t)); }, x) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(softplus(t)); }, x) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(silu(t)); }, x) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(neg(t)); }, x) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(scale(t, -1.7)); }, x) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(sqrt(t)); }, pos) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(rsqrt(t)); }, pos) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(reciprocal(t)); }, pos) < 1e-4);
        CHECK(grad_check([&](const Tensor& t) { return sum_all(mul(t, other)); }, x) < 1e-4);
        CHECK(grad_check([&](const Tensor& t) { return sum_all(add(t, other)); }, x) < 1e-4);
        CHECK(grad_check([&](const Tensor& t) { return sum_all(sub(other, t)); }, x) < 1e-4);
        CHECK(grad_check([&](const Tensor& t) { return sum_all(matmul(t, mat)); }, x) < 1e-4);
        CHECK(grad_check([&](const Tensor& t) { return sum_all(matmul(x, t)); }, mat) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(square(transpose(t))); }, x) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(square(cumsum(t, 0))); }, x) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(square(cumsum(t, 1))); }, x) < 1e-4);
        CHECK(grad_check([&](const Tensor& t) { return sum_all(square(add_rowvec(t, v4))); }, x) < 1e-4);
        CHECK(grad_check([&](const Tensor& t) { return sum_all(square(add_rowvec(x, t))); }, v4) < 1e-4);
        CHECK(grad_check([&](const Tensor& t) { return sum_all(square(mul_rowvec(t, v4))); }, x) < 1e-4);
        CHECK(grad_check([&](const Tensor& t) { return sum_all(square(mul_rowvec(x, t))); }, v4) < 1e-4);
        CHECK(grad_check([&](const Tensor& t) { return sum_all(square(mul_colvec(t, v3))); }, x) < 1e-4);
        CHECK(grad_check([&](const Tensor& t) { return sum_all(square(mul_colvec(x, t))); }, v3) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(square(sum_axis(t, 0))); }, x) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(square(sum_axis(t, 1))); }, x) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(square(expand_heads(t, 3))); }, v4) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(square(slice_rows(t, 1, 3))); }, x) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(square(slice_cols(t, 0, 2))); }, x) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(square(gather_rows(t, {2, 0, 2}))); }, x) <
              1e-4);
        CHECK(grad_check(
                  [](const Tensor& t) {
                      return sum_all(square(concat_rows({slice_rows(t, 0, 1), slice_rows(t, 0, 3)})));
                  },
                  x) < 1e-4);
        CHECK(grad_check(
                  [](const Tensor& t) {
                      return sum_all(square(concat_cols({slice_cols(t, 2, 4), slice_cols(t, 0, 2)})));
                  },
                  x) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(square(softmax_masked(t, 1))); }, x) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return sum_all(square(reshape(t, {4, 3}))); }, x) < 1e-4);
        CHECK(grad_check([](const Tensor& t) { return mean_all(square(clamp(t, -05.0, 5.0))); }, x) < 1e-4);
    }

    // segsum through exp: keep decays negative as in actual use
    for (int rep = 0; rep < reps; ++rep) {
        Tensor a = rand_uniform({5}, rng, -2.0, -0.05);
        CHECK(grad_check([](const Tensor& t) { return sum_all(segsum_exp(t)); }, a, 1e-5) < 1e-4);
    }

    // masked softmax gradient
    for (int rep = 0; rep < reps; ++rep) {
        Tensor x = randn({3, 3}, rng);
        Tensor mask = Tensor::from_data({3, 3}, {1, 0, 0, 1, 1, 0, 1, 1, 1});
        CHECK(grad_check(
                  [&](const Tensor& t) { return sum_all(square(softmax_masked(t, 1, &mask))); }, x) < 1e-4);
    }
}

TEST_CASE("dropout backward uses the stored mask") {
    auto rng = make_rng(55);
    Tensor x = Tensor::vec({1.0, 2.0, 3.0, 4.0}, true);
    auto rng_fwd = make_rng(123);
    std::vector<double> out;
    {
        Tape tape;
        Tensor y = dropout(x, 0.5, rng_fwd);
        out = y.values();
        tape.backward(sum_all(y));
    }
    for (std::size_t i = 0; i < 4; ++i) {
        double expect = out[i] == 0.0 ? 0.0 : 2.0;
        CHECK(x.grad()[i] == expect);
    }
    (void)rng;
}

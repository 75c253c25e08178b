#include <catch2/catch_amalgamated.hpp>

#include "hydranet/adam.hpp"
#include "hydranet/tensor.hpp"

using namespace hydranet;

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    ParameterMap params;
    Tensor w = params.add("w", Tensor::from_data({2, 2}, {1, 2, 3, 4}, true));
    AdamState state;
    state.init(params);
    adam_step(params, state);
    CHECK(w.values() == std::vector<double>{1, 2, 3, 4});
    CHECK(state.step_count == 1);
}

TEST_CASE("adam: first step moves a scalar by about lr") {
    ParameterMap params;
    Tensor w = params.add("w", Tensor::scalar(1.0, true));
    AdamState state;
    state.lr = 0.001;
    state.init(params);
    w.mutable_grad()[0] = 1.0;
    adam_step(params, state);
    // step 1 closed form: lr * g / (sqrt(g^2) + eps) with bias correction
    CHECK(w.item() == Catch::Approx(1.0 - 0.001).epsilon(1e-6));
    // gradient zeroed afterwards
    CHECK(w.grad()[0] == 0.0);
}

TEST_CASE("adam: step count increments") {
    ParameterMap params;
    params.add("w", Tensor::scalar(0.0, true));
    AdamState state;
    state.init(params);
    adam_step(params, state);
    adam_step(params, state);
    CHECK(state.step_count == 2);
}

TEST_CASE("adam: aliased parameters are updated once") {
    ParameterMap params;
    Tensor shared = Tensor::scalar(1.0, true);
    params.add("a", shared);
    params.add("b", shared);
    AdamState state;
    state.lr = 0.1;
    state.init(params);
    shared.mutable_grad()[0] = 1.0;
    adam_step(params, state);
    CHECK(shared.item() == Catch::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("adam: training a quadratic converges") {
    ParameterMap params;
    Tensor w = params.add("w", Tensor::vec({5.0, -3.0}, true));
    AdamState state;
    state.lr = 0.05;
    state.init(params);
    for (int step = 0; step < 500; ++step) {
        Tape tape;
        Tensor loss = sum_all(square(w));
        tape.backward(loss);
        adam_step(params, state);
    }
    CHECK(std::abs(w.at(0)) < 1e-2);
    CHECK(std::abs(w.at(1)) < 1e-2);
}

TEST_CASE("grad_check_params on a tiny composite") {
    ParameterMap params;
    Tensor w = params.add("w", Tensor::from_data({2, 2}, {0.5, -0.2, 0.1, 0.9}, true));
    Tensor b = params.add("b", Tensor::vec({0.1, -0.1}, true));
    Tensor x = Tensor::from_data({3, 2}, {1, 2, -1, 0.5, 0.3, 0.7});
    auto loss = [&]() { return mean_all(square(silu(add_rowvec(matmul(x, w), b)))); };
    CHECK(grad_check_params(loss, params) < 1e-4);
}

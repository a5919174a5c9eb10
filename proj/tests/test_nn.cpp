#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "forecastad/nn.hpp"

#include <cmath>
#include <functional>

using namespace forecastad;
using namespace forecastad::nn;

namespace {

Tensor random_tensor(int b, int c, int h, int w, Rng& rng) {
    Tensor t(b, c, h, w);
    for (auto& v : t.data) v = rng.normal();
    return t;
}

Matrix random_matrix(int r, int c, Rng& rng) {
    Matrix m(r, c);
    for (int j = 0; j < c; ++j)
        for (int i = 0; i < r; ++i) m(i, j) = rng.normal();
    return m;
}

/// Central finite differences on every entry of every parameter against the
/// analytic gradient of loss = sum(r .* output).
void check_param_grads(std::vector<Parameter*> params, const std::function<double()>& loss,
                       const std::function<void()>& forward_backward, double tol = 1e-6) {
    for (auto* p : params) p->zero_grad();
    forward_backward();
    const double h = 1e-5;
    for (auto* p : params) {
        for (Eigen::Index i = 0; i < p->value.size(); ++i) {
            const double orig = p->value.data()[i];
            p->value.data()[i] = orig + h;
            const double up = loss();
            p->value.data()[i] = orig - h;
            const double down = loss();
            p->value.data()[i] = orig;
            const double fd = (up - down) / (2 * h);
            const double an = p->grad.data()[i];
            const double scale = std::max({std::abs(fd), std::abs(an), 1e-8});
            INFO(p->name << "[" << i << "] fd=" << fd << " analytic=" << an);
            CHECK(std::abs(fd - an) / scale < tol);
        }
    }
}

}  // namespace

TEST_CASE("init_uniform stays within +-1/sqrt(fan_in)") {
    Rng rng(1);
    Parameter p("p", 20, 30);
    init_uniform(p, 25, rng);
    const double bound = 1.0 / std::sqrt(25.0);
    bool nonzero = false;
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
        CHECK(std::abs(p.value.data()[i]) <= bound);
        nonzero = nonzero || p.value.data()[i] != 0.0;
    }
    CHECK(nonzero);
}

TEST_CASE("Conv2d gradients match finite differences") {
    Rng rng(2);
    Conv2d conv("conv", 2, 3, 3, 2, 1, rng);
    const Tensor x = random_tensor(2, 2, 5, 5, rng);
    Tensor r;
    auto loss = [&] {
        const Tensor y = conv.forward(x);
        double s = 0.0;
        for (size_t i = 0; i < y.data.size(); ++i) s += r.data[i] * y.data[i];
        return s;
    };
    auto fb = [&] {
        const Tensor y = conv.forward(x);
        conv.backward(r);
    };
    {
        const Tensor y0 = conv.forward(x);
        r = random_tensor(y0.b, y0.c, y0.h, y0.w, rng);
    }
    check_param_grads(conv.params(), loss, fb);
}

TEST_CASE("Conv2d input gradient matches finite differences") {
    Rng rng(3);
    Conv2d conv("conv", 2, 2, 3, 1, 1, rng);
    Tensor x = random_tensor(1, 2, 4, 4, rng);
    Tensor r = random_tensor(1, 2, 4, 4, rng);
    for (auto* p : conv.params()) p->zero_grad();
    conv.forward(x);
    const Tensor gx = conv.backward(r);
    const double h = 1e-5;
    for (size_t i = 0; i < x.data.size(); ++i) {
        const double orig = x.data[i];
        auto loss_at = [&](double v) {
            x.data[i] = v;
            const Tensor y = conv.forward(x);
            double s = 0.0;
            for (size_t j = 0; j < y.data.size(); ++j) s += r.data[j] * y.data[j];
            return s;
        };
        const double fd = (loss_at(orig + h) - loss_at(orig - h)) / (2 * h);
        x.data[i] = orig;
        CHECK(std::abs(fd - gx.data[i]) < 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("ConvTranspose2d is the adjoint of its mirror conv and grad-checks") {
    Rng rng(4);
    ConvTranspose2d deconv("deconv", 2, 3, 5, 4, 2, 3, rng);
    const Tensor x = random_tensor(2, 2, 2, 2, rng);
    {
        const Tensor y = deconv.forward(x);
        CHECK(y.h == 8);
        CHECK(y.w == 8);
    }
    Tensor r = random_tensor(2, 3, 8, 8, rng);
    auto loss = [&] {
        const Tensor y = deconv.forward(x);
        double s = 0.0;
        for (size_t i = 0; i < y.data.size(); ++i) s += r.data[i] * y.data[i];
        return s;
    };
    auto fb = [&] {
        deconv.forward(x);
        deconv.backward(r);
    };
    check_param_grads(deconv.params(), loss, fb);
}

TEST_CASE("BatchNorm training-mode gradients match finite differences") {
    Rng rng(5);
    BatchNorm bn("bn", 3, 1e-4);
    // move gamma/beta off their 1/0 init so the test is not degenerate
    for (auto* p : bn.params())
        for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += 0.1 * (i + 1);
    Tensor x = random_tensor(4, 3, 2, 2, rng);
    Tensor r = random_tensor(4, 3, 2, 2, rng);
    auto loss = [&] {
        const Tensor y = bn.forward(x, true);
        double s = 0.0;
        for (size_t i = 0; i < y.data.size(); ++i) s += r.data[i] * y.data[i];
        return s;
    };
    auto fb = [&] {
        bn.forward(x, true);
        bn.backward(r);
    };
    check_param_grads(bn.params(), loss, fb);

    // input gradient as well (batch statistics make this the tricky part)
    for (auto* p : bn.params()) p->zero_grad();
    bn.forward(x, true);
    const Tensor gx = bn.backward(r);
    const double h = 1e-5;
    for (size_t i = 0; i < x.data.size(); i += 7) {
        const double orig = x.data[i];
        x.data[i] = orig + h;
        const double up = loss();
        x.data[i] = orig - h;
        const double down = loss();
        x.data[i] = orig;
        const double fd = (up - down) / (2 * h);
        CHECK(std::abs(fd - gx.data[i]) < 1e-5 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("BatchNorm eval mode uses running statistics") {
    Rng rng(6);
    BatchNorm bn("bn", 2, 1e-4);
    const Tensor x = random_tensor(8, 2, 3, 3, rng);
    bn.forward(x, true);
    const Tensor y1 = bn.forward(x, false);
    const Tensor y2 = bn.forward(x, false);
    CHECK(y1.data == y2.data);  // eval mode is a pure function
    // running mean moved toward the batch mean
    bool moved = false;
    for (auto* b : bn.buffers())
        for (Eigen::Index i = 0; i < b->value.size(); ++i)
            moved = moved || (b->name.find("mean") != std::string::npos &&
                              b->value.data()[i] != 0.0);
    CHECK(moved);
}

TEST_CASE("MaxPool2d forwards the max and routes gradient to the argmax") {
    Tensor x(1, 1, 2, 2);
    x.data = {1.0, 5.0, 2.0, 3.0};
    MaxPool2d pool;
    const Tensor y = pool.forward(x);
    REQUIRE(y.data.size() == 1);
    CHECK(y.data[0] == 5.0);
    Tensor gy(1, 1, 1, 1);
    gy.data = {7.0};
    const Tensor gx = pool.backward(gy);
    CHECK(gx.data == std::vector<double>{0.0, 7.0, 0.0, 0.0});
}

TEST_CASE("Linear gradients match finite differences") {
    Rng rng(7);
    Linear lin("lin", 4, 3, rng);
    const Matrix x = random_matrix(4, 5, rng);
    const Matrix r = random_matrix(3, 5, rng);
    auto loss = [&] { return (lin.forward(x).array() * r.array()).sum(); };
    auto fb = [&] {
        lin.forward(x);
        lin.backward(r);
    };
    check_param_grads(lin.params(), loss, fb);
}

TEST_CASE("LSTM gradients match finite differences") {
    Rng rng(8);
    Lstm lstm("lstm", 3, 4, 2, rng);
    std::vector<Matrix> inputs;
    for (int t = 0; t < 3; ++t) inputs.push_back(random_matrix(3, 2, rng));
    const Matrix h0 = random_matrix(4, 2, rng);
    const Matrix c0 = random_matrix(4, 2, rng);
    const Matrix r = random_matrix(4, 2, rng);
    auto loss = [&] { return (lstm.forward(inputs, h0, c0).array() * r.array()).sum(); };
    auto fb = [&] {
        lstm.forward(inputs, h0, c0);
        lstm.backward(r);
    };
    check_param_grads(lstm.params(), loss, fb, 2e-6);

    // input gradients
    for (auto* p : lstm.params()) p->zero_grad();
    lstm.forward(inputs, h0, c0);
    const auto gin = lstm.backward(r);
    REQUIRE(gin.size() == 3);
    const double h = 1e-5;
    for (int t = 0; t < 3; ++t)
        for (Eigen::Index i = 0; i < inputs[t].size(); ++i) {
            const double orig = inputs[t].data()[i];
            inputs[t].data()[i] = orig + h;
            const double up = loss();
            inputs[t].data()[i] = orig - h;
            const double down = loss();
            inputs[t].data()[i] = orig;
            const double fd = (up - down) / (2 * h);
            CHECK(std::abs(fd - gin[t].data()[i]) < 1e-5 * std::max(1.0, std::abs(fd)));
        }
}

TEST_CASE("Adam single step matches the closed form") {
    Parameter p("p", 1, 1);
    p.value(0, 0) = 2.0;
    p.grad(0, 0) = 0.5;
    const double lr = 0.01, wd = 0.1, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    Adam adam({&p}, lr, wd, beta1, beta2, eps);
    adam.step();
    const double g = 0.5 + wd * 2.0;
    const double mhat = g;        // bias-corrected first moment after one step
    const double vhat = g * g;
    const double expected = 2.0 - lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(p.value(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("Adam descends a quadratic") {
    Parameter p("p", 1, 1);
    p.value(0, 0) = 3.0;
    Adam adam({&p}, 0.05, 0.0);
    for (int i = 0; i < 500; ++i) {
        p.zero_grad();
        p.grad(0, 0) = 2.0 * p.value(0, 0);  // d/dx x^2
        adam.step();
    }
    CHECK(std::abs(p.value(0, 0)) < 0.05);
}

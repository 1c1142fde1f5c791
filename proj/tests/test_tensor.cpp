#include <doctest.h>

#include <cmath>
#include <vector>

#include "advdet/adam.hpp"
#include "advdet/rng.hpp"
#include "advdet/tape.hpp"
#include "advdet/tensor.hpp"
#include "advdet/tensor_io.hpp"
#include "gradcheck.hpp"

using namespace advdet;

namespace {

// Direct-summation convolution oracle, independent of the kernels module.
std::vector<float> conv_oracle(const std::vector<float>& in, int h, int w, int ci,
                               const std::vector<float>& k, int kh, int kw, int co,
                               int stride, int pad) {
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (w + 2 * pad - kw) / stride + 1;
    std::vector<float> out(static_cast<size_t>(oh) * ow * co, 0.0f);
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
            for (int c = 0; c < co; ++c) {
                double acc = 0.0;
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx)
                        for (int ic = 0; ic < ci; ++ic) {
                            const int iy = oy * stride + ky - pad;
                            const int ix = ox * stride + kx - pad;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                            acc += static_cast<double>(in[(iy * w + ix) * ci + ic]) *
                                   k[((ky * kw + kx) * ci + ic) * co + c];
                        }
                out[(oy * ow + ox) * co + c] = static_cast<float>(acc);
            }
    return out;
}

} // namespace

TEST_CASE("tensor shape and data invariants") {
    Tensor t = Tensor::zeros({2, 3});
    CHECK(t.numel() == 6);
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0f, 2.0f, 3.0f}), std::invalid_argument);
    CHECK_THROWS_AS(t.item(), std::invalid_argument);
}

TEST_CASE("add of zeros is zeros") {
    Tape tape;
    Tensor out = tape.add(Tensor::zeros({2, 2}), Tensor::zeros({2, 2}));
    for (float v : out.data()) CHECK(v == 0.0f);
}

TEST_CASE("softmax of a constant vector is uniform and sums to one") {
    Tape tape;
    Tensor out = tape.softmax(Tensor::zeros({3}));
    double sum = 0.0;
    for (float v : out.data()) {
        CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
        sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);

    Rng rng(7);
    Tensor logits = Tensor::uniform({4, 10}, -5.0f, 5.0f, rng);
    Tensor probs = tape.softmax(logits);
    for (int r = 0; r < 4; ++r) {
        double s = 0.0;
        for (int j = 0; j < 10; ++j) s += probs.at(r * 10 + j);
        CHECK(std::abs(s - 1.0) < 1e-6);
    }
}

TEST_CASE("conv2d matches the direct-summation oracle") {
    Tape tape;
    Tensor img = Tensor::full({1, 5, 5, 1}, 1.0f);
    Tensor kernel = Tensor::full({3, 3, 1, 1}, 1.0f);
    Tensor out = tape.conv2d(img, kernel, Tensor(), 1, 1);
    CHECK(out.shape() == Shape{1, 5, 5, 1});
    CHECK(out.at(2 * 5 + 2) == 9.0f);

    Rng rng(11);
    Tensor rin = Tensor::uniform({1, 6, 7, 3}, -1.0f, 1.0f, rng);
    Tensor rk = Tensor::uniform({3, 3, 3, 4}, -1.0f, 1.0f, rng);
    Tensor rout = tape.conv2d(rin, rk, Tensor(), 2, 1);
    std::vector<float> expect =
        conv_oracle({rin.data().begin(), rin.data().end()}, 6, 7, 3,
                    {rk.data().begin(), rk.data().end()}, 3, 3, 4, 2, 1);
    REQUIRE(rout.numel() == static_cast<int64_t>(expect.size()));
    for (int64_t i = 0; i < rout.numel(); ++i)
        CHECK(rout.at(i) == doctest::Approx(expect[i]).epsilon(1e-5));
}

TEST_CASE("backward of sum and of x*x") {
    {
        Tape tape;
        Tensor x = Tensor::from_data({3}, {1.0f, -2.0f, 0.5f}, true);
        Tensor loss = tape.sum(x);
        tape.backward(loss);
        for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == 1.0f);
    }
    {
        Tape tape;
        Tensor x = Tensor::from_data({2}, {1.0f, 2.0f}, true);
        Tensor loss = tape.sum(tape.mul(x, x));
        tape.backward(loss);
        CHECK(x.grad()[0] == doctest::Approx(2.0f));
        CHECK(x.grad()[1] == doctest::Approx(4.0f));
    }
}

TEST_CASE("backward rejects non-scalar loss and empty tape") {
    Tape tape;
    Tensor x = Tensor::zeros({3}, true);
    Tensor y = tape.add(x, x);
    CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
    Tape empty;
    CHECK_THROWS_AS(empty.backward(Tensor::scalar(1.0f)), std::runtime_error);
}

TEST_CASE("full small-CNN pipeline gradient matches finite differences") {
    Rng rng(23);
    Tensor img = Tensor::uniform({1, 4, 4, 1}, 0.0f, 1.0f, rng, true);
    Tensor kernel = Tensor::uniform({3, 3, 1, 2}, -0.5f, 0.5f, rng);
    Tensor onehot = Tensor::from_data({2}, {0.0f, 1.0f});

    auto loss_value = [&]() {
        Tape t;
        Tensor conv = t.conv2d(img, kernel, Tensor(), 1, 0);
        Tensor act = t.relu(conv);
        Tensor pooled = t.maxpool2d(t.reshape(act, {1, 2, 2, 2}), 2, 2, 2, 2);
        Tensor logits = t.reshape(pooled, {2});
        Tensor probs = t.softmax(logits);
        Tensor picked = t.sum(t.mul(probs, onehot));
        Tensor loss = t.mul(Tensor::scalar(-1.0f), t.log(t.clamp(picked, 1e-12f, 1.0f)));
        return t.sum(loss);
    };

    Tape t;
    Tensor conv = t.conv2d(img, kernel, Tensor(), 1, 0);
    Tensor act = t.relu(conv);
    Tensor pooled = t.maxpool2d(t.reshape(act, {1, 2, 2, 2}), 2, 2, 2, 2);
    Tensor logits = t.reshape(pooled, {2});
    Tensor probs = t.softmax(logits);
    Tensor picked = t.sum(t.mul(probs, onehot));
    Tensor loss = t.sum(t.mul(Tensor::scalar(-1.0f), t.log(t.clamp(picked, 1e-12f, 1.0f))));
    t.backward(loss);

    auto numeric = gradcheck::numeric_grad(img, [&]() { return loss_value().item(); });
    double worst = 0.0;
    CHECK_MESSAGE(gradcheck::grads_close(img.grad(), numeric, 1e-3, 1e-5, &worst),
                  "worst excess error " << worst);
}

TEST_CASE("gradient check across primitive ops") {
    Rng rng(31);

    auto check_param = [](Tensor& param, const std::function<Tensor(Tape&)>& fwd) {
        Tape t;
        Tensor loss = fwd(t);
        t.backward(loss);
        std::vector<float> autodiff(param.grad().begin(), param.grad().end());
        param.zero_grad();
        Tape dummy;
        auto numeric = gradcheck::numeric_grad(param, [&]() {
            Tape t2;
            return fwd(t2).item();
        });
        double worst = 0.0;
        const bool ok = gradcheck::grads_close(autodiff, numeric, 1e-3, 1e-5, &worst);
        CHECK_MESSAGE(ok, "worst excess error " << worst);
    };

    for (int trial = 0; trial < 5; ++trial) {
        Tensor a = Tensor::uniform({3, 4}, -1.0f, 1.0f, rng, true);
        Tensor b = Tensor::uniform({3, 4}, -1.0f, 1.0f, rng);
        Tensor c = Tensor::uniform({4, 2}, -1.0f, 1.0f, rng);
        Tensor bias = Tensor::uniform({4}, -1.0f, 1.0f, rng);

        check_param(a, [&](Tape& t) { return t.sum(t.mul(t.add(a, b), a)); });
        check_param(a, [&](Tape& t) { return t.sum(t.square(t.sub(a, b))); });
        check_param(a, [&](Tape& t) { return t.sum(t.matmul(a, c)); });
        check_param(a, [&](Tape& t) { return t.sum(t.exp(t.mul(Tensor::scalar(0.3f), a))); });
        check_param(a, [&](Tape& t) { return t.sum(t.log(t.clamp(a, 0.1f, 2.0f))); });
        check_param(a, [&](Tape& t) { return t.mean(t.max_elementwise(a, b)); });
        check_param(a, [&](Tape& t) { return t.sum(t.mul(t.softmax(a), b)); });
        check_param(a, [&](Tape& t) { return t.sum(t.pad(a, {{1, 2}, {0, 1}})); });
        check_param(a, [&](Tape& t) { return t.sum(t.add(a, bias)); });  // broadcast

        Tensor img = Tensor::uniform({2, 5, 5, 3}, -1.0f, 1.0f, rng, true);
        Tensor kern = Tensor::uniform({3, 3, 3, 2}, -0.7f, 0.7f, rng, true);
        Tensor cbias = Tensor::uniform({2}, -0.2f, 0.2f, rng, true);
        check_param(img, [&](Tape& t) { return t.mean(t.conv2d(img, kern, cbias, 1, 1)); });
        check_param(kern, [&](Tape& t) { return t.mean(t.conv2d(img, kern, cbias, 1, 1)); });
        check_param(cbias, [&](Tape& t) { return t.mean(t.conv2d(img, kern, cbias, 1, 1)); });
        check_param(img, [&](Tape& t) { return t.sum(t.relu(t.conv2d(img, kern, Tensor(), 2, 0))); });
        check_param(img, [&](Tape& t) { return t.sum(t.maxpool2d(img, 2, 2, 2, 2)); });

        Tensor src = Tensor::uniform({4, 4, 2}, 0.0f, 1.0f, rng, true);
        std::vector<float> gdata;
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) {
                gdata.push_back(y * 0.9f + 0.21f);
                gdata.push_back(x * 0.85f + 0.4f);
            }
        Tensor grid = Tensor::from_data({4, 4, 2}, gdata);
        check_param(src, [&](Tape& t) { return t.sum(t.bilinear_sample(src, grid)); });
    }
}

TEST_CASE("record_and_eval dispatches and rejects") {
    Tape tape;
    Tensor a = Tensor::full({2, 2}, 1.0f);
    Tensor b = Tensor::full({2, 2}, 2.0f);
    std::vector<Tensor> in{a, b};
    Tensor out = tape.record_and_eval("add", in);
    CHECK(out.at(0) == 3.0f);

    std::vector<Tensor> bad{a, Tensor::full({3, 3}, 1.0f)};
    CHECK_THROWS_WITH_AS(tape.record_and_eval("add", bad),
                         doctest::Contains("(2,2)"), std::invalid_argument);
    CHECK_THROWS_AS(tape.record_and_eval("frobnicate", in), std::invalid_argument);
}

TEST_CASE("forward evaluation is deterministic") {
    auto run = []() {
        Rng rng(99);
        Tape t;
        Tensor x = Tensor::uniform({1, 8, 8, 3}, 0.0f, 1.0f, rng);
        Tensor k = Tensor::uniform({3, 3, 3, 4}, -1.0f, 1.0f, rng);
        Tensor y = t.maxpool2d(t.relu(t.conv2d(x, k, Tensor(), 1, 1)), 2, 2, 2, 2);
        return std::vector<float>(y.data().begin(), y.data().end());
    };
    auto r1 = run(), r2 = run();
    REQUIRE(r1.size() == r2.size());
    for (size_t i = 0; i < r1.size(); ++i) CHECK(r1[i] == r2[i]);
}

TEST_CASE("adam: fixed point, descent direction, convergence") {
    {
        AdamState st;
        Tensor w = Tensor::scalar(1.0f);
        std::vector<Tensor> params{w};
        std::vector<Tensor> grads{Tensor::scalar(0.0f)};
        for (int i = 0; i < 5; ++i)
            adam_step(params, grads, st, 0.1f);
        CHECK(w.item() == 1.0f);
    }
    {
        AdamState st;
        Tensor w = Tensor::scalar(1.0f);
        std::vector<Tensor> params{w};
        std::vector<Tensor> grads{Tensor::scalar(2.0f)};  // d/dw w^2 at w=1
        adam_step(params, grads, st, 0.1f);
        CHECK(w.item() < 1.0f);
    }
    {
        AdamState st;
        Tensor w = Tensor::scalar(0.0f);
        std::vector<Tensor> params{w};
        for (int i = 0; i < 100; ++i) {
            std::vector<Tensor> grads{Tensor::scalar(2.0f * (w.item() - 3.0f))};
            adam_step(params, grads, st, 0.1f);
        }
        CHECK(std::abs(w.item() - 3.0f) < 0.1f);
    }
    {
        AdamState st;
        Tensor w = Tensor::scalar(0.0f);
        std::vector<Tensor> params{w};
        std::vector<Tensor> grads{Tensor::zeros({2})};
        CHECK_THROWS_AS(adam_step(params, grads, st, 0.1f), std::invalid_argument);
    }
}

TEST_CASE("tensor file round trip and error paths") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "advdet_tensor_io_test";
    fs::create_directories(dir);

    Rng rng(5);
    Tensor t = Tensor::uniform({3, 4, 2}, -2.0f, 2.0f, rng);
    save_tensor(dir / "t.tnsr", t);
    Tensor back = load_tensor(dir / "t.tnsr");
    CHECK(back.shape() == t.shape());
    for (int64_t i = 0; i < t.numel(); ++i) CHECK(back.at(i) == t.at(i));

    std::ofstream bad(dir / "bad.tnsr", std::ios::binary);
    bad << "not a tensor file";
    bad.close();
    CHECK_THROWS_AS(load_tensor(dir / "bad.tnsr"), std::runtime_error);
    CHECK_THROWS_AS(load_tensor(dir / "missing.tnsr"), std::runtime_error);
    fs::remove_all(dir);
}

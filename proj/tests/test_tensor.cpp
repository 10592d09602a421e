#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "hift/checkpoint.hpp"
#include "hift/tensor.hpp"
#include "oracles.hpp"

using namespace hift;

TEST_SUITE_BEGIN("tensor_core");

TEST_CASE("softmax: equal logits give a uniform row") {
    Var x(Tensor({1, 4}, {0, 0, 0, 0}));
    Var y = softmax_rows(x);
    for (int j = 0; j < 4; ++j) CHECK(y.value()[j] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax: huge logit gap stays finite") {
    Var y = softmax_rows(Var(Tensor({1, 2}, {1000.0, 0.0})));
    CHECK(y.value().all_finite());
    CHECK(y.value()[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(y.value()[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("softmax: frozen hand-oracle values for [1,2,3]") {
    // scalar exp/sum oracle, computed ahead of the build at 30 digits
    Var y = softmax_rows(Var(Tensor({1, 3}, {1, 2, 3})));
    CHECK(y.value()[0] == doctest::Approx(0.090030573170380458).epsilon(1e-14));
    CHECK(y.value()[1] == doctest::Approx(0.24472847105479765).epsilon(1e-14));
    CHECK(y.value()[2] == doctest::Approx(0.66524095577482189).epsilon(1e-14));
}

TEST_CASE("softmax: rows sum to one on random inputs") {
    Rng rng(42);
    for (int trial = 0; trial < 5; ++trial) {
        Var y = softmax_rows(Var(Tensor::normal({7, 11}, rng, 0.0, 3.0)));
        for (int i = 0; i < 7; ++i) {
            double s = 0.0;
            for (int j = 0; j < 11; ++j) s += y.value().at2(i, j);
            CHECK(std::abs(s - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("softmax rejects non-rank-2 input") {
    CHECK_THROWS_AS(softmax_rows(Var(Tensor({3}))), ShapeError);
    CHECK_THROWS_AS(softmax_rows(Var(Tensor({2, 2, 2}))), ShapeError);
}

TEST_CASE("layer_norm: constant row with unit gain maps to zero") {
    Var x(Tensor({1, 4}, {5, 5, 5, 5}));
    Var y = layer_norm(x, Var(Tensor({4}, 1.0)), Var(Tensor({4})));
    for (int j = 0; j < 4; ++j) CHECK(y.value()[j] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("layer_norm: frozen mean/var oracle for [1,2,3,4]") {
    Var y = layer_norm(Var(Tensor({1, 4}, {1, 2, 3, 4})), Var(Tensor({4}, 1.0)), Var(Tensor({4})));
    CHECK(y.value()[0] == doctest::Approx(-1.3416354199689270).epsilon(1e-14));
    CHECK(y.value()[1] == doctest::Approx(-0.44721180665630899).epsilon(1e-14));
    CHECK(y.value()[2] == doctest::Approx(0.44721180665630899).epsilon(1e-14));
    CHECK(y.value()[3] == doctest::Approx(1.3416354199689270).epsilon(1e-14));
}

TEST_CASE("layer_norm: pre-affine rows have mean 0 and variance 1") {
    // the 1e-7 bound needs row variance well above the 1e-5 epsilon, so the
    // rows here are drawn at scale ~30
    Rng rng(7);
    Tensor x = Tensor::normal({6, 16}, rng, 0.0, 30.0);
    Var y = layer_norm(Var(x), Var(Tensor({16}, 1.0)), Var(Tensor({16})));
    for (int i = 0; i < 6; ++i) {
        double mu = 0.0, var = 0.0;
        for (int j = 0; j < 16; ++j) mu += y.value().at2(i, j);
        mu /= 16;
        for (int j = 0; j < 16; ++j) {
            const double d = y.value().at2(i, j) - mu;
            var += d * d;
        }
        var /= 16;
        CHECK(std::abs(mu) <= 1e-7);
        CHECK(std::abs(var - 1.0) <= 1e-7);
    }
}

TEST_CASE("layer_norm rejects mismatched gain length") {
    CHECK_THROWS_AS(layer_norm(Var(Tensor({2, 4})), Var(Tensor({3}, 1.0)), Var(Tensor({3}))),
                    ShapeError);
}

TEST_CASE("conv2d: 1x1 identity kernel reproduces the input") {
    Rng rng(3);
    Tensor x = Tensor::normal({1, 1, 5, 5}, rng, 0.0, 1.0);
    Tensor w({1, 1, 1, 1}, {1.0});
    Var y = conv2d(Var(x), Var(w), Var(Tensor({1})), 1, 0);
    for (int i = 0; i < x.size(); ++i) CHECK(y.value()[i] == doctest::Approx(x[i]).epsilon(1e-15));
}

TEST_CASE("conv2d: zero weights and bias give zeros") {
    Rng rng(4);
    Var y = conv2d(Var(Tensor::normal({1, 2, 6, 6}, rng, 0.0, 1.0)), Var(Tensor({3, 2, 3, 3})),
                   Var(Tensor({3})), 1, 1);
    for (int i = 0; i < y.value().size(); ++i) CHECK(y.value()[i] == 0.0);
}

TEST_CASE("conv2d matches the quadruple-loop oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const int stride = 1 + trial % 2;
        const int pad = trial % 3 == 0 ? 1 : 0;
        Tensor x = Tensor::normal({1, 2, 5, 5}, rng, 0.0, 1.0);
        Tensor w = Tensor::normal({3, 2, 3, 3}, rng, 0.0, 1.0);
        Tensor b = Tensor::normal({3}, rng, 0.0, 1.0);
        Var y = conv2d(Var(x), Var(w), Var(b), stride, pad);
        Tensor ref = oracle::conv2d(x, w, b, stride, pad);
        REQUIRE(y.value().shape() == ref.shape());
        for (int i = 0; i < ref.size(); ++i) CHECK(std::abs(y.value()[i] - ref[i]) <= 1e-10);
    }
}

TEST_CASE("conv2d output size follows the floor formula") {
    Var y = conv2d(Var(Tensor({1, 1, 11, 11})), Var(Tensor({1, 1, 3, 3})), Var(Tensor({1})), 2, 1);
    CHECK(y.shape() == Shape{1, 1, 6, 6});
}

TEST_CASE("conv2d rejects channel mismatch") {
    CHECK_THROWS_AS(
        conv2d(Var(Tensor({1, 2, 5, 5})), Var(Tensor({3, 4, 3, 3})), Var(Tensor({3})), 1, 0),
        ShapeError);
}

TEST_CASE("backward: sum gives all-ones gradient") {
    Parameter p("p", Tensor({3, 3}, 2.0));
    backward(sum_all(p.var));
    for (int i = 0; i < 9; ++i) CHECK(p.grad()[i] == 1.0);
}

TEST_CASE("backward: quadratic loss grad equals the parameter") {
    Rng rng(11);
    Parameter p("p", Tensor::normal({4, 2}, rng, 0.0, 1.0));
    backward(scale(sum_all(mul(p.var, p.var)), 0.5));
    for (int i = 0; i < 8; ++i) CHECK(p.grad()[i] == doctest::Approx(p.value()[i]).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar loss") {
    Parameter p("p", Tensor({2, 2}, 1.0));
    CHECK_THROWS_AS(backward(mul(p.var, p.var)), ContractError);
}

TEST_CASE("backward leaves unreachable parameters untouched") {
    Parameter used("a", Tensor({2}, 1.0));
    Parameter unused("b", Tensor({2}, 1.0));
    backward(sum_all(used.var));
    CHECK(unused.grad()[0] == 0.0);
    CHECK(unused.grad()[1] == 0.0);
}

TEST_CASE("elementwise op gradients match finite differences") {
    Rng rng(21);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng r2(100 + seed);
        Parameter a("a", Tensor::normal({3, 4}, r2, 0.2, 1.0));
        Parameter b("b", Tensor::normal({3, 4}, r2, 1.5, 0.3));
        Parameter g("g", Tensor::normal({1, 4}, r2, 0.0, 1.0));
        auto loss_fn = [&]() {
            Var z = add(mul(a.var, b.var), vexp(scale(a.var, 0.3)));
            z = divide(z, add_const(mul(b.var, b.var), 1.0));
            z = add(z, g.var); // broadcast row
            z = mul(sigmoid(z), vlog(add_const(mul(z, z), 1.0)));
            return sum_all(maximum(z, scale(b.var, 0.1)));
        };
        a.zero_grad();
        b.zero_grad();
        g.zero_grad();
        backward(loss_fn());
        for (Parameter* p : {&a, &b, &g}) {
            for (int idx = 0; idx < p->value().size(); idx += 3) {
                const double analytic = p->grad()[idx];
                const double numeric =
                    oracle::fd([&]() { return loss_fn().value().item(); }, p->value()[idx]);
                CHECK(std::abs(analytic - numeric) <=
                      1e-4 * std::max({1.0, std::abs(analytic), std::abs(numeric)}));
            }
        }
    }
}

TEST_CASE("matmul/softmax/layer_norm gradients match finite differences") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(300 + seed);
        Parameter a("a", Tensor::normal({3, 4}, rng, 0.0, 1.0));
        Parameter b("b", Tensor::normal({4, 3}, rng, 0.0, 1.0));
        Parameter gain("gain", Tensor::normal({3}, rng, 1.0, 0.2));
        Parameter bias("bias", Tensor::normal({3}, rng, 0.0, 0.2));
        auto loss_fn = [&]() {
            Var z = matmul(a.var, b.var);
            z = layer_norm(z, gain.var, bias.var);
            z = softmax_rows(z);
            return mean_all(mul(z, z));
        };
        a.zero_grad();
        b.zero_grad();
        gain.zero_grad();
        bias.zero_grad();
        backward(loss_fn());
        for (Parameter* p : {&a, &b, &gain, &bias}) {
            for (int idx = 0; idx < p->value().size(); idx += 2) {
                const double analytic = p->grad()[idx];
                const double numeric =
                    oracle::fd([&]() { return loss_fn().value().item(); }, p->value()[idx]);
                CHECK(std::abs(analytic - numeric) <=
                      1e-4 * std::max({1.0, std::abs(analytic), std::abs(numeric)}));
            }
        }
    }
}

TEST_CASE("conv2d and xcorr gradients match finite differences") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Rng rng(500 + seed);
        Parameter x("x", Tensor::normal({1, 2, 6, 6}, rng, 0.0, 1.0));
        Parameter w("w", Tensor::normal({2, 2, 3, 3}, rng, 0.0, 0.5));
        Parameter b("b", Tensor::normal({2}, rng, 0.0, 0.1));
        Parameter t("t", Tensor::normal({2, 2, 2}, rng, 0.0, 1.0));
        auto loss_fn = [&]() {
            Var feat = relu(conv2d(x.var, w.var, b.var, 1, 1));
            Var corr = xcorr_depthwise(t.var, reshape(feat, {2, 6, 6}));
            return mean_all(mul(corr, corr));
        };
        for (Parameter* p : {&x, &w, &b, &t}) p->zero_grad();
        backward(loss_fn());
        for (Parameter* p : {&x, &w, &b, &t}) {
            for (int idx = 0; idx < p->value().size(); idx += 7) {
                const double analytic = p->grad()[idx];
                const double numeric =
                    oracle::fd([&]() { return loss_fn().value().item(); }, p->value()[idx]);
                CHECK(std::abs(analytic - numeric) <=
                      1e-4 * std::max({1.0, std::abs(analytic), std::abs(numeric)}));
            }
        }
    }
}

TEST_CASE("operations are deterministic") {
    Rng r1(77), r2(77);
    Tensor a1 = Tensor::normal({4, 4}, r1, 0.0, 1.0);
    Tensor a2 = Tensor::normal({4, 4}, r2, 0.0, 1.0);
    Var y1 = softmax_rows(matmul(Var(a1), Var(a1)));
    Var y2 = softmax_rows(matmul(Var(a2), Var(a2)));
    for (int i = 0; i < y1.value().size(); ++i) CHECK(y1.value()[i] == y2.value()[i]);
}

TEST_CASE("checkpoint round-trips parameters bit-for-bit") {
    Rng rng(9);
    Parameter a("backbone.conv1.weight", Tensor::normal({2, 3, 3, 3}, rng, 0.0, 1.0));
    Parameter b("heads.cls1.bias", Tensor::normal({1, 2}, rng, 0.0, 1.0));
    ParamRefs params = {&a, &b};
    const std::string path = "ckpt_roundtrip.hift";
    save_checkpoint(path, params);

    Parameter a2("backbone.conv1.weight", Tensor({2, 3, 3, 3}));
    Parameter b2("heads.cls1.bias", Tensor({1, 2}));
    ParamRefs loaded = {&a2, &b2};
    load_checkpoint(path, loaded);
    for (int i = 0; i < a.value().size(); ++i) CHECK(a2.value()[i] == a.value()[i]);
    for (int i = 0; i < b.value().size(); ++i) CHECK(b2.value()[i] == b.value()[i]);

    Parameter wrong("missing.param", Tensor({1}));
    ParamRefs bad = {&wrong};
    CHECK_THROWS_AS(load_checkpoint(path, bad), ContractError);
    std::remove(path.c_str());
}

TEST_CASE("checkpoint header layout is stable") {
    Parameter p("ab", Tensor({2}, {1.0, 2.0}));
    ParamRefs params = {&p};
    const std::string path = "ckpt_layout.hift";
    save_checkpoint(path, params);
    std::ifstream is(path, std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    // "HIFT" | version 1 | count 1 | len 2 | "ab" | rank 1 | extent 2 | two f64
    REQUIRE(bytes.size() == 4u + 4 + 4 + 2 + 2 + 1 + 4 + 16);
    CHECK(bytes[0] == 'H');
    CHECK(bytes[1] == 'I');
    CHECK(bytes[2] == 'F');
    CHECK(bytes[3] == 'T');
    CHECK(bytes[4] == 1);  // version, little-endian
    CHECK(bytes[8] == 1);  // count
    CHECK(bytes[12] == 2); // name length
    CHECK(bytes[14] == 'a');
    CHECK(bytes[15] == 'b');
    CHECK(bytes[16] == 1); // rank
    CHECK(bytes[17] == 2); // extent
    double v0, v1;
    std::memcpy(&v0, bytes.data() + 21, 8);
    std::memcpy(&v1, bytes.data() + 29, 8);
    CHECK(v0 == 1.0);
    CHECK(v1 == 2.0);
    std::remove(path.c_str());
}

TEST_SUITE_END();

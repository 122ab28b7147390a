// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include "support/oracles.hpp"

#include <dynmap/diff/ops.hpp>

#include <doctest.h>

#include <cmath>

using namespace dynmap;
using diff::Tensor;
using dynmap::testing::gradient_error;
using dynmap::testing::random_tensor;

namespace {
constexpr double kElementwiseTol = 1e-4;
constexpr double kComposedTol = 1e-3;
} // namespace

TEST_CASE("matmul examples") {
    diff::PrecisionScope f64(diff::Dtype::f64);
    const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    CHECK(diff::matmul(a, Tensor::from({2, 2}, {1, 0, 0, 1})).values() == std::vector<double>{1, 2, 3, 4});
    CHECK(diff::matmul(a, Tensor::from({2, 2}, {5, 6, 7, 8})).values() == std::vector<double>{19, 22, 43, 50});
    CHECK_THROWS_AS(diff::matmul(a, Tensor::zeros({3, 2})), std::invalid_argument);
}

TEST_CASE("matmul gradients match finite differences") {
    diff::PrecisionScope f64(diff::Dtype::f64);
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
        CHECK(gradient_error([&] { return diff::sum(diff::matmul(a, b)); }, {a, b}) < kElementwiseTol);
        CHECK(gradient_error([&] { return diff::sum_squares(diff::matmul(a, b)); }, {a, b}) < kElementwiseTol);
    }
}

TEST_CASE("conv2d examples") {
    diff::PrecisionScope f64(diff::Dtype::f64);
    std::mt19937_64 rng(2);
    Tensor x = random_tensor({1, 5, 5}, rng, -1, 1, false);
    CHECK(diff::conv2d(x, Tensor::full({1, 1, 1, 1}, 1.0), Tensor(), 1, 0).values() == x.values());

    const Tensor y = diff::conv2d(Tensor::full({1, 6, 6}, 1.0), Tensor::full({1, 1, 3, 3}, 1.0), Tensor(), 1, 0);
    REQUIRE(y.shape() == diff::Shape{1, 4, 4});
    for (double v : y.values()) {
        CHECK(v == doctest::Approx(9.0));
    }
    CHECK_THROWS(diff::conv2d(Tensor::zeros({1, 2, 2}), Tensor::zeros({1, 1, 3, 3}), Tensor(), 1, 0));
}

TEST_CASE("conv2d and deconv2d agree with direct loops") {
    diff::PrecisionScope f64(diff::Dtype::f64);
    std::mt19937_64 rng(3);
    struct Geo {
        int ci, co, h, w, k, stride, pad;
    };
    for (const Geo g : {Geo{2, 3, 4, 4, 3, 1, 1}, Geo{3, 2, 7, 5, 3, 2, 1}, Geo{1, 4, 6, 6, 4, 2, 1},
                        Geo{2, 2, 5, 5, 1, 1, 0}}) {
        Tensor x = random_tensor({g.ci, g.h, g.w}, rng, -1, 1, false);
        Tensor kc = random_tensor({g.co, g.ci, g.k, g.k}, rng, -1, 1, false);
        int ho, wo;
        const auto ref = dynmap::testing::naive_conv2d(x.values(), g.ci, g.h, g.w, kc.values(), g.co, g.k, g.stride,
                                                       g.pad, ho, wo);
        const Tensor y = diff::conv2d(x, kc, Tensor(), g.stride, g.pad);
        CHECK(y.shape() == diff::Shape{g.co, ho, wo});
        CHECK(dynmap::testing::max_abs_diff(y.values(), ref) < 1e-12);

        Tensor kd = random_tensor({g.ci, g.co, g.k, g.k}, rng, -1, 1, false);
        const auto dref = dynmap::testing::naive_deconv2d(x.values(), g.ci, g.h, g.w, kd.values(), g.co, g.k,
                                                          g.stride, g.pad, ho, wo);
        const Tensor d = diff::deconv2d(x, kd, Tensor(), g.stride, g.pad);
        CHECK(d.shape() == diff::Shape{g.co, ho, wo});
        CHECK(dynmap::testing::max_abs_diff(d.values(), dref) < 1e-12);
    }
}

TEST_CASE("conv2d and deconv2d gradients match finite differences") {
    diff::PrecisionScope f64(diff::Dtype::f64);
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x = random_tensor({2, 4, 4}, rng);
        Tensor k = random_tensor({3, 2, 3, 3}, rng);
        Tensor b = random_tensor({3}, rng);
        const int stride = 1 + trial % 2;
        CHECK(gradient_error([&] { return diff::sum_squares(diff::conv2d(x, k, b, stride, 1)); }, {x, k, b}) <
              kElementwiseTol);
        Tensor kd = random_tensor({2, 3, 4, 4}, rng);
        CHECK(gradient_error([&] { return diff::sum_squares(diff::deconv2d(x, kd, b, 2, 1)); }, {x, kd, b}) <
              kElementwiseTol);
    }
}

TEST_CASE("deconv2d geometry") {
    CHECK(diff::deconv2d_extent(4, 4, 2, 1) == 8);
    std::int64_t r = 4;
    for (int i = 0; i < 6; ++i) {
        r = diff::deconv2d_extent(r, 4, 2, 1);
    }
    CHECK(r == 256);
    CHECK_THROWS(diff::deconv2d_extent(1, 1, 1, 1));

    // conv2d with the matching geometry undoes the extent change.
    for (std::int64_t h : {3, 4, 7, 16}) {
        CHECK(diff::conv2d_extent(diff::deconv2d_extent(h, 4, 2, 1), 4, 2, 1) == h);
        CHECK(diff::conv2d_extent(diff::deconv2d_extent(h, 3, 1, 1), 3, 1, 1) == h);
    }
    Tensor x = Tensor::zeros({2, 5, 5});
    Tensor up = diff::deconv2d(x, Tensor::zeros({2, 3, 4, 4}), Tensor(), 2, 1);
    Tensor down = diff::conv2d(up, Tensor::zeros({2, 3, 4, 4}), Tensor(), 2, 1);
    CHECK(down.shape() == x.shape());
}

TEST_CASE("elementwise examples") {
    diff::PrecisionScope f64(diff::Dtype::f64);
    CHECK(diff::relu(Tensor::from({2}, {-1, 2})).values() == std::vector<double>{0, 2});
    CHECK(diff::sigmoid(Tensor::scalar(0)).item() == doctest::Approx(0.5));
    CHECK(diff::softplus(Tensor::scalar(0)).item() == doctest::Approx(std::log(2.0)));
    CHECK(diff::softplus(Tensor::scalar(800)).item() == doctest::Approx(800));
    CHECK(diff::softplus(Tensor::scalar(-800)).item() >= 0);

    Tensor z = Tensor::scalar(0, true);
    diff::sigmoid(z).backward();
    CHECK(z.grad_values()[0] == doctest::Approx(0.25));

    Tensor r = Tensor::from({3}, {-1, 0, 2}, true);
    diff::sum(diff::relu(r)).backward();
    CHECK(r.grad_values() == std::vector<double>{0, 0, 1});

    CHECK_THROWS(diff::add(Tensor::zeros({2, 3}), Tensor::zeros({2})));
    CHECK_THROWS(diff::mul(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})));
}

TEST_CASE("elementwise gradients match finite differences") {
    diff::PrecisionScope f64(diff::Dtype::f64);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng), row = random_tensor({4}, rng);
        // Keep relu inputs away from the kink so central differences are valid.
        Tensor c = random_tensor({3, 4}, rng, 0.1, 1);
        Tensor cn = random_tensor({3, 4}, rng, -1, -0.1);
        auto w = [&](const Tensor& t) { return diff::sum(diff::mul(t, b)); };
        CHECK(gradient_error([&] { return w(diff::relu(c)); }, {c}) < kElementwiseTol);
        CHECK(gradient_error([&] { return w(diff::relu(cn)); }, {cn}) < kElementwiseTol);
        CHECK(gradient_error([&] { return w(diff::sigmoid(a)); }, {a}) < kElementwiseTol);
        CHECK(gradient_error([&] { return w(diff::softplus(a)); }, {a}) < kElementwiseTol);
        CHECK(gradient_error([&] { return w(diff::add(a, row)); }, {a, row}) < kElementwiseTol);
        CHECK(gradient_error([&] { return w(diff::sub(a, c)); }, {a, c}) < kElementwiseTol);
        CHECK(gradient_error([&] { return diff::sum(diff::mul(a, c)); }, {a, c}) < kElementwiseTol);
        CHECK(gradient_error([&] { return w(diff::scale(a, -2.5)); }, {a}) < kElementwiseTol);
    }
}

TEST_CASE("layout op gradients match finite differences") {
    diff::PrecisionScope f64(diff::Dtype::f64);
    std::mt19937_64 rng(6);
    const std::vector<std::int64_t> idx{2, 0, 2, 1};
    for (int trial = 0; trial < 10; ++trial) {
        Tensor a = random_tensor({3, 4}, rng), b = random_tensor({2, 4}, rng);
        Tensor wt = random_tensor({4, 3}, rng, -1, 1, false);
        Tensor w12 = random_tensor({12}, rng, -1, 1, false);
        CHECK(gradient_error([&] { return diff::sum(diff::mul(diff::transpose(a), wt)); }, {a}) < kElementwiseTol);
        CHECK(gradient_error([&] { return diff::sum(diff::mul(diff::reshape(a, {12}), w12)); }, {a}) <
              kElementwiseTol);
        CHECK(gradient_error([&] { return diff::sum_squares(diff::slice_rows(a, 1, 3)); }, {a}) < kElementwiseTol);
        CHECK(gradient_error([&] { return diff::sum_squares(diff::gather_rows(a, idx)); }, {a}) < kElementwiseTol);
        CHECK(gradient_error([&] { return diff::sum_squares(diff::scatter_rows(a, {{1, 3, 0}}, 5)); }, {a}) <
              kElementwiseTol);
        const std::vector<Tensor> parts{a, b};
        CHECK(gradient_error([&] { return diff::sum_squares(diff::concat_rows(std::vector<Tensor>{a, b})); },
                             {a, b}) < kElementwiseTol);
        (void)parts;
    }
}

TEST_CASE("composed graph gradients match finite differences") {
    diff::PrecisionScope f64(diff::Dtype::f64);
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x = random_tensor({2, 6, 6}, rng);
        Tensor k1 = random_tensor({3, 2, 3, 3}, rng);
        Tensor k2 = random_tensor({3, 2, 4, 4}, rng);
        Tensor w = random_tensor({2, 4}, rng);
        auto loss = [&] {
            Tensor h = diff::softplus(diff::conv2d(x, k1, Tensor(), 2, 1));
            h = diff::sigmoid(diff::deconv2d(h, k2, Tensor(), 2, 1));
            Tensor m = diff::matmul(diff::reshape(h, {18, 4}), diff::transpose(w));
            return diff::sum_squares(m);
        };
        CHECK(gradient_error(loss, {x, k1, k2, w}) < kComposedTol);
    }
}

TEST_CASE("backward semantics") {
    diff::PrecisionScope f64(diff::Dtype::f64);
    Tensor x = Tensor::from({3}, {1, -2, 3}, true);
    diff::sum_squares(x).backward();
    CHECK(x.grad_values() == std::vector<double>{2, -4, 6});

    Tensor y = Tensor::scalar(3, true);
    diff::add(y, y).backward();
    CHECK(y.grad_values()[0] == 2);

    // Gradients accumulate across backward calls until cleared.
    diff::sum(x).backward();
    CHECK(x.grad_values() == std::vector<double>{3, -3, 7});
    x.zero_grad();
    CHECK(x.grad_values() == std::vector<double>{0, 0, 0});

    Tensor loss = diff::sum_squares(diff::scale(x, 2));
    loss.backward();
    CHECK_THROWS_WITH_AS(loss.backward(), doctest::Contains("already consumed"), std::logic_error);

    CHECK_THROWS_AS(diff::scale(x, 2).backward(), std::logic_error);
}

TEST_CASE("no-grad mode records nothing") {
    Tensor x = Tensor::from({2}, {1, 2}, true);
    Tensor y;
    {
        diff::NoGradGuard guard;
        y = diff::scale(x, 3);
    }
    CHECK_FALSE(y.has_grad_fn());
    CHECK(diff::scale(x, 3).has_grad_fn());
}

TEST_CASE("non-finite values are reported") {
    Tensor x = Tensor::from({2}, {1, NAN});
    CHECK_THROWS_WITH(diff::check_finite(x, "probe"), doctest::Contains("probe"));
    CHECK_NOTHROW(diff::check_finite(Tensor::from({2}, {1, 2}), "probe"));
}

TEST_CASE("precision follows the global setting") {
    CHECK(diff::default_dtype() == diff::Dtype::f32);
    {
        diff::PrecisionScope f64(diff::Dtype::f64);
        CHECK(Tensor::zeros({2}).dtype() == diff::Dtype::f64);
    }
    const Tensor t = Tensor::zeros({2});
    CHECK(t.dtype() == diff::Dtype::f32);
    CHECK(t.numel() == static_cast<std::int64_t>(t.buffer().size()));
}

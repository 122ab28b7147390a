// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include "support/fixtures.hpp"
#include "support/tempdir.hpp"

#include <dynmap/diff/ops.hpp>
#include <dynmap/io/synthetic.hpp>
#include <dynmap/train/trainer.hpp>

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

using namespace dynmap;
using diff::Tensor;
using dynmap::testing::TempDir;

namespace {

hyper::ModelConfig config_for(const io::Dataset& d) {
    auto c = testing::tiny_config(d.frames);
    c.bounds = d.bounds;
    return c;
}

train::TrainConfig quick(int epochs, int steps) {
    train::TrainConfig c;
    c.epochs = epochs;
    c.steps_per_epoch = steps;
    c.image_batch = 4;
    c.batch_rays = 24;
    c.samples_per_ray = 16;
    return c;
}

io::Dataset tiny_dataset(const std::filesystem::path& root) {
    io::SynthSpec s;
    s.frames = 3;
    s.cameras = 4;
    s.resolution = 16;
    return io::gen_synthetic(s, root);
}

} // namespace

TEST_CASE("loss examples") {
    const std::vector<double> rgb{0.2, 0.4, 0.6};
    const Tensor same = Tensor::from({1, 4}, {0.2, 0.4, 0.6, 0.9});
    const Tensor zero = Tensor::zeros({4});
    auto r = train::compute_loss(same, rgb, {}, std::span<const Tensor>(&zero, 1));
    CHECK(r.report.total() == 0);
    CHECK(r.total.item() == 0);

    const Tensor off = Tensor::from({1, 4}, {0.3, 0.4, 0.6, 0.9});
    r = train::compute_loss(off, rgb, {}, {}, 0, 0);
    CHECK(r.report.color == doctest::Approx(0.01));
    CHECK(r.report.total() == doctest::Approx(0.01));

    CHECK(train::kLambdaKl == 1e-6);
    CHECK(train::kLambdaMask == 0.1);
    const std::vector<double> two_rgb{0.2, 0.4};
    CHECK_THROWS_AS(train::compute_loss(same, two_rgb, {}, {}), std::invalid_argument);
    const std::vector<double> masks{1, 0};
    CHECK_THROWS_AS(train::compute_loss(same, rgb, masks, {}), std::invalid_argument);
}

TEST_CASE("loss decomposition and gradients") {
    diff::PrecisionScope f64(diff::Dtype::f64);
    std::mt19937_64 rng(4);
    Tensor rendered = testing::random_tensor({5, 4}, rng, 0, 1, true);
    Tensor z = testing::random_tensor({6}, rng, -2, 2, true);
    std::vector<double> rgb(15), mask(5);
    for (auto& v : rgb) {
        v = static_cast<double>(rng() % 100) / 100;
    }
    for (auto& v : mask) {
        v = static_cast<double>(rng() % 2);
    }
    const auto r = train::compute_loss(rendered, rgb, mask, std::span<const Tensor>(&z, 1), 0.3, 0.7);
    double lc = 0, lm = 0, kl = 0;
    const auto v = rendered.values();
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            lc += std::pow(v[i * 4 + c] - rgb[i * 3 + c], 2);
        }
        lm += std::pow(v[i * 4 + 3] - mask[i], 2);
    }
    for (const double x : z.values()) {
        kl += 0.5 * x * x;
    }
    CHECK(r.report.color == doctest::Approx(lc).epsilon(1e-12));
    CHECK(r.report.mask == doctest::Approx(lm).epsilon(1e-12));
    CHECK(r.report.kl == doctest::Approx(kl).epsilon(1e-12));
    CHECK(r.total.item() == doctest::Approx(lc + 0.3 * kl + 0.7 * lm).epsilon(1e-12));
    CHECK(r.report.total() == doctest::Approx(r.total.item()).epsilon(1e-12));
    auto loss = [&] { return train::compute_loss(rendered, rgb, mask, std::span<const Tensor>(&z, 1), 0.3, 0.7).total; };
    CHECK(testing::gradient_error(loss, {rendered, z}) < 1e-4);
}

TEST_CASE("adam steps") {
    diff::PrecisionScope f64(diff::Dtype::f64);
    Tensor theta = Tensor::full({4}, 1.0, true);
    train::Adam adam({{"g", 0.01, {theta}}});
    diff::sum(theta).backward();
    REQUIRE(adam.step(1.0));
    for (const double v : theta.values()) {
        CHECK(v == doctest::Approx(1 - 0.01).epsilon(1e-6));
    }
    Tensor still = Tensor::full({3}, 2.0, true);
    train::Adam idle({{"g", 0.01, {still}}});
    diff::scale(diff::sum(still), 0.0).backward();
    idle.step(1.0);
    CHECK(still.values() == std::vector<double>{2, 2, 2});
}

TEST_CASE("adam descends a quadratic") {
    diff::PrecisionScope f64(diff::Dtype::f64);
    Tensor theta = Tensor::full({1}, 1.0, true);
    train::Adam adam({{"g", 0.1, {theta}}});
    for (int i = 0; i < 200; ++i) {
        adam.zero_grad();
        diff::sum_squares(theta).backward();
        adam.step(1.0);
    }
    CHECK(std::abs(theta.item()) < 0.05);
}

TEST_CASE("adam skips non-finite gradients") {
    Tensor a = Tensor::full({2}, 1.0, true);
    Tensor b = Tensor::full({2}, 1.0, true);
    train::Adam adam({{"first", 0.1, {a}}, {"second", 0.1, {b}}});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    diff::add(diff::sum(a), diff::sum(diff::mul(b, Tensor::from({2}, {1.0, nan})))).backward();
    std::string offender;
    CHECK_FALSE(adam.step(1.0, &offender));
    CHECK(offender == "second");
    CHECK(a.values() == std::vector<double>{1, 1});
    CHECK(adam.steps() == 0);
}

TEST_CASE("learning rate schedule") {
    CHECK(train::lr_multiplier(0) == 1);
    CHECK(train::lr_multiplier(400) == doctest::Approx(0.1));
    CHECK(train::lr_multiplier(800) == doctest::Approx(0.01));
    CHECK(train::lr_multiplier(200) == doctest::Approx(std::sqrt(0.1)));
    hyper::Model model(testing::tiny_config());
    const auto groups = model.parameter_groups();
    REQUIRE(groups.size() == 4);
    CHECK(groups[0].name == "latents");
    CHECK(groups[0].base_lr == 5e-4);
    CHECK(groups[1].base_lr == 5e-4);
    CHECK(groups[2].name == "hash");
    CHECK(groups[2].base_lr == 5e-3);
    CHECK(groups[3].base_lr == 5e-4);
}

TEST_CASE("one step reaches every parameter group") {
    TempDir dir("train_flow");
    const auto d = tiny_dataset(dir.path());
    hyper::Model model(config_for(d));
    train::Trainer trainer(model, d, io::load_views(d), quick(1, 1));
    const auto before = model.latents().codes().values();
    const auto r = trainer.step(0);
    CHECK(r.color > 0);
    CHECK(r.mask > 0);
    CHECK(r.kl > 0);
    REQUIRE(trainer.last_grad_norms().size() == 4);
    for (const auto& [name, g] : trainer.last_grad_norms()) {
        INFO(name);
        CHECK(g > 0);
        CHECK(std::isfinite(g));
    }
    CHECK(model.latents().codes().values() != before);
}

TEST_CASE("training is reproducible and logs a curve") {
    TempDir dir("train_rep");
    const auto d = tiny_dataset(dir / "data");
    auto run = [&](const std::string& out) {
        hyper::Model model(config_for(d));
        auto cfg = quick(3, 2);
        cfg.out_dir = dir / out;
        cfg.checkpoint_every = 2;
        train::Trainer t(model, d, io::load_views(d), cfg);
        return t.run();
    };
    const auto a = run("a");
    const auto b = run("b");
    REQUIRE(a.curve.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a.curve[i].epoch == static_cast<int>(i + 1));
        CHECK(a.curve[i].total == b.curve[i].total);
        CHECK(a.curve[i].color == b.curve[i].color);
        CHECK(a.curve[i].total ==
              doctest::Approx(a.curve[i].color + 1e-6 * a.curve[i].kl + 0.1 * a.curve[i].mask).epsilon(1e-9));
    }
    CHECK(std::filesystem::exists(dir / "a" / "epoch_0002.ckpt"));
    CHECK(std::filesystem::exists(dir / "a" / "model.ckpt"));
    std::ifstream csv(dir / "a" / "loss.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "epoch,L_c,L_KL,L_m,total,lr");
    int rows = 0;
    for (std::string line; std::getline(csv, line);) {
        ++rows;
    }
    CHECK(rows == 3);
}

TEST_CASE("non-finite latents abort with the component named") {
    TempDir dir("train_nan");
    const auto d = tiny_dataset(dir.path());
    hyper::Model model(config_for(d));
    model.latents().codes().buffer().set(0, std::numeric_limits<double>::infinity());
    train::Trainer trainer(model, d, io::load_views(d), quick(1, 1));
    std::string what;
    for (int i = 0; i < 5 && what.empty(); ++i) {
        try {
            trainer.step(0);
        } catch (const std::runtime_error& e) {
            what = e.what();
        }
    }
    CHECK(what.find("latent") != std::string::npos);
}

TEST_CASE("trainer rejects mismatched models") {
    TempDir dir("train_bad");
    const auto d = tiny_dataset(dir.path());
    auto c = config_for(d);
    c.frames = 2;
    hyper::Model model(c);
    CHECK_THROWS_AS(train::Trainer(model, d, io::load_views(d), quick(1, 1)), std::invalid_argument);
}

TEST_CASE("loss trend check") {
    std::vector<train::EpochRecord> curve;
    for (int e = 1; e <= 50; ++e) {
        curve.push_back({e, 0, 0, 0, 10.0 / e, 0});
    }
    CHECK(train::loss_trend_ok(curve));
    for (auto& r : curve) {
        r.total = 1.0 / r.total;
    }
    CHECK_FALSE(train::loss_trend_ok(curve));
    curve.resize(30);
    CHECK_FALSE(train::loss_trend_ok(curve));
}

TEST_CASE("training config json") {
    auto c = quick(7, 3);
    c.seed = 99;
    const auto back = train::train_config_from_json(train::to_json(c));
    CHECK(back.epochs == 7);
    CHECK(back.steps_per_epoch == 3);
    CHECK(back.batch_rays == 24);
    CHECK(back.seed == 99);
    const auto defaults = train::train_config_from_json(nlohmann::json::object());
    CHECK(defaults.image_batch == 8);
    CHECK(defaults.batch_rays == 1024);
    CHECK(defaults.steps_per_epoch == 50);
    CHECK_THROWS(train::train_config_from_json({{"epochs", 0}}));
}

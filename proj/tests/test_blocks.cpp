#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fundus/blocks.hpp"
#include "fundus/errors.hpp"
#include "fundus/gradcheck.hpp"

using namespace fundus;

TEST_CASE("SE bottleneck sizing") {
    const SEConfig a{16, 8}, b{16, 4}, c{4, 8}, zero_c{0, 8}, zero_r{8, 0};
    CHECK(a.bottleneck() == 2);
    CHECK(b.bottleneck() == 4);
    CHECK(c.bottleneck() == 1); // never collapses to zero
    CHECK_THROWS_AS(zero_c.bottleneck(), ConfigInvalid);
    CHECK_THROWS_AS(zero_r.bottleneck(), ConfigInvalid);
}

TEST_CASE("SE with zero weights gates every channel at one half") {
    SplitMix64 rng(4);
    SEBlock se({4, 2}, rng);
    se.fc1().weight.fill(0.0);
    se.fc1().bias.fill(0.0);
    se.fc2().weight.fill(0.0);
    se.fc2().bias.fill(0.0);

    Tensor x = Tensor::random_uniform({2, 4, 3, 3}, -2, 2, rng);
    Tensor y = se.forward(x);
    REQUIRE(y.same_shape(x));
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(y[i] == doctest::Approx(0.5 * x[i]).epsilon(1e-14));
    }
}

TEST_CASE("SE with a saturated excitation passes the input through") {
    SplitMix64 rng(4);
    SEBlock se({3, 2}, rng);
    se.fc1().weight.fill(0.0);
    se.fc1().bias.fill(0.0);
    se.fc2().weight.fill(0.0);
    se.fc2().bias.fill(50.0); // sigmoid(50) == 1 to double precision

    Tensor x = Tensor::random_uniform({1, 3, 4, 4}, -2, 2, rng);
    Tensor y = se.forward(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-14));
    }
}

TEST_CASE("SE gradient check") {
    SplitMix64 rng(21);
    SEBlock se({4, 2}, rng);
    Tensor x = Tensor::random_uniform({2, 4, 3, 3}, -1, 1, rng);
    CHECK(grad_check(se, x).ok());
}

TEST_CASE("SE params are registered under the prefix") {
    SplitMix64 rng(5);
    SEBlock se({4, 2}, rng);
    ParamMap params;
    se.collect_params("enc0/se", params);
    CHECK(params.count("enc0/se/fc1/weight") == 1);
    CHECK(params.count("enc0/se/fc2/bias") == 1);
    CHECK(params.size() == 4);
}

TEST_CASE("conv block preserves spatial dims at any dilation") {
    SplitMix64 rng(6);
    for (std::size_t dilation : {1u, 2u, 4u}) {
        ConvBlock block(3, 5, 2, rng, dilation);
        Tensor x = Tensor::random_uniform({1, 3, 9, 9}, -1, 1, rng);
        Tensor y = block.forward(x);
        CHECK(y.shape() == std::vector<std::size_t>{1, 5, 9, 9});
    }
}

TEST_CASE("conv block gradient check") {
    SplitMix64 rng(22);
    ConvBlock block(2, 3, 2, rng);
    Tensor x = Tensor::random_uniform({1, 2, 5, 5}, -1, 1, rng);
    CHECK(grad_check(block, x).ok());

    ConvBlock dilated(2, 2, 1, rng, 2);
    Tensor x2 = Tensor::random_uniform({1, 2, 6, 6}, -1, 1, rng);
    CHECK(grad_check(dilated, x2).ok());
}

TEST_CASE("conv block params") {
    SplitMix64 rng(7);
    ConvBlock block(2, 4, 3, rng);
    ParamMap params;
    block.collect_params("body", params);
    CHECK(params.size() == 6);
    CHECK(params.count("body/conv0/weight") == 1);
    CHECK(params.count("body/conv2/bias") == 1);
}

TEST_CASE("ASPP config validation") {
    SplitMix64 rng(8);
    ASPPConfig bad;
    bad.in_channels = 4;
    bad.rates = {};
    CHECK_THROWS_AS(Aspp(bad, rng), ConfigInvalid);
    bad.rates = {2, 2};
    CHECK_THROWS_AS(Aspp(bad, rng), ConfigInvalid);
    bad.rates = {4, 2};
    CHECK_THROWS_AS(Aspp(bad, rng), ConfigInvalid);
    bad.rates = {0};
    CHECK_THROWS_AS(Aspp(bad, rng), ConfigInvalid);
}

TEST_CASE("ASPP preserves spatial dims") {
    SplitMix64 rng(9);
    ASPPConfig cfg;
    cfg.in_channels = 3;
    cfg.branch_channels = 4;
    cfg.rates = {1, 2, 4};
    Aspp aspp(cfg, rng);
    Tensor x = Tensor::random_uniform({2, 3, 9, 9}, -1, 1, rng);
    Tensor y = aspp.forward(x);
    CHECK(y.shape() == std::vector<std::size_t>{2, 4, 9, 9});
}

TEST_CASE("ASPP with zero weights and a fuse bias is spatially constant") {
    SplitMix64 rng(10);
    ASPPConfig cfg;
    cfg.in_channels = 2;
    cfg.branch_channels = 3;
    cfg.rates = {1, 2};
    Aspp aspp(cfg, rng);
    ParamMap params;
    aspp.collect_params("a", params);
    for (auto& [name, tensor] : params) tensor->fill(0.0);
    params.at("a/fuse/bias")->fill(0.75);

    Tensor x = Tensor::random_uniform({1, 2, 6, 6}, -1, 1, rng);
    Tensor y = aspp.forward(x);
    REQUIRE(y.shape() == std::vector<std::size_t>{1, 3, 6, 6});
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.75);
}

TEST_CASE("ASPP gradient check with and without the image pool branch") {
    SplitMix64 rng(23);
    ASPPConfig cfg;
    cfg.in_channels = 2;
    cfg.branch_channels = 2;
    cfg.rates = {1, 2};
    {
        Aspp aspp(cfg, rng);
        Tensor x = Tensor::random_uniform({1, 2, 5, 5}, -1, 1, rng);
        CHECK(grad_check(aspp, x).ok());
    }
    cfg.include_image_pool = false;
    {
        Aspp aspp(cfg, rng);
        Tensor x = Tensor::random_uniform({2, 2, 5, 5}, -1, 1, rng);
        CHECK(grad_check(aspp, x).ok());
    }
}

TEST_CASE("ASPP parameter names cover every branch") {
    SplitMix64 rng(11);
    ASPPConfig cfg;
    cfg.in_channels = 2;
    cfg.branch_channels = 2;
    cfg.rates = {1, 3};
    Aspp aspp(cfg, rng);
    ParamMap params;
    aspp.collect_params("", params);
    CHECK(params.count("conv1x1/weight") == 1);
    CHECK(params.count("rate0/weight") == 1);
    CHECK(params.count("rate1/weight") == 1);
    CHECK(params.count("pool/weight") == 1);
    CHECK(params.count("fuse/weight") == 1);
    CHECK(params.size() == 10);
}

TEST_CASE("blocks raise StateMissing before forward") {
    SplitMix64 rng(12);
    SEBlock se({2, 2}, rng);
    GradMap grads;
    CHECK_THROWS_AS(se.backward(Tensor({1, 2, 2, 2}), "", grads), StateMissing);
    ASPPConfig cfg;
    cfg.in_channels = 2;
    Aspp aspp(cfg, rng);
    CHECK_THROWS_AS(aspp.backward(Tensor({1, 16, 2, 2}), "", grads), StateMissing);
}

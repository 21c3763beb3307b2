#include <catch2/catch_amalgamated.hpp>

#include "spritelab/codec/patchify.hpp"
#include "spritelab/core/rng.hpp"

using namespace spritelab;
using namespace spritelab::codec;

TEST_CASE("codec shape arithmetic") {
    Rng rng(1);
    const Tensor v = rng.normal_tensor({8, 64, 64, 3});
    const LatentGrid g = encode(v);
    CHECK(g.t() == 8);
    CHECK(g.h() == 8);
    CHECK(g.w() == 8);
    CHECK(g.c() == 192);
}

TEST_CASE("zero video encodes to zero latent") {
    const LatentGrid g = encode(Tensor::zeros({8, 64, 64, 3}));
    CHECK(g.data.sq_norm() == 0.0);
}

TEST_CASE("exact round trip on 1000 random tensors") {
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) {
        Tensor v({2, 16, 16, 3});
        rng.fill_normal(v);
        const Tensor back = decode(encode(v, {1, 8, 8}));
        REQUIRE(back.same_bits(v));
    }
}

TEST_CASE("encode is linear and norm preserving") {
    Rng rng(3);
    const Tensor x = rng.normal_tensor({4, 16, 16, 3});
    const Tensor y = rng.normal_tensor({4, 16, 16, 3});
    const float a = 1.7f, b = -0.6f;
    Tensor combo({4, 16, 16, 3});
    for (int64_t i = 0; i < combo.numel(); ++i) combo[i] = a * x[i] + b * y[i];
    const LatentGrid gx = encode(x), gy = encode(y), gc = encode(combo);
    for (int64_t i = 0; i < gc.data.numel(); ++i)
        REQUIRE(gc.data[i] == a * gx.data[i] + b * gy.data[i]);
    CHECK(gx.data.sq_norm() == Catch::Approx(x.sq_norm()));
}

TEST_CASE("non-divisible shapes are rejected") {
    CHECK_THROWS_WITH(encode(Tensor::zeros({8, 60, 64, 3})),
                      Catch::Matchers::ContainsSubstring("not patchable"));
}

TEST_CASE("decode counter increments (reward-path assertion hook)") {
    const auto before = decode_calls().load();
    decode(encode(Tensor::zeros({1, 8, 8, 3})));
    CHECK(decode_calls().load() == before + 1);
}

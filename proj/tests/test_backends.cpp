// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "oir/toy_backends.hpp"
#include "support.hpp"

using namespace oir;
using oir::test::error_kind_of;
using oir::test::random_image;
using oir::test::random_tensor;

namespace {

const LatentShape kShape{3, 10, 14};

Embedding random_embedding(std::size_t width, std::uint64_t seed, float scale = 1.0f) {
    const Tensor t = random_tensor({width}, seed, -scale, scale);
    return Embedding(t.values().begin(), t.values().end());
}

}  // namespace

TEST_CASE("toy predictor is pure") {
    toy::ToyNoisePredictor p(5, kShape, 8);
    toy::ToyNoisePredictor q(5, kShape, 8);
    const Tensor x = random_tensor(kShape.dims(), 1);
    const Embedding e = random_embedding(8, 2);
    CHECK(bit_equal(p.eps(x, 300, e), p.eps(x, 300, e)));
    CHECK(bit_equal(p.eps(x, 300, e), q.eps(x, 300, e)));
    toy::ToyNoisePredictor other_seed(6, kShape, 8);
    CHECK_FALSE(bit_equal(p.eps(x, 300, e), other_seed.eps(x, 300, e)));
}

TEST_CASE("different embeddings give different noise fields") {
    toy::ToyNoisePredictor p(5, kShape, 8);
    const Tensor probe = random_tensor(kShape.dims(), 9);
    const Embedding e1 = random_embedding(8, 10);
    const Embedding e2 = random_embedding(8, 11);
    CHECK(max_abs_diff(p.eps(probe, 500, e1), p.eps(probe, 500, e2)) > 1e-3);
}

TEST_CASE("toy predictor is affine in the latent") {
    toy::ToyNoisePredictor p(5, kShape, 8);
    const Tensor x = random_tensor(kShape.dims(), 3);
    const Tensor zero(kShape.dims());
    const Embedding e = random_embedding(8, 4);
    const Tensor e0 = p.eps(zero, 250, e);
    const Tensor ex = p.eps(x, 250, e);
    for (double alpha : {-2.0, 0.5, 3.0}) {
        Tensor ax = x;
        for (auto& v : ax.values()) {
            v = static_cast<float>(alpha * v);
        }
        const Tensor eax = p.eps(ax, 250, e);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double lhs = static_cast<double>(eax[i]) - e0[i];
            const double rhs = alpha * (static_cast<double>(ex[i]) - e0[i]);
            REQUIRE(std::abs(lhs - rhs) < 1e-5);
        }
    }
}

TEST_CASE("linear part matches channel mix plus row shift and respects its bounds") {
    toy::ToyNoisePredictor p(5, kShape, 8);
    const Tensor x = random_tensor(kShape.dims(), 3);
    const Tensor zero(kShape.dims());
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Embedding e = random_embedding(8, 100 + seed, 3.0f);
        const auto [mix, shift] = p.linear_part(e);
        double fro = 0.0;
        for (double v : mix) {
            fro += v * v;
        }
        CHECK(std::sqrt(fro) <= toy::ToyNoisePredictor::kMixNormBound + 1e-12);
        CHECK(std::abs(shift) <= toy::ToyNoisePredictor::kShiftBound);

        const Tensor diff_x = p.eps(x, 700, e);
        const Tensor diff_0 = p.eps(zero, 700, e);
        const std::size_t C = kShape.channels;
        const std::size_t H = kShape.height;
        const std::size_t W = kShape.width;
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t y = 0; y < H; ++y) {
                for (std::size_t xx = 0; xx < W; ++xx) {
                    double expect = shift * x[(c * H + (y + 1) % H) * W + xx];
                    for (std::size_t k = 0; k < C; ++k) {
                        expect += mix[c * C + k] * x[(k * H + y) * W + xx];
                    }
                    const std::size_t i = (c * H + y) * W + xx;
                    REQUIRE(std::abs(static_cast<double>(diff_x[i]) - diff_0[i] - expect) < 1e-6);
                }
            }
        }
    }
}

TEST_CASE("toy predictor validates its inputs") {
    toy::ToyNoisePredictor p(5, kShape, 8);
    const Tensor wrong({3, 10, 13});
    CHECK(error_kind_of([&] { p.eps(wrong, 0, Embedding(8)); }) == ErrorKind::parameter);
    CHECK(error_kind_of([&] { p.eps(Tensor(kShape.dims()), 0, Embedding(7)); }) == ErrorKind::parameter);
    const std::vector<Tensor> xs(2, Tensor(kShape.dims()));
    const std::vector<std::size_t> ts{1};
    const std::vector<Embedding> es(2, Embedding(8));
    CHECK(error_kind_of([&] { p.predict(xs, ts, es); }) == ErrorKind::parameter);
}

TEST_CASE("batched predict equals per-element eps") {
    toy::ToyNoisePredictor p(5, kShape, 8);
    std::vector<Tensor> xs;
    std::vector<std::size_t> ts;
    std::vector<Embedding> es;
    for (std::size_t b = 0; b < 5; ++b) {
        xs.push_back(random_tensor(kShape.dims(), 50 + b));
        ts.push_back(100 * b);
        es.push_back(random_embedding(8, 60 + b));
    }
    const auto out = p.predict(xs, ts, es);
    REQUIRE(out.size() == 5);
    for (std::size_t b = 0; b < 5; ++b) {
        CHECK(bit_equal(out[b], p.eps(xs[b], ts[b], es[b])));
    }
}

TEST_CASE("text embedder is deterministic and word-based") {
    toy::ToyTextEmbedder emb(3, 8);
    const auto a = emb.embed("a red ball");
    CHECK(a.size() == 8);
    CHECK(a == emb.embed("a red ball"));
    CHECK(a == emb.embed("  a   red ball "));
    CHECK(a != emb.embed("a blue ball"));
    CHECK(emb.embed("") == Embedding(8, 0.0f));
    toy::ToyTextEmbedder other(4, 8);
    CHECK(a != other.embed("a red ball"));
}

TEST_CASE("identity codec round trip is exact") {
    toy::ToyLatentCodec codec({3, 6, 5});
    const Image img = random_image(6, 5, 3, 8);
    const Tensor z = codec.encode(img);
    CHECK(z.shape() == std::vector<std::size_t>{3, 6, 5});
    CHECK(z[(2 * 6 + 1) * 5 + 4] == img.at(1, 4, 2));
    CHECK(codec.decode(z) == img);
    Tensor hot = z;
    hot[0] = 1.7f;
    hot[1] = -0.2f;
    const Image clamped = codec.decode(hot);
    CHECK(clamped.at(0, 0, 0) == 1.0f);
    CHECK(clamped.at(0, 1, 0) == 0.0f);
    CHECK(error_kind_of([&] { codec.encode(random_image(5, 5, 3, 1)); }) == ErrorKind::parameter);
}

TEST_CASE("profile interpolation") {
    toy::Profile f({{0.5, 2.0}, {0.0, 0.0}, {1.0, 1.0}});
    CHECK(f(0.25) == doctest::Approx(1.0));
    CHECK(f(0.75) == doctest::Approx(1.5));
    CHECK(f(-1.0) == 0.0);
    CHECK(f(2.0) == 1.0);
    CHECK(error_kind_of([] { toy::Profile({}); }) == ErrorKind::parameter);
    CHECK(error_kind_of([] { toy::Profile({{0.1, 1.0}, {0.1, 2.0}}); }) == ErrorKind::parameter);
}

TEST_CASE("region scorer follows the masked mean") {
    auto scorer = toy::toy_region_scorer({{0.0, -1.0}, {1.0, 3.0}});
    const Image constant(8, 8, 3, 0.25f);
    const Mask full(8, 8, MaskResolution::pixel, true);
    CHECK(scorer->score(constant, full, "anything") == doctest::Approx(0.0));

    const Mask empty(8, 8, MaskResolution::pixel, false);
    CHECK(error_kind_of([&] { scorer->score(constant, empty, "x"); }) == ErrorKind::scorer);

    // two images sharing the masked mean but differing elsewhere
    Image a(8, 8, 3, 0.5f);
    Image b(8, 8, 3, 0.5f);
    const Mask top = rect_mask(8, 8, {0, 0, 4, 8}, MaskResolution::pixel);
    a.at(0, 0, 0) = 0.7f;
    a.at(0, 1, 0) = 0.3f;
    b.at(7, 7, 1) = 0.9f;
    CHECK(scorer->score(a, top, "p") == scorer->score(b, top, "q"));
    CHECK(scorer->name() == "toy-region-scorer");
}

TEST_CASE("rect segmenter") {
    const Image img(6, 8, 3, 0.5f);
    const std::vector<std::string> one{"everything"};
    auto whole = toy::toy_segmenter({{0, 0, 6, 8}});
    const auto m = whole->segment(img, one);
    REQUIRE(m.size() == 1);
    CHECK(m[0].count() == 48);

    auto two = toy::toy_segmenter({{0, 0, 3, 4}, {3, 4, 6, 8}});
    const std::vector<std::string> phrases{"a", "b"};
    const auto ms = two->segment(img, phrases);
    REQUIRE(ms.size() == 2);
    for (std::size_t i = 0; i < ms[0].cells().size(); ++i) {
        CHECK_FALSE((ms[0].cells()[i] && ms[1].cells()[i]));
    }
    const std::vector<std::string> three{"a", "b", "c"};
    CHECK(error_kind_of([&] { two->segment(img, three); }) == ErrorKind::validation);
    CHECK(error_kind_of([] { rect_mask(6, 8, {0, 0, 7, 8}, MaskResolution::pixel); }) == ErrorKind::parameter);
}

TEST_CASE("mask downsampling") {
    const Mask ones(16, 16, MaskResolution::pixel, true);
    const Mask zeros(16, 16, MaskResolution::pixel, false);
    CHECK(downsample_mask(ones, 4, 4).count() == 16);
    CHECK(downsample_mask(zeros, 4, 4).count() == 0);
    CHECK(downsample_mask(ones, 4, 4).resolution() == MaskResolution::latent);

    const Mask quadrant = rect_mask(8, 8, {4, 0, 8, 4}, MaskResolution::pixel);
    const Mask small = downsample_mask(quadrant, 2, 2);
    CHECK(small.count() == 1);
    CHECK(small.at(1, 0));

    // exactly half coverage counts as editing region
    const Mask half = rect_mask(2, 2, {0, 0, 1, 2}, MaskResolution::pixel);
    CHECK(downsample_mask(half, 1, 1).count() == 1);
    const Mask quarter = rect_mask(2, 2, {0, 0, 1, 1}, MaskResolution::pixel);
    CHECK(downsample_mask(quarter, 1, 1).count() == 0);

    CHECK(error_kind_of([&] { downsample_mask(downsample_mask(ones, 4, 4), 2, 2); }) == ErrorKind::parameter);
}

TEST_CASE("property: pooled fractions of a mask and its complement sum to one") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t h = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
        const std::size_t w = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
        const std::size_t lh = std::uniform_int_distribution<std::size_t>(1, h)(rng);
        const std::size_t lw = std::uniform_int_distribution<std::size_t>(1, w)(rng);
        Mask m(h, w, MaskResolution::pixel);
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                m.set(y, x, rng() & 1);
            }
        }
        const auto a = pooled_mask_fractions(m, lh, lw);
        const auto b = pooled_mask_fractions(m.complement(), lh, lw);
        REQUIRE(a.size() == lh * lw);
        for (std::size_t i = 0; i < a.size(); ++i) {
            REQUIRE(a[i] + b[i] == doctest::Approx(1.0).epsilon(1e-12));
            REQUIRE(a[i] >= 0.0);
            REQUIRE(a[i] <= 1.0);
        }
    }
}

TEST_CASE("image validation") {
    Tensor bad({2, 2, 1}, 0.5f);
    bad[1] = 1.5f;
    CHECK(error_kind_of([&] { Image{bad}; }) == ErrorKind::parameter);
    bad[1] = std::nanf("");
    CHECK(error_kind_of([&] { Image{bad}; }) == ErrorKind::parameter);
    CHECK(error_kind_of([] { Image{Tensor({2, 2})}; }) == ErrorKind::parameter);
}

TEST_CASE("counting and serialized decorators pass through") {
    auto inner = std::make_shared<toy::ToyNoisePredictor>(5, kShape, 8);
    auto counting = std::make_shared<CountingPredictor>(inner);
    SerializedPredictor serial(counting);
    const std::vector<Tensor> xs(3, random_tensor(kShape.dims(), 2));
    const std::vector<std::size_t> ts(3, 10);
    const std::vector<Embedding> es(3, random_embedding(8, 1));
    const auto out = serial.predict(xs, ts, es);
    CHECK(bit_equal(out[2], inner->eps(xs[2], 10, es[2])));
    CHECK(counting->calls() == 1);
    CHECK(counting->elements() == 3);
    CHECK(serial.concurrency_safe());
    CHECK(serial.embedding_width() == 8);
    counting->reset();
    CHECK(counting->calls() == 0);
}

TEST_CASE("toy backend set") {
    toy::ToyConfig cfg;
    cfg.seed = 9;
    cfg.shape = {3, 16, 16};
    cfg.rects = {{0, 0, 8, 8}};
    const auto set = toy::make_toy_backends(cfg);
    CHECK(set.identity == "toy(seed=9)");
    CHECK(set.predictor->latent_shape() == cfg.shape);
    CHECK(set.embedder->embedding_width() == set.predictor->embedding_width());
    CHECK(set.codec->image_height() == 16);
}

#include <doctest.h>

#include <cmath>

#include "owd/datagen.hpp"

using namespace owd;

TEST_CASE("zero noise reproduces fingerprints exactly") {
    Rng rng(1);
    auto specs = make_source_specs(3, 2, 8, 10.0, 1.0, 1.0, 20, rng);
    for (auto& s : specs) s.noise_scale = 0.0;
    GenConfig gc;
    gc.d_content = 4;
    gc.labeled_per_source = 5;
    const auto ds = generate(specs, gc, rng);

    for (std::int64_t i = 0; i < ds.discovery.n; ++i) {
        const auto& spec = specs[static_cast<std::size_t>(ds.truth[static_cast<std::size_t>(i)])];
        for (std::int32_t j = 0; j < 8; ++j)
            CHECK(ds.discovery(i, 4 + j) == spec.fingerprint[static_cast<std::size_t>(j)]);
    }
    // and the Bayes oracle recovers the truth exactly
    CHECK(bayes_labels(ds) == ds.truth);
}

TEST_CASE("oracle accuracy at margin 10 is essentially perfect") {
    Rng rng(2);
    const auto specs = make_source_specs(6, 3, 16, 10.0, 1.0, 1.0, 300, rng);
    GenConfig gc;
    gc.d_content = 8;
    gc.labeled_per_source = 1;
    const auto ds = generate(specs, gc, rng);
    const auto oracle = bayes_labels(ds);
    std::int64_t hit = 0;
    for (std::size_t i = 0; i < oracle.size(); ++i) hit += (oracle[i] == ds.truth[i]);
    CHECK(static_cast<double>(hit) / static_cast<double>(oracle.size()) >= 0.999);
}

TEST_CASE("oracle accuracy never degrades when the margin grows") {
    double prev = 0.0;
    for (const double margin : {1.0, 3.0, 10.0}) {
        Rng rng(7);
        const auto specs = make_source_specs(5, 2, 8, margin, 1.0, 1.0, 400, rng);
        GenConfig gc;
        gc.d_content = 4;
        gc.margin = margin;
        gc.labeled_per_source = 1;
        const auto ds = generate(specs, gc, rng);
        const auto oracle = bayes_labels(ds);
        std::int64_t hit = 0;
        for (std::size_t i = 0; i < oracle.size(); ++i) hit += (oracle[i] == ds.truth[i]);
        const double acc = static_cast<double>(hit) / static_cast<double>(oracle.size());
        CHECK(acc >= prev);
        prev = acc;
    }
}

TEST_CASE("generation is deterministic and shapes add up") {
    Rng rng_a(5), rng_b(5);
    const auto specs_a = make_source_specs(4, 2, 8, 10.0, 1.0, 1.0, 30, rng_a);
    const auto specs_b = make_source_specs(4, 2, 8, 10.0, 1.0, 1.0, 30, rng_b);
    GenConfig gc;
    gc.d_content = 6;
    gc.labeled_per_source = 10;
    const auto a = generate(specs_a, gc, rng_a);
    const auto b = generate(specs_b, gc, rng_b);
    CHECK(a.discovery.data == b.discovery.data);
    CHECK(a.labeled.features.data == b.labeled.features.data);
    CHECK(a.truth == b.truth);

    CHECK(a.labeled.features.n == 2 * 10);
    CHECK(a.labeled.n_classes == 2);
    CHECK(a.discovery.n == 4 * 30);
    CHECK(a.discovery.d == 6 + 8);
    for (const auto l : a.labeled.labels) CHECK(l < 2);
}

TEST_CASE("margins are enforced") {
    Rng rng(9);
    CHECK_THROWS_AS(make_source_specs(1, 1, 8, 10.0, 1.0, 1.0, 10, rng), Error);
    CHECK_THROWS_AS(make_source_specs(4, 0, 8, 10.0, 1.0, 1.0, 10, rng), Error);
    CHECK_THROWS_AS(make_source_specs(4, 5, 8, 10.0, 1.0, 1.0, 10, rng), Error);

    auto specs = make_source_specs(3, 1, 8, 10.0, 1.0, 1.0, 10, rng);
    specs[1].fingerprint = specs[0].fingerprint;  // violates the margin
    GenConfig gc;
    gc.margin = 10.0;
    try {
        generate(specs, gc, rng);
        FAIL("expected InvalidSpec");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::invalid_spec);
    }
}

TEST_CASE("bayes_labels requires the config echo") {
    Rng rng(11);
    const auto specs = make_source_specs(3, 1, 4, 10.0, 1.0, 1.0, 5, rng);
    GenConfig gc;
    gc.d_content = 2;
    gc.labeled_per_source = 1;
    auto ds = generate(specs, gc, rng);
    ds.specs.clear();
    CHECK_THROWS_AS(bayes_labels(ds), Error);
}

TEST_CASE("family members share the leading fingerprint block") {
    Rng rng(15);
    auto specs = make_source_specs(4, 2, 16, 10.0, 1.0, 1.0, 50, rng);
    share_fingerprint_block(specs, {1, 3}, 0.5, 7, rng);
    CHECK(specs[1].family == 7);
    CHECK(specs[3].family == 7);
    for (int j = 0; j < 8; ++j) CHECK(specs[1].fingerprint[j] == specs[3].fingerprint[j]);
    bool tail_differs = false;
    for (int j = 8; j < 16; ++j) tail_differs |= specs[1].fingerprint[j] != specs[3].fingerprint[j];
    CHECK(tail_differs);
    CHECK(specs[0].family == -1);

    // the shared half leaves the sources distinguishable: generate still
    // enforces the margin and the oracle still separates them
    GenConfig gc;
    gc.d_content = 4;
    gc.margin = 5.0;
    gc.labeled_per_source = 1;
    const auto ds = generate(specs, gc, rng);
    const auto oracle = bayes_labels(ds);
    std::int64_t hit = 0;
    for (std::size_t i = 0; i < oracle.size(); ++i) hit += (oracle[i] == ds.truth[i]);
    CHECK(static_cast<double>(hit) / static_cast<double>(oracle.size()) >= 0.99);

    CHECK_THROWS_AS(share_fingerprint_block(specs, {1}, 0.5, 1, rng), Error);
    CHECK_THROWS_AS(share_fingerprint_block(specs, {1, 99}, 0.5, 1, rng), Error);
    CHECK_THROWS_AS(share_fingerprint_block(specs, {1, 3}, 1.5, 1, rng), Error);
}

TEST_CASE("oracle ignores the content block") {
    Rng rng(13);
    const auto specs = make_source_specs(3, 1, 6, 10.0, 1.0, 1.0, 20, rng);
    GenConfig gc;
    gc.d_content = 5;
    gc.labeled_per_source = 1;
    auto ds = generate(specs, gc, rng);
    const auto before = bayes_labels(ds);
    for (std::int64_t i = 0; i < ds.discovery.n; ++i)
        for (std::int32_t j = 0; j < 5; ++j) ds.discovery(i, j) = 1e6f;
    CHECK(bayes_labels(ds) == before);
}

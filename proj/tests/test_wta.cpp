#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "owd/parallel.hpp"
#include "owd/rng.hpp"
#include "owd/wta.hpp"

using namespace owd;

namespace {

WtaHasher manual_hasher(std::int32_t d, std::vector<std::vector<std::int32_t>> windows) {
    WtaHasher h;
    h.d = d;
    h.hashes = static_cast<std::int32_t>(windows.size());
    h.window = static_cast<std::int32_t>(windows[0].size());
    h.seed = 0;
    for (const auto& w : windows) h.prefixes.insert(h.prefixes.end(), w.begin(), w.end());
    return h;
}

HashCodeMatrix codes_from(const WtaHasher& h, const std::vector<std::vector<float>>& rows) {
    FeatureMatrix x(static_cast<std::int64_t>(rows.size()), h.d);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i].begin(), rows[i].end(), x.row(static_cast<std::int64_t>(i)).begin());
    return hash_batch(h, x);
}

}  // namespace

TEST_CASE("new_hasher draws K distinct indices per window") {
    auto h = new_hasher(2048, 2048, 2, 0);
    CHECK(h.prefixes.size() == 2048u * 2u);
    for (std::int32_t i = 0; i < h.hashes; ++i) {
        auto p = h.prefix(i);
        CHECK(p[0] != p[1]);
        CHECK(p[0] >= 0);
        CHECK(p[0] < 2048);
        CHECK(p[1] >= 0);
        CHECK(p[1] < 2048);
    }
    auto again = new_hasher(2048, 2048, 2, 0);
    CHECK(again.prefixes == h.prefixes);
    auto other = new_hasher(2048, 2048, 2, 1);
    CHECK(other.prefixes != h.prefixes);
}

TEST_CASE("K=d yields a full permutation") {
    auto h = new_hasher(4, 1, 4, 99);
    std::set<std::int32_t> s(h.prefixes.begin(), h.prefixes.end());
    CHECK(s == std::set<std::int32_t>{0, 1, 2, 3});
}

TEST_CASE("new_hasher parameter validation") {
    CHECK_THROWS_AS(new_hasher(3, 5, 4, 0), Error);
    try {
        new_hasher(3, 5, 4, 0);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::window_too_large);
    }
    CHECK_THROWS_AS(new_hasher(8, 5, 1, 0), Error);
    CHECK_THROWS_AS(new_hasher(8, 0, 2, 0), Error);
}

TEST_CASE("hash evaluates argmax per window") {
    auto h = manual_hasher(4, {{0, 1}, {2, 3}, {1, 2}});
    auto code = hash(h, std::vector<float>{0.9f, 0.1f, 0.5f, 0.7f});
    CHECK(code == std::vector<std::uint32_t>{0, 1, 1});
}

TEST_CASE("hash is invariant under increasing affine maps") {
    auto h = new_hasher(16, 64, 2, 5);
    Rng rng(10);
    std::vector<float> x(16);
    for (auto& v : x) v = static_cast<float>(rng.normal());
    auto base = hash(h, x);
    for (const float a : {0.5f, 2.0f, 10.0f}) {
        for (const float b : {-3.0f, 0.0f, 7.5f}) {
            std::vector<float> y(16);
            for (std::size_t i = 0; i < 16; ++i) y[i] = a * x[i] + b;
            CHECK(hash(h, y) == base);
        }
    }
}

TEST_CASE("constant vector hashes to all zeros") {
    auto h = new_hasher(8, 32, 3, 1);
    std::vector<float> x(8, 2.5f);
    auto code = hash(h, x);
    CHECK(std::all_of(code.begin(), code.end(), [](std::uint32_t c) { return c == 0; }));
}

TEST_CASE("hash rejects a wrong dimension") {
    auto h = new_hasher(8, 4, 2, 0);
    CHECK_THROWS_AS(hash(h, std::vector<float>(7, 0.0f)), Error);
}

TEST_CASE("hash_batch matches single-row hash and is pure") {
    auto h = new_hasher(12, 40, 2, 3);
    Rng rng(4);
    FeatureMatrix x(3, 12);
    for (auto& v : x.data) v = static_cast<float>(rng.normal());
    for (std::int32_t j = 0; j < 12; ++j) x(2, j) = x(0, j);  // row 2 duplicates row 0

    auto codes = hash_batch(h, x);
    CHECK(codes.unpack_row(0) == hash(h, x.row(0)));
    CHECK(codes.unpack_row(1) == hash(h, x.row(1)));
    CHECK(codes.unpack_row(0) == codes.unpack_row(2));
    CHECK(hamming(codes, 0, codes, 2) == 0);
}

TEST_CASE("hash_batch output does not depend on worker count") {
    auto h = new_hasher(32, 128, 2, 11);
    Rng rng(2);
    FeatureMatrix x(999, 32);
    for (auto& v : x.data) v = static_cast<float>(rng.normal());
    set_workers(1);
    auto one = hash_batch(h, x);
    set_workers(5);
    auto many = hash_batch(h, x);
    set_workers(1);
    CHECK(one.words == many.words);
}

TEST_CASE("packing round-trips for several window sizes") {
    for (const std::int32_t K : {2, 3, 4, 5, 9}) {
        WtaHasher h;
        h.d = 16;
        h.hashes = 77;
        h.window = K;
        h.seed = 7;
        auto m = HashCodeMatrix::empty_like(h, 5);
        Rng rng(static_cast<std::uint64_t>(K));
        std::vector<std::uint32_t> expect;
        for (std::int64_t i = 0; i < 5; ++i)
            for (std::int32_t c = 0; c < 77; ++c) {
                const auto v = static_cast<std::uint32_t>(rng.below(static_cast<std::uint64_t>(K)));
                expect.push_back(v);
                m.set(i, c, v);
            }
        std::size_t idx = 0;
        for (std::int64_t i = 0; i < 5; ++i)
            for (std::int32_t c = 0; c < 77; ++c) CHECK(m.get(i, c) == expect[idx++]);
    }
}

TEST_CASE("hamming basics: hand value, identity, symmetry, triangle") {
    auto h = manual_hasher(4, {{0, 1}, {2, 3}, {1, 2}});
    auto codes = codes_from(h, {{0.9f, 0.1f, 0.5f, 0.7f},    // (0,1,1)
                                {0.1f, 0.9f, 0.7f, 0.5f}});  // (1,0,0)
    CHECK(hamming(codes, 0, codes, 1) == 3);
    CHECK(hamming(codes, 0, codes, 0) == 0);
    CHECK(hamming(codes, 0, codes, 1) == hamming(codes, 1, codes, 0));

    auto big = new_hasher(24, 256, 2, 8);
    Rng rng(3);
    FeatureMatrix x(12, 24);
    for (auto& v : x.data) v = static_cast<float>(rng.normal());
    auto c = hash_batch(big, x);
    for (std::int64_t a = 0; a < 12; ++a) {
        CHECK(hamming(c, a, c, a) == 0);
        for (std::int64_t b = 0; b < 12; ++b) {
            CHECK(hamming(c, a, c, b) == hamming(c, b, c, a));
            for (std::int64_t d = 0; d < 12; ++d)
                CHECK(hamming(c, a, c, d) <= hamming(c, a, c, b) + hamming(c, b, c, d));
        }
    }
}

TEST_CASE("hamming with K>2 counts decoded inequality") {
    auto h = manual_hasher(6, {{0, 1, 2}, {3, 4, 5}, {0, 2, 4}, {1, 3, 5}});
    auto codes = codes_from(h, {{9, 1, 2, 3, 8, 5}, {0, 1, 9, 3, 4, 8}});
    // row 0: windows argmax -> (0, 1, 0, 2); row 1: (2, 2, 1, 2)
    CHECK(codes.unpack_row(0) == std::vector<std::uint32_t>{0, 1, 0, 2});
    CHECK(codes.unpack_row(1) == std::vector<std::uint32_t>{2, 2, 1, 2});
    CHECK(hamming(codes, 0, codes, 1) == 3);
}

TEST_CASE("hamming rejects codes from different hashers") {
    auto a = hash_batch(new_hasher(8, 16, 2, 0), FeatureMatrix(2, 8));
    auto b = hash_batch(new_hasher(8, 16, 2, 1), FeatureMatrix(2, 8));
    CHECK_THROWS_AS(hamming(a, 0, b, 0), Error);
}

TEST_CASE("K=2 normalized distance of random pairs is near one half") {
    const std::int32_t H = 512;
    auto h = new_hasher(64, H, 2, 21);
    Rng rng(77);
    const int pairs = 2000;
    FeatureMatrix x(2 * pairs, 64);
    for (auto& v : x.data) v = static_cast<float>(rng.normal());
    auto c = hash_batch(h, x);
    double acc = 0;
    for (int p = 0; p < pairs; ++p) acc += static_cast<double>(hamming(c, 2 * p, c, 2 * p + 1)) / H;
    CHECK(acc / pairs == doctest::Approx(0.5).epsilon(0.03));
}

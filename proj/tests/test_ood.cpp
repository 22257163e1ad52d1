#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "owd/ood.hpp"
#include "owd/parallel.hpp"
#include "owd/rng.hpp"

using namespace owd;

namespace {

WtaHasher pair_hasher(std::int32_t n_windows) {
    // window h covers features (2h, 2h+1): value pair (1,0) -> code 0,
    // (0,1) -> code 1, so code rows are fully controllable
    WtaHasher h;
    h.d = 2 * n_windows;
    h.hashes = n_windows;
    h.window = 2;
    h.seed = 0;
    for (std::int32_t i = 0; i < n_windows; ++i) {
        h.prefixes.push_back(2 * i);
        h.prefixes.push_back(2 * i + 1);
    }
    return h;
}

FeatureMatrix rows_for_codes(const std::vector<std::vector<int>>& codes, std::int32_t n_windows) {
    FeatureMatrix x(static_cast<std::int64_t>(codes.size()), 2 * n_windows);
    for (std::size_t r = 0; r < codes.size(); ++r)
        for (std::int32_t h = 0; h < n_windows; ++h) {
            x(static_cast<std::int64_t>(r), 2 * h) = codes[r][static_cast<std::size_t>(h)] ? 0.0f : 1.0f;
            x(static_cast<std::int64_t>(r), 2 * h + 1) = codes[r][static_cast<std::size_t>(h)] ? 1.0f : 0.0f;
        }
    return x;
}

Partition one_cluster(std::int64_t n, ClusterId id = 0) {
    Partition p(n);
    std::fill(p.labels.begin(), p.labels.end(), id);
    p.next_label = id + 1;
    return p;
}

struct GaussianWorld {
    FeatureMatrix train;      // two clusters, n_per each
    Partition partition;
    FeatureMatrix held_out;   // n_held from cluster 0
    FeatureMatrix far;        // n_far from a third distant source
};

GaussianWorld gaussian_world(std::int64_t n_per, std::int64_t n_held, std::int64_t n_far,
                             double separation, std::uint64_t seed) {
    const std::int32_t d = 64;
    Rng rng(seed);
    std::vector<float> mu0(d), mu1(d), mu2(d);
    for (std::int32_t j = 0; j < d; ++j) {
        mu0[static_cast<std::size_t>(j)] = static_cast<float>(rng.normal() * separation);
        mu1[static_cast<std::size_t>(j)] = static_cast<float>(rng.normal() * separation);
        mu2[static_cast<std::size_t>(j)] = static_cast<float>(rng.normal() * 3.0 * separation);
    }
    GaussianWorld w;
    w.train = FeatureMatrix(2 * n_per, d);
    for (std::int64_t i = 0; i < 2 * n_per; ++i) {
        const auto& mu = i < n_per ? mu0 : mu1;
        for (std::int32_t j = 0; j < d; ++j)
            w.train(i, j) = mu[static_cast<std::size_t>(j)] + static_cast<float>(rng.normal());
    }
    w.partition = Partition(2 * n_per);
    for (std::int64_t i = 0; i < 2 * n_per; ++i) w.partition.labels[static_cast<std::size_t>(i)] = i < n_per ? 0 : 1;
    w.partition.next_label = 2;
    w.held_out = FeatureMatrix(n_held, d);
    for (std::int64_t i = 0; i < n_held; ++i)
        for (std::int32_t j = 0; j < d; ++j)
            w.held_out(i, j) = mu0[static_cast<std::size_t>(j)] + static_cast<float>(rng.normal());
    w.far = FeatureMatrix(n_far, d);
    for (std::int64_t i = 0; i < n_far; ++i)
        for (std::int32_t j = 0; j < d; ++j)
            w.far(i, j) = mu2[static_cast<std::size_t>(j)] + static_cast<float>(rng.normal());
    return w;
}

}  // namespace

TEST_CASE("quantile uses linear interpolation") {
    CHECK(quantile({2, 2, 4}, 1.0) == doctest::Approx(4.0));
    CHECK(quantile({2, 2, 4}, 0.5) == doctest::Approx(2.0));
    CHECK(quantile({2, 2, 4}, 0.75) == doctest::Approx(3.0));
    CHECK(quantile({5.0}, 0.9) == doctest::Approx(5.0));
    CHECK_THROWS_AS(quantile({1.0}, 0.0), Error);
    CHECK_THROWS_AS(quantile({1.0}, 1.5), Error);
}

TEST_CASE("distance_to_cluster is the mean hamming to the references") {
    auto h = pair_hasher(3);
    // references (0,1,1) and (1,0,0); query (0,1,1)
    const auto refs = hash_batch(h, rows_for_codes({{0, 1, 1}, {1, 0, 0}}, 3));
    const auto ds = build_detectors(refs, one_cluster(2), 0.9, 1000, Rng(0));
    const auto query = hash_batch(h, rows_for_codes({{0, 1, 1}}, 3));
    CHECK(distance_to_cluster(ds, 0, query, 0) == doctest::Approx(1.5));
}

TEST_CASE("identical references give distance 0 and threshold 0") {
    auto h = pair_hasher(4);
    const auto refs = hash_batch(h, rows_for_codes({{1, 0, 1, 0}, {1, 0, 1, 0}, {1, 0, 1, 0}}, 4));
    const auto ds = build_detectors(refs, one_cluster(3), 0.9, 1000, Rng(0));
    CHECK(ds.detectors[0].threshold == 0.0);
    const auto same = hash_batch(h, rows_for_codes({{1, 0, 1, 0}}, 4));
    CHECK(distance_to_cluster(ds, 0, same, 0) == 0.0);
    // strict comparison: equality rejects
    CHECK(classify(ds, same, 0).out_of_distribution);
    const auto other = hash_batch(h, rows_for_codes({{0, 0, 1, 0}}, 4));
    CHECK(classify(ds, other, 0).out_of_distribution);
}

TEST_CASE("threshold is the beta-quantile of pairwise intra-cluster distances") {
    auto h = pair_hasher(8);
    // pairwise distances: d(a,b)=2, d(a,c)=2, d(b,c)=4
    const auto refs = hash_batch(h, rows_for_codes({{0, 0, 0, 0, 0, 0, 0, 0},
                                                    {1, 1, 0, 0, 0, 0, 0, 0},
                                                    {0, 0, 1, 1, 0, 0, 0, 0}},
                                                   8));
    const auto full = build_detectors(refs, one_cluster(3), 1.0, 1000, Rng(0));
    CHECK(full.detectors[0].threshold == doctest::Approx(4.0));
    const auto mid = build_detectors(refs, one_cluster(3), 0.5, 1000, Rng(0));
    CHECK(mid.detectors[0].threshold == doctest::Approx(2.0));

    // at beta=1.0 every member's mean distance sits strictly inside
    for (std::int64_t k = 0; k < 3; ++k)
        CHECK(distance_to_cluster(full, 0, refs, k) < full.detectors[0].threshold);
}

TEST_CASE("singleton clusters get threshold 0") {
    auto h = pair_hasher(4);
    const auto refs = hash_batch(h, rows_for_codes({{1, 0, 0, 0}}, 4));
    const auto ds = build_detectors(refs, one_cluster(1), 0.9, 1000, Rng(0));
    CHECK(ds.detectors[0].threshold == 0.0);
}

TEST_CASE("build_detectors validation") {
    auto h = pair_hasher(4);
    const auto refs = hash_batch(h, rows_for_codes({{1, 0, 0, 0}, {0, 1, 0, 0}}, 4));
    CHECK_THROWS_AS(build_detectors(refs, one_cluster(2), 0.0, 1000, Rng(0)), Error);
    CHECK_THROWS_AS(build_detectors(refs, one_cluster(2), 1.5, 1000, Rng(0)), Error);
    Partition empty(2);
    try {
        build_detectors(refs, empty, 0.9, 1000, Rng(0));
        FAIL("expected EmptyCluster");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::empty_cluster);
    }
}

TEST_CASE("reference cap subsamples deterministically") {
    auto h = pair_hasher(16);
    Rng rng(3);
    FeatureMatrix x(40, 32);
    for (auto& v : x.data) v = static_cast<float>(rng.normal());
    const auto codes = hash_batch(h, x);
    const auto a = build_detectors(codes, one_cluster(40), 0.9, 8, Rng(7));
    const auto b = build_detectors(codes, one_cluster(40), 0.9, 8, Rng(7));
    CHECK(a.detectors[0].ref_count == 8);
    CHECK(a.detectors[0].threshold == b.detectors[0].threshold);
    CHECK(a.ref_codes.words == b.ref_codes.words);
}

TEST_CASE("split partitions indices exhaustively and order-preserving") {
    auto w = gaussian_world(60, 0, 30, 10.0, 5);
    const auto hasher = new_hasher(64, 512, 2, 1);
    const auto train_codes = hash_batch(hasher, w.train);
    const auto ds = build_detectors(train_codes, w.partition, 0.9, 1000, Rng(1));

    FeatureMatrix mixed(w.far.n + 3, 64);
    for (std::int64_t i = 0; i < 3; ++i)
        std::copy(w.train.row(i).begin(), w.train.row(i).end(), mixed.row(i).begin());
    for (std::int64_t i = 0; i < w.far.n; ++i)
        std::copy(w.far.row(i).begin(), w.far.row(i).end(), mixed.row(3 + i).begin());
    const auto mixed_codes = hash_batch(hasher, mixed);

    const auto sr = split(ds, mixed_codes);
    std::vector<std::int64_t> all = sr.in_distribution;
    all.insert(all.end(), sr.out_of_distribution.begin(), sr.out_of_distribution.end());
    std::sort(all.begin(), all.end());
    for (std::int64_t i = 0; i < mixed.n; ++i) CHECK(all[static_cast<std::size_t>(i)] == i);
    CHECK(std::is_sorted(sr.in_distribution.begin(), sr.in_distribution.end()));
    CHECK(std::is_sorted(sr.out_of_distribution.begin(), sr.out_of_distribution.end()));

    set_workers(4);
    const auto sr2 = split(ds, mixed_codes);
    set_workers(1);
    CHECK(sr2.in_distribution == sr.in_distribution);
    CHECK(sr2.out_of_distribution == sr.out_of_distribution);

    HashCodeMatrix empty = mixed_codes;
    empty.n = 0;
    empty.words.clear();
    const auto sre = split(ds, empty);
    CHECK(sre.in_distribution.empty());
    CHECK(sre.out_of_distribution.empty());
}

TEST_CASE("raising beta never shrinks the accepted set") {
    Rng rng(11);
    for (int instance = 0; instance < 20; ++instance) {
        auto w = gaussian_world(40, 20, 0, 2.0 + 3.0 * rng.next_double(), 100 + instance);
        const auto hasher = new_hasher(64, 256, 2, 9);
        const auto codes = hash_batch(hasher, w.train);
        const auto queries = hash_batch(hasher, w.held_out);
        std::vector<std::int64_t> prev_accepted;
        for (const double beta : {0.3, 0.5, 0.7, 0.9, 1.0}) {
            const auto ds = build_detectors(codes, w.partition, beta, 1000, Rng(4));
            const auto sr = split(ds, queries);
            CHECK(std::includes(sr.in_distribution.begin(), sr.in_distribution.end(),
                                prev_accepted.begin(), prev_accepted.end()));
            prev_accepted = sr.in_distribution;
        }
    }
}

TEST_CASE("well-separated gaussians: members in, far sources out") {
    auto w = gaussian_world(150, 150, 150, 10.0, 21);
    const auto hasher = new_hasher(64, 2048, 2, 0);
    const auto codes = hash_batch(hasher, w.train);
    const auto ds = build_detectors(codes, w.partition, 0.9, 1000, Rng(2));

    const auto held_codes = hash_batch(hasher, w.held_out);
    const auto sr_in = split(ds, held_codes);
    CHECK(static_cast<double>(sr_in.in_distribution.size()) / static_cast<double>(w.held_out.n) >= 0.95);

    const auto far_codes = hash_batch(hasher, w.far);
    const auto sr_far = split(ds, far_codes);
    CHECK(static_cast<double>(sr_far.out_of_distribution.size()) / static_cast<double>(w.far.n) >= 0.95);

    // accepted held-out points name the right cluster
    for (const auto i : sr_in.in_distribution) {
        const auto c = classify(ds, held_codes, i);
        REQUIRE(!c.accepted.empty());
        CHECK(c.accepted.front() == 0);
    }
}

TEST_CASE("cosine backend exposes the same contract") {
    FeatureMatrix x(6, 3);
    const float rows[6][3] = {{1, 0, 0}, {0.9f, 0.1f, 0}, {1, 0.05f, 0},
                              {0, 1, 0}, {0.05f, 0.9f, 0}, {0, 1, 0.1f}};
    for (std::int64_t i = 0; i < 6; ++i)
        for (std::int32_t j = 0; j < 3; ++j) x(i, j) = rows[i][j];
    Partition p(6);
    p.labels = {0, 0, 0, 1, 1, 1};
    p.next_label = 2;
    const auto ds = build_detectors_cosine(x, p, 1.0, 1000, Rng(0));
    CHECK(ds.distance == OodDistance::cosine);

    FeatureMatrix probe(2, 3);
    probe(0, 0) = 0.95f;
    probe(0, 1) = 0.05f;
    probe(1, 2) = 1.0f;  // orthogonal to both clusters
    CHECK(!classify(ds, probe, 0).out_of_distribution);
    CHECK(classify(ds, probe, 0).accepted == std::vector<ClusterId>{0});
    CHECK(classify(ds, probe, 1).out_of_distribution);

    // backends reject mismatched query types
    auto h = pair_hasher(4);
    const auto codes = hash_batch(h, rows_for_codes({{1, 0, 0, 0}}, 4));
    CHECK_THROWS_AS(classify(ds, codes, 0), Error);
}

TEST_CASE("cosine_distance basics") {
    const std::vector<float> ex = {1, 0};
    const std::vector<float> ey = {0, 1};
    const std::vector<float> ex2 = {2, 0};
    const std::vector<float> zero = {0, 0};
    CHECK(cosine_distance(ex, ey) == doctest::Approx(1.0));
    CHECK(cosine_distance(ex, ex2) == doctest::Approx(0.0));
    CHECK(cosine_distance(zero, zero) == doctest::Approx(0.0));
    CHECK(cosine_distance(zero, ex) == doctest::Approx(1.0));
}

#include <doctest.h>

#include <cmath>
#include <limits>

#include "owd/core.hpp"

using namespace owd;

TEST_CASE("validate accepts a finite matrix") {
    FeatureMatrix m(2, 3);
    CHECK_NOTHROW(validate(m));
}

TEST_CASE("validate reports the offending entry") {
    FeatureMatrix m(2, 3);
    m(0, 1) = std::numeric_limits<float>::quiet_NaN();
    try {
        validate(m);
        FAIL("expected NonFiniteValue");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::non_finite_value);
        CHECK(std::string(e.what()).find("(0,1)") != std::string::npos);
    }
    m(0, 1) = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(validate(m), Error);
}

TEST_CASE("validate rejects a shape mismatch") {
    FeatureMatrix m;
    m.n = 3;
    m.d = 2;
    m.data.assign(5, 0.0f);
    try {
        validate(m);
        FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::shape_mismatch);
    }
}

TEST_CASE("canonicalize renumbers by first appearance") {
    Partition p;
    p.labels = {5, 5, 9, kNotClustered};
    p.next_label = 10;
    auto r = canonicalize(p);
    CHECK(r.partition.labels == std::vector<ClusterId>{0, 0, 1, kNotClustered});
    CHECK(r.partition.next_label == 2);
    REQUIRE(r.relabel.size() == 2);
    CHECK(r.relabel[0] == std::pair<ClusterId, ClusterId>{5, 0});
    CHECK(r.relabel[1] == std::pair<ClusterId, ClusterId>{9, 1});
}

TEST_CASE("canonicalize leaves all-sentinel and already-canonical partitions alone") {
    Partition p;
    p.labels = {kNotClustered, kNotClustered};
    auto r = canonicalize(p);
    CHECK(r.partition.labels == p.labels);
    CHECK(r.relabel.empty());

    Partition q;
    q.labels = {0, 1, 2};
    q.next_label = 3;
    auto rq = canonicalize(q);
    CHECK(rq.partition.labels == q.labels);
    REQUIRE(rq.relabel.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(rq.relabel[i].first == rq.relabel[i].second);
}

TEST_CASE("canonicalize is idempotent and preserves co-membership") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Partition p;
        const int n = 1 + static_cast<int>(rng.below(40));
        p.next_label = 100;
        for (int i = 0; i < n; ++i) {
            const auto v = rng.below(12);
            p.labels.push_back(v == 0 ? kNotClustered : static_cast<ClusterId>(v * 7));
        }
        auto once = canonicalize(p);
        auto twice = canonicalize(once.partition);
        CHECK(twice.partition.labels == once.partition.labels);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                CHECK((p.labels[i] == p.labels[j]) ==
                      (once.partition.labels[i] == once.partition.labels[j]));
    }
}

TEST_CASE("rng streams are reproducible and distinct") {
    Rng a(42, 3), b(42, 3), c(42, 4);
    bool all_equal = true;
    bool any_diff_c = false;
    for (int i = 0; i < 1000; ++i) {
        const auto va = a.next_u64();
        all_equal &= (va == b.next_u64());
        any_diff_c |= (va != c.next_u64());
    }
    CHECK(all_equal);
    CHECK(any_diff_c);
}

TEST_CASE("rng fork depends only on (seed, stream, substream)") {
    Rng a(9, 1);
    a.next_u64();
    a.next_u64();
    Rng b(9, 1);
    CHECK(a.fork(5).next_u64() == b.fork(5).next_u64());
    CHECK(a.fork(5).next_u64() != b.fork(6).next_u64());
}

TEST_CASE("sample_without_replacement draws distinct indices") {
    Rng rng(1);
    auto s = rng.sample_without_replacement(10, 10);
    std::vector<std::int64_t> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    for (std::int64_t i = 0; i < 10; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
    CHECK_THROWS_AS(rng.sample_without_replacement(3, 4), Error);
}

TEST_CASE("partition helpers") {
    Partition p;
    p.labels = {2, kNotClustered, 2, 7, kNotClustered};
    p.next_label = 8;
    CHECK(p.clustered_count() == 3);
    CHECK(p.cluster_ids() == std::vector<ClusterId>{2, 7});
    CHECK(p.members(2) == std::vector<std::int64_t>{0, 2});
    CHECK(p.unclustered() == std::vector<std::int64_t>{1, 4});
}

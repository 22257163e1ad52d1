#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "owd/metrics.hpp"
#include "owd/rng.hpp"

using namespace owd;

namespace {

// independent contingency-table oracle, written against dense arrays
struct Oracle {
    std::vector<std::vector<std::int64_t>> table;  // cluster x class
    std::vector<std::int64_t> cluster_sizes, class_sizes;
    std::int64_t n = 0;

    Oracle(const std::vector<ClusterId>& pred, const std::vector<std::int64_t>& truth) {
        std::map<ClusterId, std::size_t> cid;
        std::map<std::int64_t, std::size_t> tid;
        for (const auto p : pred)
            if (!cid.count(p)) cid[p] = cid.size();
        for (const auto t : truth)
            if (!tid.count(t)) tid[t] = tid.size();
        table.assign(cid.size(), std::vector<std::int64_t>(tid.size(), 0));
        cluster_sizes.assign(cid.size(), 0);
        class_sizes.assign(tid.size(), 0);
        n = static_cast<std::int64_t>(pred.size());
        for (std::size_t i = 0; i < pred.size(); ++i) {
            ++table[cid[pred[i]]][tid[truth[i]]];
            ++cluster_sizes[cid[pred[i]]];
            ++class_sizes[tid[truth[i]]];
        }
    }

    double purity_cluster_mean() const {
        double acc = 0;
        for (std::size_t c = 0; c < table.size(); ++c)
            acc += static_cast<double>(*std::max_element(table[c].begin(), table[c].end())) /
                   static_cast<double>(cluster_sizes[c]);
        return acc / static_cast<double>(table.size());
    }

    double purity_sample_weighted() const {
        std::int64_t acc = 0;
        for (const auto& row : table) acc += *std::max_element(row.begin(), row.end());
        return static_cast<double>(acc) / static_cast<double>(n);
    }

    double nmi() const {
        const double nf = static_cast<double>(n);
        double hi = 0, hj = 0, mi = 0;
        for (const auto s : cluster_sizes)
            if (s > 0) hi -= s / nf * std::log(s / nf);
        for (const auto s : class_sizes)
            if (s > 0) hj -= s / nf * std::log(s / nf);
        for (std::size_t a = 0; a < table.size(); ++a)
            for (std::size_t b = 0; b < table[a].size(); ++b) {
                if (table[a][b] == 0) continue;
                const double pij = table[a][b] / nf;
                mi += pij * std::log(pij * nf * nf /
                                     (static_cast<double>(cluster_sizes[a]) * class_sizes[b]));
            }
        const double mean_h = 0.5 * (hi + hj);
        return mean_h == 0 ? 1.0 : mi / mean_h;
    }
};

}  // namespace

TEST_CASE("purity on hand instances") {
    // clusters {A,A,B} and {B,B}
    const std::vector<ClusterId> pred = {0, 0, 0, 1, 1};
    const std::vector<std::int64_t> truth = {0, 0, 1, 1, 1};
    CHECK(average_purity(pred, truth, PurityMode::cluster_mean) == doctest::Approx(5.0 / 6.0));
    CHECK(average_purity(pred, truth, PurityMode::sample_weighted) == doctest::Approx(4.0 / 5.0));

    CHECK(average_purity(truth, truth, PurityMode::cluster_mean) == doctest::Approx(1.0));
    CHECK(average_purity(truth, truth, PurityMode::sample_weighted) == doctest::Approx(1.0));

    const std::vector<ClusterId> one(4, 0);
    const std::vector<std::int64_t> balanced = {0, 0, 1, 1};
    CHECK(average_purity(one, balanced, PurityMode::cluster_mean) == doctest::Approx(0.5));
    CHECK(average_purity(one, balanced, PurityMode::sample_weighted) == doctest::Approx(0.5));
}

TEST_CASE("nmi on hand instances") {
    const std::vector<ClusterId> a = {0, 0, 1, 1, 2};
    const std::vector<std::int64_t> at = {5, 5, 9, 9, 7};
    CHECK(nmi(a, at) == doctest::Approx(1.0));

    const std::vector<ClusterId> pred = {0, 0, 1, 1};
    const std::vector<std::int64_t> indep = {0, 1, 0, 1};
    CHECK(nmi(pred, indep) == doctest::Approx(0.0));

    const std::vector<ClusterId> single = {3, 3, 3};
    const std::vector<std::int64_t> single_t = {1, 1, 1};
    CHECK(nmi(single, single_t) == doctest::Approx(1.0));  // degenerate convention
    const std::vector<std::int64_t> split_t = {0, 1, 2};
    CHECK(nmi(single, split_t) == doctest::Approx(0.0));
}

TEST_CASE("errors on malformed inputs") {
    CHECK_THROWS_AS(average_purity({0, 1}, {0}, PurityMode::cluster_mean), Error);
    CHECK_THROWS_AS(average_purity({}, {}, PurityMode::cluster_mean), Error);
    CHECK_THROWS_AS(average_purity({0, kNotClustered}, {0, 1}, PurityMode::cluster_mean), Error);
    CHECK_THROWS_AS(nmi({0, 1}, {0}), Error);
}

TEST_CASE("purity and nmi match the contingency oracle on random partitions") {
    Rng rng(3);
    for (int instance = 0; instance < 100; ++instance) {
        const auto n = 2 + static_cast<std::int64_t>(rng.below(60));
        std::vector<ClusterId> pred;
        std::vector<std::int64_t> truth;
        const auto kp = 1 + rng.below(6), kt = 1 + rng.below(6);
        for (std::int64_t i = 0; i < n; ++i) {
            pred.push_back(static_cast<ClusterId>(rng.below(kp) * 3 + 1));
            truth.push_back(static_cast<std::int64_t>(rng.below(kt)));
        }
        const Oracle oracle(pred, truth);
        CHECK(std::abs(average_purity(pred, truth, PurityMode::cluster_mean) -
                       oracle.purity_cluster_mean()) <= 1e-12);
        CHECK(std::abs(average_purity(pred, truth, PurityMode::sample_weighted) -
                       oracle.purity_sample_weighted()) <= 1e-12);
        CHECK(std::abs(nmi(pred, truth) - std::clamp(oracle.nmi(), 0.0, 1.0)) <= 1e-12);
    }
}

TEST_CASE("metrics are invariant to relabeling and reordering") {
    Rng rng(4);
    std::vector<ClusterId> pred;
    std::vector<std::int64_t> truth;
    for (int i = 0; i < 40; ++i) {
        pred.push_back(static_cast<ClusterId>(rng.below(5)));
        truth.push_back(static_cast<std::int64_t>(rng.below(4)));
    }
    const double p0 = average_purity(pred, truth, PurityMode::cluster_mean);
    const double n0 = nmi(pred, truth);

    auto relabeled = pred;
    for (auto& v : relabeled) v = 97 - 13 * v;  // injective relabeling
    CHECK(average_purity(relabeled, truth, PurityMode::cluster_mean) == p0);
    CHECK(nmi(relabeled, truth) == n0);

    std::vector<std::int64_t> perm(pred.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<std::int64_t>(i);
    rng.shuffle(perm);
    std::vector<ClusterId> pred2(pred.size());
    std::vector<std::int64_t> truth2(truth.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        pred2[i] = pred[static_cast<std::size_t>(perm[i])];
        truth2[i] = truth[static_cast<std::size_t>(perm[i])];
    }
    CHECK(average_purity(pred2, truth2, PurityMode::cluster_mean) == p0);
    CHECK(nmi(pred2, truth2) == n0);
}

TEST_CASE("nmi symmetry") {
    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
        std::vector<ClusterId> a;
        std::vector<std::int64_t> b;
        for (int j = 0; j < 30; ++j) {
            a.push_back(static_cast<ClusterId>(rng.below(4)));
            b.push_back(static_cast<std::int64_t>(rng.below(3)));
        }
        std::vector<ClusterId> b_as_pred(b.begin(), b.end());
        std::vector<std::int64_t> a_as_truth(a.begin(), a.end());
        CHECK(nmi(a, b) == doctest::Approx(nmi(b_as_pred, a_as_truth)).epsilon(1e-12));
    }
}

TEST_CASE("sources_discovered counts majority classes") {
    const std::vector<ClusterId> pred = {0, 0, 1, 1, 2, 2};
    const std::vector<std::int64_t> truth = {0, 0, 1, 1, 2, 2};
    const auto all = sources_discovered(pred, truth);
    CHECK(all.count == 3);

    const std::vector<ClusterId> one(6, 7);
    const auto single = sources_discovered(one, truth);
    CHECK(single.count == 1);
    CHECK(single.discovered[0] == 1);  // tie among {0,1,2} resolves to the lowest

    // majority logic: cluster 0 is mostly class 1
    const std::vector<ClusterId> maj = {0, 0, 0, 1, 1, 1};
    const std::vector<std::int64_t> majt = {1, 1, 0, 2, 2, 2};
    const auto r = sources_discovered(maj, majt);
    CHECK(r.count == 2);
    CHECK(r.discovered[0] == 0);
    CHECK(r.discovered[1] == 1);
    CHECK(r.discovered[2] == 1);
}

TEST_CASE("attribute_leftovers fills every sentinel with the nearest centroid") {
    const auto hasher = new_hasher(8, 128, 2, 3);
    Rng rng(6);
    FeatureMatrix x(30, 8);
    Partition p(30);
    // the hash sees ordinal structure, so the blobs differ in coordinate
    // order (ascending vs descending), not just offset
    for (std::int64_t i = 0; i < 30; ++i) {
        const bool second = i >= 15;
        for (std::int32_t j = 0; j < 8; ++j) {
            const double base = second ? 5.0 * (7 - j) : 5.0 * j;
            x(i, j) = static_cast<float>(base + rng.normal() * 0.25);
        }
        p.labels[static_cast<std::size_t>(i)] = second ? 4 : 9;
    }
    p.next_label = 10;
    // orphan a few samples from each side
    p.labels[2] = kNotClustered;
    p.labels[20] = kNotClustered;
    const auto codes = hash_batch(hasher, x);

    const auto full = attribute_leftovers(x, codes, p, hasher);
    CHECK(full.unclustered().empty());
    CHECK(full.labels[2] == 9);
    CHECK(full.labels[20] == 4);
    for (std::size_t i = 0; i < 30; ++i)
        if (p.labels[i] != kNotClustered) CHECK(full.labels[i] == p.labels[i]);

    // no sentinels: identity
    const auto again = attribute_leftovers(x, codes, full, hasher);
    CHECK(again.labels == full.labels);

    Partition bare(3);
    CHECK_THROWS_AS(attribute_leftovers(x, codes, bare, hasher), Error);
}

TEST_CASE("real_fake_vote corrects a noisy per-sample detector") {
    Partition p(9);
    p.labels = {0, 0, 0, 1, 1, 1, 2, 2, 2};
    p.next_label = 3;
    // cluster 0 votes {fake,fake,real} -> all fake; cluster 1 -> real; cluster 2 -> fake
    const std::vector<std::uint8_t> preds = {1, 1, 0, 0, 0, 1, 1, 0, 1};
    const std::vector<std::uint8_t> truth = {1, 1, 1, 0, 0, 0, 1, 1, 1};
    const auto vote = real_fake_vote(p, preds, &truth);
    CHECK(vote.cluster_fake == std::vector<std::uint8_t>{1, 0, 1});
    CHECK(vote.corrected == std::vector<std::uint8_t>{1, 1, 1, 0, 0, 0, 1, 1, 1});
    REQUIRE(vote.accuracy.has_value());
    CHECK(*vote.accuracy == doctest::Approx(1.0));

    // raw accuracy was lower than the corrected one
    std::int64_t raw = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) raw += (preds[i] == truth[i]);
    CHECK(static_cast<double>(raw) / 9.0 < *vote.accuracy);
}

TEST_CASE("real_fake_vote ties go to fake") {
    Partition p(4);
    p.labels = {0, 0, 0, 0};
    p.next_label = 1;
    const std::vector<std::uint8_t> preds = {1, 1, 0, 0};
    const auto vote = real_fake_vote(p, preds);
    CHECK(vote.cluster_fake == std::vector<std::uint8_t>{1});
    CHECK(vote.corrected == std::vector<std::uint8_t>{1, 1, 1, 1});

    Partition with_sentinel(2);
    with_sentinel.labels = {0, kNotClustered};
    with_sentinel.next_label = 1;
    CHECK_THROWS_AS(real_fake_vote(with_sentinel, {1, 0}), Error);
}

TEST_CASE("evaluate summarizes a partition against truth") {
    Partition p(6);
    p.labels = {0, 0, 5, 5, kNotClustered, kNotClustered};
    p.next_label = 6;
    const std::vector<std::int64_t> truth = {0, 0, 1, 1, 1, 2};
    const auto r = evaluate(p, truth);
    CHECK(r.n_clusters == 2);
    CHECK(r.pct_clustered == doctest::Approx(4.0 / 6.0));
    CHECK(r.purity_cluster_mean == doctest::Approx(1.0));
    CHECK(r.sources_discovered == 2);
    CHECK(r.sources_total == 3);
}

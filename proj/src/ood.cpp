#include "owd/ood.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "owd/parallel.hpp"

namespace owd {

double quantile(std::vector<double> values, double beta) {
    if (beta <= 0.0 || beta > 1.0) raise(Errc::invalid_percentile, "beta must be in (0,1]");
    if (values.empty()) raise(Errc::empty_input, "quantile of empty sample");
    std::sort(values.begin(), values.end());
    const double h = beta * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

double cosine_distance(std::span<const float> a, std::span<const float> b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 && nb == 0.0) return 0.0;
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

std::vector<std::int64_t> pick_references(const std::vector<std::int64_t>& members,
                                          std::int64_t cap, const Rng& rng, ClusterId id) {
    if (static_cast<std::int64_t>(members.size()) <= cap) return members;
    Rng local = rng.fork(0x4f4f44u ^ static_cast<std::uint64_t>(id));
    auto idx = local.sample_without_replacement(static_cast<std::int64_t>(members.size()), cap);
    std::sort(idx.begin(), idx.end());
    std::vector<std::int64_t> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = members[static_cast<std::size_t>(idx[i])];
    return out;
}

template <typename DistFn>
DetectorSet build_impl(const Partition& p, double beta, std::int64_t cap, const Rng& rng,
                       std::int64_t n_rows, DistFn&& ref_distance,
                       const std::function<void(DetectorSet&, const std::vector<std::int64_t>&)>& store) {
    if (beta <= 0.0 || beta > 1.0) raise(Errc::invalid_percentile, "beta must be in (0,1]");
    if (cap < 1) raise(Errc::invalid_param, "reference cap must be >= 1");
    if (static_cast<std::int64_t>(p.labels.size()) != n_rows)
        raise(Errc::length_mismatch, "partition length != row count");
    const auto ids = p.cluster_ids();
    if (ids.empty()) raise(Errc::empty_cluster, "partition has no clusters");

    DetectorSet ds;
    ds.beta = beta;
    std::vector<std::int64_t> all_refs;
    for (const auto id : ids) {
        const auto members = p.members(id);
        const auto refs = pick_references(members, cap, rng, id);
        ClusterDetector det;
        det.cluster_id = id;
        det.ref_begin = static_cast<std::int64_t>(all_refs.size());
        det.ref_count = static_cast<std::int64_t>(refs.size());
        all_refs.insert(all_refs.end(), refs.begin(), refs.end());
        ds.detectors.push_back(det);
    }
    store(ds, all_refs);

    // Thresholds: beta-quantile of pairwise intra-cluster distances among
    // the stored references. Singletons get t_j = 0.
    parallel_for(static_cast<std::int64_t>(ds.detectors.size()), 1,
                 [&](std::int64_t lo, std::int64_t hi) {
                     for (std::int64_t di = lo; di < hi; ++di) {
                         auto& det = ds.detectors[static_cast<std::size_t>(di)];
                         if (det.ref_count < 2) {
                             det.threshold = 0.0;
                             continue;
                         }
                         std::vector<double> pairwise;
                         pairwise.reserve(static_cast<std::size_t>(det.ref_count) *
                                          (static_cast<std::size_t>(det.ref_count) - 1) / 2);
                         for (std::int64_t a = 0; a < det.ref_count; ++a)
                             for (std::int64_t b = a + 1; b < det.ref_count; ++b)
                                 pairwise.push_back(ref_distance(ds, det.ref_begin + a, det.ref_begin + b));
                         det.threshold = quantile(std::move(pairwise), beta);
                     }
                 });
    return ds;
}

}  // namespace

DetectorSet build_detectors(const HashCodeMatrix& codes, const Partition& p, double beta,
                            std::int64_t cap, const Rng& rng) {
    auto ds = build_impl(
        p, beta, cap, rng, codes.n,
        [](const DetectorSet& s, std::int64_t a, std::int64_t b) {
            return static_cast<double>(hamming(s.ref_codes, a, s.ref_codes, b));
        },
        [&](DetectorSet& s, const std::vector<std::int64_t>& rows) {
            s.ref_codes = codes.gather(rows);
        });
    ds.distance = OodDistance::wta_hamming;
    return ds;
}

DetectorSet build_detectors_cosine(const FeatureMatrix& feats, const Partition& p, double beta,
                                   std::int64_t cap, const Rng& rng) {
    auto ds = build_impl(
        p, beta, cap, rng, feats.n,
        [](const DetectorSet& s, std::int64_t a, std::int64_t b) {
            return cosine_distance(s.ref_feats.row(a), s.ref_feats.row(b));
        },
        [&](DetectorSet& s, const std::vector<std::int64_t>& rows) {
            s.ref_feats = feats.gather(rows);
        });
    ds.distance = OodDistance::cosine;
    return ds;
}

double distance_to_cluster(const DetectorSet& ds, std::size_t detector_idx,
                           const HashCodeMatrix& codes, std::int64_t row) {
    if (ds.distance != OodDistance::wta_hamming)
        raise(Errc::incompatible_codes, "detector set uses the cosine backend");
    require_compatible(ds.ref_codes, codes);
    const auto& det = ds.detectors[detector_idx];
    std::int64_t acc = 0;
    for (std::int64_t r = 0; r < det.ref_count; ++r)
        acc += hamming_rows(ds.ref_codes.row(det.ref_begin + r), codes.row(row), codes.bits,
                            codes.entries_per_word, codes.hashes);
    return static_cast<double>(acc) / static_cast<double>(det.ref_count);
}

double distance_to_cluster(const DetectorSet& ds, std::size_t detector_idx,
                           const FeatureMatrix& feats, std::int64_t row) {
    if (ds.distance != OodDistance::cosine)
        raise(Errc::incompatible_codes, "detector set uses the hamming backend");
    if (feats.d != ds.ref_feats.d) raise(Errc::dimension_mismatch, "feature dimension mismatch");
    const auto& det = ds.detectors[detector_idx];
    double acc = 0;
    for (std::int64_t r = 0; r < det.ref_count; ++r)
        acc += cosine_distance(ds.ref_feats.row(det.ref_begin + r), feats.row(row));
    return acc / static_cast<double>(det.ref_count);
}

namespace {

template <typename Matrix>
Classification classify_impl(const DetectorSet& ds, const Matrix& rows, std::int64_t row) {
    Classification c;
    for (std::size_t di = 0; di < ds.detectors.size(); ++di) {
        const double d = distance_to_cluster(ds, di, rows, row);
        if (d < ds.detectors[di].threshold) c.accepted.push_back(ds.detectors[di].cluster_id);
    }
    c.out_of_distribution = c.accepted.empty();
    return c;
}

template <typename Matrix>
SplitResult split_impl(const DetectorSet& ds, const Matrix& rows, std::int64_t n) {
    std::vector<std::uint8_t> ood(static_cast<std::size_t>(n), 0);
    parallel_for(n, 64, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i)
            ood[static_cast<std::size_t>(i)] = classify_impl(ds, rows, i).out_of_distribution;
    });
    SplitResult r;
    for (std::int64_t i = 0; i < n; ++i)
        (ood[static_cast<std::size_t>(i)] ? r.out_of_distribution : r.in_distribution).push_back(i);
    return r;
}

}  // namespace

Classification classify(const DetectorSet& ds, const HashCodeMatrix& codes, std::int64_t row) {
    return classify_impl(ds, codes, row);
}

Classification classify(const DetectorSet& ds, const FeatureMatrix& feats, std::int64_t row) {
    return classify_impl(ds, feats, row);
}

SplitResult split(const DetectorSet& ds, const HashCodeMatrix& codes) {
    return split_impl(ds, codes, codes.n);
}

SplitResult split(const DetectorSet& ds, const FeatureMatrix& feats) {
    return split_impl(ds, feats, feats.n);
}

}  // namespace owd

#include "owd/refine.hpp"

#include <algorithm>

#include "owd/parallel.hpp"

namespace owd {

RefineResult refine(const FeatureMatrix& x, const Partition& p, const RefineParams& params,
                    const Rng& rng) {
    if (static_cast<std::int64_t>(p.labels.size()) != x.n)
        raise(Errc::length_mismatch, "partition length != feature rows");
    if (params.epsilon < 0 || params.epsilon > 1)
        raise(Errc::invalid_param, "epsilon must be in [0,1]");
    if (params.tau < 0) raise(Errc::invalid_param, "tau must be >= 0");
    const auto ids = p.cluster_ids();
    if (ids.size() < 2) raise(Errc::too_few_clusters, "one-vs-all needs at least 2 clusters");

    const auto clustered = [&] {
        std::vector<std::int64_t> out;
        for (std::size_t i = 0; i < p.labels.size(); ++i)
            if (p.labels[i] != kNotClustered) out.push_back(static_cast<std::int64_t>(i));
        return out;
    }();

    RefineResult res;
    res.partition = p;
    res.report.rows.resize(ids.size());

    // Per-cluster SVMs are independent; each draws from its own rng stream
    // keyed by cluster id, so results do not depend on scheduling.
    parallel_for(static_cast<std::int64_t>(ids.size()), 1, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t ci = lo; ci < hi; ++ci) {
            const ClusterId id = ids[static_cast<std::size_t>(ci)];
            auto& row = res.report.rows[static_cast<std::size_t>(ci)];
            row.cluster_id = id;

            std::vector<std::int64_t> pos, neg_all;
            for (const auto i : clustered)
                (p.labels[static_cast<std::size_t>(i)] == id ? pos : neg_all).push_back(i);
            row.original_size = static_cast<std::int64_t>(pos.size());

            const auto neg_cap = static_cast<std::int64_t>(
                params.negatives_ratio * static_cast<double>(pos.size()) + 0.5);
            std::vector<std::int64_t> neg;
            if (static_cast<std::int64_t>(neg_all.size()) <= neg_cap || neg_cap <= 0) {
                neg = neg_all;
            } else {
                Rng local = rng.fork(0x524649u ^ static_cast<std::uint64_t>(id));
                auto idx = local.sample_without_replacement(
                    static_cast<std::int64_t>(neg_all.size()), neg_cap);
                std::sort(idx.begin(), idx.end());
                neg.reserve(idx.size());
                for (const auto k : idx) neg.push_back(neg_all[static_cast<std::size_t>(k)]);
            }

            std::vector<std::int64_t> train_rows = pos;
            train_rows.insert(train_rows.end(), neg.begin(), neg.end());
            std::vector<int> train_y(train_rows.size());
            std::fill(train_y.begin(), train_y.begin() + static_cast<std::ptrdiff_t>(pos.size()), 1);
            std::fill(train_y.begin() + static_cast<std::ptrdiff_t>(pos.size()), train_y.end(), -1);

            const auto train_x = x.gather(train_rows);
            const auto model = train_svm(train_x, train_y, params.svm);

            std::int64_t predicted_positive = 0;
            std::vector<std::uint8_t> is_pos(pos.size(), 0);
            for (std::size_t k = 0; k < pos.size(); ++k) {
                if (model.decision(x.row(pos[k])) > 0) {
                    is_pos[k] = 1;
                    ++predicted_positive;
                }
            }
            row.positive_fraction =
                static_cast<double>(predicted_positive) / static_cast<double>(pos.size());

            if (row.positive_fraction < params.epsilon) {
                row.dropped = DropReason::positive_fraction;
                row.kept = 0;
                row.rejected = row.original_size;
                for (const auto i : pos) res.partition.labels[static_cast<std::size_t>(i)] = kNotClustered;
            } else {
                for (std::size_t k = 0; k < pos.size(); ++k) {
                    if (is_pos[k]) {
                        ++row.kept;
                    } else {
                        ++row.rejected;
                        res.partition.labels[static_cast<std::size_t>(pos[k])] = kNotClustered;
                    }
                }
            }
        }
    });

    // size rule runs after the epsilon rule, over the surviving members
    for (auto& row : res.report.rows) {
        if (row.dropped != DropReason::none) continue;
        if (row.kept < params.tau) {
            row.dropped = DropReason::size;
            for (std::size_t i = 0; i < res.partition.labels.size(); ++i)
                if (res.partition.labels[i] == row.cluster_id)
                    res.partition.labels[i] = kNotClustered;
            row.rejected += row.kept;
            row.kept = 0;
        }
    }

    for (const auto& row : res.report.rows) {
        res.report.total_kept += row.kept;
        res.report.total_rejected += row.rejected;
    }
    return res;
}

}  // namespace owd

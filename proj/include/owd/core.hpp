#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "owd/error.hpp"
#include "owd/rng.hpp"

namespace owd {

using ClusterId = std::int64_t;
inline constexpr ClusterId kNotClustered = -1;

// n x d row-major float matrix; the currency between all stages.
struct FeatureMatrix {
    std::vector<float> data;
    std::int64_t n = 0;
    std::int32_t d = 1;

    FeatureMatrix() = default;
    FeatureMatrix(std::int64_t n_, std::int32_t d_) : data(static_cast<std::size_t>(n_) * d_), n(n_), d(d_) {}

    std::span<const float> row(std::int64_t i) const {
        return {data.data() + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)};
    }
    std::span<float> row(std::int64_t i) {
        return {data.data() + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)};
    }
    float operator()(std::int64_t i, std::int32_t j) const {
        return data[static_cast<std::size_t>(i) * d + j];
    }
    float& operator()(std::int64_t i, std::int32_t j) {
        return data[static_cast<std::size_t>(i) * d + j];
    }

    // Rows of `this` selected by `rows`, in the given order.
    FeatureMatrix gather(std::span<const std::int64_t> rows) const;
};

// Throws on NaN/Inf entries or a data length that disagrees with (n, d).
void validate(const FeatureMatrix& m);

// Per-sample cluster label or kNotClustered. Ids need not be contiguous;
// every id in labels is < next_label.
struct Partition {
    std::vector<ClusterId> labels;
    ClusterId next_label = 0;

    Partition() = default;
    explicit Partition(std::int64_t n) : labels(static_cast<std::size_t>(n), kNotClustered) {}

    std::int64_t n() const { return static_cast<std::int64_t>(labels.size()); }

    ClusterId fresh_label() { return next_label++; }

    std::int64_t clustered_count() const;
    // distinct cluster ids present, ascending
    std::vector<ClusterId> cluster_ids() const;
    // sample indices with the given label, ascending
    std::vector<std::int64_t> members(ClusterId id) const;
    // sample indices with label == kNotClustered, ascending
    std::vector<std::int64_t> unclustered() const;
};

struct CanonicalizeResult {
    Partition partition;
    // old id -> new id, in order of first appearance
    std::vector<std::pair<ClusterId, ClusterId>> relabel;
};

// Renumber cluster ids to 0..N-1 by first appearance in sample order;
// kNotClustered is preserved.
CanonicalizeResult canonicalize(const Partition& p);

struct LabeledSet {
    FeatureMatrix features;
    std::vector<std::int64_t> labels;  // class ids in [0, n_classes)
    std::int64_t n_classes = 0;
};

// Throws unless labels match features.n and every id is in [0, n_classes).
void validate(const LabeledSet& s);

}  // namespace owd

#pragma once

#include <cstdint>
#include <vector>

#include "owd/core.hpp"
#include "owd/svm.hpp"

namespace owd {

enum class DropReason { none, positive_fraction, size };

struct ClusterRefineRow {
    ClusterId cluster_id = 0;
    std::int64_t original_size = 0;
    std::int64_t kept = 0;
    std::int64_t rejected = 0;
    double positive_fraction = 0.0;
    DropReason dropped = DropReason::none;
};

struct RefineReport {
    std::vector<ClusterRefineRow> rows;  // ascending cluster id
    std::int64_t total_kept = 0;
    std::int64_t total_rejected = 0;  // includes members of dropped clusters
};

struct RefineParams {
    double epsilon = 0.5;          // drop a cluster when its positive fraction is below this
    std::int64_t tau = 100;        // then drop surviving clusters smaller than this
    double negatives_ratio = 5.0;  // negative subsample cap, as a multiple of the positives
    SvmParams svm;
};

struct RefineResult {
    Partition partition;
    RefineReport report;
};

// One-vs-all RBF SVM purity filter. For each cluster: train on members vs a
// seeded subsample of the other clustered samples, evict members the SVM
// predicts negative, drop the whole cluster when the positive fraction is
// below epsilon, and finally drop surviving clusters smaller than tau.
// Evicted samples become NOT_CLUSTERED.
RefineResult refine(const FeatureMatrix& x, const Partition& p, const RefineParams& params,
                    const Rng& rng);

}  // namespace owd

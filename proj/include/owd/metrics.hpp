#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "owd/core.hpp"
#include "owd/merge.hpp"
#include "owd/wta.hpp"

namespace owd {

enum class PurityMode { cluster_mean, sample_weighted };

struct EvalReport {
    double purity_cluster_mean = 0.0;
    double purity_sample_weighted = 0.0;
    double nmi = 0.0;
    double pct_clustered = 0.0;
    std::int64_t sources_discovered = 0;
    std::int64_t sources_total = 0;
    std::int64_t n_clusters = 0;
};

// Majority-class purity over fully-labeled prediction/truth pairs.
// cluster_mean averages the per-cluster majority fraction; sample_weighted
// divides the summed majority counts by n.
double average_purity(const std::vector<ClusterId>& pred, const std::vector<std::int64_t>& truth,
                      PurityMode mode);

// I(pred; truth) normalized by the arithmetic mean of the entropies,
// natural logs, 0 log 0 = 0. Two identical single-cluster partitions give
// 1.0; a single cluster against a split partition gives 0.0.
double nmi(const std::vector<ClusterId>& pred, const std::vector<std::int64_t>& truth);

struct SourcesDiscovered {
    std::int64_t count = 0;
    std::vector<std::uint8_t> discovered;  // indexed by truth label
};

// A source counts as discovered when at least one cluster has it as its
// majority class (ties to the lowest class id).
SourcesDiscovered sources_discovered(const std::vector<ClusterId>& pred,
                                     const std::vector<std::int64_t>& truth);

// Assigns every NOT_CLUSTERED sample to the cluster whose centroid hash is
// nearest (ties to the lowest cluster id); existing assignments untouched.
Partition attribute_leftovers(const FeatureMatrix& features, const HashCodeMatrix& codes,
                              const Partition& p, const WtaHasher& hasher);

struct RealFakeVote {
    std::vector<std::uint8_t> cluster_fake;    // per canonical cluster, by cluster_ids() order
    std::vector<ClusterId> cluster_ids;
    std::vector<std::uint8_t> corrected;       // per sample
    std::optional<double> accuracy;            // when truth given
};

// Majority vote of per-sample binary predictions within each cluster
// (1 = fake); ties vote fake. Every member takes its cluster's label.
RealFakeVote real_fake_vote(const Partition& p, const std::vector<std::uint8_t>& sample_fake,
                            const std::vector<std::uint8_t>* truth = nullptr);

// Full evaluation of a partition against truth labels. Sentinel samples are
// excluded from purity/NMI; pct_clustered reflects them.
EvalReport evaluate(const Partition& p, const std::vector<std::int64_t>& truth);

}  // namespace owd

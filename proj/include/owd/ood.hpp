#pragma once

#include <cstdint>
#include <vector>

#include "owd/core.hpp"
#include "owd/wta.hpp"

namespace owd {

enum class OodDistance { wta_hamming, cosine };

// One detector per cluster: a reference subset of member rows plus a
// threshold t_j set at the beta-quantile of the pairwise intra-cluster
// distances among the references. A query is scored by its mean distance
// to the references and accepted iff the score is strictly below t_j.
struct ClusterDetector {
    ClusterId cluster_id = 0;
    std::int64_t ref_begin = 0;
    std::int64_t ref_count = 0;
    double threshold = 0.0;
};

struct DetectorSet {
    OodDistance distance = OodDistance::wta_hamming;
    double beta = 0.9;
    HashCodeMatrix ref_codes;  // backing rows, wta_hamming backend
    FeatureMatrix ref_feats;   // backing rows, cosine backend
    std::vector<ClusterDetector> detectors;  // ascending cluster id
};

struct Classification {
    bool out_of_distribution = true;
    std::vector<ClusterId> accepted;  // ascending cluster id
};

struct SplitResult {
    std::vector<std::int64_t> in_distribution;
    std::vector<std::int64_t> out_of_distribution;
};

// Builds one detector per cluster of p from the code rows of its members.
// Clusters larger than `cap` use a seeded sample of `cap` references.
DetectorSet build_detectors(const HashCodeMatrix& codes, const Partition& p, double beta,
                            std::int64_t cap, const Rng& rng);

// Cosine-distance variant over raw feature rows; same contract.
DetectorSet build_detectors_cosine(const FeatureMatrix& feats, const Partition& p, double beta,
                                   std::int64_t cap, const Rng& rng);

double distance_to_cluster(const DetectorSet& ds, std::size_t detector_idx,
                           const HashCodeMatrix& codes, std::int64_t row);
double distance_to_cluster(const DetectorSet& ds, std::size_t detector_idx,
                           const FeatureMatrix& feats, std::int64_t row);

Classification classify(const DetectorSet& ds, const HashCodeMatrix& codes, std::int64_t row);
Classification classify(const DetectorSet& ds, const FeatureMatrix& feats, std::int64_t row);

// Order-preserving partition of all rows into accepted / OOD index lists.
SplitResult split(const DetectorSet& ds, const HashCodeMatrix& codes);
SplitResult split(const DetectorSet& ds, const FeatureMatrix& feats);

// Linear-interpolation quantile of an unsorted sample; beta in (0, 1].
double quantile(std::vector<double> values, double beta);

double cosine_distance(std::span<const float> a, std::span<const float> b);

}  // namespace owd

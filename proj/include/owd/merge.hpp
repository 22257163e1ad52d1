#pragma once

#include <cstdint>
#include <vector>

#include "owd/core.hpp"
#include "owd/wta.hpp"

namespace owd {

enum class MergeComponents { scc, weak };

// Directed 1-NN graph over cluster centroids: node i points to its nearest
// other node under centroid-hash Hamming distance, ties to the smaller
// cluster id.
struct NnGraph {
    std::vector<ClusterId> node_ids;        // canonical (ascending) cluster ids
    std::vector<std::int64_t> successor;    // per node, index of its 1-NN node
};

// Mean feature vector per cluster, rows in ascending cluster-id order.
// Returns the ids alongside the matrix.
struct CentroidSet {
    std::vector<ClusterId> ids;
    FeatureMatrix centroids;
};
CentroidSet centroids(const FeatureMatrix& x, const Partition& p);

NnGraph build_1nn_graph(const HashCodeMatrix& centroid_codes, const std::vector<ClusterId>& ids);

// Clusters in the same (strongly or weakly) connected component of g receive
// one shared fresh cluster id; single-node components keep their id.
Partition component_merge(const NnGraph& g, const Partition& p, MergeComponents mode);

inline Partition scc_merge(const NnGraph& g, const Partition& p) {
    return component_merge(g, p, MergeComponents::scc);
}

// Strongly connected components of a functional graph (out-degree one),
// iterative Tarjan; returns per-node component index.
std::vector<std::int64_t> strongly_connected_components(const std::vector<std::int64_t>& successor);

// One merge pass over the clusters in `subset` (>= 2 clusters, else identity):
// centroids -> hash -> 1-NN graph -> component merge.
Partition merge_pass(const FeatureMatrix& x, const Partition& p,
                     const std::vector<ClusterId>& subset, const WtaHasher& hasher,
                     MergeComponents mode);

// Stage 1 merges the freshly created clusters among themselves; stage 2
// merges the union of prior and stage-1 clusters.
Partition two_stage_merge(const FeatureMatrix& x, const Partition& p,
                          const std::vector<ClusterId>& new_ids, const WtaHasher& hasher,
                          MergeComponents mode);

}  // namespace owd
